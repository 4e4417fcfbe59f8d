#pragma once

// Growth curves of horizon (minutes) against release date (years since the epoch):
//   - exponential trend        h = exp(b0 + b1 d)
//   - single sigmoid curve     h = gamma * sigmoid(d1 d + d2)
//   - multiplicative model     h = g1 * b(d) * (1 + g2 * r(d) * k)
// where b and r are sigmoid, exponential, or B-spline links.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capcurve/error.hpp"
#include "capcurve/math.hpp"

namespace capcurve {

enum class LinkKind { Sigmoid, Exponential, BSpline };

inline std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::Sigmoid: return "sigmoid";
    case LinkKind::Exponential: return "exponential";
    case LinkKind::BSpline: return "bspline";
  }
  return "unknown";
}

inline constexpr double kMaxExponent = 700.0;

// ---------------------------------------------------------------------------
// Scalar links

inline double sigmoid_link(double d, double slope, double intercept) {
  require(slope > 0, ErrorKind::DomainError, "sigmoid link slope must be positive");
  return math::sigmoid(slope * d + intercept);
}

inline double exponential_link(double d, double slope, double intercept) {
  require(slope > 0, ErrorKind::DomainError, "exponential link slope must be positive");
  const double u = slope * d + intercept;
  require(u <= kMaxExponent, ErrorKind::OverflowGuard, "exponent " + std::to_string(u) + " exceeds 700");
  return std::exp(u);
}

// ---------------------------------------------------------------------------
// B-splines

struct SplineSpec {
  int degree = 5;
  std::vector<double> knots;

  std::size_t n_basis() const {
    const auto k = static_cast<std::ptrdiff_t>(knots.size()) - degree - 1;
    return k > 0 ? static_cast<std::size_t>(k) : 0;
  }
  double span_lo() const { return knots[static_cast<std::size_t>(degree)]; }
  double span_hi() const { return knots[n_basis()]; }

  void validate() const {
    require(degree >= 0, ErrorKind::InvalidKnots, "negative degree");
    require(knots.size() >= static_cast<std::size_t>(degree) + 2, ErrorKind::InvalidKnots, "too few knots for degree");
    for (std::size_t i = 1; i < knots.size(); ++i)
      require(knots[i] >= knots[i - 1], ErrorKind::InvalidKnots, "knots must be nondecreasing");
    for (double k : knots) require(std::isfinite(k), ErrorKind::InvalidKnots, "non-finite knot");
    require(span_hi() > span_lo(), ErrorKind::InvalidKnots, "empty knot span");
  }

  bool clamped() const {
    const auto p = static_cast<std::size_t>(degree);
    for (std::size_t i = 1; i <= p; ++i) {
      if (knots[i] != knots[0] || knots[knots.size() - 1 - i] != knots.back()) return false;
    }
    return true;
  }

  /// Clamped knot vector on [lo, hi] with uniformly spaced interior knots.
  static SplineSpec clamped_uniform(int degree, std::size_t n_basis, double lo, double hi) {
    require(hi > lo, ErrorKind::InvalidKnots, "hi must exceed lo");
    require(n_basis >= static_cast<std::size_t>(degree) + 1, ErrorKind::InvalidKnots, "n_basis < degree + 1");
    SplineSpec s;
    s.degree = degree;
    const std::size_t interior = n_basis - static_cast<std::size_t>(degree) - 1;
    for (int i = 0; i <= degree; ++i) s.knots.push_back(lo);
    for (std::size_t i = 1; i <= interior; ++i)
      s.knots.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(interior + 1));
    for (int i = 0; i <= degree; ++i) s.knots.push_back(hi);
    return s;
  }

  /// Degree-5, six-function basis over the observed date range widened by 10% on each side.
  /// Six functions of degree five leave no interior knots: the two breakpoints are the span ends.
  static SplineSpec for_dates(double min_date, double max_date, int degree = 5, std::size_t n_basis = 6) {
    const double pad = 0.1 * std::max(max_date - min_date, 1e-6);
    return clamped_uniform(degree, n_basis, min_date - pad, max_date + pad);
  }
};

/// Values of every basis function at `d` (clamped into the knot span), by the triangular
/// Cox-de Boor recurrence over the nonzero functions.
inline std::vector<double> bspline_basis(double d, const SplineSpec& spec) {
  spec.validate();
  const int p = spec.degree;
  const auto& U = spec.knots;
  const std::size_t n = spec.n_basis();
  const double x = std::clamp(d, spec.span_lo(), spec.span_hi());

  // knot span: U[i] <= x < U[i+1], with the right end folded onto the last nonempty span
  std::size_t i = static_cast<std::size_t>(p);
  if (x >= spec.span_hi()) {
    i = n - 1;
    while (i > static_cast<std::size_t>(p) && U[i] == U[i + 1]) --i;
  } else {
    while (i + 1 < n && U[i + 1] <= x) ++i;
  }

  std::vector<double> N(static_cast<std::size_t>(p) + 1, 0.0), left(N.size()), right(N.size());
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[i + 1 - j];
    right[j] = U[i + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }

  std::vector<double> out(n, 0.0);
  for (int r = 0; r <= p; ++r) out[i - p + r] = N[r];
  return out;
}

inline double spline_link(double d, std::span<const double> coeffs, const SplineSpec& spec) {
  require(coeffs.size() == spec.n_basis(), ErrorKind::LengthMismatch,
          std::to_string(coeffs.size()) + " coefficients for " + std::to_string(spec.n_basis()) + " basis functions");
  for (double c : coeffs) require(c > 0, ErrorKind::NonPositiveCoefficient, "spline coefficients must be positive");
  const auto B = bspline_basis(d, spec);
  double v = 0.0;
  for (std::size_t i = 0; i < B.size(); ++i) v += coeffs[i] * B[i];
  return v;
}

// ---------------------------------------------------------------------------
// Multiplicative model

struct GrowthParams {
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  std::vector<double> base;       // (delta1, delta2) or spline coefficients
  std::vector<double> reasoning;  // (theta1, theta2) or spline coefficients
  LinkKind link = LinkKind::Sigmoid;
  std::optional<SplineSpec> spline;

  std::size_t link_arity() const { return link == LinkKind::BSpline ? spline->n_basis() : 2; }

  /// Number of growth parameters in the flat ordering used by gradients:
  /// [gamma1, gamma2, base..., reasoning...].
  std::size_t size() const { return 2 + base.size() + reasoning.size(); }

  void validate() const {
    require(gamma1 > 0, ErrorKind::DomainError, "gamma1 must be positive");
    require(gamma2 >= 0, ErrorKind::DomainError, "gamma2 must be non-negative");
    if (link == LinkKind::BSpline) {
      require(spline.has_value(), ErrorKind::InvalidKnots, "bspline link needs a SplineSpec");
      spline->validate();
    }
    const auto arity = link_arity();
    require(base.size() == arity && reasoning.size() == arity, ErrorKind::LengthMismatch, "link parameter count");
    if (link == LinkKind::BSpline) {
      for (double c : base) require(c > 0, ErrorKind::NonPositiveCoefficient, "base spline coefficient");
      for (double c : reasoning) require(c > 0, ErrorKind::NonPositiveCoefficient, "reasoning spline coefficient");
    } else {
      require(base[0] > 0 && reasoning[0] > 0, ErrorKind::DomainError, "link slopes must be positive");
    }
  }
};

/// log of a link value and its gradient with respect to the link's own parameters.
struct LogLink {
  double value = 0.0;
  std::vector<double> gradient;
};

inline LogLink log_link(LinkKind kind, double d, std::span<const double> p, const SplineSpec* spec) {
  LogLink out;
  switch (kind) {
    case LinkKind::Sigmoid: {
      const double u = p[0] * d + p[1];
      const double w = math::sigmoid(-u);  // d log sigmoid(u) / du
      out.value = math::log_sigmoid(u);
      out.gradient = {w * d, w};
      break;
    }
    case LinkKind::Exponential: {
      out.value = p[0] * d + p[1];
      out.gradient = {d, 1.0};
      break;
    }
    case LinkKind::BSpline: {
      const auto B = bspline_basis(d, *spec);
      double v = 0.0;
      for (std::size_t i = 0; i < B.size(); ++i) v += p[i] * B[i];
      out.value = std::log(v);
      out.gradient.resize(B.size());
      for (std::size_t i = 0; i < B.size(); ++i) out.gradient[i] = B[i] / v;
      break;
    }
  }
  return out;
}

/// Link value on the natural scale.
inline double link_value(LinkKind kind, double d, std::span<const double> p, const SplineSpec* spec) {
  switch (kind) {
    case LinkKind::Sigmoid: return sigmoid_link(d, p[0], p[1]);
    case LinkKind::Exponential: return exponential_link(d, p[0], p[1]);
    case LinkKind::BSpline: return spline_link(d, p, *spec);
  }
  return 0.0;
}

struct LogHorizon {
  double value = 0.0;
  std::vector<double> gradient;  // d log h / d [gamma1, gamma2, base..., reasoning...]
};

/// log h and its gradient, evaluated without forming h (no overflow for exponential links).
inline LogHorizon log_model_horizon(double d, bool k_thinking, const GrowthParams& p) {
  const SplineSpec* spec = p.spline ? &*p.spline : nullptr;
  const auto lb = log_link(p.link, d, p.base, spec);
  LogHorizon out;
  out.gradient.assign(p.size(), 0.0);
  out.value = std::log(p.gamma1) + lb.value;
  out.gradient[0] = 1.0 / p.gamma1;
  for (std::size_t i = 0; i < lb.gradient.size(); ++i) out.gradient[2 + i] = lb.gradient[i];

  if (k_thinking) {
    const auto lr = log_link(p.link, d, p.reasoning, spec);
    // log(1 + g2 r) = softplus(log g2 + log r)
    const double s = std::log(p.gamma2) + lr.value;
    const double boost = math::softplus(s);
    out.value += boost;
    out.gradient[1] = std::exp(lr.value - boost);  // r / (1 + g2 r)
    const double w = math::sigmoid(s);             // g2 r / (1 + g2 r)
    const std::size_t off = 2 + p.base.size();
    for (std::size_t i = 0; i < lr.gradient.size(); ++i) out.gradient[off + i] = w * lr.gradient[i];
  }
  return out;
}

inline double model_horizon(double d, bool k_thinking, const GrowthParams& p) {
  p.validate();
  const SplineSpec* spec = p.spline ? &*p.spline : nullptr;
  const double b = link_value(p.link, d, p.base, spec);
  const double r = k_thinking ? link_value(p.link, d, p.reasoning, spec) : 0.0;
  const double h = p.gamma1 * b * (1.0 + p.gamma2 * r);
  require(std::isfinite(h), ErrorKind::OverflowGuard, "model horizon overflow");
  return h;
}

/// dh / d [gamma1, gamma2, base..., reasoning...].
inline std::vector<double> model_horizon_gradient(double d, bool k_thinking, const GrowthParams& p) {
  const double h = model_horizon(d, k_thinking, p);
  auto g = log_model_horizon(d, k_thinking, p).gradient;
  for (double& x : g) x *= h;
  return g;
}

// ---------------------------------------------------------------------------
// Single sigmoid curve and exponential trend

struct SingleSigmoidParams {
  double gamma = 1.0;   // asymptote, minutes
  double delta1 = 1.0;  // per year
  double delta2 = 0.0;

  double midpoint() const { return -delta2 / delta1; }
};

inline double single_sigmoid_curve(double d, const SingleSigmoidParams& p) {
  require(p.gamma > 0 && p.delta1 > 0, ErrorKind::DomainError, "gamma and delta1 must be positive");
  return p.gamma * math::sigmoid(p.delta1 * d + p.delta2);
}

/// d h / d (gamma, delta1, delta2).
inline std::array<double, 3> single_sigmoid_gradient(double d, const SingleSigmoidParams& p) {
  const double s = math::sigmoid(p.delta1 * d + p.delta2);
  const double ds = s * (1.0 - s);
  return {s, p.gamma * ds * d, p.gamma * ds};
}

struct ExpTrendParams {
  double beta0 = 0.0;
  double beta1 = 0.0;  // per year
};

inline double metr_exponential(double d, const ExpTrendParams& p) {
  const double u = p.beta0 + p.beta1 * d;
  require(u <= kMaxExponent, ErrorKind::OverflowGuard, "exponent " + std::to_string(u) + " exceeds 700");
  return std::exp(u);
}

/// d h / d (beta0, beta1).
inline std::array<double, 2> metr_exponential_gradient(double d, const ExpTrendParams& p) {
  const double h = metr_exponential(d, p);
  return {h, h * d};
}

/// Months for the horizon to double.
inline double doubling_time(const ExpTrendParams& p) {
  require(p.beta1 > 0, ErrorKind::NonPositiveSlope, "doubling time needs beta1 > 0");
  return 12.0 * std::numbers::ln2 / p.beta1;
}

}  // namespace capcurve
