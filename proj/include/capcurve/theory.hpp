#pragma once

// Product of k staggered sigmoids, f(x) = prod_{i=1..k} sigmoid(x - i*alpha) with alpha >= 2,
// and a numerical check of its three-regime bounds:
//   x <= 0                 : e^{kx} E / 5        <= f <= e^{kx} E,   E = exp(-(alpha/2) k (k+1))
//   x in [j a, (j+1) a]    : exp(-(a/2)(k-j+1)(k-j)) / 20 <= f <= exp(-(a/2)(k-j-1)(k-j))
//   x >= k alpha           : 1/4 <= f <= 1

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "capcurve/error.hpp"
#include "capcurve/math.hpp"

namespace capcurve::theory {

struct SigmoidProductSpec {
  int k = 1;
  double alpha = 2.0;

  void validate() const {
    require(k >= 1, ErrorKind::HypothesisViolation, "k must be at least 1");
    require(alpha >= 2.0, ErrorKind::HypothesisViolation, "alpha must be at least 2 (got " + std::to_string(alpha) + ")");
  }
};

/// log f(x), summed term by term.
inline double log_sigmoid_product(double x, const SigmoidProductSpec& spec) {
  double s = 0.0;
  for (int i = 1; i <= spec.k; ++i) s += math::log_sigmoid(x - i * spec.alpha);
  return s;
}

inline double sigmoid_product(double x, const SigmoidProductSpec& spec) {
  spec.validate();
  return std::exp(log_sigmoid_product(x, spec));
}

/// d log f / dx = sum sigmoid(-(x - i alpha)).
inline double log_sigmoid_product_slope(double x, const SigmoidProductSpec& spec) {
  double s = 0.0;
  for (int i = 1; i <= spec.k; ++i) s += math::sigmoid(-(x - i * spec.alpha));
  return s;
}

enum class RegimeKind { Pre, Mid, Post };

struct Regime {
  RegimeKind kind = RegimeKind::Pre;
  int j = 0;  // only meaningful for Mid
};

inline std::string to_string(const Regime& r) {
  switch (r.kind) {
    case RegimeKind::Pre: return "PRE";
    case RegimeKind::Mid: return "MID(" + std::to_string(r.j) + ")";
    case RegimeKind::Post: return "POST";
  }
  return "?";
}

struct RegimeBound {
  Regime regime;
  double lower = 0.0;
  double upper = 0.0;
};

/// Every regime whose closed interval contains x, each with its bounds.
inline std::vector<RegimeBound> theorem_bounds(double x, const SigmoidProductSpec& spec) {
  spec.validate();
  const double k = spec.k, a = spec.alpha;
  std::vector<RegimeBound> out;
  if (x <= 0.0) {
    const double upper = std::exp(k * x - 0.5 * a * k * (k + 1));
    out.push_back({{RegimeKind::Pre, 0}, upper / 5.0, upper});
  }
  for (int j = 0; j < spec.k; ++j) {
    if (x >= j * a && x <= (j + 1) * a) {
      const double kj = k - j;
      out.push_back({{RegimeKind::Mid, j}, std::exp(-0.5 * a * (kj + 1) * kj) / 20.0, std::exp(-0.5 * a * (kj - 1) * kj)});
    }
  }
  if (x >= k * a) out.push_back({{RegimeKind::Post, 0}, 0.25, 1.0});
  return out;
}

struct Violation {
  double x = 0.0;
  double f = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  Regime regime;
};

struct BoundCertificate {
  SigmoidProductSpec spec;
  double x_lo = 0.0;
  double x_hi = 0.0;
  double resolution = 0.0;
  std::size_t n_points = 0;
  std::size_t n_checks = 0;
  std::vector<Violation> violations;
  /// Smallest (f - lower, upper - f) margin over all checks, each relative to the bound.
  double worst_relative_margin = std::numeric_limits<double>::infinity();

  bool passed() const { return violations.empty(); }
};

inline constexpr double kBoundSlack = 1e-12;

/// Grid x_i = lo + i * resolution for i = 0..floor((hi - lo) / resolution), with hi included
/// when it falls on the grid up to rounding.
inline std::vector<double> uniform_grid(double lo, double hi, double resolution) {
  require(resolution > 0, ErrorKind::Precondition, "resolution must be positive");
  require(hi >= lo, ErrorKind::Precondition, "empty range");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / resolution + 1e-9));
  std::vector<double> xs(n + 1);
  for (std::size_t i = 0; i <= n; ++i) xs[i] = lo + static_cast<double>(i) * resolution;
  return xs;
}

/// Checks every applicable bound at every grid point. Comparisons use an absolute slack of
/// 1e-12 on the bound: lower - slack <= f <= upper + slack.
inline BoundCertificate certify_spec(const SigmoidProductSpec& spec, double x_lo, double x_hi, double resolution) {
  spec.validate();
  BoundCertificate cert;
  cert.spec = spec;
  cert.x_lo = x_lo;
  cert.x_hi = x_hi;
  cert.resolution = resolution;
  auto xs = uniform_grid(x_lo, x_hi, resolution);
  // regime boundaries inside the range are checked exactly
  for (int j = 0; j <= spec.k; ++j) {
    const double b = j * spec.alpha;
    if (b >= x_lo && b <= x_hi) xs.push_back(b);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  cert.n_points = xs.size();
  for (double x : xs) {
    const double f = std::exp(log_sigmoid_product(x, spec));
    for (const auto& b : theorem_bounds(x, spec)) {
      ++cert.n_checks;
      const double lo_margin = (f - b.lower) / b.lower;
      const double hi_margin = (b.upper - f) / b.upper;
      cert.worst_relative_margin = std::min({cert.worst_relative_margin, lo_margin, hi_margin});
      if (f < b.lower - kBoundSlack || f > b.upper + kBoundSlack) cert.violations.push_back({x, f, b.lower, b.upper, b.regime});
    }
  }
  return cert;
}

/// One certificate per spec over x in [x_lo(spec), x_hi(spec)]; the range defaults to
/// [-10, k alpha + 10].
inline std::vector<BoundCertificate> certify_bounds(const std::vector<SigmoidProductSpec>& specs, double resolution,
                                                    double pad = 10.0) {
  std::vector<BoundCertificate> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(certify_spec(s, -pad, s.k * s.alpha + pad, resolution));
  return out;
}

inline std::vector<SigmoidProductSpec> default_spec_grid() {
  std::vector<SigmoidProductSpec> out;
  for (int k = 1; k <= 6; ++k)
    for (double a : {2.0, 2.5, 3.0, 4.0}) out.push_back({k, a});
  return out;
}

struct RegimeSummary {
  std::vector<double> inflections;  // alpha, 2 alpha, ..., k alpha
  double plateau_onset = 0.0;
};

inline RegimeSummary growth_regime_summary(const SigmoidProductSpec& spec) {
  spec.validate();
  RegimeSummary s;
  for (int i = 1; i <= spec.k; ++i) s.inflections.push_back(i * spec.alpha);
  s.plateau_onset = spec.k * spec.alpha;
  return s;
}

/// Least-squares slope of log f over a uniform grid on [lo, hi].
inline double fitted_log_slope(const SigmoidProductSpec& spec, double lo, double hi, double resolution) {
  const auto xs = uniform_grid(lo, hi, resolution);
  double mx = 0.0, my = 0.0;
  std::vector<double> ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ys[i] = log_sigmoid_product(xs[i], spec);
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return sxy / sxx;
}

}  // namespace capcurve::theory
