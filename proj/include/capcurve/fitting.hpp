#pragma once

// Estimators for every growth specification:
//   - OLS of log horizon on date (exponential trend)
//   - least-squares single sigmoid curve on the horizon scale
//   - MAP fit of the multiplicative model directly on run-level Bernoulli outcomes

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "capcurve/dataset.hpp"
#include "capcurve/error.hpp"
#include "capcurve/growth.hpp"
#include "capcurve/horizon.hpp"
#include "capcurve/math.hpp"
#include "capcurve/optimize.hpp"

namespace capcurve {

/// The five growth specifications compared in the MSE report.
enum class Specification { MetrExponential, SigmoidCurve, SigmoidLink, ExponentialLink, BSplineLink };

inline constexpr std::array<Specification, 5> kAllSpecifications{
    Specification::SigmoidLink, Specification::BSplineLink, Specification::ExponentialLink,
    Specification::MetrExponential, Specification::SigmoidCurve};

/// Command-line identifier.
inline std::string_view spec_id(Specification s) {
  switch (s) {
    case Specification::MetrExponential: return "metr-exp";
    case Specification::SigmoidCurve: return "sigmoid-curve";
    case Specification::SigmoidLink: return "sigmoid-link";
    case Specification::ExponentialLink: return "exp-link";
    case Specification::BSplineLink: return "bspline-link";
  }
  return "unknown";
}

inline std::string_view spec_name(Specification s) {
  switch (s) {
    case Specification::MetrExponential: return "METR Exponential Curve";
    case Specification::SigmoidCurve: return "Sigmoid Curve";
    case Specification::SigmoidLink: return "Sigmoid Link";
    case Specification::ExponentialLink: return "Exponential Link";
    case Specification::BSplineLink: return "B-Spline Link";
  }
  return "unknown";
}

inline std::optional<Specification> parse_spec_id(std::string_view id) {
  for (auto s : kAllSpecifications)
    if (spec_id(s) == id) return s;
  return std::nullopt;
}

inline std::optional<LinkKind> link_of(Specification s) {
  switch (s) {
    case Specification::SigmoidLink: return LinkKind::Sigmoid;
    case Specification::ExponentialLink: return LinkKind::Exponential;
    case Specification::BSplineLink: return LinkKind::BSpline;
    default: return std::nullopt;
  }
}

enum class FitKind { OlsLog, MseSigmoid, MapJoint };

inline std::string_view to_string(FitKind k) {
  switch (k) {
    case FitKind::OlsLog: return "OLS_LOG";
    case FitKind::MseSigmoid: return "MSE_SIGMOID";
    case FitKind::MapJoint: return "MAP_JOINT";
  }
  return "unknown";
}

struct PriorSpec {
  double normal_sd = 10.0;          // N(0, sd^2) on gamma, link slopes/intercepts, per-model beta
  double spline_first_sd = 1.0;     // first spline coefficient ~ N(0, sd^2)
  double spline_tau = 1.0;          // random-walk step scale, held fixed during the fit
};

struct SplineScales {
  double base = 1.0;
  double reasoning = 1.0;
};

struct GrowthFit {
  Specification spec = Specification::SigmoidLink;
  FitKind kind = FitKind::MapJoint;
  std::variant<GrowthParams, SingleSigmoidParams, ExpTrendParams> params;
  std::map<std::string, double> per_model_beta;
  std::optional<SplineScales> spline_tau;
  double objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::uint64_t seed = 0;
};

/// Horizon predicted by a fit for a model released at `d`.
inline double predict(const GrowthFit& fit, double d, bool k_thinking) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GrowthParams>) return model_horizon(d, k_thinking, p);
        else if constexpr (std::is_same_v<P, SingleSigmoidParams>) return single_sigmoid_curve(d, p);
        else return metr_exponential(d, p);
      },
      fit.params);
}

struct HorizonPoint {
  double d = 0.0;
  double h = 0.0;
};

// ---------------------------------------------------------------------------
// Exponential trend

inline ExpTrendParams ols_log_fit(std::span<const HorizonPoint> points) {
  require(points.size() >= 2, ErrorKind::DegenerateDesign, "need at least two points");
  double mean_d = 0.0, mean_y = 0.0;
  for (const auto& p : points) {
    require(p.h > 0, ErrorKind::DomainError, "horizons must be positive");
    mean_d += p.d;
    mean_y += std::log(p.h);
  }
  mean_d /= static_cast<double>(points.size());
  mean_y /= static_cast<double>(points.size());
  double sdd = 0.0, sdy = 0.0;
  for (const auto& p : points) {
    sdd += (p.d - mean_d) * (p.d - mean_d);
    sdy += (p.d - mean_d) * (std::log(p.h) - mean_y);
  }
  require(sdd > 0, ErrorKind::DegenerateDesign, "all dates are equal");
  ExpTrendParams out;
  out.beta1 = sdy / sdd;
  out.beta0 = mean_y - out.beta1 * mean_d;
  return out;
}

// ---------------------------------------------------------------------------
// Single sigmoid curve

struct SigmoidCurveFit {
  SingleSigmoidParams params;
  double mse = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
};

inline double mean_squared_error(std::span<const HorizonPoint> points, const SingleSigmoidParams& p) {
  double s = 0.0;
  for (const auto& q : points) {
    const double e = single_sigmoid_curve(q.d, p) - q.h;
    s += e * e;
  }
  return s / static_cast<double>(points.size());
}

/// Minimizes (1/n) sum (gamma sigmoid(d1 d + d2) - h)^2 over (log gamma, log d1, d2).
/// The objective is divided by max(h)^2 during optimization so the gradient tolerance is
/// scale-free. Throws NonConvergence when no restart reaches the tolerance.
inline SigmoidCurveFit mse_sigmoid_fit(std::span<const HorizonPoint> points, const FitConfig& config = FitConfig{}) {
  require(points.size() >= 3, ErrorKind::Precondition, "sigmoid curve fit needs at least three points");
  double h_max = 0.0, d_min = points[0].d, d_max = points[0].d;
  for (const auto& p : points) {
    require(p.h > 0 && std::isfinite(p.h), ErrorKind::DomainError, "horizons must be positive");
    h_max = std::max(h_max, p.h);
    d_min = std::min(d_min, p.d);
    d_max = std::max(d_max, p.d);
  }
  const double range = std::max(d_max - d_min, 1e-3);
  const double scale2 = h_max * h_max;
  const double n = static_cast<double>(points.size());

  const Objective f = [&](const Vector& x, Vector& g) {
    const double gamma = std::exp(x[0]), d1 = std::exp(x[1]), d2 = x[2];
    g = Vector::Zero(3);
    double total = 0.0;
    for (const auto& q : points) {
      const double s = math::sigmoid(d1 * q.d + d2);
      const double e = gamma * s - q.h;
      const double ds = s * (1.0 - s);
      total += e * e;
      g[0] += 2 * e * gamma * s;
      g[1] += 2 * e * gamma * ds * q.d * d1;
      g[2] += 2 * e * gamma * ds;
    }
    g /= n * scale2;
    return total / (n * scale2);
  };

  auto init = [&](int restart, std::mt19937_64& rng) {
    double gamma = 1.5 * h_max, slope = 8.0 / range, mid = d_max;
    if (restart > 0) {
      std::uniform_real_distribution<double> u01;
      std::normal_distribution<double> n01;
      gamma = h_max * (1.05 + 2.0 * u01(rng));
      slope = std::exp(std::log(8.0 / range) + 0.7 * n01(rng));
      mid = d_min + (1.5 * u01(rng)) * range;
    }
    Vector x(3);
    x << std::log(gamma), std::log(slope), -slope * mid;
    return x;
  };
  const auto best = minimize_with_restarts(f, init, config);
  require(std::isfinite(best.value), ErrorKind::NonConvergence, "sigmoid curve fit produced no finite objective");

  SigmoidCurveFit out;
  out.params = {std::exp(best.x[0]), std::exp(best.x[1]), best.x[2]};
  out.mse = mean_squared_error(points, out.params);
  out.gradient_norm = best.gradient_norm;
  out.converged = best.converged;
  require(out.converged, ErrorKind::NonConvergence,
          "sigmoid curve fit: gradient norm " + std::to_string(best.gradient_norm) + " above tolerance");
  return out;
}

// ---------------------------------------------------------------------------
// MAP estimation of the multiplicative model

/// Log posterior of the multiplicative model over run outcomes, in an unconstrained
/// coordinate system. Positive quantities (gamma1, gamma2, link slopes, spline coefficients,
/// per-model slopes) are stored as logs; their priors are placed on the positive value and the
/// log-Jacobian is added. The spline random-walk scale is a fixed prior constant.
///
/// Layout: [log g1, log g2, base block, reasoning block, log beta_m...]
/// with link blocks [log slope, intercept] or [log c_1 .. log c_n].
class MapProblem {
 public:
  MapProblem(LinkKind link, const RunTable& runs, const ModelTable& models, const PriorSpec& priors,
             const TimeScale& scale = {}, std::optional<SplineSpec> spline = std::nullopt)
      : link_(link), priors_(priors) {
    require(priors.normal_sd > 0 && priors.spline_first_sd > 0 && priors.spline_tau > 0,
            ErrorKind::Precondition, "prior scales must be positive");
    std::map<std::string, std::size_t> index;
    for (const auto& r : runs) {
      if (index.count(r.model_id)) continue;
      const auto* m = models.find(r.model_id);
      require(m != nullptr, ErrorKind::ModelNotFound, r.model_id);
      index[r.model_id] = 0;
    }
    // keep the model-table order
    for (const auto& m : models) {
      if (!index.count(m.model_id)) continue;
      index[m.model_id] = models_.size();
      models_.push_back({m.model_id, encode_date(scale, m.release_date), m.k_thinking, {}});
    }
    // aggregate repeated (model, task difficulty) outcomes
    std::vector<std::map<double, std::pair<double, double>>> groups(models_.size());
    for (const auto& r : runs) {
      auto& g = groups[index[r.model_id]][std::log(r.human_minutes)];
      (r.success ? g.first : g.second) += r.weight;
    }
    for (std::size_t m = 0; m < models_.size(); ++m)
      for (const auto& [log_t, sf] : groups[m]) models_[m].cells.push_back({log_t, sf.first, sf.second});

    if (link_ == LinkKind::BSpline) {
      if (!spline) {
        require(!models_.empty(), ErrorKind::EmptyInput, "no models to place spline knots");
        double lo = models_[0].d, hi = models_[0].d;
        for (const auto& m : models_) {
          lo = std::min(lo, m.d);
          hi = std::max(hi, m.d);
        }
        spline = SplineSpec::for_dates(lo, hi);
      }
      spline->validate();
      spline_ = std::move(spline);
      arity_ = spline_->n_basis();
    }
  }

  LinkKind link() const { return link_; }
  const std::optional<SplineSpec>& spline() const { return spline_; }
  std::size_t arity() const { return arity_; }
  const PriorSpec& priors() const { return priors_; }
  std::size_t n_models() const { return models_.size(); }
  const std::string& model_id(std::size_t m) const { return models_[m].id; }
  double model_date(std::size_t m) const { return models_[m].d; }
  bool model_thinking(std::size_t m) const { return models_[m].thinking; }

  std::size_t growth_size() const { return 2 + 2 * arity_; }
  std::size_t beta_offset() const { return growth_size(); }
  std::size_t dimension() const { return beta_offset() + models_.size(); }

  GrowthParams growth_params(const Vector& x) const {
    GrowthParams p;
    p.link = link_;
    p.spline = spline_;
    p.gamma1 = std::exp(x[0]);
    p.gamma2 = std::exp(x[1]);
    p.base = unpack_block(x, 2);
    p.reasoning = unpack_block(x, 2 + arity_);
    return p;
  }

  std::optional<SplineScales> taus(const Vector& x) const {
    if (link_ != LinkKind::BSpline) return std::nullopt;
    (void)x;
    return SplineScales{priors_.spline_tau, priors_.spline_tau};
  }

  double beta(const Vector& x, std::size_t m) const { return std::exp(x[beta_offset() + m]); }

  /// Packs constrained values into the unconstrained vector. Missing betas default to 1.
  Vector pack(const GrowthParams& p, const std::map<std::string, double>& betas) const {
    require(p.link == link_, ErrorKind::Precondition, "link mismatch");
    p.validate();
    Vector x(dimension());
    x[0] = std::log(p.gamma1);
    x[1] = std::log(p.gamma2);
    pack_block(p.base, x, 2);
    pack_block(p.reasoning, x, 2 + arity_);
    for (std::size_t m = 0; m < models_.size(); ++m) {
      const auto it = betas.find(models_[m].id);
      const double b = it == betas.end() ? 1.0 : it->second;
      require(b > 0, ErrorKind::DomainError, "beta must be positive");
      x[beta_offset() + m] = std::log(b);
    }
    return x;
  }

  /// Log posterior (up to the truncation constants of the positive-support normals).
  /// `grad`, when given, receives the gradient with respect to `x`.
  double log_posterior(const Vector& x, Vector* grad = nullptr) const {
    if (grad) *grad = Vector::Zero(static_cast<Eigen::Index>(dimension()));
    const GrowthParams p = growth_params(x);
    const std::size_t G = growth_size();
    std::vector<double> dgrowth(G, 0.0);  // d/d(constrained growth params)

    double total = 0.0;
    for (std::size_t m = 0; m < models_.size(); ++m) {
      const auto& model = models_[m];
      const auto lh = log_model_horizon(model.d, model.thinking, p);
      const double beta = std::exp(x[beta_offset() + m]);
      double d_logh = 0.0, d_logbeta = 0.0;
      for (const auto& c : model.cells) {
        const double z = beta * (lh.value - c.log_t);
        // log sigmoid(+-z) and sigmoid(z) from a single exp(-|z|)
        const double e = std::exp(-std::abs(z));
        const double l1p = std::log1p(e);
        total += c.successes * (std::min(z, 0.0) - l1p) + c.failures * (-std::max(z, 0.0) - l1p);
        const double sig = z >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        const double resid = c.successes - (c.successes + c.failures) * sig;
        d_logh += resid * beta;
        d_logbeta += resid * z;
      }
      if (grad) {
        for (std::size_t j = 0; j < G; ++j) dgrowth[j] += d_logh * lh.gradient[j];
        (*grad)[static_cast<Eigen::Index>(beta_offset() + m)] += d_logbeta;
      }
      total += positive_normal(beta, priors_.normal_sd, grad, beta_offset() + m);
    }

    // chain constrained -> unconstrained for the likelihood part
    if (grad) {
      (*grad)[0] += dgrowth[0] * p.gamma1;
      (*grad)[1] += dgrowth[1] * p.gamma2;
      chain_block(p.base, dgrowth, 2, *grad);
      chain_block(p.reasoning, dgrowth, 2 + arity_, *grad);
    }

    total += positive_normal(p.gamma1, priors_.normal_sd, grad, 0);
    total += positive_normal(p.gamma2, priors_.normal_sd, grad, 1);
    if (link_ == LinkKind::BSpline) {
      total += random_walk_prior(p.base, 2, grad);
      total += random_walk_prior(p.reasoning, 2 + arity_, grad);
    } else {
      total += positive_normal(p.base[0], priors_.normal_sd, grad, 2);
      total += free_normal(p.base[1], priors_.normal_sd, grad, 3);
      total += positive_normal(p.reasoning[0], priors_.normal_sd, grad, 4);
      total += free_normal(p.reasoning[1], priors_.normal_sd, grad, 5);
    }
    return total;
  }

  /// Bernoulli log-likelihood alone (no priors).
  double log_likelihood(const Vector& x) const {
    const GrowthParams p = growth_params(x);
    double total = 0.0;
    for (std::size_t m = 0; m < models_.size(); ++m) {
      const double lh = log_model_horizon(models_[m].d, models_[m].thinking, p).value;
      const double beta = std::exp(x[beta_offset() + m]);
      for (const auto& c : models_[m].cells) {
        const double z = beta * (lh - c.log_t);
        total += c.successes * math::log_sigmoid(z) + c.failures * math::log_sigmoid(-z);
      }
    }
    return total;
  }

 private:
  struct Cell {
    double log_t;
    double successes;
    double failures;
  };
  struct Model {
    std::string id;
    double d;
    bool thinking;
    std::vector<Cell> cells;
  };

  bool spline_link() const { return link_ == LinkKind::BSpline; }

  std::vector<double> unpack_block(const Vector& x, std::size_t off) const {
    std::vector<double> out(arity_);
    for (std::size_t i = 0; i < arity_; ++i) out[i] = x[static_cast<Eigen::Index>(off + i)];
    if (spline_link()) {
      for (double& v : out) v = std::exp(v);
    } else {
      out[0] = std::exp(out[0]);
    }
    return out;
  }

  void pack_block(const std::vector<double>& v, Vector& x, std::size_t off) const {
    for (std::size_t i = 0; i < arity_; ++i) {
      const bool logged = spline_link() || i == 0;
      x[static_cast<Eigen::Index>(off + i)] = logged ? std::log(v[i]) : v[i];
    }
  }

  void chain_block(const std::vector<double>& v, const std::vector<double>& dgrowth, std::size_t off, Vector& grad) const {
    for (std::size_t i = 0; i < arity_; ++i) {
      const bool logged = spline_link() || i == 0;
      grad[static_cast<Eigen::Index>(off + i)] += dgrowth[off + i] * (logged ? v[i] : 1.0);
    }
  }

  // N(0, sd^2) on a positive value stored as its log, plus the log-Jacobian.
  static double positive_normal(double value, double sd, Vector* grad, std::size_t idx) {
    if (grad) (*grad)[static_cast<Eigen::Index>(idx)] += 1.0 - value * value / (sd * sd);
    return math::normal_logpdf(value, 0.0, sd) + std::log(value);
  }

  static double free_normal(double value, double sd, Vector* grad, std::size_t idx) {
    if (grad) (*grad)[static_cast<Eigen::Index>(idx)] += -value / (sd * sd);
    return math::normal_logpdf(value, 0.0, sd);
  }

  // c_1 ~ N(0, first_sd), c_i ~ N(c_{i-1}, tau); coefficients stored as logs.
  double random_walk_prior(const std::vector<double>& c, std::size_t off, Vector* grad) const {
    const double tau = priors_.spline_tau;
    double lp = positive_normal(c[0], priors_.spline_first_sd, grad, off);
    for (std::size_t i = 1; i < c.size(); ++i) {
      const double diff = c[i] - c[i - 1];
      lp += math::normal_logpdf(c[i], c[i - 1], tau) + std::log(c[i]);
      if (grad) {
        auto& g = *grad;
        g[static_cast<Eigen::Index>(off + i)] += 1.0 - diff / (tau * tau) * c[i];
        g[static_cast<Eigen::Index>(off + i - 1)] += diff / (tau * tau) * c[i - 1];
      }
    }
    return lp;
  }

  LinkKind link_;
  PriorSpec priors_;
  std::optional<SplineSpec> spline_;
  std::size_t arity_ = 2;
  std::vector<Model> models_;
};

struct MapValue {
  double value = 0.0;
  Vector gradient;
};

/// Log posterior and its gradient (in the unconstrained coordinates of MapProblem) at the given
/// constrained parameters.
inline MapValue map_objective(const GrowthParams& params, const std::map<std::string, double>& betas, const RunTable& runs,
                              const ModelTable& models, const PriorSpec& priors = {}, const TimeScale& scale = {}) {
  const MapProblem problem(params.link, runs, models, priors, scale, params.spline);
  MapValue out;
  out.value = problem.log_posterior(problem.pack(params, betas), &out.gradient);
  return out;
}

namespace detail {

/// Starting point for the MAP search: per-model horizons from a quick MLE pass, then a
/// least-squares fit of the growth curve to their logs.
inline Vector map_initial_point(const MapProblem& problem, const RunTable& runs, const FitConfig& config) {
  const std::size_t M = problem.n_models();
  const std::size_t G = problem.growth_size();
  std::vector<double> log_h(M), beta(M);
  double d_lo = 1e300, d_hi = -1e300, d_think = 1e300, h_max = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    FitConfig cfg = FitConfig::horizon_defaults();
    cfg.restarts = 2;
    cfg.seed = stable_hash(problem.model_id(m), config.seed);
    const auto e = fit_horizon(runs.slice(problem.model_id(m)), cfg);
    log_h[m] = std::log(e.h_minutes);
    beta[m] = std::clamp(e.beta, 0.1, 5.0);
    d_lo = std::min(d_lo, problem.model_date(m));
    d_hi = std::max(d_hi, problem.model_date(m));
    if (problem.model_thinking(m)) d_think = std::min(d_think, problem.model_date(m));
    h_max = std::max(h_max, e.h_minutes);
  }
  if (d_think > 1e299) d_think = d_hi;
  const double range = std::max(d_hi - d_lo, 1e-3);
  std::size_t first = 0, last = 0;
  for (std::size_t m = 0; m < M; ++m) {
    if (problem.model_date(m) < problem.model_date(first)) first = m;
    if (problem.model_date(m) > problem.model_date(last)) last = m;
  }
  const double log_h_first = log_h[first], log_h_last = log_h[last];

  Vector x = Vector::Zero(static_cast<Eigen::Index>(problem.dimension()));
  auto heuristic = [&](int restart, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    Vector g = Vector::Zero(static_cast<Eigen::Index>(G));
    const std::size_t a = problem.arity();
    switch (problem.link()) {
      case LinkKind::Sigmoid: {
        const double s1 = 6.0 / range, s2 = 4.0 / range;
        g[0] = std::log(std::max(h_max, 1e-3));
        g[1] = std::log(2.0);
        g[2] = std::log(s1);
        g[3] = -s1 * d_think;
        g[4] = std::log(s2);
        g[5] = -s2 * (d_hi + 0.25 * range);
        break;
      }
      case LinkKind::Exponential: {
        const double slope = std::max((log_h_last - log_h_first) / range, 0.1);
        g[0] = 0.0;
        g[1] = 0.0;
        g[2] = std::log(slope);
        g[3] = log_h_first - slope * d_lo;
        g[4] = std::log(0.5);
        g[5] = -0.5 * d_think;
        break;
      }
      case LinkKind::BSpline: {
        g[0] = 0.0;
        g[1] = 0.0;
        for (std::size_t i = 0; i < a; ++i) {
          const double t = static_cast<double>(i) / static_cast<double>(a - 1);
          g[static_cast<Eigen::Index>(2 + i)] = log_h_first + t * (log_h_last - log_h_first);
          g[static_cast<Eigen::Index>(2 + a + i)] = std::log(0.5) + 2.0 * t;
        }
        break;
      }
    }
    if (restart > 0)
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += 0.5 * n01(rng);
    return g;
  };

  // least squares on log horizons over the growth block only
  const Objective lsq = [&](const Vector& g, Vector& grad) {
    Vector full = x;
    full.head(static_cast<Eigen::Index>(G)) = g;
    const GrowthParams p = problem.growth_params(full);
    grad = Vector::Zero(static_cast<Eigen::Index>(G));
    double total = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const auto lh = log_model_horizon(problem.model_date(m), problem.model_thinking(m), p);
      const double e = lh.value - log_h[m];
      total += e * e;
      for (std::size_t j = 0; j < G; ++j) grad[static_cast<Eigen::Index>(j)] += 2 * e * lh.gradient[j];
    }
    // chain rule to logged coordinates, plus a light ridge for identifiability
    grad[0] *= p.gamma1;
    grad[1] *= p.gamma2;
    const std::size_t a = problem.arity();
    for (std::size_t i = 0; i < a; ++i) {
      const bool logged = problem.link() == LinkKind::BSpline || i == 0;
      if (logged) {
        grad[static_cast<Eigen::Index>(2 + i)] *= p.base[i];
        grad[static_cast<Eigen::Index>(2 + a + i)] *= p.reasoning[i];
      }
    }
    // spline coefficients also carry the random-walk penalty, else the fit wanders to e^7 and beyond
    if (problem.link() == LinkKind::BSpline) {
      const double w = 1.0 / (problem.priors().spline_tau * problem.priors().spline_tau);
      for (std::size_t off : {std::size_t{2}, 2 + a}) {
        const auto& c = off == 2 ? p.base : p.reasoning;
        for (std::size_t i = 1; i < a; ++i) {
          const double diff = c[i] - c[i - 1];
          total += 0.5 * w * diff * diff;
          grad[static_cast<Eigen::Index>(off + i)] += w * diff * c[i];
          grad[static_cast<Eigen::Index>(off + i - 1)] -= w * diff * c[i - 1];
        }
      }
    }
    total += 1e-3 * g.squaredNorm();
    grad += 2e-3 * g;
    return total;
  };
  FitConfig cfg;
  cfg.seed = config.seed ^ 0xA5A5A5A5ULL;
  cfg.restarts = 12;
  cfg.warmup_steps = 300;
  cfg.warmup_learning_rate = 5e-2;
  cfg.max_iterations = 300;
  cfg.gradient_tolerance = 1e-8;
  const auto best = minimize_with_restarts(lsq, heuristic, cfg);
  x.head(static_cast<Eigen::Index>(G)) = best.x;

  for (std::size_t m = 0; m < M; ++m) x[static_cast<Eigen::Index>(problem.beta_offset() + m)] = std::log(beta[m]);
  return x;
}

}  // namespace detail

/// MAP estimate of the multiplicative model. Restart 0 starts from a data-driven initial point;
/// the others perturb it with seeded N(0, 0.3^2) noise in unconstrained coordinates.
inline GrowthFit map_fit(LinkKind link, const RunTable& runs, const ModelTable& models, const PriorSpec& priors = {},
                         const FitConfig& config = FitConfig::map_defaults(), const TimeScale& scale = {},
                         std::optional<SplineSpec> spline = std::nullopt) {
  require(!runs.empty(), ErrorKind::EmptyInput, "no runs");
  const MapProblem problem(link, runs, models, priors, scale, std::move(spline));
  const Vector x0 = detail::map_initial_point(problem, runs, config);

  const Objective negative = [&](const Vector& x, Vector& g) {
    const double v = problem.log_posterior(x, &g);
    g = -g;
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };
  auto init = [&](int restart, std::mt19937_64& rng) {
    Vector x = x0;
    if (restart > 0) {
      std::normal_distribution<double> n01;
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.3 * n01(rng);
    }
    return x;
  };
  const auto best = minimize_with_restarts(negative, init, config);
  require(std::isfinite(best.value), ErrorKind::NonConvergence, "MAP fit produced no finite objective");

  GrowthFit fit;
  fit.spec = link == LinkKind::Sigmoid ? Specification::SigmoidLink
             : link == LinkKind::Exponential ? Specification::ExponentialLink
                                             : Specification::BSplineLink;
  fit.kind = FitKind::MapJoint;
  fit.params = problem.growth_params(best.x);
  for (std::size_t m = 0; m < problem.n_models(); ++m) fit.per_model_beta[problem.model_id(m)] = problem.beta(best.x, m);
  fit.spline_tau = problem.taus(best.x);
  fit.objective = -best.value;
  fit.gradient_norm = best.gradient_norm;
  fit.converged = best.converged;
  fit.seed = config.seed;
  return fit;
}

// ---------------------------------------------------------------------------
// Curve fits on horizon points

/// (date, horizon) pairs for every estimate whose model has metadata.
inline std::vector<HorizonPoint> horizon_points(std::span<const HorizonEstimate> horizons, const ModelTable& models,
                                                const TimeScale& scale = {}) {
  std::vector<HorizonPoint> out;
  for (const auto& h : horizons) {
    const auto* m = models.find(h.model_id);
    require(m != nullptr, ErrorKind::MissingModel, h.model_id);
    out.push_back({encode_date(scale, m->release_date), h.h_minutes});
  }
  return out;
}

inline GrowthFit fit_metr_exponential(std::span<const HorizonEstimate> horizons, const ModelTable& models,
                                      const TimeScale& scale = {}) {
  const auto pts = horizon_points(horizons, models, scale);
  GrowthFit fit;
  fit.spec = Specification::MetrExponential;
  fit.kind = FitKind::OlsLog;
  const auto p = ols_log_fit(pts);
  fit.params = p;
  double rss = 0.0;
  for (const auto& q : pts) {
    const double e = std::log(q.h) - (p.beta0 + p.beta1 * q.d);
    rss += e * e;
  }
  fit.objective = rss;
  fit.converged = true;
  return fit;
}

inline GrowthFit fit_sigmoid_curve(std::span<const HorizonEstimate> horizons, const ModelTable& models,
                                   const FitConfig& config = FitConfig{}, const TimeScale& scale = {}) {
  const auto pts = horizon_points(horizons, models, scale);
  const auto res = mse_sigmoid_fit(pts, config);
  GrowthFit fit;
  fit.spec = Specification::SigmoidCurve;
  fit.kind = FitKind::MseSigmoid;
  fit.params = res.params;
  fit.objective = res.mse;
  fit.gradient_norm = res.gradient_norm;
  fit.converged = res.converged;
  fit.seed = config.seed;
  return fit;
}

/// Mean over estimates of (predicted - estimated)^2, in minutes^2.
inline double mse_against_horizons(const GrowthFit& fit, std::span<const HorizonEstimate> horizons,
                                   const ModelTable& models, const TimeScale& scale = {}) {
  require(!horizons.empty(), ErrorKind::Precondition, "no horizons to compare against");
  double total = 0.0;
  for (const auto& h : horizons) {
    const auto* m = models.find(h.model_id);
    require(m != nullptr, ErrorKind::MissingModel, h.model_id);
    const double e = predict(fit, encode_date(scale, m->release_date), m->k_thinking) - h.h_minutes;
    total += e * e;
  }
  return total / static_cast<double>(horizons.size());
}

}  // namespace capcurve
