#pragma once

// Unconstrained smooth minimization: an Adam warm-up phase and a BFGS polish.
// Objectives return f(x) and write the gradient into `grad`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace capcurve {

using Vector = Eigen::VectorXd;
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct FitConfig {
  std::uint64_t seed = 20250606;
  int restarts = 8;
  int max_iterations = 500;          // BFGS iterations per restart
  double gradient_tolerance = 1e-8;  // Euclidean norm of the gradient
  int warmup_steps = 2000;           // Adam steps before the BFGS polish; 0 disables
  double warmup_learning_rate = 1e-2;
  double warmup_final_ratio = 0.1;  // learning rate decays geometrically to initial * ratio

  static FitConfig horizon_defaults() {
    FitConfig c;
    c.restarts = 5;
    c.warmup_steps = 0;
    return c;
  }

  static FitConfig map_defaults() { return FitConfig{}; }
};

struct OptimizeResult {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Adam on a minimization problem with geometric learning-rate decay. Returns the best iterate seen.
inline OptimizeResult adam_minimize(const Objective& f, Vector x, int steps, double lr0, double final_ratio) {
  const Eigen::Index n = x.size();
  Vector g(n), m = Vector::Zero(n), v = Vector::Zero(n);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double decay = steps > 0 ? std::pow(final_ratio, 1.0 / steps) : 1.0;

  OptimizeResult best;
  best.x = x;
  double lr = lr0;
  double p1 = 1.0, p2 = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double fx = f(x, g);
    if (!std::isfinite(fx) || !g.allFinite()) break;
    if (fx < best.value) {
      best.value = fx;
      best.x = x;
      best.gradient_norm = g.norm();
    }
    p1 *= b1;
    p2 *= b2;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    const Vector mhat = m / (1 - p1);
    const Vector vhat = v / (1 - p2);
    x -= lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
    lr *= decay;
    best.iterations = t + 1;
  }
  if (steps > 0) {
    const double fx = f(x, g);
    if (std::isfinite(fx) && fx < best.value) {
      best.value = fx;
      best.x = x;
      best.gradient_norm = g.norm();
    }
  }
  return best;
}

namespace detail {

struct LinePoint {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative
};

/// Strong-Wolfe line search (bracketing + safeguarded cubic zoom). Near a minimum, where f
/// differences fall to rounding level, the approximate Wolfe test of Hager and Zhang is accepted
/// instead: f(a) <= f(0) + eps |f(0)| and c2 f'(0) <= f'(a) <= (2 c1 - 1) f'(0).
template <class Phi>
std::optional<LinePoint> wolfe_search(Phi&& phi, double f0, double d0, double initial_step) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  const double eps_f = 1e-12 * (1.0 + std::abs(f0));
  auto armijo = [&](const LinePoint& p) { return p.f <= f0 + c1 * p.step * d0; };
  auto curvature = [&](const LinePoint& p) { return std::abs(p.slope) <= -c2 * d0; };
  auto approx = [&](const LinePoint& p) {
    return p.f <= f0 + eps_f && p.slope >= c2 * d0 && p.slope <= (2 * c1 - 1) * d0;
  };
  std::optional<LinePoint> best_decrease;
  auto note = [&](const LinePoint& p) {
    if (p.f < f0 && (!best_decrease || p.f < best_decrease->f)) best_decrease = p;
  };

  auto zoom = [&](LinePoint lo, LinePoint hi) -> std::optional<LinePoint> {
    for (int i = 0; i < 40; ++i) {
      const double a = lo.step, b = hi.step;
      const double w = std::abs(b - a);
      if (w < 1e-16 * std::max(1.0, std::abs(a))) break;
      // cubic interpolant minimizer, safeguarded to the middle 80% of the bracket
      double t;
      const double d1 = lo.slope + hi.slope - 3 * (lo.f - hi.f) / (a - b);
      const double disc = d1 * d1 - lo.slope * hi.slope;
      if (disc >= 0 && std::isfinite(disc)) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2 * d2);
      } else {
        t = 0.5 * (a + b);
      }
      const double left = std::min(a, b) + 0.1 * w, right = std::max(a, b) - 0.1 * w;
      if (!std::isfinite(t) || t < left || t > right) t = 0.5 * (a + b);
      LinePoint p = phi(t);
      if (!std::isfinite(p.f)) {
        hi = p;
        hi.f = std::numeric_limits<double>::max();
        continue;
      }
      note(p);
      if (approx(p)) return p;
      if (!armijo(p) || p.f >= lo.f) {
        hi = p;
      } else {
        if (curvature(p)) return p;
        if (p.slope * (hi.step - lo.step) >= 0) hi = lo;
        lo = p;
      }
    }
    return std::nullopt;
  };

  LinePoint prev{0.0, f0, d0};
  double step = initial_step;
  for (int i = 0; i < 40; ++i) {
    LinePoint p = phi(step);
    if (!std::isfinite(p.f) || !std::isfinite(p.slope)) {
      step = 0.5 * (prev.step + step);
      continue;
    }
    note(p);
    if (approx(p)) return p;
    if (!armijo(p) || (i > 0 && p.f >= prev.f)) {
      if (auto z = zoom(prev, p)) return z;
      return best_decrease;
    }
    if (curvature(p)) return p;
    if (p.slope >= 0) {
      if (auto z = zoom(p, prev)) return z;
      return best_decrease;
    }
    prev = p;
    step *= 2.0;
  }
  return best_decrease;
}

}  // namespace detail

/// BFGS on the inverse Hessian with a strong-Wolfe line search. The update is skipped when the
/// curvature pair is not positive; two consecutive failed line searches stop the run.
inline OptimizeResult bfgs_minimize(const Objective& f, Vector x, int max_iterations, double gradient_tolerance) {
  const Eigen::Index n = x.size();
  Vector g(n), g_new(n);
  OptimizeResult out;
  double fx = f(x, g);
  out.x = x;
  out.value = fx;
  out.gradient_norm = g.norm();
  if (!std::isfinite(fx)) return out;

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int failures = 0;
  for (int it = 0; it < max_iterations; ++it) {
    if (g.norm() < gradient_tolerance) break;
    Vector dir = -H * g;
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      H.setIdentity();
      scaled = false;
      dir = -g;
      slope = -g.squaredNorm();
    }
    const double initial = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(1e-12, g.lpNorm<Eigen::Infinity>()));
    Vector x_try(n), g_try(n);
    auto phi = [&](double a) {
      x_try = x + a * dir;
      const double v = f(x_try, g_try);
      return detail::LinePoint{a, v, g_try.dot(dir)};
    };
    const auto step = detail::wolfe_search(phi, fx, slope, initial);
    if (!step) {
      if (++failures >= 2) break;
      H.setIdentity();
      scaled = false;
      continue;
    }
    failures = 0;
    const Vector x_new = x + step->step * dir;
    const double f_new = f(x_new, g_new);
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector Hy = H * y;
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    x = x_new;
    g = g_new;
    fx = f_new;
    out.iterations = it + 1;
  }
  out.x = x;
  out.value = fx;
  out.gradient_norm = g.norm();
  out.converged = out.gradient_norm < gradient_tolerance;
  return out;
}

/// Warm-up (if configured) followed by the BFGS polish.
inline OptimizeResult minimize(const Objective& f, const Vector& x0, const FitConfig& config) {
  Vector start = x0;
  if (config.warmup_steps > 0) {
    start = adam_minimize(f, x0, config.warmup_steps, config.warmup_learning_rate, config.warmup_final_ratio).x;
  }
  return bfgs_minimize(f, start, config.max_iterations, config.gradient_tolerance);
}

/// Relative width within which two restart objectives count as tied.
inline constexpr double kRestartTieTolerance = 1e-10;

/// Runs `restarts` minimizations from `init(restart_index, rng)`, keeping the lowest objective.
/// Objectives within kRestartTieTolerance (relative) of each other are ties: a converged run
/// beats an unconverged one, then the lower restart index wins.
template <class InitFn>
OptimizeResult minimize_with_restarts(const Objective& f, InitFn&& init, const FitConfig& config,
                                      std::vector<OptimizeResult>* all = nullptr) {
  OptimizeResult best;
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    std::mt19937_64 rng(config.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r));
    const Vector x0 = init(r, rng);
    OptimizeResult res = minimize(f, x0, config);
    if (all) all->push_back(res);
    if (!std::isfinite(res.value)) continue;
    if (!std::isfinite(best.value)) {
      best = res;
      continue;
    }
    const double tie = kRestartTieTolerance * (1.0 + std::abs(best.value));
    if (res.value < best.value - tie || (res.value < best.value + tie && res.converged && !best.converged)) best = res;
  }
  return best;
}

/// Largest elementwise relative error between `grad` and a central-difference estimate.
/// The denominator is max(|analytic|, |numeric|, 1e-8).
inline double finite_difference_check(const std::function<double(const Vector&)>& f, const Vector& grad,
                                      const Vector& point, double step) {
  double worst = 0.0;
  Vector x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + step;
    const double fp = f(x);
    x[i] = xi - step;
    const double fm = f(x);
    x[i] = xi;
    const double numeric = (fp - fm) / (2 * step);
    const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
  }
  return worst;
}

/// Overload that evaluates the analytic gradient through the same objective.
inline double finite_difference_check(const Objective& f, const Vector& point, double step) {
  Vector grad(point.size()), scratch(point.size());
  f(point, grad);
  return finite_difference_check([&](const Vector& x) { return f(x, scratch); }, grad, point, step);
}

/// FNV-1a, used to derive stable per-item seeds.
inline std::uint64_t stable_hash(std::string_view s, std::uint64_t seed = 0) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace capcurve
