#pragma once

// Per-model 50% horizon estimation: p = sigmoid(beta * (log h - log t)) fitted by maximum
// likelihood over Bernoulli run outcomes, parameterized in (log h, log beta).

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "capcurve/dataset.hpp"
#include "capcurve/error.hpp"
#include "capcurve/math.hpp"
#include "capcurve/optimize.hpp"

namespace capcurve {

enum class HorizonStatus { Ok, Degenerate, NonConvergence, MissingRuns };

inline std::string_view to_string(HorizonStatus s) {
  switch (s) {
    case HorizonStatus::Ok: return "ok";
    case HorizonStatus::Degenerate: return "degenerate";
    case HorizonStatus::NonConvergence: return "non_convergence";
    case HorizonStatus::MissingRuns: return "missing_runs";
  }
  return "unknown";
}

struct HorizonEstimate {
  std::string model_id;
  double h_minutes = 0.0;
  double beta = 0.0;
  double log_likelihood = 0.0;
  std::size_t n_runs = 0;
  bool converged = false;
  HorizonStatus status = HorizonStatus::Ok;
};

inline double success_probability(double h, double beta, double t) {
  require(h > 0 && beta > 0 && t > 0, ErrorKind::DomainError, "h, beta and t must be positive");
  return math::sigmoid((std::log(h) - std::log(t)) * beta);
}

struct LogLikelihood {
  double value = 0.0;
  std::array<double, 2> gradient{};  // d/d(log h), d/d(log beta)
};

/// Weighted Bernoulli log-likelihood of one model's runs.
inline LogLikelihood horizon_loglik(double log_h, double log_beta, std::span<const RunRecord> runs) {
  require(!runs.empty(), ErrorKind::EmptySlice, "no runs for horizon likelihood");
  const double beta = std::exp(log_beta);
  LogLikelihood out;
  for (const auto& r : runs) {
    const double margin = log_h - std::log(r.human_minutes);
    const double z = beta * margin;
    const double ll = r.success ? math::log_sigmoid(z) : math::log_sigmoid(-z);
    const double dz = r.weight * (r.success - math::sigmoid(z));
    out.value += r.weight * ll;
    out.gradient[0] += dz * beta;
    out.gradient[1] += dz * z;
  }
  return out;
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Maximum-likelihood horizon for one model's runs.
///
/// All-success (all-failure) slices have no finite MLE; the estimate is clamped to the largest
/// (smallest) observed difficulty with beta = 1 and flagged Degenerate.
inline HorizonEstimate fit_horizon(std::span<const RunRecord> runs, const FitConfig& config = FitConfig::horizon_defaults()) {
  require(!runs.empty(), ErrorKind::EmptySlice, "no runs to fit");
  HorizonEstimate est;
  est.model_id = runs.front().model_id;
  est.n_runs = runs.size();

  std::vector<double> minutes;
  double successes = 0.0;
  for (const auto& r : runs) {
    require(r.model_id == est.model_id, ErrorKind::Precondition, "slice mixes models");
    minutes.push_back(r.human_minutes);
    successes += r.success;
  }

  if (successes == 0.0 || successes == static_cast<double>(runs.size())) {
    const auto [lo, hi] = std::minmax_element(minutes.begin(), minutes.end());
    est.h_minutes = successes == 0.0 ? *lo : *hi;
    est.beta = 1.0;
    est.log_likelihood = horizon_loglik(std::log(est.h_minutes), 0.0, runs).value;
    est.converged = false;
    est.status = HorizonStatus::Degenerate;
    return est;
  }

  const Objective negll = [&](const Vector& x, Vector& g) {
    const auto ll = horizon_loglik(x[0], x[1], runs);
    g.resize(2);
    g[0] = -ll.gradient[0];
    g[1] = -ll.gradient[1];
    return -ll.value;
  };
  const double log_median = std::log(detail::median(minutes));
  auto init = [&](int restart, std::mt19937_64& rng) {
    Vector x(2);
    x << log_median, 0.0;
    if (restart > 0) {
      std::normal_distribution<double> n01;
      x[0] += n01(rng);
      x[1] += 0.5 * n01(rng);
    }
    return x;
  };
  FitConfig cfg = config;
  cfg.warmup_steps = 0;
  const auto best = minimize_with_restarts(negll, init, cfg);

  est.h_minutes = std::exp(best.x[0]);
  est.beta = std::exp(best.x[1]);
  est.log_likelihood = -best.value;
  est.converged = best.converged;
  est.status = best.converged ? HorizonStatus::Ok : HorizonStatus::NonConvergence;
  return est;
}

/// Independent per-model fits, in the order of `models`. Each model gets a seed derived from
/// the config seed and its id, so results do not depend on evaluation order. Failures are
/// reported through `status`; the batch never aborts.
inline std::vector<HorizonEstimate> fit_all_horizons(const RunTable& runs, const ModelTable& models,
                                                     const FitConfig& config = FitConfig::horizon_defaults()) {
  std::vector<HorizonEstimate> out;
  out.reserve(models.size());
  for (const auto& m : models) {
    const auto slice = runs.slice(m.model_id);
    if (slice.empty()) {
      HorizonEstimate e;
      e.model_id = m.model_id;
      e.status = HorizonStatus::MissingRuns;
      out.push_back(e);
      continue;
    }
    FitConfig cfg = config;
    cfg.seed = stable_hash(m.model_id, config.seed);
    out.push_back(fit_horizon(slice, cfg));
  }
  return out;
}

inline void write_horizons_csv(std::ostream& os, std::span<const HorizonEstimate> estimates) {
  os << "model_id,h_minutes,beta,loglik,n_runs,converged\n";
  for (const auto& e : estimates) {
    os << detail::csv_escape(e.model_id) << ',' << nlohmann::json(e.h_minutes).dump() << ','
       << nlohmann::json(e.beta).dump() << ',' << nlohmann::json(e.log_likelihood).dump() << ',' << e.n_runs << ','
       << (e.converged ? 1 : 0) << '\n';
  }
}

/// Reads horizons either in the format written above or as a bare `model_id,h_minutes` table
/// (e.g. published values). Missing columns default to beta = 1, converged = 1.
inline std::vector<HorizonEstimate> parse_horizons(std::istream& source) {
  std::vector<HorizonEstimate> out;
  std::size_t rows = 0;
  detail::for_each_row(
      source, InputFormat::CSV, {"model_id", "h_minutes"},
      [&](const detail::RowView& row, std::size_t i) {
        HorizonEstimate e;
        e.model_id = std::string(detail::trim(row.text("model_id")));
        const auto h = detail::parse_double(row.text("h_minutes"));
        require(h && *h > 0, ErrorKind::Precondition, "row " + std::to_string(i) + ": h_minutes must be positive");
        e.h_minutes = *h;
        e.beta = 1.0;
        e.converged = true;
        if (row.has("beta"))
          if (auto b = detail::parse_double(row.text("beta"))) e.beta = *b;
        if (row.has("loglik"))
          if (auto l = detail::parse_double(row.text("loglik"))) e.log_likelihood = *l;
        if (row.has("n_runs"))
          if (auto n = detail::parse_int(row.text("n_runs"))) e.n_runs = static_cast<std::size_t>(*n);
        if (row.has("converged"))
          if (auto c = detail::parse_bool(row.text("converged"))) e.converged = *c;
        out.push_back(e);
      },
      rows, nullptr);
  return out;
}

}  // namespace capcurve
