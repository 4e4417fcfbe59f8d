#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "capcurve/dataset.hpp"
#include "capcurve/error.hpp"
#include "capcurve/fitting.hpp"
#include "capcurve/growth.hpp"
#include "capcurve/horizon.hpp"

namespace capcurve {

struct ForecastPoint {
  Date date;
  double horizon = 0.0;
};

struct ForecastSeries {
  std::string label;
  std::string fit_kind;
  std::vector<ForecastPoint> points;
};

/// Which curve of a multiplicative fit to project. Reasoning follows the "best base model"
/// convention: the base factor is frozen at the reference date.
enum class Component { Overall, Base, Reasoning };

inline std::string_view to_string(Component c) {
  switch (c) {
    case Component::Overall: return "overall";
    case Component::Base: return "base";
    case Component::Reasoning: return "reasoning";
  }
  return "?";
}

inline Date inflection_date(double slope, double intercept, const TimeScale& scale = {}) {
  require(slope > 0, ErrorKind::NonPositiveSlope, "inflection needs a positive slope");
  return decode_date(scale, -intercept / slope);
}

struct ProjectOptions {
  int step_days = 7;
  bool k_thinking = true;
  Component component = Component::Overall;
  std::optional<Date> base_reference;  // for Component::Reasoning; defaults to `end`
};

inline ForecastSeries project(const GrowthFit& fit, const Date& start, const Date& end, const ProjectOptions& opt = {},
                              const TimeScale& scale = {}) {
  using std::chrono::sys_days;
  require(sys_days{start} < sys_days{end}, ErrorKind::Precondition, "start must precede end");
  require(opt.step_days > 0, ErrorKind::Precondition, "step_days must be positive");
  const auto* growth = std::get_if<GrowthParams>(&fit.params);
  require(opt.component == Component::Overall || growth != nullptr, ErrorKind::Precondition,
          "component projections need a multiplicative fit");

  ForecastSeries s;
  s.label = std::string(spec_id(fit.spec));
  if (opt.component != Component::Overall) s.label += ":" + std::string(to_string(opt.component));
  s.fit_kind = std::string(to_string(fit.kind));

  const double d_ref = encode_date(scale, opt.base_reference.value_or(end));
  for (auto day = sys_days{start}; day <= sys_days{end}; day += std::chrono::days{opt.step_days}) {
    const Date date{day};
    const double d = encode_date(scale, date);
    double h = 0.0;
    switch (opt.component) {
      case Component::Overall: h = predict(fit, d, opt.k_thinking); break;
      case Component::Base: h = model_horizon(d, false, *growth); break;
      case Component::Reasoning: {
        const SplineSpec* spec = growth->spline ? &*growth->spline : nullptr;
        const double b = link_value(growth->link, d_ref, growth->base, spec);
        const double r = link_value(growth->link, d, growth->reasoning, spec);
        h = growth->gamma1 * b * (1.0 + growth->gamma2 * r);
        break;
      }
    }
    require(std::isfinite(h) && h > 0, ErrorKind::OverflowGuard, "projection is not finite and positive");
    s.points.push_back({date, h});
  }
  return s;
}

namespace detail {
inline void require_same_grid(const ForecastSeries& a, const ForecastSeries& b) {
  require(a.points.size() == b.points.size(), ErrorKind::GridMismatch, "series lengths differ");
  for (std::size_t i = 0; i < a.points.size(); ++i)
    require(a.points[i].date == b.points[i].date, ErrorKind::GridMismatch, "series dates differ at " + std::to_string(i));
}
inline double ratio(const ForecastPoint& a, const ForecastPoint& b) {
  return std::max(a.horizon / b.horizon, b.horizon / a.horizon);
}
}  // namespace detail

/// First grid date where the two series differ by more than `ratio_threshold` (either way).
inline std::optional<Date> divergence_date(const ForecastSeries& a, const ForecastSeries& b, double ratio_threshold = 1.25) {
  require(ratio_threshold > 1.0, ErrorKind::Precondition, "ratio threshold must exceed 1");
  detail::require_same_grid(a, b);
  for (std::size_t i = 0; i < a.points.size(); ++i)
    if (detail::ratio(a.points[i], b.points[i]) > ratio_threshold) return a.points[i].date;
  return std::nullopt;
}

/// Start of the final stretch over which the series stay more than `ratio_threshold` apart
/// through the end of the grid; none if they agree at the last date.
inline std::optional<Date> sustained_divergence_date(const ForecastSeries& a, const ForecastSeries& b,
                                                     double ratio_threshold = 1.25) {
  require(ratio_threshold > 1.0, ErrorKind::Precondition, "ratio threshold must exceed 1");
  detail::require_same_grid(a, b);
  std::optional<Date> out;
  for (std::size_t i = a.points.size(); i-- > 0;) {
    if (detail::ratio(a.points[i], b.points[i]) <= ratio_threshold) break;
    out = a.points[i].date;
  }
  return out;
}

enum class InflectionComponent { Base, Reasoning, SingleCurve };

inline std::string_view to_string(InflectionComponent c) {
  switch (c) {
    case InflectionComponent::Base: return "BASE";
    case InflectionComponent::Reasoning: return "REASONING";
    case InflectionComponent::SingleCurve: return "SINGLE_CURVE";
  }
  return "?";
}

struct InflectionReport {
  Specification spec;
  InflectionComponent component;
  Date date;
  Date reference;
  bool in_past = false;
};

/// Inflection dates of every sigmoid component of a fit (none for exponential or spline fits).
inline std::vector<InflectionReport> inflections(const GrowthFit& fit, const Date& reference, const TimeScale& scale = {}) {
  std::vector<InflectionReport> out;
  auto add = [&](InflectionComponent c, double slope, double intercept) {
    const Date d = inflection_date(slope, intercept, scale);
    out.push_back({fit.spec, c, d, reference, std::chrono::sys_days{d} < std::chrono::sys_days{reference}});
  };
  if (const auto* s = std::get_if<SingleSigmoidParams>(&fit.params)) {
    add(InflectionComponent::SingleCurve, s->delta1, s->delta2);
  } else if (const auto* g = std::get_if<GrowthParams>(&fit.params); g && g->link == LinkKind::Sigmoid) {
    add(InflectionComponent::Base, g->base[0], g->base[1]);
    add(InflectionComponent::Reasoning, g->reasoning[0], g->reasoning[1]);
  }
  return out;
}

struct ReportRow {
  Specification spec;
  double mse = 0.0;
  bool converged = false;
  std::vector<InflectionReport> inflections;
};

/// MSE of each fit against the horizon estimates, ascending.
inline std::vector<ReportRow> comparison_report(std::span<const GrowthFit> fits, std::span<const HorizonEstimate> horizons,
                                                const ModelTable& models, const Date& reference,
                                                const TimeScale& scale = {}) {
  require(!fits.empty(), ErrorKind::Precondition, "no fits to compare");
  require(!horizons.empty(), ErrorKind::Precondition, "no horizons to compare against");
  std::vector<ReportRow> rows;
  for (const auto& f : fits)
    rows.push_back({f.spec, mse_against_horizons(f, horizons, models, scale), f.converged, inflections(f, reference, scale)});
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.mse < b.mse; });
  return rows;
}

inline void write_forecast_csv(std::ostream& os, std::span<const ForecastSeries> series) {
  os << "label,date,horizon_minutes\n";
  for (const auto& s : series)
    for (const auto& p : s.points)
      os << detail::csv_escape(s.label) << ',' << format_date(p.date) << ',' << nlohmann::json(p.horizon).dump() << '\n';
}

}  // namespace capcurve
