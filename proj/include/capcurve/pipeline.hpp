#pragma once

// End-to-end analysis: ingest -> per-model horizons -> growth fits -> projections -> report.
// Every artifact carries the provenance block (tool version, seed, input digests).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "capcurve/dataset.hpp"
#include "capcurve/error.hpp"
#include "capcurve/fitting.hpp"
#include "capcurve/forecast.hpp"
#include "capcurve/horizon.hpp"
#include "capcurve/io.hpp"
#include "capcurve/svg.hpp"

namespace capcurve {

struct RunManifest {
  std::filesystem::path runs_path;
  std::filesystem::path models_path;
  std::optional<std::filesystem::path> horizons_path;  // published horizons, read when use_published_horizons
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = FitConfig{}.seed;
  std::vector<Specification> specs{kAllSpecifications.begin(), kAllSpecifications.end()};
  bool use_published_horizons = false;
  bool sota_only = true;
  bool plots = true;
  bool log_scale = true;
  Date forecast_start = make_date(2019, 1, 1);
  Date forecast_end = make_date(2029, 1, 1);
  int step_days = 7;
  double divergence_ratio = 1.25;
  std::optional<Date> reference_date;  // defaults to the latest release in the model table
};

inline InputFormat format_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".jsonl" || ext == ".json" ? InputFormat::JSONL : InputFormat::CSV;
}

struct Inputs {
  ModelTable models;  // after the SOTA filter, if requested
  RunIngest ingest;   // runs restricted to `models`
  std::size_t runs_before_restriction = 0;
  Provenance provenance;
};

inline Inputs load_inputs(const RunManifest& m) {
  Inputs in;
  in.provenance.seed = m.seed;
  in.provenance.inputs.push_back(digest_file("runs", m.runs_path));
  in.provenance.inputs.push_back(digest_file("models", m.models_path));

  std::istringstream models_text(read_file(m.models_path));
  in.models = parse_models(models_text, format_for(m.models_path));
  if (m.sota_only) in.models = filter_sota(in.models);
  require(!in.models.empty(), ErrorKind::EmptyInput, "no models");

  std::istringstream runs_text(read_file(m.runs_path));
  in.ingest = parse_runs(runs_text, format_for(m.runs_path));
  in.runs_before_restriction = in.ingest.table.size();
  in.ingest.table = restrict_runs(in.ingest.table, in.models);
  require(!in.ingest.table.empty(), ErrorKind::EmptyInput, "no runs");
  return in;
}

/// Published horizons restricted to the model table, in model-table order.
inline std::vector<HorizonEstimate> load_published_horizons(const std::filesystem::path& path, const ModelTable& models) {
  std::istringstream text(read_file(path));
  const auto all = parse_horizons(text);
  std::vector<HorizonEstimate> out;
  for (const auto& m : models)
    for (const auto& h : all)
      if (h.model_id == m.model_id) out.push_back(h);
  require(!out.empty(), ErrorKind::EmptyInput, "no published horizons match the model table");
  return out;
}

/// Horizons usable as curve-fit targets (models with at least one run).
inline std::vector<HorizonEstimate> usable_horizons(std::span<const HorizonEstimate> all) {
  std::vector<HorizonEstimate> out;
  for (const auto& h : all)
    if (h.status != HorizonStatus::MissingRuns) out.push_back(h);
  return out;
}

/// Fits one specification. Throws NonConvergence naming the specification when the optimizer
/// does not reach its gradient tolerance.
inline GrowthFit fit_specification(Specification spec, std::span<const HorizonEstimate> horizons, const RunTable& runs,
                                   const ModelTable& models, std::uint64_t seed) {
  const std::string id(spec_id(spec));
  try {
    switch (spec) {
      case Specification::MetrExponential: return fit_metr_exponential(horizons, models);
      case Specification::SigmoidCurve: {
        FitConfig cfg;
        cfg.seed = seed;
        return fit_sigmoid_curve(horizons, models, cfg);
      }
      default: {
        FitConfig cfg = FitConfig::map_defaults();
        cfg.seed = seed;
        auto fit = map_fit(*link_of(spec), runs, models, PriorSpec{}, cfg);
        require(fit.converged, ErrorKind::NonConvergence, "gradient norm " + std::to_string(fit.gradient_norm) + " above tolerance");
        return fit;
      }
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NonConvergence || e.kind() == ErrorKind::DegenerateDesign || e.kind() == ErrorKind::OverflowGuard)
      throw Error(e.kind(), id + ": " + e.detail());
    throw;
  }
}

/// Projections on the manifest grid: the overall curve of every fit, plus the base and
/// reasoning components of multiplicative fits.
inline std::vector<ForecastSeries> project_all(std::span<const GrowthFit> fits, const RunManifest& m, const Date& reference) {
  std::vector<ForecastSeries> out;
  for (const auto& f : fits) {
    ProjectOptions opt;
    opt.step_days = m.step_days;
    out.push_back(project(f, m.forecast_start, m.forecast_end, opt));
    if (std::holds_alternative<GrowthParams>(f.params)) {
      opt.component = Component::Base;
      out.push_back(project(f, m.forecast_start, m.forecast_end, opt));
      opt.component = Component::Reasoning;
      opt.base_reference = reference;
      out.push_back(project(f, m.forecast_start, m.forecast_end, opt));
    }
  }
  return out;
}

inline const GrowthFit* find_fit(std::span<const GrowthFit> fits, Specification spec) {
  for (const auto& f : fits)
    if (f.spec == spec) return &f;
  return nullptr;
}

inline const ForecastSeries* find_series(std::span<const ForecastSeries> series, std::string_view label) {
  for (const auto& s : series)
    if (s.label == label) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Reference checks: fitted quantities against externally reported values. A miss is flagged
// in the report; it never fails the run.

inline nlohmann::json date_check(std::string quantity, const Date& value, const Date& reference, int tolerance_days) {
  const auto diff = (std::chrono::sys_days{value} - std::chrono::sys_days{reference}).count();
  return {{"quantity", std::move(quantity)},  {"value", format_date(value)},
          {"reference", format_date(reference)}, {"tolerance_days", tolerance_days},
          {"offset_days", diff},                 {"within", std::abs(diff) <= tolerance_days}};
}

struct ReportInputs {
  std::span<const GrowthFit> fits;
  std::span<const HorizonEstimate> horizons;
  std::span<const ForecastSeries> series;
  const ModelTable* models = nullptr;
  Date reference;
  double divergence_ratio = 1.25;
};

inline nlohmann::json build_report(const ReportInputs& in, const Provenance& prov) {
  nlohmann::json r;
  r["provenance"] = prov.to_json();
  r["reference_date"] = format_date(in.reference);
  r["n_horizons"] = in.horizons.size();

  const auto rows = comparison_report(in.fits, in.horizons, *in.models, in.reference);
  r["mse_table"] = nlohmann::json::array();
  r["inflections"] = nlohmann::json::array();
  for (const auto& row : rows) {
    r["mse_table"].push_back({{"spec", spec_id(row.spec)}, {"name", spec_name(row.spec)}, {"mse", row.mse}, {"converged", row.converged}});
    for (const auto& inf : row.inflections)
      r["inflections"].push_back({{"spec", spec_id(inf.spec)},
                                  {"component", to_string(inf.component)},
                                  {"date", format_date(inf.date)},
                                  {"in_past", inf.in_past}});
  }

  nlohmann::json checks = nlohmann::json::array();
  if (const auto* f = find_fit(in.fits, Specification::MetrExponential)) {
    const auto& p = std::get<ExpTrendParams>(f->params);
    if (p.beta1 > 0) {
      const double months = doubling_time(p);
      r["doubling_time_months"] = months;
      checks.push_back({{"quantity", "doubling_time_months"}, {"value", months}, {"reference", 7.0}, {"tolerance", 1.5},
                        {"within", std::abs(months - 7.0) <= 1.5}});
    } else {
      r["doubling_time_months"] = nullptr;
    }
  }
  for (const auto& row : rows) {
    for (const auto& inf : row.inflections) {
      if (inf.component == InflectionComponent::SingleCurve)
        checks.push_back(date_check("sigmoid_curve_inflection", inf.date, make_date(2025, 6, 6), 90));
      else if (row.spec == Specification::SigmoidLink && inf.component == InflectionComponent::Base)
        checks.push_back(date_check("base_inflection", inf.date, make_date(2024, 11, 21), 120));
      else if (row.spec == Specification::SigmoidLink && inf.component == InflectionComponent::Reasoning)
        checks.push_back(date_check("reasoning_inflection", inf.date, make_date(2026, 6, 6), 120));
    }
  }

  const auto* exp_series = find_series(in.series, spec_id(Specification::MetrExponential));
  const auto* link_series = find_series(in.series, spec_id(Specification::SigmoidLink));
  if (exp_series && link_series) {
    const auto first = divergence_date(*exp_series, *link_series, in.divergence_ratio);
    const auto sustained = sustained_divergence_date(*exp_series, *link_series, in.divergence_ratio);
    r["divergence"] = {{"between", {spec_id(Specification::MetrExponential), spec_id(Specification::SigmoidLink)}},
                       {"ratio_threshold", in.divergence_ratio},
                       {"first_date", first ? nlohmann::json(format_date(*first)) : nlohmann::json(nullptr)},
                       {"sustained_date", sustained ? nlohmann::json(format_date(*sustained)) : nlohmann::json(nullptr)}};
    if (first) checks.push_back(date_check("divergence_date", *first, make_date(2026, 7, 3), 183));
  }

  if (rows.size() == kAllSpecifications.size()) {
    const std::vector<std::string> expected{"sigmoid-curve", "sigmoid-link", "metr-exp", "bspline-link", "exp-link"};
    std::vector<std::string> got;
    for (const auto& row : rows) got.emplace_back(spec_id(row.spec));
    checks.push_back({{"quantity", "mse_ordering"}, {"value", got}, {"reference", expected}, {"within", got == expected}});
  }
  r["reference_checks"] = checks;
  return r;
}

inline nlohmann::json build_fits_document(std::span<const GrowthFit> fits, std::span<const HorizonEstimate> horizons,
                                          const ModelTable& models, const Provenance& prov) {
  nlohmann::json doc;
  doc["provenance"] = prov.to_json();
  doc["fits"] = nlohmann::json::array();
  for (const auto& f : fits) {
    auto j = to_json(f);
    j["mse"] = mse_against_horizons(f, horizons, models);
    doc["fits"].push_back(std::move(j));
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Charts

inline std::vector<svg::Observed> observed_points(std::span<const HorizonEstimate> horizons, const ModelTable& models) {
  std::vector<svg::Observed> out;
  for (const auto& h : horizons) out.push_back({h.model_id, models.at(h.model_id).release_date, h.h_minutes});
  return out;
}

/// One chart with the two single-curve trends and one chart per multiplicative fit.
inline std::vector<std::pair<std::string, svg::Chart>> build_charts(std::span<const GrowthFit> fits,
                                                                    std::span<const ForecastSeries> series,
                                                                    std::span<const HorizonEstimate> horizons,
                                                                    const ModelTable& models, const Date& reference,
                                                                    bool log_scale) {
  const auto& colors = svg::palette();
  std::vector<std::pair<std::string, svg::Chart>> out;
  const auto observed = observed_points(horizons, models);

  svg::Chart trends;
  trends.title = "Exponential trend and single sigmoid curve";
  trends.log_y = log_scale;
  trends.observed = observed;
  for (auto spec : {Specification::MetrExponential, Specification::SigmoidCurve}) {
    const auto* s = find_series(series, spec_id(spec));
    if (!s) continue;
    const auto& color = colors[trends.curves.size() % colors.size()];
    trends.curves.push_back({std::string(spec_name(spec)), color, s->points});
    if (const auto* f = find_fit(fits, spec))
      for (const auto& inf : inflections(*f, reference)) trends.markers.push_back({"inflection", color, inf.date});
  }
  if (!trends.curves.empty()) out.emplace_back("trends.svg", std::move(trends));

  for (const auto& f : fits) {
    if (!std::holds_alternative<GrowthParams>(f.params)) continue;
    const std::string id(spec_id(f.spec));
    svg::Chart c;
    c.title = std::string(spec_name(f.spec)) + " projection";
    c.log_y = log_scale;
    c.observed = observed;
    const std::pair<const char*, const char*> parts[] = {{":base", "base"}, {":reasoning", "reasoning"}, {"", "overall"}};
    const std::string part_colors[] = {colors[1], colors[2], colors[0]};
    for (std::size_t i = 0; i < 3; ++i)
      if (const auto* s = find_series(series, id + parts[i].first)) c.curves.push_back({parts[i].second, part_colors[i], s->points});
    for (const auto& inf : inflections(f, reference)) {
      const bool base = inf.component == InflectionComponent::Base;
      c.markers.push_back({std::string(base ? "base" : "reasoning") + " inflection", base ? colors[1] : colors[2], inf.date});
    }
    out.emplace_back("projection_" + id + ".svg", std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

struct PipelineResult {
  Inputs inputs;
  std::vector<HorizonEstimate> all_horizons;  // refit or published, one per model
  std::vector<HorizonEstimate> horizons;      // curve-fit targets
  std::vector<GrowthFit> fits;
  std::vector<ForecastSeries> series;
  Date reference;
  nlohmann::json report;
  nlohmann::json fits_document;
};

inline Date latest_release(const ModelTable& models) {
  Date latest = models.models().front().release_date;
  for (const auto& m : models)
    if (std::chrono::sys_days{m.release_date} > std::chrono::sys_days{latest}) latest = m.release_date;
  return latest;
}

inline PipelineResult run_pipeline(const RunManifest& m) {
  require(!m.specs.empty(), ErrorKind::Precondition, "no specifications requested");
  PipelineResult res;
  res.inputs = load_inputs(m);
  const auto& models = res.inputs.models;
  const auto& runs = res.inputs.ingest.table;

  if (m.use_published_horizons) {
    require(m.horizons_path.has_value(), ErrorKind::Precondition, "published horizons requested without a horizons file");
    res.inputs.provenance.inputs.push_back(digest_file("horizons", *m.horizons_path));
    res.all_horizons = load_published_horizons(*m.horizons_path, models);
  } else {
    FitConfig cfg = FitConfig::horizon_defaults();
    cfg.seed = m.seed;
    res.all_horizons = fit_all_horizons(runs, models, cfg);
  }
  res.horizons = usable_horizons(res.all_horizons);
  require(!res.horizons.empty(), ErrorKind::EmptyInput, "no models with runs");

  for (auto spec : m.specs) res.fits.push_back(fit_specification(spec, res.horizons, runs, models, m.seed));

  res.reference = m.reference_date.value_or(latest_release(models));
  res.series = project_all(res.fits, m, res.reference);
  res.report = build_report({res.fits, res.horizons, res.series, &models, res.reference, m.divergence_ratio}, res.inputs.provenance);
  res.report["horizon_source"] = m.use_published_horizons ? "published" : "refit";
  res.report["sota_only"] = m.sota_only;
  res.report["forecast_grid"] = {{"start", format_date(m.forecast_start)}, {"end", format_date(m.forecast_end)}, {"step_days", m.step_days}};
  res.fits_document = build_fits_document(res.fits, res.horizons, models, res.inputs.provenance);
  return res;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Precondition, "cannot write " + path.string());
  out << text;
}

inline std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void write_horizons_artifact(const std::filesystem::path& path, std::span<const HorizonEstimate> horizons,
                                    const Provenance& prov) {
  std::ostringstream os;
  os << prov.comment_line() << '\n';
  write_horizons_csv(os, horizons);
  write_text(path, os.str());
}

inline void write_forecast_artifact(const std::filesystem::path& path, std::span<const ForecastSeries> series,
                                    const Provenance& prov) {
  std::ostringstream os;
  os << prov.comment_line() << '\n';
  write_forecast_csv(os, series);
  write_text(path, os.str());
}

/// Writes report.json, fits.json, horizons.csv, forecast.csv and (optionally) the charts.
/// Returns the written paths.
inline std::vector<std::filesystem::path> write_artifacts(const PipelineResult& res, const RunManifest& m) {
  std::filesystem::create_directories(m.out_dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(m.out_dir / name, text);
    written.push_back(m.out_dir / name);
  };
  emit("report.json", json_text(res.report));
  emit("fits.json", json_text(res.fits_document));
  write_horizons_artifact(m.out_dir / "horizons.csv", res.all_horizons, res.inputs.provenance);
  written.push_back(m.out_dir / "horizons.csv");
  write_forecast_artifact(m.out_dir / "forecast.csv", res.series, res.inputs.provenance);
  written.push_back(m.out_dir / "forecast.csv");
  if (m.plots) {
    for (const auto& [name, chart] : build_charts(res.fits, res.series, res.horizons, res.inputs.models, res.reference, m.log_scale)) {
      std::ostringstream os;
      os << "<!-- " << res.inputs.provenance.comment_line().substr(2) << " -->\n";
      svg::render(os, chart);
      emit(name, os.str());
    }
  }
  return written;
}

}  // namespace capcurve
