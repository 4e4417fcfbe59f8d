#pragma once

// Command-line front end. `run_cli` is the whole program; the executable only forwards argv.
// Exit codes: 0 success, 2 input error, 3 fit failure, 4 theorem violation.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "capcurve/dataset.hpp"
#include "capcurve/error.hpp"
#include "capcurve/fitting.hpp"
#include "capcurve/forecast.hpp"
#include "capcurve/horizon.hpp"
#include "capcurve/io.hpp"
#include "capcurve/pipeline.hpp"
#include "capcurve/synthetic.hpp"
#include "capcurve/theory.hpp"

namespace capcurve::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kFitFailure = 3, kTheoremViolation = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonConvergence:
    case ErrorKind::DegenerateDesign:
    case ErrorKind::OverflowGuard:
    case ErrorKind::NonPositiveSlope: return kFitFailure;
    default: return kInputError;
  }
}

namespace detail {

struct Globals {
  std::uint64_t seed = FitConfig{}.seed;
  std::string out_dir = "out";
  bool use_published_horizons = false;
  bool sota_only = true;
};

inline Date date_arg(const std::string& s) {
  try {
    return parse_date(s);
  } catch (const Error&) {
    throw Error(ErrorKind::UnparseableDate, "'" + s + "' is not YYYY-MM-DD");
  }
}

inline std::vector<Specification> spec_args(const std::vector<std::string>& ids) {
  std::vector<Specification> out;
  for (const auto& id : ids) {
    const auto s = parse_spec_id(id);
    require(s.has_value(), ErrorKind::Precondition, "unknown specification '" + id + "'");
    out.push_back(*s);
  }
  return out;
}

inline nlohmann::json ingest_summary(const RunIngest& ingest) {
  nlohmann::json j;
  j["input_rows"] = ingest.input_rows;
  j["accepted"] = ingest.table.size();
  j["rejected"] = ingest.rejects.size();
  j["distinct_tasks"] = ingest.table.distinct_tasks();
  j["rejects"] = nlohmann::json::array();
  for (const auto& r : ingest.rejects) j["rejects"].push_back({{"row", r.row}, {"kind", to_string(r.kind)}, {"message", r.message}});
  return j;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Capability growth curves: horizon estimation, growth fits, projections."};
  app.name("capcurve");
  app.require_subcommand(1);
  app.fallthrough();

  detail::Globals g;
  app.add_option("--seed", g.seed, "Seed for every randomized step");
  app.add_option("--out-dir", g.out_dir, "Directory for written artifacts");
  app.add_flag("--use-published-horizons", g.use_published_horizons, "Use --horizons values instead of refitting");
  app.add_flag("--sota-only,!--all-models", g.sota_only, "Restrict to models flagged is_sota (default on)");

  std::string runs, models, horizons, fits_path, aliases;
  std::vector<std::string> spec_ids;
  std::string start = "2019-01-01", end = "2029-01-01", reference;
  int step_days = 7;
  double ratio = 1.25;
  bool no_plots = false, linear = false, metr = false, metr_weights = false;

  auto add_inputs = [&](CLI::App* c, bool need_runs) {
    auto* r = c->add_option("--runs", runs, "Run table (.csv or .jsonl)")->check(CLI::ExistingFile);
    if (need_runs) r->required();
    c->add_option("--models", models, "Model table (.csv or .jsonl)")->required()->check(CLI::ExistingFile);
  };
  auto add_grid = [&](CLI::App* c) {
    c->add_option("--start", start, "First projection date");
    c->add_option("--end", end, "Last projection date");
    c->add_option("--step-days", step_days, "Projection step in days")->check(CLI::PositiveNumber);
  };

  auto* ingest = app.add_subcommand("ingest", "Validate inputs and write canonical tables");
  add_inputs(ingest, true);
  ingest->add_flag("--metr", metr, "Read runs in METR's runs.jsonl layout");
  ingest->add_option("--aliases", aliases, "metr_alias,model_id table for --metr")->check(CLI::ExistingFile);
  ingest->add_flag("--metr-weights", metr_weights, "Keep METR's invsqrt_task_weight as run weights");

  auto* fit_h = app.add_subcommand("fit-horizons", "Fit the per-model 50% horizon");
  add_inputs(fit_h, true);

  auto* fit_t = app.add_subcommand("fit-trend", "Fit one or more growth specifications");
  add_inputs(fit_t, true);
  fit_t->add_option("--spec", spec_ids, "metr-exp, sigmoid-curve, sigmoid-link, exp-link, bspline-link")->required();
  fit_t->add_option("--horizons", horizons, "Published horizons (model_id,h_minutes)")->check(CLI::ExistingFile);

  auto* fc = app.add_subcommand("forecast", "Project fitted curves over a date grid");
  fc->add_option("--fits", fits_path, "fits.json")->required()->check(CLI::ExistingFile);
  add_grid(fc);
  fc->add_option("--base-date", reference, "Date at which the base factor is frozen for reasoning projections");

  auto* vt = app.add_subcommand("verify-theorem", "Certify the sigmoid-product bounds on a grid");
  std::optional<int> k;
  std::optional<double> alpha;
  double resolution = 0.01, pad = 10.0;
  vt->add_option("--k", k, "Number of factors (default 1..6)");
  vt->add_option("--alpha", alpha, "Inflection spacing (default 2, 2.5, 3, 4)");
  vt->add_option("--resolution", resolution, "Grid step")->check(CLI::PositiveNumber);
  vt->add_option("--pad", pad, "Grid covers [-pad, k alpha + pad]")->check(CLI::NonNegativeNumber);

  auto* pl = app.add_subcommand("pipeline", "Run every stage and write all artifacts");
  add_inputs(pl, true);
  pl->add_option("--spec", spec_ids, "Subset of specifications (default all)");
  pl->add_option("--horizons", horizons, "Published horizons (model_id,h_minutes)")->check(CLI::ExistingFile);
  add_grid(pl);
  pl->add_option("--divergence-ratio", ratio, "Ratio threshold for the divergence date");
  pl->add_option("--reference-date", reference, "Date for in-past flags and the reasoning base (default latest release)");
  pl->add_flag("--no-plots", no_plots, "Skip SVG output");
  pl->add_flag("--linear-scale", linear, "Linear vertical axis in charts");

  auto* rp = app.add_subcommand("report", "Rebuild report.json from fits and horizons");
  rp->add_option("--fits", fits_path, "fits.json")->required()->check(CLI::ExistingFile);
  rp->add_option("--horizons", horizons, "horizons.csv")->required()->check(CLI::ExistingFile);
  rp->add_option("--models", models, "Model table")->required()->check(CLI::ExistingFile);
  add_grid(rp);
  rp->add_option("--divergence-ratio", ratio, "Ratio threshold for the divergence date");
  rp->add_option("--reference-date", reference, "Date for in-past flags and the reasoning base (default latest release)");

  auto* sy = app.add_subcommand("synth", "Write a seeded synthetic run table and the frontier model table");
  std::size_t n_tasks = 170;
  int attempts = 4;
  sy->add_option("--tasks", n_tasks, "Number of tasks");
  sy->add_option("--attempts", attempts, "Attempts per (model, task)");

  std::vector<const char*> argv{"capcurve"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  const std::filesystem::path out_dir = g.out_dir;
  auto provenance = [&](std::vector<std::pair<std::string, std::string>> files) {
    Provenance p;
    p.seed = g.seed;
    for (const auto& [role, path] : files)
      if (!path.empty()) p.inputs.push_back(digest_file(role, path));
    return p;
  };
  auto load_models = [&]() {
    std::istringstream text(read_file(models));
    auto table = parse_models(text, format_for(models));
    if (g.sota_only) table = filter_sota(table);
    require(!table.empty(), ErrorKind::EmptyInput, "no models");
    return table;
  };
  auto load_runs = [&](const ModelTable& table) {
    std::istringstream text(read_file(runs));
    auto ingest_result = parse_runs(text, format_for(runs));
    auto restricted = restrict_runs(ingest_result.table, table);
    require(!restricted.empty(), ErrorKind::EmptyInput, "no runs");
    return restricted;
  };
  auto horizons_for = [&](const RunTable& run_table, const ModelTable& table) {
    if (g.use_published_horizons) {
      require(!horizons.empty(), ErrorKind::Precondition, "--use-published-horizons needs --horizons");
      return load_published_horizons(horizons, table);
    }
    FitConfig cfg = FitConfig::horizon_defaults();
    cfg.seed = g.seed;
    return usable_horizons(fit_all_horizons(run_table, table, cfg));
  };

  try {
    std::filesystem::create_directories(out_dir);

    if (app.got_subcommand(ingest)) {
      std::istringstream models_text(read_file(models));
      const auto table = parse_models(models_text, format_for(models));
      RunIngest result;
      std::istringstream runs_text(read_file(runs));
      if (metr) {
        std::unordered_map<std::string, std::string> alias_map;
        if (!aliases.empty()) {
          std::istringstream alias_text(read_file(aliases));
          alias_map = parse_alias_map(alias_text);
        }
        result = parse_metr_runs(runs_text, alias_map, metr_weights);
      } else {
        result = parse_runs(runs_text, format_for(runs));
      }
      require(!result.table.empty(), ErrorKind::EmptyInput, "no runs");
      const auto prov = provenance({{"runs", runs}, {"models", models}, {"aliases", aliases}});
      std::ostringstream rcsv, mcsv;
      rcsv << prov.comment_line() << '\n';
      write_runs_csv(rcsv, result.table);
      mcsv << prov.comment_line() << '\n';
      write_models_csv(mcsv, table);
      write_text(out_dir / "runs.csv", rcsv.str());
      write_text(out_dir / "models.csv", mcsv.str());
      auto summary = detail::ingest_summary(result);
      summary["provenance"] = prov.to_json();
      summary["models"] = table.size();
      std::size_t unknown = 0;
      for (const auto& id : result.table.model_ids())
        if (!table.find(id)) ++unknown;
      summary["models_without_metadata"] = unknown;
      write_text(out_dir / "ingest_report.json", json_text(summary));
      out << "ingested " << result.table.size() << " runs (" << result.rejects.size() << " rejected), " << table.size()
          << " models -> " << out_dir.string() << '\n';
      return kOk;
    }

    if (app.got_subcommand(fit_h)) {
      const auto table = load_models();
      const auto run_table = load_runs(table);
      FitConfig cfg = FitConfig::horizon_defaults();
      cfg.seed = g.seed;
      const auto est = fit_all_horizons(run_table, table, cfg);
      write_horizons_artifact(out_dir / "horizons.csv", est, provenance({{"runs", runs}, {"models", models}}));
      for (const auto& e : est)
        out << e.model_id << ": h=" << e.h_minutes << " min, beta=" << e.beta << " [" << to_string(e.status) << "]\n";
      return kOk;
    }

    if (app.got_subcommand(fit_t)) {
      const auto specs = detail::spec_args(spec_ids);
      const auto table = load_models();
      const auto run_table = load_runs(table);
      const auto targets = horizons_for(run_table, table);
      std::vector<GrowthFit> fits;
      for (auto s : specs) {
        fits.push_back(fit_specification(s, targets, run_table, table, g.seed));
        out << spec_id(s) << ": objective " << fits.back().objective << ", MSE " << mse_against_horizons(fits.back(), targets, table)
            << '\n';
      }
      const auto prov = provenance({{"runs", runs}, {"models", models}, {"horizons", g.use_published_horizons ? horizons : ""}});
      write_text(out_dir / "fits.json", json_text(build_fits_document(fits, targets, table, prov)));
      return kOk;
    }

    if (app.got_subcommand(fc)) {
      const auto fits = parse_fits(read_file(fits_path));
      require(!fits.empty(), ErrorKind::EmptyInput, "no fits");
      RunManifest m;
      m.forecast_start = detail::date_arg(start);
      m.forecast_end = detail::date_arg(end);
      m.step_days = step_days;
      const Date base_date = reference.empty() ? m.forecast_end : detail::date_arg(reference);
      const auto series = project_all(fits, m, base_date);
      write_forecast_artifact(out_dir / "forecast.csv", series, provenance({{"fits", fits_path}}));
      out << series.size() << " series, " << series.front().points.size() << " dates -> " << (out_dir / "forecast.csv").string()
          << '\n';
      return kOk;
    }

    if (app.got_subcommand(vt)) {
      std::vector<theory::SigmoidProductSpec> specs;
      for (const auto& s : theory::default_spec_grid()) {
        if (k && s.k != *k) continue;
        if (alpha && s.alpha != *alpha) continue;
        specs.push_back(s);
      }
      if (specs.empty()) specs.push_back({k.value_or(1), alpha.value_or(2.0)});
      for (const auto& s : specs) s.validate();
      const auto certs = theory::certify_bounds(specs, resolution, pad);

      nlohmann::json report;
      report["provenance"] = provenance({}).to_json();
      report["slack"] = theory::kBoundSlack;
      report["resolution"] = resolution;
      report["certificates"] = nlohmann::json::array();
      std::size_t violations = 0;
      const theory::Violation* worst = nullptr;
      double worst_excess = -1.0;
      for (const auto& c : certs) {
        report["certificates"].push_back({{"k", c.spec.k},
                                          {"alpha", c.spec.alpha},
                                          {"x_lo", c.x_lo},
                                          {"x_hi", c.x_hi},
                                          {"n_points", c.n_points},
                                          {"n_checks", c.n_checks},
                                          {"violations", c.violations.size()},
                                          {"worst_relative_margin", c.worst_relative_margin},
                                          {"passed", c.passed()}});
        violations += c.violations.size();
        for (const auto& v : c.violations) {
          const double excess = std::max(v.lower - v.f, v.f - v.upper);
          if (excess > worst_excess) {
            worst_excess = excess;
            worst = &v;
          }
        }
      }
      report["passed"] = violations == 0;
      write_text(out_dir / "theorem.json", json_text(report));
      out << certs.size() << " specs certified, " << violations << " violations\n";
      if (worst) {
        err << "worst violation at x=" << worst->x << " (" << theory::to_string(worst->regime) << "): f=" << worst->f << " outside ["
            << worst->lower << ", " << worst->upper << "]\n";
        return kTheoremViolation;
      }
      return kOk;
    }

    if (app.got_subcommand(pl)) {
      RunManifest m;
      m.runs_path = runs;
      m.models_path = models;
      if (!horizons.empty()) m.horizons_path = horizons;
      m.out_dir = out_dir;
      m.seed = g.seed;
      if (!spec_ids.empty()) m.specs = detail::spec_args(spec_ids);
      m.use_published_horizons = g.use_published_horizons;
      m.sota_only = g.sota_only;
      m.plots = !no_plots;
      m.log_scale = !linear;
      m.forecast_start = detail::date_arg(start);
      m.forecast_end = detail::date_arg(end);
      m.step_days = step_days;
      m.divergence_ratio = ratio;
      if (!reference.empty()) m.reference_date = detail::date_arg(reference);
      const auto res = run_pipeline(m);
      const auto written = write_artifacts(res, m);
      for (const auto& row : res.report["mse_table"])
        out << row["name"].get<std::string>() << ": MSE " << row["mse"].get<double>() << '\n';
      for (const auto& c : res.report["reference_checks"])
        if (!c["within"].get<bool>()) out << "note: " << c["quantity"].get<std::string>() << " outside its reference tolerance\n";
      out << written.size() << " artifacts -> " << out_dir.string() << '\n';
      return kOk;
    }

    if (app.got_subcommand(rp)) {
      const auto fits = parse_fits(read_file(fits_path));
      require(!fits.empty(), ErrorKind::EmptyInput, "no fits");
      const auto table = load_models();
      std::istringstream htext(read_file(horizons));
      std::vector<HorizonEstimate> targets;
      for (const auto& h : parse_horizons(htext))
        if (table.find(h.model_id) && h.status != HorizonStatus::MissingRuns && h.h_minutes > 0) targets.push_back(h);
      require(!targets.empty(), ErrorKind::EmptyInput, "no horizons match the model table");
      RunManifest m;
      m.forecast_start = detail::date_arg(start);
      m.forecast_end = detail::date_arg(end);
      m.step_days = step_days;
      const Date ref = reference.empty() ? latest_release(table) : detail::date_arg(reference);
      const auto series = project_all(fits, m, ref);
      const auto prov = provenance({{"fits", fits_path}, {"horizons", horizons}, {"models", models}});
      const auto report = build_report({fits, targets, series, &table, ref, ratio}, prov);
      write_text(out_dir / "report.json", json_text(report));
      for (const auto& row : report["mse_table"]) out << row["name"].get<std::string>() << ": MSE " << row["mse"].get<double>() << '\n';
      return kOk;
    }

    if (app.got_subcommand(sy)) {
      const auto demo = synthetic::demo_data(g.seed, n_tasks, attempts);
      const auto prov = provenance({});
      std::ostringstream rcsv, mcsv;
      rcsv << prov.comment_line() << '\n';
      write_runs_csv(rcsv, demo.runs);
      mcsv << prov.comment_line() << '\n';
      write_models_csv(mcsv, demo.models);
      write_text(out_dir / "runs.csv", rcsv.str());
      write_text(out_dir / "models.csv", mcsv.str());
      out << demo.runs.size() << " synthetic runs -> " << out_dir.string() << '\n';
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace capcurve::cli
