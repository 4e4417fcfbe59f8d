#pragma once

// Seeded synthetic evaluation data for tests and demos. Outcomes are Bernoulli draws from
// p = sigmoid(beta * (log h - log t)) with h taken from a known growth curve.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "capcurve/dataset.hpp"
#include "capcurve/growth.hpp"
#include "capcurve/math.hpp"
#include "capcurve/optimize.hpp"

namespace capcurve::synthetic {

struct Task {
  std::string id;
  TaskFamily family = TaskFamily::OTHER;
  double minutes = 1.0;
};

/// Difficulties log-uniform on [lo, hi] minutes; families assigned round-robin.
inline std::vector<Task> make_tasks(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  const TaskFamily families[] = {TaskFamily::HCAST, TaskFamily::SWAA, TaskFamily::RE_BENCH};
  std::vector<Task> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "task_%03zu", i);
    out.push_back({id, families[i % 3], std::exp(u(rng))});
  }
  return out;
}

/// One record per (model, task, attempt); `horizon(model)` and `beta(model)` give the truth.
inline RunTable simulate_runs(const ModelTable& models, const std::vector<Task>& tasks, int attempts,
                              const std::function<double(const ModelRecord&)>& horizon,
                              const std::function<double(const ModelRecord&)>& beta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01;
  std::vector<RunRecord> runs;
  runs.reserve(models.size() * tasks.size() * static_cast<std::size_t>(attempts));
  for (const auto& m : models) {
    const double h = horizon(m), b = beta(m);
    for (const auto& t : tasks) {
      const double p = math::sigmoid(b * (std::log(h) - std::log(t.minutes)));
      for (int a = 0; a < attempts; ++a) runs.push_back({m.model_id, t.id, t.family, t.minutes, u01(rng) < p ? 1 : 0, a, 1.0});
    }
  }
  return RunTable(std::move(runs));
}

/// The fifteen frontier models with their public release dates. Reasoning flags mark
/// reasoning-post-trained releases from o1-preview on.
inline ModelTable frontier_models() {
  struct Row {
    const char* id;
    int y;
    unsigned m, d;
    bool thinking;
  };
  const Row rows[] = {
      {"GPT-2", 2019, 2, 14, false},
      {"Davinci-002", 2020, 5, 28, false},
      {"GPT-3.5 Turbo Instruct", 2022, 3, 15, false},
      {"GPT-4", 2023, 3, 14, false},
      {"GPT-4 (1106)", 2023, 11, 6, false},
      {"GPT-4o", 2024, 5, 13, false},
      {"Claude 3.5 Sonnet", 2024, 6, 20, false},
      {"GPT-o1-preview", 2024, 9, 12, true},
      {"Claude 3.5 Sonnet (Oct 2024)", 2024, 10, 22, false},
      {"GPT-o1-elicited", 2024, 12, 5, true},
      {"Claude 3.7 Sonnet", 2025, 2, 24, true},
      {"GPT-o3", 2025, 4, 16, true},
      {"Grok-4", 2025, 7, 9, true},
      {"GPT-5", 2025, 8, 7, true},
      {"GPT-5.1 Codex Max", 2025, 11, 19, true},
  };
  std::vector<ModelRecord> out;
  for (const auto& r : rows) out.push_back({r.id, make_date(r.y, r.m, r.d), true, r.thinking});
  return ModelTable(std::move(out));
}

/// Sigmoid-link truth used by the demo data: base inflection late 2024, reasoning inflection
/// mid 2026 (dates in years since 2019-01-01).
inline GrowthParams demo_truth() {
  GrowthParams p;
  p.link = LinkKind::Sigmoid;
  p.gamma1 = 40.0;
  p.gamma2 = 6.0;
  p.base = {1.6, -1.6 * 5.9};
  p.reasoning = {2.0, -2.0 * 7.43};
  return p;
}

struct DemoData {
  ModelTable models;
  RunTable runs;
  GrowthParams truth;
};

inline DemoData demo_data(std::uint64_t seed = 7, std::size_t n_tasks = 170, int attempts = 4) {
  DemoData out;
  out.models = frontier_models();
  out.truth = demo_truth();
  const auto tasks = make_tasks(n_tasks, 0.02, 1920.0, seed);
  const TimeScale scale;
  out.runs = simulate_runs(
      out.models, tasks, attempts,
      [&](const ModelRecord& m) { return model_horizon(encode_date(scale, m.release_date), m.k_thinking, out.truth); },
      [&](const ModelRecord& m) { return 0.6 + 0.4 * static_cast<double>(stable_hash(m.model_id) % 5) / 4.0; },
      seed + 1);
  return out;
}

}  // namespace capcurve::synthetic
