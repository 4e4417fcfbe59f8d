#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include "capcurve/forecast.hpp"
#include "capcurve/synthetic.hpp"

using namespace capcurve;
using std::chrono::sys_days;

namespace {

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "no error thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

GrowthFit exp_fit(double b0, double b1) {
  GrowthFit f;
  f.spec = Specification::MetrExponential;
  f.kind = FitKind::OlsLog;
  f.params = ExpTrendParams{b0, b1};
  f.converged = true;
  return f;
}

GrowthFit curve_fit(SingleSigmoidParams p) {
  GrowthFit f;
  f.spec = Specification::SigmoidCurve;
  f.kind = FitKind::MseSigmoid;
  f.params = p;
  f.converged = true;
  return f;
}

GrowthFit link_fit(GrowthParams p) {
  GrowthFit f;
  f.spec = Specification::SigmoidLink;
  f.kind = FitKind::MapJoint;
  f.params = std::move(p);
  f.converged = true;
  return f;
}

ForecastSeries manual(const std::vector<double>& h) {
  ForecastSeries s;
  s.label = "manual";
  for (std::size_t i = 0; i < h.size(); ++i) s.points.push_back({Date{sys_days{make_date(2024, 1, 1)} + std::chrono::days{7 * static_cast<int>(i)}}, h[i]});
  return s;
}

long days_between(const Date& a, const Date& b) { return (sys_days{a} - sys_days{b}).count(); }

// Index of every sign change in the second difference of h.
std::vector<std::size_t> curvature_flips(const ForecastSeries& s) {
  std::vector<std::size_t> out;
  int prev = 0;
  for (std::size_t i = 1; i + 1 < s.points.size(); ++i) {
    const double dd = s.points[i + 1].horizon - 2 * s.points[i].horizon + s.points[i - 1].horizon;
    const int sign = dd > 0 ? 1 : dd < 0 ? -1 : 0;
    if (sign != 0 && prev != 0 && sign != prev) out.push_back(i);
    if (sign != 0) prev = sign;
  }
  return out;
}

const Date kStart = make_date(2019, 1, 1);
const Date kEnd = make_date(2029, 1, 1);

}  // namespace

TEST(InflectionDate, Examples) {
  EXPECT_EQ(inflection_date(1.0, 0.0), make_date(2019, 1, 1));
  EXPECT_EQ(inflection_date(2.0, -10.0), decode_date({}, 5.0));
  expect_error(ErrorKind::NonPositiveSlope, [] { inflection_date(0.0, 1.0); });
}

TEST(Project, ConstantFitIsFlat) {
  const auto s = project(exp_fit(1.5, 0.0), kStart, kEnd);
  ASSERT_GT(s.points.size(), 500u);
  for (const auto& p : s.points) EXPECT_DOUBLE_EQ(p.horizon, std::exp(1.5));
  EXPECT_EQ(s.points.front().date, kStart);
  EXPECT_LE(sys_days{s.points.back().date}, sys_days{kEnd});
  EXPECT_EQ(s.label, "metr-exp");
  for (std::size_t i = 1; i < s.points.size(); ++i) EXPECT_EQ(days_between(s.points[i].date, s.points[i - 1].date), 7);
}

TEST(Project, SigmoidCurvePlateaus) {
  const SingleSigmoidParams p{100, 2, -8};
  const auto s = project(curve_fit(p), kStart, kEnd);
  EXPECT_NEAR(s.points.back().horizon / p.gamma, 1.0, 0.01);
}

TEST(Project, Preconditions) {
  expect_error(ErrorKind::Precondition, [] { project(exp_fit(0, 1), kEnd, kStart); });
  ProjectOptions opt;
  opt.step_days = 0;
  expect_error(ErrorKind::Precondition, [&] { project(exp_fit(0, 1), kStart, kEnd, opt); });
  opt = {};
  opt.component = Component::Base;
  expect_error(ErrorKind::Precondition, [&] { project(exp_fit(0, 1), kStart, kEnd, opt); });
}

TEST(Project, Deterministic) {
  const auto fit = link_fit(synthetic::demo_truth());
  const auto a = project(fit, kStart, kEnd), b = project(fit, kStart, kEnd);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].horizon, b.points[i].horizon);
}

TEST(Project, ExponentialIsLogLinear) {
  const auto s = project(exp_fit(-1.3, 0.9), kStart, kEnd);
  for (std::size_t i = 1; i + 1 < s.points.size(); ++i) {
    const double dd = std::log(s.points[i + 1].horizon) - 2 * std::log(s.points[i].horizon) + std::log(s.points[i - 1].horizon);
    EXPECT_NEAR(dd, 0.0, 1e-10);
  }
}

TEST(Project, SigmoidLinkBounded) {
  const auto truth = synthetic::demo_truth();
  const auto s = project(link_fit(truth), make_date(2015, 1, 1), make_date(2060, 1, 1));
  for (const auto& p : s.points) EXPECT_LE(p.horizon, truth.gamma1 * (1 + truth.gamma2));
}

TEST(Project, ComponentsOfMultiplicativeFit) {
  const auto truth = synthetic::demo_truth();
  const auto fit = link_fit(truth);
  ProjectOptions base;
  base.component = Component::Base;
  const auto b = project(fit, kStart, kEnd, base);
  EXPECT_EQ(b.label, "sigmoid-link:base");
  for (const auto& p : b.points) EXPECT_DOUBLE_EQ(p.horizon, model_horizon(encode_date({}, p.date), false, truth));

  ProjectOptions reasoning;
  reasoning.component = Component::Reasoning;
  reasoning.base_reference = make_date(2025, 11, 19);
  const auto r = project(fit, kStart, kEnd, reasoning);
  const double b_ref = sigmoid_link(encode_date({}, make_date(2025, 11, 19)), truth.base[0], truth.base[1]);
  for (const auto& p : r.points) {
    const double rd = sigmoid_link(encode_date({}, p.date), truth.reasoning[0], truth.reasoning[1]);
    EXPECT_NEAR(p.horizon, truth.gamma1 * b_ref * (1 + truth.gamma2 * rd), 1e-12 * p.horizon);
  }
}

TEST(Project, CurvatureFlipsOnceAtTheInflection) {
  const SingleSigmoidParams p{150, 1.7, -1.7 * 6.4};
  const auto s = project(curve_fit(p), kStart, kEnd);
  const auto flips = curvature_flips(s);
  ASSERT_EQ(flips.size(), 1u);
  EXPECT_LE(std::abs(days_between(s.points[flips[0]].date, inflection_date(p.delta1, p.delta2))), 7);

  const auto truth = synthetic::demo_truth();
  ProjectOptions base;
  base.component = Component::Base;
  const auto b = project(link_fit(truth), kStart, kEnd, base);
  const auto bf = curvature_flips(b);
  ASSERT_EQ(bf.size(), 1u);
  EXPECT_LE(std::abs(days_between(b.points[bf[0]].date, inflection_date(truth.base[0], truth.base[1]))), 7);
}

TEST(Divergence, Examples) {
  const auto a = manual({1, 2, 4, 8, 16, 32});
  EXPECT_FALSE(divergence_date(a, a).has_value());
  EXPECT_FALSE(sustained_divergence_date(a, a).has_value());

  const auto twice = manual({2, 4, 8, 16, 32, 64});
  EXPECT_EQ(divergence_date(a, twice), a.points[0].date);
  EXPECT_EQ(divergence_date(twice, a), a.points[0].date);

  // exponential against its own truncation at index 3
  const auto knee = manual({1, 2, 4, 8, 8, 8});
  const auto d = divergence_date(a, knee);
  ASSERT_TRUE(d.has_value());
  EXPECT_LE(days_between(*d, a.points[3].date), 7);
  EXPECT_GT(days_between(*d, a.points[3].date), 0);
}

TEST(Divergence, SustainedIgnoresTransientGaps) {
  const auto a = manual({1, 1, 1, 1, 1, 1});
  const auto b = manual({1, 2, 1, 1, 2, 2});
  EXPECT_EQ(divergence_date(a, b), a.points[1].date);
  EXPECT_EQ(sustained_divergence_date(a, b), a.points[4].date);
  const auto c = manual({1, 2, 2, 2, 2, 1});
  EXPECT_FALSE(sustained_divergence_date(a, c).has_value());
}

TEST(Divergence, GridMismatchAndThreshold) {
  const auto a = manual({1, 2, 3});
  const auto b = manual({1, 2});
  expect_error(ErrorKind::GridMismatch, [&] { divergence_date(a, b); });
  auto c = manual({1, 2, 3});
  c.points[2].date = make_date(2030, 1, 1);
  expect_error(ErrorKind::GridMismatch, [&] { divergence_date(a, c); });
  expect_error(ErrorKind::Precondition, [&] { divergence_date(a, a, 1.0); });
}

TEST(Inflections, ComponentsAndPastFlag) {
  const auto truth = synthetic::demo_truth();
  const auto rows = inflections(link_fit(truth), make_date(2025, 6, 1));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].component, InflectionComponent::Base);
  EXPECT_TRUE(rows[0].in_past);
  EXPECT_EQ(rows[1].component, InflectionComponent::Reasoning);
  EXPECT_FALSE(rows[1].in_past);
  EXPECT_EQ(rows[1].date, decode_date({}, 7.43));

  EXPECT_TRUE(inflections(exp_fit(0, 1), make_date(2025, 6, 1)).empty());
  auto e = truth;
  e.link = LinkKind::Exponential;
  EXPECT_TRUE(inflections(link_fit(e), make_date(2025, 6, 1)).empty());
  EXPECT_EQ(inflections(curve_fit({10, 1, 0}), make_date(2025, 6, 1))[0].date, make_date(2019, 1, 1));
}

TEST(ComparisonReport, SortedWithPerfectRow) {
  const ModelTable models(std::vector<ModelRecord>{{"x", make_date(2021, 1, 1), true, false},
                                                   {"y", make_date(2023, 1, 1), true, false},
                                                   {"z", make_date(2024, 7, 1), true, false}});
  const auto exact = exp_fit(0.5, 0.8);
  std::vector<HorizonEstimate> h;
  for (const auto& m : models) {
    HorizonEstimate e;
    e.model_id = m.model_id;
    e.h_minutes = predict(exact, encode_date({}, m.release_date), false);
    h.push_back(e);
  }
  const std::vector<GrowthFit> fits{curve_fit({50, 1, -4}), exact, exp_fit(0.0, 0.8)};
  const auto rows = comparison_report(fits, h, models, make_date(2025, 1, 1));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].spec, Specification::MetrExponential);
  EXPECT_NEAR(rows[0].mse, 0.0, 1e-20);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i - 1].mse, rows[i].mse);

  expect_error(ErrorKind::Precondition, [&] { comparison_report(fits, {}, models, make_date(2025, 1, 1)); });
  expect_error(ErrorKind::Precondition, [&] { comparison_report({}, h, models, make_date(2025, 1, 1)); });
}

TEST(ForecastCsv, Layout) {
  const std::vector<ForecastSeries> s{manual({1.5, 2})};
  std::ostringstream os;
  write_forecast_csv(os, s);
  EXPECT_EQ(os.str(), "label,date,horizon_minutes\nmanual,2024-01-01,1.5\nmanual,2024-01-08,2.0\n");
}
