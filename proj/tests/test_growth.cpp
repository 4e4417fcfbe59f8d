#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "capcurve/growth.hpp"
#include "capcurve/optimize.hpp"

using namespace capcurve;

namespace {

// Textbook recursive Cox-de Boor definition with the 0/0 = 0 convention and the last
// basis function closed at the right end of the span.
double cox_de_boor(std::size_t i, int p, double x, const std::vector<double>& U, double right_end) {
  if (p == 0) {
    if (U[i] <= x && x < U[i + 1]) return 1.0;
    if (x == right_end && U[i] < U[i + 1] && U[i + 1] == right_end) return 1.0;
    return 0.0;
  }
  double a = 0.0, b = 0.0;
  const double da = U[i + p] - U[i];
  const double db = U[i + p + 1] - U[i + 1];
  if (da > 0) a = (x - U[i]) / da * cox_de_boor(i, p - 1, x, U, right_end);
  if (db > 0) b = (U[i + p + 1] - x) / db * cox_de_boor(i + 1, p - 1, x, U, right_end);
  return a + b;
}

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "no error thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

GrowthParams sigmoid_params() {
  GrowthParams p;
  p.gamma1 = 40;
  p.gamma2 = 6;
  p.base = {1.6, -9.4};
  p.reasoning = {2.0, -14.9};
  return p;
}

SplineSpec knotted_spec() {
  // degree 3 with three interior knots, one of them doubled
  SplineSpec s;
  s.degree = 3;
  s.knots = {-1, -1, -1, -1, 0.5, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0};
  return s;
}

}  // namespace

TEST(SigmoidLink, Examples) {
  EXPECT_DOUBLE_EQ(sigmoid_link(4.0, 2.0, -8.0), 0.5);
  EXPECT_NEAR(sigmoid_link(2, 1, 0), 0.880797077977882, 1e-12);
  EXPECT_LT(sigmoid_link(-50, 1, 0), 1e-20 + std::exp(-50.0));
  EXPECT_NEAR(sigmoid_link(-50, 1, 0), std::exp(-50.0), 1e-20);
  EXPECT_NEAR(sigmoid_link(50, 1, 0), 1.0, 1e-20);
  EXPECT_TRUE(std::isfinite(sigmoid_link(-1e6, 1, 0)));
  expect_error(ErrorKind::DomainError, [] { sigmoid_link(0, 0, 0); });
}

TEST(ExponentialLink, Examples) {
  EXPECT_EQ(exponential_link(0, 1, 0), 1.0);
  EXPECT_NEAR(exponential_link(2, 0.5, 1), std::exp(2.0), 1e-12);
  expect_error(ErrorKind::OverflowGuard, [] { exponential_link(800, 1, 0); });
  expect_error(ErrorKind::DomainError, [] { exponential_link(0, -1, 0); });
}

TEST(BSplineBasis, DegreeZeroIndicator) {
  SplineSpec s;
  s.degree = 0;
  s.knots = {0, 1, 2};
  const auto B = bspline_basis(0.5, s);
  ASSERT_EQ(B.size(), 2u);
  EXPECT_EQ(B[0], 1.0);
  EXPECT_EQ(B[1], 0.0);
}

TEST(BSplineBasis, ClampedEndpointsInterpolate) {
  const auto s = SplineSpec::clamped_uniform(2, 5, 0, 1);
  EXPECT_TRUE(s.clamped());
  const auto left = bspline_basis(0, s);
  const auto right = bspline_basis(1, s);
  for (std::size_t i = 0; i < left.size(); ++i) {
    EXPECT_EQ(left[i], i == 0 ? 1.0 : 0.0);
    EXPECT_EQ(right[i], i + 1 == right.size() ? 1.0 : 0.0);
  }
}

TEST(BSplineBasis, MatchesRecursiveDefinition) {
  std::mt19937_64 rng(5);
  for (const auto& s : {SplineSpec::for_dates(0.1, 6.9), SplineSpec::clamped_uniform(5, 9, -2, 3), knotted_spec()}) {
    std::uniform_real_distribution<double> u(s.span_lo(), s.span_hi());
    std::vector<double> xs{s.span_lo(), s.span_hi()};
    for (int k = 0; k < 200; ++k) xs.push_back(u(rng));
    for (double x : xs) {
      const auto B = bspline_basis(x, s);
      ASSERT_EQ(B.size(), s.n_basis());
      for (std::size_t i = 0; i < B.size(); ++i)
        EXPECT_NEAR(B[i], cox_de_boor(i, s.degree, x, s.knots, s.span_hi()), 1e-12) << "x=" << x << " i=" << i;
    }
  }
}

TEST(BSplineBasis, PartitionOfUnityAndNonNegativity) {
  std::mt19937_64 rng(11);
  for (const auto& s : {SplineSpec::for_dates(0.1, 6.9), knotted_spec()}) {
    std::uniform_real_distribution<double> u(s.span_lo(), s.span_hi());
    for (int k = 0; k < 1000; ++k) {
      const auto B = bspline_basis(u(rng), s);
      double sum = 0.0;
      for (double b : B) {
        EXPECT_GE(b, 0.0);
        sum += b;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(BSplineBasis, DefaultShapeAndClamping) {
  const auto s = SplineSpec::for_dates(0.0, 7.0);
  EXPECT_EQ(s.degree, 5);
  EXPECT_EQ(s.n_basis(), 6u);
  EXPECT_TRUE(s.clamped());
  EXPECT_NEAR(s.span_lo(), -0.7, 1e-12);
  EXPECT_NEAR(s.span_hi(), 7.7, 1e-12);
  EXPECT_EQ(bspline_basis(-50, s), bspline_basis(s.span_lo(), s));
  EXPECT_EQ(bspline_basis(50, s), bspline_basis(s.span_hi(), s));
}

TEST(BSplineBasis, InvalidKnots) {
  SplineSpec s;
  s.degree = 2;
  s.knots = {0, 0, 1, 0.5, 1, 1};
  expect_error(ErrorKind::InvalidKnots, [&] { bspline_basis(0.2, s); });
  s.knots = {0, 1};
  expect_error(ErrorKind::InvalidKnots, [&] { bspline_basis(0.2, s); });
  s.knots = {1, 1, 1, 1, 1, 1};
  expect_error(ErrorKind::InvalidKnots, [&] { bspline_basis(1, s); });
}

TEST(SplineLink, Examples) {
  const auto s = SplineSpec::for_dates(0.0, 7.0);
  std::vector<double> c(6, 3.5);
  for (double d : {-0.5, 0.0, 1.3, 4.4, 7.6}) EXPECT_NEAR(spline_link(d, c, s), 3.5, 1e-12);

  // coefficient on one basis function only (others tiny) recovers that function
  std::vector<double> one(6, 1e-300);
  one[2] = 4.0;
  const double d = 2.9;
  EXPECT_NEAR(spline_link(d, one, s), 4.0 * cox_de_boor(2, 5, d, s.knots, s.span_hi()), 1e-12);

  c[3] = -1;
  expect_error(ErrorKind::NonPositiveCoefficient, [&] { spline_link(1, c, s); });
  std::vector<double> short_c(5, 1.0);
  expect_error(ErrorKind::LengthMismatch, [&] { spline_link(1, short_c, s); });
}

TEST(ModelHorizon, Examples) {
  GrowthParams p;
  p.gamma1 = 100;
  p.gamma2 = 3;
  p.base = {1.0, -2.0};       // b(2) = 0.5
  p.reasoning = {0.5, -1.0};  // r(2) = 0.5
  EXPECT_NEAR(model_horizon(2, true, p), 125.0, 1e-12);
  EXPECT_NEAR(model_horizon(2, false, p), 50.0, 1e-12);

  // reasoning parameters do not matter when k = 0
  auto q = p;
  q.reasoning = {7.0, 3.0};
  for (double d : {-3.0, 0.0, 4.0}) EXPECT_EQ(model_horizon(d, false, p), model_horizon(d, false, q));

  q = p;
  q.gamma2 = 0;
  for (double d : {-3.0, 0.0, 4.0}) EXPECT_EQ(model_horizon(d, true, q), model_horizon(d, false, q));
}

TEST(ModelHorizon, MonotoneAndBounded) {
  const auto p = sigmoid_params();
  double prev0 = 0, prev1 = 0;
  for (double d = -5; d <= 20; d += 0.05) {
    const double h0 = model_horizon(d, false, p), h1 = model_horizon(d, true, p);
    EXPECT_GE(h0, prev0);
    EXPECT_GE(h1, prev1);
    EXPECT_LT(h1, p.gamma1 * (1 + p.gamma2));
    prev0 = h0;
    prev1 = h1;
  }
  EXPECT_NEAR(model_horizon(60, true, p), p.gamma1 * (1 + p.gamma2), 1e-9);

  for (double d : {3.0, 6.0, 9.0}) {
    auto up = p;
    up.gamma1 *= 1.01;
    EXPECT_GT(model_horizon(d, true, up), model_horizon(d, true, p));
    up = p;
    up.gamma2 *= 1.01;
    EXPECT_GT(model_horizon(d, true, up), model_horizon(d, true, p));
  }

  auto e = p;
  e.link = LinkKind::Exponential;
  e.base = {0.8, -4};
  e.reasoning = {0.5, -3};
  double prev = 0;
  for (double d = -5; d <= 20; d += 0.1) {
    const double h = model_horizon(d, true, e);
    EXPECT_GT(h, prev);
    prev = h;
  }
}

TEST(ModelHorizon, ValidationErrors) {
  auto p = sigmoid_params();
  p.gamma1 = 0;
  expect_error(ErrorKind::DomainError, [&] { model_horizon(1, true, p); });
  p = sigmoid_params();
  p.base = {1.0};
  expect_error(ErrorKind::LengthMismatch, [&] { model_horizon(1, true, p); });
  p = sigmoid_params();
  p.link = LinkKind::BSpline;
  expect_error(ErrorKind::InvalidKnots, [&] { model_horizon(1, true, p); });
  p = sigmoid_params();
  p.link = LinkKind::Exponential;
  p.base = {1.0, 750.0};
  expect_error(ErrorKind::OverflowGuard, [&] { model_horizon(0, false, p); });
}

TEST(ModelHorizon, PureEvaluation) {
  const auto p = sigmoid_params();
  EXPECT_EQ(model_horizon(5.123, true, p), model_horizon(5.123, true, p));
  const auto s = SplineSpec::for_dates(0, 7);
  EXPECT_EQ(bspline_basis(3.3, s), bspline_basis(3.3, s));
}

TEST(Gradients, ModelHorizonAllLinks) {
  std::vector<GrowthParams> cases;
  cases.push_back(sigmoid_params());
  cases.back().reasoning = {2.0, -8.0};
  auto e = sigmoid_params();
  e.link = LinkKind::Exponential;
  e.base = {0.8, -1};
  e.reasoning = {0.5, -2};
  cases.push_back(e);
  auto b = sigmoid_params();
  b.link = LinkKind::BSpline;
  b.spline = SplineSpec::for_dates(0, 7);
  b.base = {1, 2, 3, 5, 8, 12};
  b.reasoning = {0.5, 0.8, 1, 2, 3, 5};
  cases.push_back(b);

  // interior dates: in the tails some components fall below central-difference roundoff
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.5, 5.5);
  for (const auto& p : cases) {
    for (bool k : {false, true}) {
      for (int i = 0; i < 20; ++i) {
        const double d = u(rng);
        const auto g = model_horizon_gradient(d, k, p);
        std::vector<double> flat{p.gamma1, p.gamma2};
        flat.insert(flat.end(), p.base.begin(), p.base.end());
        flat.insert(flat.end(), p.reasoning.begin(), p.reasoning.end());
        const Vector x = Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
        auto eval = [&](const Vector& v) {
          GrowthParams q = p;
          q.gamma1 = v[0];
          q.gamma2 = v[1];
          for (std::size_t j = 0; j < q.base.size(); ++j) q.base[j] = v[static_cast<Eigen::Index>(2 + j)];
          for (std::size_t j = 0; j < q.reasoning.size(); ++j) q.reasoning[j] = v[static_cast<Eigen::Index>(2 + q.base.size() + j)];
          return model_horizon(d, k, q);
        };
        EXPECT_LE(finite_difference_check(eval, Eigen::Map<const Vector>(g.data(), x.size()), x, 1e-6), 1e-5)
            << to_string(p.link) << " d=" << d << " k=" << k;
      }
    }
  }
}

TEST(Gradients, CurveEvaluators) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 8);
  const SingleSigmoidParams sp{120, 1.4, -8};
  const ExpTrendParams ep{0.2, 1.1};
  for (int i = 0; i < 30; ++i) {
    const double d = u(rng);
    const auto gs = single_sigmoid_gradient(d, sp);
    Vector x(3);
    x << sp.gamma, sp.delta1, sp.delta2;
    EXPECT_LE(finite_difference_check([&](const Vector& v) { return single_sigmoid_curve(d, {v[0], v[1], v[2]}); },
                                      Eigen::Map<const Vector>(gs.data(), 3), x, 1e-6),
              1e-5);
    const auto ge = metr_exponential_gradient(d, ep);
    Vector y(2);
    y << ep.beta0, ep.beta1;
    EXPECT_LE(finite_difference_check([&](const Vector& v) { return metr_exponential(d, {v[0], v[1]}); },
                                      Eigen::Map<const Vector>(ge.data(), 2), y, 1e-6),
              1e-5);
  }
}

TEST(SingleSigmoidCurve, Examples) {
  const SingleSigmoidParams p{200, 2, -10};
  EXPECT_DOUBLE_EQ(single_sigmoid_curve(5, p), 100.0);
  EXPECT_DOUBLE_EQ(p.midpoint(), 5.0);
  EXPECT_NEAR(single_sigmoid_curve(100, p), 200.0, 1e-9);
  expect_error(ErrorKind::DomainError, [] { single_sigmoid_curve(0, {0, 1, 0}); });
}

TEST(MetrExponential, ExamplesAndDoubling) {
  for (double d : {-3.0, 0.0, 9.0}) EXPECT_EQ(metr_exponential(d, {0, 0}), 1.0);
  EXPECT_NEAR(metr_exponential(1, {1, 1}), std::exp(2.0), 1e-12);
  expect_error(ErrorKind::OverflowGuard, [] { metr_exponential(701, {0, 1}); });

  EXPECT_NEAR(doubling_time({0, std::numbers::ln2}), 12.0, 1e-12);
  const ExpTrendParams seven{0, 12 * std::numbers::ln2 / 7};
  EXPECT_NEAR(doubling_time(seven), 7.0, 1e-12);
  // the horizon doubles over 7/12 of a year
  EXPECT_NEAR(metr_exponential(2.0 + 7.0 / 12.0, seven) / metr_exponential(2.0, seven), 2.0, 1e-12);
  expect_error(ErrorKind::NonPositiveSlope, [] { doubling_time({0, 0}); });
  expect_error(ErrorKind::NonPositiveSlope, [] { doubling_time({0, -0.3}); });
}
