#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "cqr/losscore.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cqr;

namespace {

StepDistribution two_jumps() { return StepDistribution({1.0, 2.0}, {0.5, 1.0}); }

}  // namespace

TEST(CheckLoss, HandValues) {
  EXPECT_DOUBLE_EQ(check_loss(1.0, 3.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(check_loss(3.0, 0.0, 0.25), 2.25);
  EXPECT_EQ(check_loss(1.7, 1.7, 0.3), 0.0);
}

TEST(CheckLoss, RejectsLevelOutsideUnitInterval) {
  EXPECT_THROW(check_loss(0.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(check_loss(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(check_loss(0.0, 1.0, -0.2), DomainError);
  EXPECT_THROW(check_loss(0.0, 1.0, std::nan("")), DomainError);
}

TEST(CheckLoss, NonnegativeZeroOnlyAtResponseAndConvex) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> t(0.01, 0.99);
  for (int k = 0; k < 2000; ++k) {
    const double a = u(rng);
    const double b = u(rng);
    const double y = u(rng);
    const double tau = t(rng);
    const double la = check_loss(a, y, tau);
    EXPECT_GE(la, 0.0);
    EXPECT_EQ(la == 0.0, a == y);
    EXPECT_DOUBLE_EQ(la, oracle::rho(a, y, tau));
    const double mid = check_loss(0.5 * (a + b), y, tau);
    EXPECT_LE(mid, 0.5 * (la + check_loss(b, y, tau)) + 1e-12);
  }
}

TEST(StepIntegral, HandValues) {
  EXPECT_DOUBLE_EQ(step_integral(two_jumps(), 3.0), 1.5);
  EXPECT_EQ(step_integral(StepDistribution({1.0, 3.0}, {0.0, 0.0}), 10.0), 0.0);
  EXPECT_EQ(step_integral(StepDistribution({1.0}, {0.5}), -2.0), 0.0);
  EXPECT_EQ(step_integral(StepDistribution(), 4.0), 0.0);
}

TEST(StepIntegral, SignedForNegativeArguments) {
  const StepDistribution g({-2.0, -1.0}, {0.25, 0.75});
  // int_{-3}^{0} G = 0.25 * 1 + 0.75 * 1
  EXPECT_DOUBLE_EQ(step_integral(g, -3.0), -1.0);
  EXPECT_DOUBLE_EQ(step_integral(g, 2.0), 1.5);
}

TEST(StepIntegral, AdditiveAndMatchesRectangleOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-4.0, 6.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> t(8);
    std::vector<double> g(8);
    for (auto& v : t) v = u(rng);
    for (auto& v : g) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::sort(t.begin(), t.end());
    std::sort(g.begin(), g.end());
    const StepDistribution G(t, g);
    double a = u(rng);
    double b = u(rng);
    if (a > b) std::swap(a, b);
    const double ia = step_integral(G, a);
    const double ib = step_integral(G, b);
    // int_a^b by the oracle, independent of the base point
    const double between = oracle::integral({t, g}, b) - oracle::integral({t, g}, a);
    EXPECT_NEAR(ib - ia, between, 1e-12);
    EXPECT_NEAR(ia, oracle::integral({t, g}, a), 1e-12);
  }
}

TEST(CensoredLoss, HandValues) {
  EXPECT_DOUBLE_EQ(censored_loss(3.0, 0.0, 0.5, two_jumps()), 0.75);
  // support of G above y: both terms vanish at a = y
  EXPECT_EQ(censored_loss(0.5, 0.5, 0.4, StepDistribution({2.0}, {0.3})), 0.0);
  const LossContext ctx(0.5, two_jumps());
  EXPECT_DOUBLE_EQ(censored_loss(3.0, 0.0, ctx), 0.75);
  EXPECT_THROW(LossContext(1.5, two_jumps()), DomainError);
}

TEST(CensoredLoss, ReducesToCheckLossWithoutCensoring) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  const StepDistribution zero;
  for (int k = 0; k < 2000; ++k) {
    const double a = u(rng);
    const double y = u(rng);
    const double tau = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    EXPECT_NEAR(censored_loss(a, y, tau, zero), check_loss(a, y, tau), 1e-12);
  }
}

TEST(CensoredLoss, DecreasesBelowResponseIncreasesAbove) {
  // G < 1 up to 4, so phi must fall strictly on a < y and rise on y < a < 4
  const StepDistribution g({0.5, 1.5, 2.5, 4.0}, {0.1, 0.4, 0.8, 1.0});
  for (double tau : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    for (double y : {0.2, 1.0, 2.0, 3.0}) {
      double prev = censored_loss(-3.0, y, tau, g);
      for (double a = -3.0 + 0.01; a < y - 1e-9; a += 0.01) {
        const double cur = censored_loss(a, y, tau, g);
        EXPECT_LT(cur, prev) << "tau=" << tau << " y=" << y << " a=" << a;
        prev = cur;
      }
      prev = censored_loss(y, y, tau, g);
      for (double a = y + 0.01; a < 4.0 - 1e-9; a += 0.01) {
        const double cur = censored_loss(a, y, tau, g);
        EXPECT_GT(cur, prev) << "tau=" << tau << " y=" << y << " a=" << a;
        prev = cur;
      }
    }
  }
}

TEST(Objective, HandValues) {
  const StepDistribution zero;
  auto one = SurvivalSample::with_intercept(Vector::Constant(1, 2.5), {1}, Matrix(1, 0));
  EXPECT_EQ(objective(Vector::Constant(1, 2.5), one, 0.3, zero), 0.0);

  Vector y(2);
  y << 0.0, 2.0;
  auto two = SurvivalSample::with_intercept(y, {1, 1}, Matrix(2, 0));
  EXPECT_DOUBLE_EQ(objective(Vector::Constant(1, 1.0), two, 0.5, zero), 1.0);
}

TEST(Objective, MatchesTermByTermOracle) {
  Vector y(5);
  y << 2.1, 4.7, 3.3, 5.8, 1.2;
  Matrix cov(5, 1);
  cov << 0.1, 0.9, 0.4, 0.7, 0.2;
  auto s = SurvivalSample::with_intercept(y, {1, 0, 1, 0, 1}, cov);
  std::vector<StepDistribution> ghat;
  std::vector<oracle::Step> ref;
  for (int i = 0; i < 5; ++i) {
    oracle::Step st{{1.0 + 0.3 * i, 3.0, 5.0 + 0.1 * i}, {0.1, 0.3 + 0.05 * i, 0.6}};
    ref.push_back(st);
    ghat.push_back(fixture::from_oracle(st));
  }
  Vector beta(2);
  beta << 1.5, 3.0;
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) {
    expected += oracle::phi(beta(0) + beta(1) * cov(i, 0), y(i), 0.35, ref[static_cast<std::size_t>(i)]);
  }
  EXPECT_NEAR(objective(beta, s, 0.35, ghat), expected, 1e-12);
}

TEST(Objective, ZeroCensoringEqualsNaiveQuantileLoss) {
  auto s = fixture::random_sample(60, 4, 0.0);
  Vector beta(2);
  beta << 2.8, 1.9;
  const double naive = oracle::qr_loss(s.x(), fixture::to_std(s.y()), beta, 0.3);
  EXPECT_NEAR(objective(beta, s, 0.3, StepDistribution()), naive, 1e-12);
}

TEST(Objective, ShapeErrors) {
  auto s = fixture::random_sample(10, 5, 0.0);
  std::vector<StepDistribution> wrong(3);
  EXPECT_THROW(objective(Vector::Zero(3), s, 0.5, StepDistribution()), ShapeError);
  EXPECT_THROW(objective(Vector::Zero(2), s, 0.5, wrong), ShapeError);
  std::vector<double> w(4, 1.0);
  EXPECT_THROW(objective(Vector::Zero(2), s, 0.5, StepDistribution(), w), ShapeError);
}

TEST(CompensatedSum, RecoversCancelledTerms) {
  CompensatedSum s;
  s.add(1.0);
  s.add(1e100);
  s.add(1.0);
  s.add(-1e100);
  EXPECT_EQ(s.value(), 2.0);
}

TEST(SurvivalSample, ValidatesInvariants) {
  Vector y(2);
  y << 1.0, 2.0;
  Matrix x = Matrix::Ones(2, 2);
  EXPECT_NO_THROW(SurvivalSample(y, {1, 0}, x));
  EXPECT_THROW(SurvivalSample(y, {1, 2}, x), DomainError);
  EXPECT_THROW(SurvivalSample(y, {1}, x), ShapeError);
  Matrix bad = x;
  bad(1, 0) = 0.5;
  EXPECT_THROW(SurvivalSample(y, {1, 1}, bad), DomainError);
  EXPECT_THROW(SurvivalSample(Vector(0), {}, Matrix(0, 1)), DomainError);
}

TEST(StepDistributionType, RightContinuousMergedAndValidated) {
  const StepDistribution g({1.0, 1.0, 2.0}, {0.2, 0.4, 0.9});
  ASSERT_EQ(g.jump_times().size(), 2u);
  EXPECT_EQ(g(0.999), 0.0);
  EXPECT_EQ(g(1.0), 0.4);
  EXPECT_EQ(g(1.5), 0.4);
  EXPECT_EQ(g(2.0), 0.9);
  EXPECT_EQ(g(1e9), 0.9);
  EXPECT_ANY_THROW(StepDistribution({1.0, 2.0}, {0.5, 0.4}));
  EXPECT_ANY_THROW(StepDistribution({2.0, 1.0}, {0.1, 0.4}));
  EXPECT_ANY_THROW(StepDistribution({1.0}, {1.2}));
  EXPECT_ANY_THROW(StepDistribution({std::nan("")}, {0.2}));
  EXPECT_ANY_THROW(StepDistribution(std::vector<double>{1.0}, std::vector<double>{}));
}
