#pragma once

#include <random>
#include <vector>

#include "cqr/sample.hpp"
#include "cqr/step_distribution.hpp"
#include "oracles.hpp"

namespace fixture {

/// n rows of y = b0 + b1 x + N(0,1), x ~ U[0,1], censored by C ~ U[0, c_max]
/// (no censoring when c_max <= 0). `covariate` false gives an
/// intercept-only design.
inline cqr::SurvivalSample random_sample(std::size_t n, std::uint64_t seed, double c_max,
                                         bool covariate = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eta(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cqr::Vector y(static_cast<Eigen::Index>(n));
  std::vector<int> delta(n);
  cqr::Matrix cov(static_cast<Eigen::Index>(n), covariate ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double x = u(rng);
    const double t = 3.0 + (covariate ? 2.0 * x : 0.0) + eta(rng);
    const double c = c_max > 0.0 ? c_max * u(rng) : 1e300;
    if (covariate) cov(ii, 0) = x;
    y(ii) = std::min(t, c);
    delta[i] = t <= c ? 1 : 0;
  }
  return cqr::SurvivalSample::with_intercept(std::move(y), std::move(delta), cov);
}

inline std::vector<double> to_std(const cqr::Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline oracle::Step to_oracle(const cqr::StepDistribution& g) {
  oracle::Step s;
  s.t.assign(g.jump_times().begin(), g.jump_times().end());
  s.g.assign(g.cdf_values().begin(), g.cdf_values().end());
  return s;
}

inline cqr::StepDistribution from_oracle(const oracle::Step& s) { return {s.t, s.g}; }

}  // namespace fixture
