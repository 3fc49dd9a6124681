#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "cqr/errors.hpp"
#include "cqr/sample.hpp"
#include "cqr/step_distribution.hpp"

namespace cqr {

inline void require_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DomainError("quantile level must lie in (0,1), got " + std::to_string(tau));
  }
}

/// Quantile level together with the censoring distribution used by the
/// censored loss.
struct LossContext {
  double tau;
  StepDistribution censoring;

  LossContext(double level, StepDistribution g) : tau(level), censoring(std::move(g)) {
    require_tau(tau);
  }
};

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Check function rho_tau(a; y) = (y - a)(tau - 1[y <= a]).
inline double check_loss(double a, double y, double tau) {
  require_tau(tau);
  const double r = y - a;
  return r * (tau - (y <= a ? 1.0 : 0.0));
}

/// int_0^a G(s) ds, signed for a < 0.
inline double step_integral(const StepDistribution& g, double a) noexcept {
  return g.integral_from_zero(a);
}

/// Censored check loss phi_tau(a; y, G) = rho_tau(a; y) - (1 - tau) int_0^a G.
inline double censored_loss(double a, double y, double tau, const StepDistribution& g) {
  return check_loss(a, y, tau) - (1.0 - tau) * step_integral(g, a);
}

inline double censored_loss(double a, double y, const LossContext& ctx) {
  return censored_loss(a, y, ctx.tau, ctx.censoring);
}

namespace detail {

// ghat holds either one distribution per observation or a single shared one.
inline const StepDistribution& censoring_for(std::span<const StepDistribution> ghat,
                                             std::size_t i) {
  return ghat.size() == 1 ? ghat[0] : ghat[i];
}

inline void check_shapes(const Vector& beta, const SurvivalSample& sample,
                         std::span<const StepDistribution> ghat,
                         std::span<const double> weights) {
  if (beta.size() != sample.dim()) {
    throw ShapeError("coefficient vector has length " + std::to_string(beta.size()) +
                     ", design has " + std::to_string(sample.dim()) + " columns");
  }
  if (ghat.size() != 1 && ghat.size() != sample.size()) {
    throw ShapeError("need one censoring distribution per observation (or a single shared one)");
  }
  if (!weights.empty() && weights.size() != sample.size()) {
    throw ShapeError("weight vector length does not match the sample");
  }
}

}  // namespace detail

/// Empirical censored objective Q_n^c(beta) = sum_i phi_tau(beta'x_i; y_i, G_i).
///
/// With every G_i = 0 this is the uncensored quantile-regression objective.
/// Optional nonnegative weights multiply each term (weighted check loss used
/// by the inverse-censoring-probability estimator).
inline double objective(const Vector& beta, const SurvivalSample& sample, double tau,
                        std::span<const StepDistribution> ghat,
                        std::span<const double> weights = {}) {
  require_tau(tau);
  detail::check_shapes(beta, sample, ghat, weights);
  const Vector fitted = sample.x() * beta;
  CompensatedSum total;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    total.add(w * censored_loss(fitted(ii), sample.y()(ii), tau, detail::censoring_for(ghat, i)));
  }
  return total.value();
}

inline double objective(const Vector& beta, const SurvivalSample& sample, double tau,
                        const StepDistribution& shared, std::span<const double> weights = {}) {
  return objective(beta, sample, tau, std::span<const StepDistribution>(&shared, 1), weights);
}

}  // namespace cqr
