#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cqr/errors.hpp"
#include "cqr/kernel.hpp"
#include "cqr/losscore.hpp"
#include "cqr/sample.hpp"
#include "cqr/step_distribution.hpp"

namespace cqr {

namespace detail {

inline std::vector<std::size_t> order_by_response(const Vector& y) {
  std::vector<std::size_t> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return y(static_cast<Eigen::Index>(a)) < y(static_cast<Eigen::Index>(b));
  });
  return order;
}

/// Weighted product-limit estimate of the censoring c.d.f.: the "event" of
/// row j is a censoring (delta_j = 0). `order` sorts rows by y. At tied times
/// every row with y_j >= t is at risk, so censorings are processed before the
/// uncensored rows leaving at the same time. Rows with zero weight are
/// ignored. Hazards are clamped to [0, 1] so signed (higher-order kernel)
/// weights still yield a valid c.d.f.
inline StepDistribution product_limit_censoring(const Vector& y, const std::vector<int>& delta,
                                                std::span<const std::size_t> order,
                                                std::span<const double> w) {
  struct Group {
    double time;
    double weight;
    double censored;
  };
  std::vector<Group> groups;
  groups.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t j = order[k];
    const double wj = w.empty() ? 1.0 : w[j];
    if (wj == 0.0) continue;
    const double t = y(static_cast<Eigen::Index>(j));
    if (groups.empty() || groups.back().time != t) groups.push_back({t, 0.0, 0.0});
    groups.back().weight += wj;
    if (delta[j] == 0) groups.back().censored += wj;
  }

  // at-risk mass as suffix sums over groups
  std::vector<double> at_risk(groups.size());
  double running = 0.0;
  for (std::size_t g = groups.size(); g-- > 0;) {
    running += groups[g].weight;
    at_risk[g] = running;
  }

  std::vector<double> times;
  std::vector<double> values;
  double survival = 1.0;
  for (std::size_t g = 0; g < groups.size() && survival > 0.0; ++g) {
    if (!(groups[g].censored > 0.0) || !(at_risk[g] > 0.0)) continue;
    const double hazard = std::clamp(groups[g].censored / at_risk[g], 0.0, 1.0);
    if (hazard == 0.0) continue;
    survival = hazard >= 1.0 ? 0.0 : survival * (1.0 - hazard);
    times.push_back(groups[g].time);
    values.push_back(std::clamp(1.0 - survival, 0.0, 1.0));
  }
  return StepDistribution(times, values);
}

}  // namespace detail

/// Global Kaplan-Meier estimate of the censoring c.d.f. G_C, using 1 - delta
/// as the event indicator.
inline StepDistribution kaplan_meier_censoring(const SurvivalSample& sample) {
  const auto order = detail::order_by_response(sample.y());
  return detail::product_limit_censoring(sample.y(), sample.delta(), order, {});
}

/// Beran (locally weighted Kaplan-Meier) estimator of G_C(. | x).
///
/// Covariates (the non-intercept design columns) are divided by their sample
/// standard deviation; multivariate weights use a product kernel with one
/// shared bandwidth. Points where every kernel weight vanishes fall back to
/// the global Kaplan-Meier estimate.
class BeranEstimator {
 public:
  struct Estimate {
    StepDistribution distribution;
    bool fallback = false;
  };

  BeranEstimator(const SurvivalSample& train, KernelSpec kernel, double bandwidth)
      : y_(train.y()), delta_(train.delta()), kernel_(kernel), bandwidth_(bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
      throw DomainError("bandwidth must be a positive finite number");
    }
    const auto d = train.covariate_dim();
    const auto n = static_cast<Eigen::Index>(train.size());
    scale_ = Vector::Ones(d);
    z_ = train.x().rightCols(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (n > 1) {
        const double mean = z_.col(j).mean();
        const double var = (z_.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
        if (var > 0.0) scale_(j) = std::sqrt(var);
      }
      z_.col(j) /= scale_(j);
    }
    order_ = detail::order_by_response(y_);
    global_ = detail::product_limit_censoring(y_, delta_, order_, {});
  }

  double bandwidth() const noexcept { return bandwidth_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  const StepDistribution& global() const noexcept { return global_; }
  const Vector& scales() const noexcept { return scale_; }

  /// Nadaraya-Watson weights at x0 (raw covariate scale) normalized to sum
  /// to one. Empty when no weight is positive in total.
  std::vector<double> weights(const Vector& x0) const {
    if (x0.size() != z_.cols()) throw ShapeError("evaluation point has wrong covariate dimension");
    const Vector z0 = x0.cwiseQuotient(scale_);
    std::vector<double> w(static_cast<std::size_t>(z_.rows()), 0.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < z_.rows(); ++i) {
      double k = 1.0;
      for (Eigen::Index j = 0; j < z_.cols() && k != 0.0; ++j) {
        k *= kernel_eval(kernel_, (z_(i, j) - z0(j)) / bandwidth_);
      }
      w[static_cast<std::size_t>(i)] = k;
      total += k;
    }
    if (!(total > 0.0)) return {};
    for (auto& v : w) v /= total;
    return w;
  }

  Estimate at(const Vector& x0) const {
    const auto w = weights(x0);
    if (w.empty()) return {global_, true};
    return {detail::product_limit_censoring(y_, delta_, order_, w), false};
  }

 private:
  Vector y_;
  std::vector<int> delta_;
  KernelSpec kernel_;
  double bandwidth_;
  Matrix z_;
  Vector scale_;
  std::vector<std::size_t> order_;
  StepDistribution global_;
};

/// Beran estimate at a single covariate point.
inline StepDistribution beran(const SurvivalSample& sample, const Vector& x0, KernelSpec kernel,
                              double bandwidth) {
  return BeranEstimator(sample, kernel, bandwidth).at(x0).distribution;
}

/// Per-observation conditional censoring estimates.
struct CensoringEstimate {
  std::vector<StepDistribution> distributions;
  std::size_t fallbacks = 0;
};

/// Evaluates `estimator` at the covariates of every row of `rows`.
inline CensoringEstimate estimate_at_rows(const BeranEstimator& estimator,
                                          const SurvivalSample& rows) {
  CensoringEstimate out;
  out.distributions.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto e = estimator.at(rows.covariates(i));
    out.fallbacks += e.fallback ? 1 : 0;
    out.distributions.push_back(std::move(e.distribution));
  }
  return out;
}

inline CensoringEstimate conditional_censoring(const SurvivalSample& sample, KernelSpec kernel,
                                               double bandwidth) {
  return estimate_at_rows(BeranEstimator(sample, kernel, bandwidth), sample);
}

/// Candidate bandwidths for k-fold cross validation.
struct BandwidthGrid {
  std::vector<double> candidates;
  int folds = 5;
  std::uint64_t seed = 0;

  /// `count` candidates equally spaced on [lo, hi].
  static BandwidthGrid linear(double lo, double hi, int count, int folds, std::uint64_t seed) {
    if (count < 1) throw DomainError("bandwidth grid needs at least one candidate");
    BandwidthGrid g;
    g.folds = folds;
    g.seed = seed;
    g.candidates.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      g.candidates.push_back(count == 1 ? lo : lo + (hi - lo) * k / (count - 1));
    }
    g.validate();
    return g;
  }

  void validate() const {
    if (candidates.empty()) throw DomainError("bandwidth grid is empty");
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (!(candidates[k] > 0.0) || !std::isfinite(candidates[k])) {
        throw DomainError("bandwidth candidates must be positive and finite");
      }
      if (k > 0 && candidates[k] < candidates[k - 1]) {
        throw DomainError("bandwidth candidates must be increasing");
      }
    }
    if (folds < 2) throw DomainError("cross validation needs at least two folds");
  }
};

}  // namespace cqr
