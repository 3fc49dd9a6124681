#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqr/errors.hpp"

namespace cqr {

/// Right-continuous piecewise-constant c.d.f. estimate.
///
/// G(t) = 0 for t below the first jump time and G(t) = cdf_values[k] for
/// jump_times[k] <= t < jump_times[k+1]. A default-constructed object is the
/// zero distribution G = 0 (no censoring correction).
///
/// The primitive P(t) = int_{-inf}^t G(s) ds is tabulated at the jump times
/// so that integrals cost one binary search.
class StepDistribution {
 public:
  StepDistribution() = default;

  /// `times` must be nondecreasing and finite; repeated times are merged
  /// keeping the largest value. Values must be nondecreasing in [0, 1].
  StepDistribution(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) {
      throw ShapeError("jump_times and cdf_values differ in length");
    }
    times_.reserve(times.size());
    values_.reserve(values.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double t = times[k];
      const double v = values[k];
      if (!std::isfinite(t)) throw DomainError("jump time is not finite");
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DomainError("cdf value " + std::to_string(v) + " outside [0,1]");
      }
      if (!times_.empty()) {
        if (t < times_.back()) throw DomainError("jump times must be nondecreasing");
        if (v < values_.back()) throw DomainError("cdf values must be nondecreasing");
        if (t == times_.back()) {
          values_.back() = std::max(values_.back(), v);
          continue;
        }
      }
      times_.push_back(t);
      values_.push_back(v);
    }
    tabulate();
  }

  StepDistribution(const std::vector<double>& times, const std::vector<double>& values)
      : StepDistribution(std::span<const double>(times), std::span<const double>(values)) {}

  std::span<const double> jump_times() const noexcept { return times_; }
  std::span<const double> cdf_values() const noexcept { return values_; }
  bool empty() const noexcept { return times_.empty(); }

  double operator()(double t) const noexcept {
    const auto k = locate(t);
    return k < 0 ? 0.0 : values_[static_cast<std::size_t>(k)];
  }

  /// int_{-inf}^t G(s) ds; finite because G vanishes left of the first jump.
  double primitive(double t) const noexcept {
    const auto k = locate(t);
    if (k < 0) return 0.0;
    const auto j = static_cast<std::size_t>(k);
    return area_[j] + values_[j] * (t - times_[j]);
  }

  /// Signed int_0^a G(s) ds (equals -int_a^0 G for a < 0).
  double integral_from_zero(double a) const noexcept { return primitive(a) - primitive(0.0); }

  /// Distribution with every jump time multiplied by c > 0.
  StepDistribution rescaled(double c) const {
    std::vector<double> t(times_);
    for (auto& v : t) v *= c;
    return StepDistribution(t, values_);
  }

 private:
  // Index of the last jump time <= t, or -1.
  std::ptrdiff_t locate(double t) const noexcept {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return (it - times_.begin()) - 1;
  }

  void tabulate() {
    area_.assign(times_.size(), 0.0);
    for (std::size_t k = 1; k < times_.size(); ++k) {
      area_[k] = area_[k - 1] + values_[k - 1] * (times_[k] - times_[k - 1]);
    }
  }

  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<double> area_;
};

}  // namespace cqr
