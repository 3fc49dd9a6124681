#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqr/errors.hpp"

namespace cqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-censored dataset: observed responses y = min(T, C), event
/// indicators delta = 1[T <= C] and an n x (d+1) design whose first column
/// is the intercept.
class SurvivalSample {
 public:
  SurvivalSample(Vector y, std::vector<int> delta, Matrix x)
      : y_(std::move(y)), delta_(std::move(delta)), x_(std::move(x)) {
    validate();
  }

  /// Builds the design by prepending an intercept column to `covariates`
  /// (n x d, d may be 0).
  static SurvivalSample with_intercept(Vector y, std::vector<int> delta,
                                       const Matrix& covariates) {
    const auto n = y.size();
    if (covariates.rows() != n && covariates.size() != 0) {
      throw ShapeError("covariate rows (" + std::to_string(covariates.rows()) +
                       ") do not match responses (" + std::to_string(n) + ")");
    }
    Matrix x(n, covariates.cols() + 1);
    x.col(0).setOnes();
    if (covariates.cols() > 0) x.rightCols(covariates.cols()) = covariates;
    return SurvivalSample(std::move(y), std::move(delta), std::move(x));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }
  /// Number of coefficients d+1.
  Eigen::Index dim() const noexcept { return x_.cols(); }
  /// Number of non-intercept covariates d.
  Eigen::Index covariate_dim() const noexcept { return x_.cols() - 1; }

  const Vector& y() const noexcept { return y_; }
  const std::vector<int>& delta() const noexcept { return delta_; }
  const Matrix& x() const noexcept { return x_; }

  bool uncensored(std::size_t i) const { return delta_[i] == 1; }

  std::size_t uncensored_count() const noexcept {
    std::size_t k = 0;
    for (int d : delta_) k += static_cast<std::size_t>(d);
    return k;
  }

  /// Non-intercept covariates of row i.
  Vector covariates(std::size_t i) const {
    return x_.row(static_cast<Eigen::Index>(i)).tail(covariate_dim()).transpose();
  }

  /// Rows picked by index (repetition allowed, as in bootstrap resampling).
  SurvivalSample subset(std::span<const std::size_t> rows) const {
    Vector y(static_cast<Eigen::Index>(rows.size()));
    std::vector<int> delta(rows.size());
    Matrix x(static_cast<Eigen::Index>(rows.size()), x_.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(rows[k]);
      if (rows[k] >= size()) throw ShapeError("subset row index out of range");
      y(static_cast<Eigen::Index>(k)) = y_(r);
      delta[k] = delta_[rows[k]];
      x.row(static_cast<Eigen::Index>(k)) = x_.row(r);
    }
    return SurvivalSample(std::move(y), std::move(delta), std::move(x));
  }

 private:
  void validate() const {
    const auto n = y_.size();
    if (n < 1) throw DomainError("survival sample must contain at least one observation");
    if (static_cast<Eigen::Index>(delta_.size()) != n || x_.rows() != n) {
      throw ShapeError("y, delta and x must have the same number of rows");
    }
    if (x_.cols() < 1) throw ShapeError("design matrix needs an intercept column");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (delta_[static_cast<std::size_t>(i)] != 0 && delta_[static_cast<std::size_t>(i)] != 1) {
        throw DomainError("event indicator at row " + std::to_string(i) + " is not 0/1");
      }
      if (x_(i, 0) != 1.0) {
        throw DomainError("first design column must be exactly 1 (row " + std::to_string(i) + ")");
      }
    }
  }

  Vector y_;
  std::vector<int> delta_;
  Matrix x_;
};

}  // namespace cqr
