#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cqr/errors.hpp"
#include "cqr/mmsolver.hpp"
#include "cqr/parallel.hpp"
#include "cqr/sample.hpp"

namespace cqr {

struct BootstrapResult {
  double level = 0.95;
  /// Requested number of bootstrap samples B.
  int n_samples = 0;
  Vector estimate;
  Vector lower;
  Vector upper;
  /// Coefficients of the successful replicates, one row each.
  Matrix replicate_betas;
  int failures = 0;
  double bandwidth = 0.0;
};

/// 1-based rank of the type-1 empirical quantile at level q among B values:
/// ceil(q B), clamped to [1, B].
inline std::size_t order_statistic_rank(double q, std::size_t count) {
  const double scaled = q * static_cast<double>(count);
  // guard against q*B landing a rounding error above an integer
  auto rank = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
  return std::clamp<std::size_t>(rank, 1, count);
}

/// Per-coefficient percentile interval at `level` from replicate rows.
inline std::pair<Vector, Vector> percentile_interval(const Matrix& replicates, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0,1)");
  const auto b = static_cast<std::size_t>(replicates.rows());
  if (b == 0) throw InferenceError("no bootstrap replicates to summarize");
  const double alpha = (1.0 - level) / 2.0;
  const std::size_t lo_rank = order_statistic_rank(alpha, b);
  const std::size_t hi_rank = order_statistic_rank(1.0 - alpha, b);
  Vector lower(replicates.cols());
  Vector upper(replicates.cols());
  std::vector<double> column(b);
  for (Eigen::Index j = 0; j < replicates.cols(); ++j) {
    for (std::size_t r = 0; r < b; ++r) column[r] = replicates(static_cast<Eigen::Index>(r), j);
    std::sort(column.begin(), column.end());
    lower(j) = column[lo_rank - 1];
    upper(j) = column[hi_rank - 1];
  }
  return {lower, upper};
}

/// Percentile bootstrap for the censored estimator: B resamples of the rows
/// with replacement, each refit with the bandwidth of the original fit.
/// Replicate b uses the seed derive_seed(seed, b), so the output does not
/// depend on `threads`. More than 20% failed refits is an InferenceError.
inline BootstrapResult percentile_bootstrap(const SurvivalSample& sample, const FitConfig& config,
                                            int n_boot, double level, std::uint64_t seed,
                                            unsigned threads = 1) {
  if (n_boot < 2) throw DomainError("bootstrap needs at least two samples");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0,1)");
  config.validate();

  BootstrapResult out;
  out.level = level;
  out.n_samples = n_boot;
  const auto original = fit_censored_qr(sample, config);
  out.estimate = original.beta;
  out.bandwidth = original.diagnostics.bandwidth;

  FitConfig rep_cfg = config;
  rep_cfg.bandwidth = out.bandwidth;
  rep_cfg.record_trace = false;

  const std::size_t n = sample.size();
  std::vector<std::optional<Vector>> betas(static_cast<std::size_t>(n_boot));
  parallel_for(betas.size(), threads, [&](std::size_t b) {
    const std::uint64_t s = derive_seed(seed, b);
    std::mt19937_64 rng(s);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = pick(rng);
    FitConfig cfg = rep_cfg;
    cfg.seed = splitmix64(s);
    try {
      betas[b] = fit_censored_qr(sample.subset(rows), cfg).beta;
    } catch (const std::exception&) {
      betas[b].reset();
    }
  });

  std::vector<Vector> ok;
  for (auto& b : betas) {
    if (b) {
      ok.push_back(std::move(*b));
    } else {
      ++out.failures;
    }
  }
  if (out.failures * 5 > n_boot) {
    throw InferenceError(std::to_string(out.failures) + " of " + std::to_string(n_boot) +
                         " bootstrap refits failed");
  }
  out.replicate_betas.resize(static_cast<Eigen::Index>(ok.size()), sample.dim());
  for (std::size_t r = 0; r < ok.size(); ++r) {
    out.replicate_betas.row(static_cast<Eigen::Index>(r)) = ok[r].transpose();
  }
  std::tie(out.lower, out.upper) = percentile_interval(out.replicate_betas, level);
  return out;
}

}  // namespace cqr
