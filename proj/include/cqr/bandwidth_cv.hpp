#pragma once

#include <algorithm>
#include <cstddef>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "cqr/mmsolver.hpp"

namespace cqr {

struct CvResult {
  double bandwidth = 0.0;
  /// Mean held-out score per candidate (NaN when every fold failed).
  std::vector<double> scores;
  /// Folds skipped because the held-out part had no uncensored row.
  std::vector<int> skipped_folds;
};

/// Deterministic fold labels: a seeded shuffle of 0..n-1, position k goes to
/// fold k mod folds.
inline std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> label(n);
  for (std::size_t k = 0; k < n; ++k) label[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  return label;
}

/// K-fold cross validation of the Beran bandwidth. For each candidate h the
/// censored estimator is fit on the training folds; the held-out score is
/// Q^c on the held-out rows, with G_C(. | x) estimated from the training
/// folds, divided by the held-out size. The smallest mean score wins; ties
/// go to the smaller bandwidth.
inline CvResult cross_validate_bandwidth(const SurvivalSample& sample, double tau,
                                         const BandwidthGrid& grid, KernelSpec kernel,
                                         const FitConfig& solver) {
  require_tau(tau);
  grid.validate();
  if (sample.size() < static_cast<std::size_t>(grid.folds)) {
    throw DomainError("fewer observations than cross-validation folds");
  }
  CvResult out;
  out.scores.assign(grid.candidates.size(), std::numeric_limits<double>::quiet_NaN());
  if (grid.candidates.size() == 1) {
    out.bandwidth = grid.candidates.front();
    return out;
  }

  const auto label = fold_assignment(sample.size(), grid.folds, grid.seed);
  std::vector<SurvivalSample> train;
  std::vector<SurvivalSample> test;
  std::vector<int> usable;
  for (int f = 0; f < grid.folds; ++f) {
    std::vector<std::size_t> tr;
    std::vector<std::size_t> te;
    for (std::size_t i = 0; i < sample.size(); ++i) (label[i] == f ? te : tr).push_back(i);
    auto held = sample.subset(te);
    if (held.uncensored_count() == 0) {
      std::clog << "warning: cross-validation fold " << f
                << " has no uncensored held-out rows; skipped\n";
      out.skipped_folds.push_back(f);
      continue;
    }
    train.push_back(sample.subset(tr));
    test.push_back(std::move(held));
  }

  FitConfig cfg = solver;
  cfg.tau = tau;
  cfg.kernel = kernel;
  cfg.record_trace = false;

  bool any = false;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
    const double h = grid.candidates[c];
    double total = 0.0;
    int ok = 0;
    for (std::size_t f = 0; f < train.size(); ++f) {
      try {
        auto fit = fit_censored_qr(train[f], cfg, h);
        BeranEstimator estimator(train[f], kernel, h);
        auto ghat = estimate_at_rows(estimator, test[f]);
        total += objective(fit.beta, test[f], tau, ghat.distributions) /
                 static_cast<double>(test[f].size());
        ++ok;
      } catch (const std::runtime_error&) {
        // failed training fit: the fold does not count for this candidate
      } catch (const DomainError&) {
      }
    }
    if (ok == 0) continue;
    const double score = total / ok;
    out.scores[c] = score;
    if (!any || score < best_score) {
      best_score = score;
      out.bandwidth = h;
      any = true;
    }
  }
  if (!any) throw ConfigError("bandwidth cross validation failed for every candidate");
  return out;
}

inline double select_bandwidth_cv(const SurvivalSample& sample, double tau,
                                  const BandwidthGrid& grid, KernelSpec kernel,
                                  const FitConfig& solver) {
  return cross_validate_bandwidth(sample, tau, grid, kernel, solver).bandwidth;
}

inline double select_bandwidth_cv(const SurvivalSample& sample, double tau,
                                  const BandwidthGrid& grid, KernelSpec kernel) {
  return select_bandwidth_cv(sample, tau, grid, kernel, FitConfig{});
}

}  // namespace cqr
