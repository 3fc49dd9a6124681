#pragma once

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cqr/errors.hpp"
#include "cqr/kernel.hpp"
#include "cqr/losscore.hpp"
#include "cqr/sample.hpp"
#include "cqr/step_distribution.hpp"
#include "cqr/survdist.hpp"

namespace cqr {

struct FitConfig {
  double tau = 0.5;
  /// Convergence tolerance on both the coefficient step and the surrogate change.
  double delta_tol = 1e-9;
  int max_iter = 100000;
  /// Number of perturbed restarts in addition to the unperturbed start.
  int restarts = 3;
  /// Standard deviation of the restart noise relative to |beta_(0)_j|.
  double restart_scale = 0.1;
  KernelSpec kernel{};
  std::variant<double, BandwidthGrid> bandwidth = BandwidthGrid::linear(0.05, 0.5, 15, 5, 0);
  std::uint64_t seed = 0;
  /// Keep the surrogate values of every MM iteration in the diagnostics.
  bool record_trace = false;

  void validate() const {
    require_tau(tau);
    if (!(delta_tol > 0.0)) throw DomainError("delta_tol must be positive");
    if (max_iter < 1) throw DomainError("max_iter must be at least 1");
    if (restarts < 0) throw DomainError("restarts must be nonnegative");
    if (!(restart_scale >= 0.0)) throw DomainError("restart_scale must be nonnegative");
    if (const auto* h = std::get_if<double>(&bandwidth)) {
      if (!(*h > 0.0)) throw DomainError("bandwidth must be positive");
    } else {
      std::get<BandwidthGrid>(bandwidth).validate();
    }
  }
};

/// Surrogate values around one MM step: anchor = Q(beta_(m)) =
/// xi(beta_(m) | beta_(m)), surrogate = xi(beta_(m+1) | beta_(m)).
struct DescentRecord {
  double anchor;
  double surrogate;
};

struct FitDiagnostics {
  /// Some fitted quantile exceeds the largest observed response.
  bool c4_warning = false;
  std::size_t beran_fallbacks = 0;
  /// Inverse-censoring initialization was degenerate; beta_(0) came from an
  /// uncensored fit on all rows.
  bool icp_fallback = false;
  /// Inverse-censoring weights that hit the 1e10 cap.
  std::size_t capped_weights = 0;
  /// Largest |R_00 / R_pp| seen in the rank-revealing QR solves.
  double condition_number = 1.0;
  double bandwidth = std::numeric_limits<double>::quiet_NaN();
  double epsilon = 0.0;
  bool epsilon_clipped = false;
  std::vector<DescentRecord> trace;
};

struct QuantileFit {
  Vector beta;
  double tau = 0.5;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  int restart_chosen = 0;
  FitDiagnostics diagnostics;
};

struct EpsilonChoice {
  double value;
  bool clipped;
};

/// Solves eps * ln(eps) = -delta / n for eps in (0, 1/e) by bisection. When
/// -delta/n <= -1/e there is no root on that branch and 1/e is returned.
inline EpsilonChoice choose_epsilon(double delta, std::size_t n) {
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  if (n < 1) throw DomainError("sample size must be at least 1");
  const double target = -delta / static_cast<double>(n);
  const double e_inv = std::exp(-1.0);
  if (-target >= e_inv) return {e_inv, -target > e_inv};
  const auto f = [](double e) { return e * std::log(e); };
  // f decreases from 0 to -1/e on (0, 1/e]
  double lo = 0.0;
  double hi = e_inv;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-17 * hi) break;
  }
  const double best = (lo > 0.0 && std::abs(f(lo) - target) < std::abs(f(hi) - target)) ? lo : hi;
  return {best, false};
}

inline double epsilon_from_delta(double delta, std::size_t n) {
  return choose_epsilon(delta, n).value;
}

namespace detail {

inline const StepDistribution& zero_distribution() {
  static const StepDistribution zero;
  return zero;
}

inline std::span<const StepDistribution> no_censoring() {
  return {&zero_distribution(), 1};
}

struct MmStep {
  Vector beta;
  double condition;
};

/// One MM update: weighted least squares with working weights
/// a_i = w_i / (2(eps + |r_i|)) and right-hand side a_i y_i + w_i(tau - 1/2)
/// + w_i(1 - tau) G_i(f_i), solved by column-pivoted QR of sqrt(a) X.
inline MmStep mm_step(const Vector& beta_m, const SurvivalSample& sample, double tau,
                      std::span<const StepDistribution> ghat, double eps,
                      std::span<const double> weights) {
  const auto p = sample.dim();
  const Vector fitted = sample.x() * beta_m;
  std::vector<Eigen::Index> rows;
  rows.reserve(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (weights.empty() || weights[i] > 0.0) rows.push_back(static_cast<Eigen::Index>(i));
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m < p) {
    throw RankError("fewer positively weighted rows than coefficients",
                    std::numeric_limits<double>::infinity());
  }
  Matrix a_x(m, p);
  Vector target(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    const auto ui = static_cast<std::size_t>(i);
    const double w = weights.empty() ? 1.0 : weights[ui];
    const double y = sample.y()(i);
    const double f = fitted(i);
    const double a = w / (2.0 * (eps + std::abs(y - f)));
    const double g = censoring_for(ghat, ui)(f);
    const double rhs = a * y + w * ((tau - 0.5) + (1.0 - tau) * g);
    const double root = std::sqrt(a);
    a_x.row(k) = root * sample.x().row(i);
    target(k) = rhs / root;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(a_x);
  const auto& r = qr.matrixR();
  const double r_max = std::abs(r(0, 0));
  const double r_min = std::abs(r(p - 1, p - 1));
  const double condition = r_min > 0.0 ? r_max / r_min : std::numeric_limits<double>::infinity();
  if (qr.rank() < p || !std::isfinite(condition)) {
    throw RankError("MM normal matrix is singular (condition " + std::to_string(condition) + ")",
                    condition);
  }
  return {qr.solve(target), condition};
}

/// xi(beta | beta_m) - Q(beta_m), accumulated from per-row differences so the
/// value vanishes exactly at beta = beta_m.
inline double surrogate_gap(const Vector& beta, const Vector& beta_m, const SurvivalSample& sample,
                            double tau, std::span<const StepDistribution> ghat, double eps,
                            std::span<const double> weights) {
  const Vector f_m = sample.x() * beta_m;
  const Vector df = sample.x() * (beta - beta_m);
  CompensatedSum total;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    const double r_m = sample.y()(ii) - f_m(ii);
    const double r = r_m - df(ii);
    const double s = eps + std::abs(r_m);
    const double g = censoring_for(ghat, i)(f_m(ii));
    const double quad = -df(ii) * (r + r_m) / (4.0 * s);
    const double lin = -(tau - 0.5) * df(ii) - (1.0 - tau) * df(ii) * g;
    total.add(w * (quad + lin));
  }
  return total.value();
}

struct MmRun {
  Vector beta;
  double objective;
  int iterations;
  bool converged;
  double condition;
};

/// Iterates MM updates from `start` until both the coefficient step and the
/// surrogate change are <= tol (or max_iter). A non-converged run returns the
/// iterate with the smallest objective.
inline MmRun run_mm(const Vector& start, const SurvivalSample& sample, double tau,
                    std::span<const StepDistribution> ghat, double eps,
                    std::span<const double> weights, double tol, int max_iter,
                    std::vector<DescentRecord>* trace) {
  Vector beta = start;
  double q = objective(beta, sample, tau, ghat, weights);
  Vector best = beta;
  double best_q = q;
  double condition = 1.0;
  for (int it = 1; it <= max_iter; ++it) {
    MmStep step = mm_step(beta, sample, tau, ghat, eps, weights);
    condition = std::max(condition, step.condition);
    const double gap = surrogate_gap(step.beta, beta, sample, tau, ghat, eps, weights);
    if (trace != nullptr) trace->push_back({q, q + gap});
    const double move = (step.beta - beta).norm();
    beta = std::move(step.beta);
    q = objective(beta, sample, tau, ghat, weights);
    if (q < best_q) {
      best_q = q;
      best = beta;
    }
    if (move <= tol && std::abs(gap) <= tol) return {beta, q, it, true, condition};
  }
  return {best, best_q, max_iter, false, condition};
}

/// Weighted least-squares start on the positively weighted rows.
inline Vector least_squares_start(const SurvivalSample& sample, std::span<const double> weights) {
  const auto p = sample.dim();
  Matrix wx(static_cast<Eigen::Index>(sample.size()), p);
  Vector wy(static_cast<Eigen::Index>(sample.size()));
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double w = weights.empty() ? 1.0 : std::sqrt(weights[i]);
    wx.row(ii) = w * sample.x().row(ii);
    wy(ii) = w * sample.y()(ii);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(wx);
  if (qr.rank() < p) throw RankError("least-squares start is rank deficient", std::numeric_limits<double>::infinity());
  return qr.solve(wy);
}

inline bool exceeds_observable_region(const Vector& beta, const SurvivalSample& sample) {
  const double y_max = sample.y().maxCoeff();
  return ((sample.x() * beta).array() > y_max).any();
}

}  // namespace detail

/// One MM iteration beta_(m) -> beta_(m+1).
inline Vector mm_update(const Vector& beta_m, const SurvivalSample& sample, double tau,
                        std::span<const StepDistribution> ghat, double eps,
                        std::span<const double> weights = {}) {
  require_tau(tau);
  detail::check_shapes(beta_m, sample, ghat, weights);
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  return detail::mm_step(beta_m, sample, tau, ghat, eps, weights).beta;
}

/// Surrogate xi^c(beta | beta_m), anchored so that xi^c(beta_m | beta_m) = Q^c(beta_m).
inline double surrogate_value(const Vector& beta, const Vector& beta_m, const SurvivalSample& sample,
                              double tau, std::span<const StepDistribution> ghat, double eps,
                              std::span<const double> weights = {}) {
  require_tau(tau);
  detail::check_shapes(beta, sample, ghat, weights);
  detail::check_shapes(beta_m, sample, ghat, weights);
  return objective(beta_m, sample, tau, ghat, weights) +
         detail::surrogate_gap(beta, beta_m, sample, tau, ghat, eps, weights);
}

/// Worst-case amount by which the eps-smoothed surrogate can undercut the
/// check loss, per observation: eps^2 / (4(eps + |r_m|)) <= eps / 4.
inline double surrogate_slack(double eps) noexcept { return eps / 4.0; }

/// Plain (optionally weighted) linear quantile regression by MM, started
/// from weighted least squares. The objective is the weighted check loss.
inline QuantileFit fit_uncensored_qr(const SurvivalSample& sample, double tau,
                                     const FitConfig& config = {},
                                     std::span<const double> weights = {}) {
  require_tau(tau);
  if (!weights.empty() && weights.size() != sample.size()) {
    throw ShapeError("weight vector length does not match the sample");
  }
  const auto eps = choose_epsilon(config.delta_tol, sample.size());
  QuantileFit fit;
  fit.tau = tau;
  fit.diagnostics.epsilon = eps.value;
  fit.diagnostics.epsilon_clipped = eps.clipped;
  const Vector start = detail::least_squares_start(sample, weights);
  auto run = detail::run_mm(start, sample, tau, detail::no_censoring(), eps.value, weights,
                            config.delta_tol, config.max_iter,
                            config.record_trace ? &fit.diagnostics.trace : nullptr);
  fit.beta = std::move(run.beta);
  fit.objective_value = objective(fit.beta, sample, tau, detail::no_censoring(), weights);
  fit.iterations = run.iterations;
  fit.converged = run.converged;
  fit.diagnostics.condition_number = run.condition;
  fit.diagnostics.c4_warning = detail::exceeds_observable_region(fit.beta, sample);
  return fit;
}

/// Inverse-censoring weights Delta_i / (1 - G(y_i)); capped at 1e10 when
/// 1 - G(y_i) <= 1e-10. Returns the number of capped weights.
inline std::size_t inverse_censoring_weights(const SurvivalSample& sample,
                                             const StepDistribution& ghat_global,
                                             std::vector<double>& weights) {
  constexpr double floor = 1e-10;
  constexpr double cap = 1e10;
  std::size_t capped = 0;
  weights.assign(sample.size(), 0.0);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample.uncensored(i)) continue;
    const double surv = 1.0 - ghat_global(sample.y()(static_cast<Eigen::Index>(i)));
    if (surv <= floor) {
      weights[i] = cap;
      ++capped;
    } else {
      weights[i] = std::min(cap, 1.0 / surv);
    }
  }
  return capped;
}

/// Inverse-censoring-probability estimator: weighted quantile regression
/// with w_i = Delta_i / (1 - G(y_i)), G the global Kaplan-Meier censoring
/// estimate. Throws DomainError when no row carries positive weight.
inline QuantileFit fit_icp(const SurvivalSample& sample, double tau,
                           const StepDistribution& ghat_global, const FitConfig& config = {}) {
  std::vector<double> weights;
  const std::size_t capped = inverse_censoring_weights(sample, ghat_global, weights);
  const auto positive = std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
  if (positive == 0) throw DomainError("inverse-censoring weights are all zero");
  auto fit = fit_uncensored_qr(sample, tau, config, weights);
  fit.diagnostics.capped_weights = capped;
  return fit;
}

inline double select_bandwidth_cv(const SurvivalSample& sample, double tau,
                                  const BandwidthGrid& grid, KernelSpec kernel,
                                  const FitConfig& solver);

/// Censored quantile regression with a precomputed conditional censoring
/// estimate (one distribution per row, or one shared):
///   beta_(0) from the inverse-censoring estimator (uncensored fit on all
///   rows if that is degenerate), MM iterations from beta_(0) and from
///   `restarts` Gaussian perturbations of it, lowest Q^c wins.
inline QuantileFit fit_censored_qr(const SurvivalSample& sample, const FitConfig& config,
                                   std::span<const StepDistribution> ghat) {
  config.validate();
  const double tau = config.tau;
  if (sample.size() < static_cast<std::size_t>(sample.dim()) + 1) {
    throw DomainError("need at least d+2 observations to fit");
  }
  if (ghat.size() != 1 && ghat.size() != sample.size()) {
    throw ShapeError("need one censoring distribution per observation (or a single shared one)");
  }

  QuantileFit fit;
  fit.tau = tau;
  FitConfig init_cfg = config;
  init_cfg.record_trace = false;

  Vector start;
  try {
    auto icp = fit_icp(sample, tau, kaplan_meier_censoring(sample), init_cfg);
    fit.diagnostics.capped_weights = icp.diagnostics.capped_weights;
    start = std::move(icp.beta);
  } catch (const DomainError&) {
    fit.diagnostics.icp_fallback = true;
  } catch (const RankError&) {
    fit.diagnostics.icp_fallback = true;
  }
  if (fit.diagnostics.icp_fallback) start = fit_uncensored_qr(sample, tau, init_cfg).beta;

  const auto eps = choose_epsilon(config.delta_tol, sample.size());
  fit.diagnostics.epsilon = eps.value;
  fit.diagnostics.epsilon_clipped = eps.clipped;

  double y_sd = 0.0;
  {
    const double mean = sample.y().mean();
    y_sd = std::sqrt((sample.y().array() - mean).square().mean());
    if (!(y_sd > 0.0)) y_sd = 1.0;
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto* trace = config.record_trace ? &fit.diagnostics.trace : nullptr;

  bool have_best = false;
  detail::MmRun best{};
  for (int r = 0; r <= config.restarts; ++r) {
    Vector init = start;
    if (r > 0) {
      for (Eigen::Index j = 0; j < init.size(); ++j) {
        const double magnitude = start(j) != 0.0 ? std::abs(start(j)) : y_sd;
        init(j) += config.restart_scale * magnitude * noise(rng);
      }
    }
    auto run = detail::run_mm(init, sample, tau, ghat, eps.value, {}, config.delta_tol,
                              config.max_iter, trace);
    fit.diagnostics.condition_number = std::max(fit.diagnostics.condition_number, run.condition);
    const double margin = 1e-10 * std::max(1.0, std::abs(best.objective));
    if (!have_best || run.objective < best.objective - margin) {
      best = std::move(run);
      fit.restart_chosen = r;
      have_best = true;
    }
  }

  fit.beta = std::move(best.beta);
  fit.objective_value = objective(fit.beta, sample, tau, ghat);
  fit.iterations = best.iterations;
  fit.converged = best.converged;
  fit.diagnostics.c4_warning = detail::exceeds_observable_region(fit.beta, sample);
  return fit;
}

/// Censored quantile regression with Beran estimates of G_C(. | x_i) at a
/// fixed bandwidth.
inline QuantileFit fit_censored_qr(const SurvivalSample& sample, const FitConfig& config,
                                   double bandwidth) {
  auto ghat = conditional_censoring(sample, config.kernel, bandwidth);
  auto fit = fit_censored_qr(sample, config, ghat.distributions);
  fit.diagnostics.beran_fallbacks = ghat.fallbacks;
  fit.diagnostics.bandwidth = bandwidth;
  return fit;
}

/// Censored quantile regression; the bandwidth is taken from the config or
/// chosen by cross validation over the configured grid.
inline QuantileFit fit_censored_qr(const SurvivalSample& sample, const FitConfig& config) {
  config.validate();
  double h = 0.0;
  if (const auto* fixed = std::get_if<double>(&config.bandwidth)) {
    h = *fixed;
  } else {
    h = select_bandwidth_cv(sample, config.tau, std::get<BandwidthGrid>(config.bandwidth),
                            config.kernel, config);
  }
  return fit_censored_qr(sample, config, h);
}

/// Brute-force minimizer of Q^c over a Cartesian grid, one axis per
/// coefficient (at most two coefficients). Ties keep the first grid point
/// in lexicographic order.
inline Vector grid_oracle_quantile(const SurvivalSample& sample, double tau,
                                   std::span<const StepDistribution> ghat,
                                   const std::vector<std::vector<double>>& axes) {
  require_tau(tau);
  const auto p = sample.dim();
  if (p > 2) throw DomainError("grid oracle supports at most one covariate");
  if (static_cast<Eigen::Index>(axes.size()) != p) {
    throw ShapeError("grid oracle needs one axis per coefficient");
  }
  for (const auto& axis : axes) {
    if (axis.empty()) throw DomainError("grid oracle axis is empty");
  }
  Vector beta(p);
  Vector best(p);
  double best_q = std::numeric_limits<double>::infinity();
  const std::size_t inner = p == 2 ? axes[1].size() : 1;
  for (double b0 : axes[0]) {
    for (std::size_t k = 0; k < inner; ++k) {
      beta(0) = b0;
      if (p == 2) beta(1) = axes[1][k];
      const double q = objective(beta, sample, tau, ghat);
      if (q < best_q) {
        best_q = q;
        best = beta;
      }
    }
  }
  return best;
}

}  // namespace cqr

#include "cqr/bandwidth_cv.hpp"
