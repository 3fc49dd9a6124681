#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

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

#include "cqr/bandwidth_cv.hpp"
#include "cqr/errors.hpp"
#include "cqr/inference.hpp"
#include "cqr/losscore.hpp"
#include "cqr/mmsolver.hpp"
#include "cqr/parallel.hpp"
#include "cqr/sample.hpp"

namespace cqr {

/// Bounds of the uniform censoring component: C = base(X) + U[lower, upper].
struct CensoringBounds {
  double lower;
  double upper;
};

/// One simulation design.
///
///   1: T = 3 + 5X + eta, X ~ U[0,1], eta ~ N(0,1), C ~ U[0, M]
///   2: T = 1 + 0.1X + (3 + (X - 0.5)^2)(eta - Phi^{-1}(tau)), X, eta ~ N(0,1),
///      C ~ U[m, M]
///   3: as 2, with C = 1 - 0.1X + U[m, M]
///   4: T = 1 + 0.5X1 + X2 + 1.5X3 + 2X4 + eta, X_j ~ N(0,1), eta ~ t(5),
///      C ~ U[m, M]
///
/// For designs 2-4 the calibration parameter is M and m = M - |M|/2.
struct DgpSpec {
  int id = 1;
  double tau = 0.5;
  double target_censoring = 0.15;
  std::size_t n = 200;
  std::optional<CensoringBounds> bounds;

  static DgpSpec make(int id, double tau, double target_censoring, std::size_t n) {
    DgpSpec s{id, tau, target_censoring, n, std::nullopt};
    s.validate();
    return s;
  }

  void validate() const {
    if (id < 1 || id > 4) throw DomainError("DGP id must be 1, 2, 3 or 4");
    require_tau(tau);
    if (!(target_censoring > 0.0 && target_censoring < 1.0)) {
      throw DomainError("target censoring proportion must lie in (0,1)");
    }
    if (n < 2) throw DomainError("DGP sample size must be at least 2");
  }

  int covariate_dim() const noexcept { return id == 4 ? 4 : 1; }

  /// Coefficients of the conditional tau-quantile of T given X.
  Vector true_beta() const {
    Vector b;
    switch (id) {
      case 1:
        b.resize(2);
        b << 3.0 + boost::math::quantile(boost::math::normal(), tau), 5.0;
        break;
      case 2:
      case 3:
        b.resize(2);
        b << 1.0, 0.1;
        break;
      default:
        b.resize(5);
        b << 1.0 + (tau == 0.5 ? 0.0 : boost::math::quantile(boost::math::students_t(5.0), tau)),
            0.5, 1.0, 1.5, 2.0;
        break;
    }
    return b;
  }

  /// Uniform-censoring bounds for calibration parameter M.
  CensoringBounds bounds_for(double m_param) const {
    if (id == 1) return {0.0, m_param};
    return {m_param - std::abs(m_param) / 2.0, m_param};
  }
};

/// Rejects (design, censoring, level) combinations outside the study grid:
/// design 1 uses p_c in {0.15, 0.40} at tau 0.5; designs 2-4 use p_c in
/// {0.30, 0.60}, tau in {0.3, 0.5, 0.7} for 2-3 and tau 0.5 for 4; tau 0.7
/// is never paired with 60% censoring.
inline void check_study_design(int id, double tau, double pc) {
  const auto is = [](double a, double b) { return std::abs(a - b) < 1e-9; };
  if (id < 1 || id > 4) throw ConfigError("DGP id must be 1, 2, 3 or 4");
  if (id == 1) {
    if (!is(pc, 0.15) && !is(pc, 0.40)) throw ConfigError("DGP 1 censoring must be 0.15 or 0.40");
    if (!is(tau, 0.5)) throw ConfigError("DGP 1 is studied at tau = 0.5 only");
    return;
  }
  if (!is(pc, 0.30) && !is(pc, 0.60)) {
    throw ConfigError("DGP " + std::to_string(id) + " censoring must be 0.30 or 0.60");
  }
  if (id == 4 && !is(tau, 0.5)) throw ConfigError("DGP 4 is studied at tau = 0.5 only");
  if (!is(tau, 0.3) && !is(tau, 0.5) && !is(tau, 0.7)) {
    throw ConfigError("tau must be 0.3, 0.5 or 0.7");
  }
  if (is(tau, 0.7) && is(pc, 0.60)) {
    throw ConfigError(
        "tau = 0.7 with 60% censoring is not identifiable: the fitted quantile would exceed the "
        "observable region");
  }
}

namespace detail {

struct LatentDraw {
  Vector covariates;
  double t;
  double base;     // covariate-dependent part of C
  double uniform;  // U[0,1] driving the uniform part of C
};

// Draw order per row is fixed: covariates, error, censoring uniform.
inline LatentDraw draw_latent(const DgpSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LatentDraw d;
  d.base = 0.0;
  if (spec.id == 1) {
    d.covariates.resize(1);
    d.covariates(0) = unif(rng);
    d.t = 3.0 + 5.0 * d.covariates(0) + normal(rng);
  } else if (spec.id == 2 || spec.id == 3) {
    static const boost::math::normal std_normal;
    d.covariates.resize(1);
    const double x = normal(rng);
    d.covariates(0) = x;
    const double shift = boost::math::quantile(std_normal, spec.tau);
    d.t = 1.0 + 0.1 * x + (3.0 + (x - 0.5) * (x - 0.5)) * (normal(rng) - shift);
    if (spec.id == 3) d.base = 1.0 - 0.1 * x;
  } else {
    std::student_t_distribution<double> student(5.0);
    d.covariates.resize(4);
    for (Eigen::Index j = 0; j < 4; ++j) d.covariates(j) = normal(rng);
    d.t = 1.0 + 0.5 * d.covariates(0) + d.covariates(1) + 1.5 * d.covariates(2) +
          2.0 * d.covariates(3) + student(rng);
  }
  d.uniform = unif(rng);
  return d;
}

inline double censoring_time(const LatentDraw& d, const CensoringBounds& b) {
  return d.base + b.lower + (b.upper - b.lower) * d.uniform;
}

}  // namespace detail

struct DgpDraw {
  SurvivalSample sample;
  Vector true_beta;
  /// Latent survival times T_i (used by the omniscient fit).
  Vector latent;
};

inline DgpDraw generate_dgp(const DgpSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (!spec.bounds) throw StateError("DGP censoring bounds are not calibrated");
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Eigen::Index>(spec.n);
  Vector y(n);
  Vector latent(n);
  std::vector<int> delta(spec.n);
  Matrix cov(n, spec.covariate_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto d = detail::draw_latent(spec, rng);
    const double c = detail::censoring_time(d, *spec.bounds);
    cov.row(i) = d.covariates.transpose();
    latent(i) = d.t;
    y(i) = std::min(d.t, c);
    delta[static_cast<std::size_t>(i)] = d.t <= c ? 1 : 0;
  }
  return {SurvivalSample::with_intercept(std::move(y), std::move(delta), cov), spec.true_beta(),
          std::move(latent)};
}

/// Monte Carlo censoring proportion P(T > C) of `spec` under `bounds`.
inline double censoring_proportion(const DgpSpec& spec, const CensoringBounds& bounds,
                                   std::size_t mc_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < mc_size; ++i) {
    const auto d = detail::draw_latent(spec, rng);
    censored += d.t > detail::censoring_time(d, bounds) ? 1 : 0;
  }
  return static_cast<double>(censored) / static_cast<double>(mc_size);
}

/// Finds the censoring bounds attaining `spec.target_censoring` by bisection
/// on M over a fixed set of mc_size latent draws (common random numbers, so
/// the estimated proportion is monotone in M).
inline DgpSpec calibrate_censoring(const DgpSpec& spec, std::size_t mc_size, std::uint64_t seed) {
  spec.validate();
  if (mc_size < 100) throw DomainError("calibration needs at least 100 draws");
  std::mt19937_64 rng(seed);
  std::vector<detail::LatentDraw> draws;
  draws.reserve(mc_size);
  for (std::size_t i = 0; i < mc_size; ++i) draws.push_back(detail::draw_latent(spec, rng));

  const auto proportion = [&](double m_param) {
    const auto b = spec.bounds_for(m_param);
    std::size_t censored = 0;
    for (const auto& d : draws) censored += d.t > detail::censoring_time(d, b) ? 1 : 0;
    return static_cast<double>(censored) / static_cast<double>(draws.size());
  };

  // censoring decreases as M grows
  double lo = spec.id == 1 ? 1e-9 : -1e3;
  double hi = 1e3;
  const double target = spec.target_censoring;
  if (proportion(lo) < target || proportion(hi) > target) {
    throw CalibrationError("target censoring " + std::to_string(target) +
                           " is unreachable for DGP " + std::to_string(spec.id));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (proportion(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double m_param = std::abs(proportion(lo) - target) < std::abs(proportion(hi) - target) ? lo : hi;
  if (std::abs(proportion(m_param) - target) > 0.005) {
    throw CalibrationError("calibration could not get within 0.005 of the target censoring");
  }
  DgpSpec out = spec;
  out.bounds = spec.bounds_for(m_param);
  return out;
}

/// Median over uncensored test rows of rho_tau at the fitted quantile.
inline double prediction_error(const Vector& beta, const SurvivalSample& test, double tau) {
  require_tau(tau);
  if (beta.size() != test.dim()) throw ShapeError("coefficient length does not match test design");
  std::vector<double> losses;
  const Vector fitted = test.x() * beta;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!test.uncensored(i)) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    losses.push_back(check_loss(fitted(ii), test.y()(ii), tau));
  }
  if (losses.empty()) throw DomainError("prediction error needs at least one uncensored test row");
  std::sort(losses.begin(), losses.end());
  const std::size_t k = losses.size();
  return k % 2 == 1 ? losses[k / 2] : 0.5 * (losses[k / 2 - 1] + losses[k / 2]);
}

inline double prediction_error(const QuantileFit& fit, const SurvivalSample& test, double tau) {
  return prediction_error(fit.beta, test, tau);
}

enum class Method { NEW, ICP, OMNI };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::NEW:
      return "NEW";
    case Method::ICP:
      return "ICP";
    case Method::OMNI:
      return "Omni";
  }
  return "?";
}

struct BandwidthPolicy {
  enum class Kind { per_replicate_cv, fixed_from_first, fixed };
  Kind kind = Kind::per_replicate_cv;
  BandwidthGrid grid = BandwidthGrid::linear(0.05, 0.5, 15, 5, 0);
  double bandwidth = 0.1;

  static BandwidthPolicy per_replicate(BandwidthGrid g) { return {Kind::per_replicate_cv, std::move(g), 0.0}; }
  static BandwidthPolicy from_first(BandwidthGrid g) { return {Kind::fixed_from_first, std::move(g), 0.0}; }
  static BandwidthPolicy fixed_at(double h) {
    return {Kind::fixed, BandwidthGrid::linear(h, h, 1, 2, 0), h};
  }
};

/// Per-replicate outcome of one method.
struct MethodOutcome {
  bool failed = false;
  Vector error;  // beta_hat - beta
  double mad = 0.0;
};

struct ReplicateRecord {
  std::vector<MethodOutcome> outcomes;  // parallel to the study's method list
  double censoring_rate = 0.0;
  double bandwidth = 0.0;
};

struct MethodSummary {
  Method method = Method::NEW;
  Vector bias;
  Vector rmse;
  Vector mae;  // median absolute error
  double mad = 0.0;
  double agg_bias = 0.0;  // sum_j |bias_j|
  double agg_rmse = 0.0;  // sqrt(sum_j mse_j)
  double agg_mae = 0.0;   // sum_j mae_j
  std::size_t used = 0;
  std::size_t failures = 0;
};

struct SimulationReport {
  DgpSpec spec;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::vector<MethodSummary> methods;
  std::vector<ReplicateRecord> records;
  double mean_censoring = 0.0;
};

/// Aggregates coefficient errors and MADs of the non-failed replicates.
inline MethodSummary summarize_method(Method method, const std::vector<MethodOutcome>& outcomes,
                                      Eigen::Index dim) {
  MethodSummary s;
  s.method = method;
  std::vector<const MethodOutcome*> ok;
  for (const auto& o : outcomes) {
    if (o.failed) {
      ++s.failures;
    } else {
      ok.push_back(&o);
    }
  }
  s.used = ok.size();
  s.bias = Vector::Zero(dim);
  s.rmse = Vector::Zero(dim);
  s.mae = Vector::Zero(dim);
  if (ok.empty()) return s;
  const double b = static_cast<double>(ok.size());
  std::vector<double> abs_err(ok.size());
  for (Eigen::Index j = 0; j < dim; ++j) {
    CompensatedSum sum;
    CompensatedSum sq;
    for (std::size_t r = 0; r < ok.size(); ++r) {
      const double e = ok[r]->error(j);
      sum.add(e);
      sq.add(e * e);
      abs_err[r] = std::abs(e);
    }
    s.bias(j) = sum.value() / b;
    s.rmse(j) = std::sqrt(sq.value() / b);
    std::sort(abs_err.begin(), abs_err.end());
    const std::size_t k = abs_err.size();
    s.mae(j) = k % 2 == 1 ? abs_err[k / 2] : 0.5 * (abs_err[k / 2 - 1] + abs_err[k / 2]);
  }
  CompensatedSum mad;
  for (const auto* o : ok) mad.add(o->mad);
  s.mad = mad.value() / b;
  s.agg_bias = s.bias.cwiseAbs().sum();
  s.agg_rmse = std::sqrt(s.rmse.squaredNorm());
  s.agg_mae = s.mae.sum();
  return s;
}

namespace detail {

inline MethodOutcome evaluate(const Vector& beta_hat, const DgpDraw& draw) {
  MethodOutcome o;
  o.error = beta_hat - draw.true_beta;
  o.mad = (draw.sample.x() * o.error).cwiseAbs().mean();
  return o;
}

inline SurvivalSample omniscient_sample(const DgpDraw& draw) {
  return SurvivalSample(draw.latent, std::vector<int>(draw.sample.size(), 1), draw.sample.x());
}

}  // namespace detail

/// Monte Carlo study: B replicates of the calibrated design, each fit with
/// every requested method. Replicate r draws its data from
/// derive_seed(derive_seed(seed, r), 0); failures are recorded and excluded.
inline SimulationReport run_study(const DgpSpec& spec, const std::vector<Method>& methods,
                                  std::size_t replicates, std::uint64_t seed,
                                  const BandwidthPolicy& policy, const FitConfig& solver = {},
                                  unsigned threads = 1) {
  if (!spec.bounds) throw StateError("DGP censoring bounds are not calibrated");
  if (replicates < 1) throw DomainError("study needs at least one replicate");
  if (methods.empty()) throw DomainError("study needs at least one method");

  FitConfig cfg = solver;
  cfg.tau = spec.tau;
  cfg.record_trace = false;

  std::optional<double> frozen;
  if (policy.kind == BandwidthPolicy::Kind::fixed) frozen = policy.bandwidth;
  if (policy.kind == BandwidthPolicy::Kind::fixed_from_first) {
    const std::uint64_t s0 = derive_seed(seed, 0);
    auto first = generate_dgp(spec, derive_seed(s0, 0));
    BandwidthGrid g = policy.grid;
    g.seed = derive_seed(s0, 1);
    frozen = select_bandwidth_cv(first.sample, spec.tau, g, cfg.kernel, cfg);
  }

  SimulationReport report;
  report.spec = spec;
  report.replicates = replicates;
  report.seed = seed;
  report.records.resize(replicates);

  parallel_for(replicates, threads, [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, r);
    auto draw = generate_dgp(spec, derive_seed(rs, 0));
    ReplicateRecord rec;
    rec.censoring_rate = 1.0 - static_cast<double>(draw.sample.uncensored_count()) /
                                   static_cast<double>(draw.sample.size());
    FitConfig local = cfg;
    local.seed = derive_seed(rs, 2);
    double h = frozen.value_or(0.0);
    if (!frozen) {
      BandwidthGrid g = policy.grid;
      g.seed = derive_seed(rs, 1);
      try {
        h = select_bandwidth_cv(draw.sample, spec.tau, g, cfg.kernel, local);
      } catch (const std::exception&) {
        h = 0.0;
      }
    }
    rec.bandwidth = h;
    for (Method m : methods) {
      MethodOutcome o;
      try {
        Vector beta;
        switch (m) {
          case Method::NEW:
            if (!(h > 0.0)) throw ConfigError("no usable bandwidth");
            beta = fit_censored_qr(draw.sample, local, h).beta;
            break;
          case Method::ICP:
            beta = fit_icp(draw.sample, spec.tau, kaplan_meier_censoring(draw.sample), local).beta;
            break;
          case Method::OMNI:
            beta = fit_uncensored_qr(detail::omniscient_sample(draw), spec.tau, local).beta;
            break;
        }
        o = detail::evaluate(beta, draw);
      } catch (const std::exception&) {
        o.failed = true;
      }
      rec.outcomes.push_back(std::move(o));
    }
    report.records[r] = std::move(rec);
  });

  const auto dim = spec.true_beta().size();
  for (std::size_t k = 0; k < methods.size(); ++k) {
    std::vector<MethodOutcome> col;
    col.reserve(replicates);
    for (const auto& rec : report.records) col.push_back(rec.outcomes[k]);
    report.methods.push_back(summarize_method(methods[k], col, dim));
  }
  CompensatedSum cens;
  for (const auto& rec : report.records) cens.add(rec.censoring_rate);
  report.mean_censoring = cens.value() / static_cast<double>(replicates);
  return report;
}

struct IntervalRecord {
  Vector lower;
  Vector upper;
};

struct CoverageReport {
  DgpSpec spec;
  double level = 0.95;
  int boot_samples = 0;
  double bandwidth = 0.0;
  std::size_t simulations = 0;
  std::size_t failures = 0;
  Vector ecp;  // empirical coverage probability per coefficient
  Vector eml;  // empirical mean interval length per coefficient
  std::vector<std::optional<IntervalRecord>> intervals;
};

/// Coverage indicator (closed intervals) and length averaged over the
/// available interval records.
inline std::pair<Vector, Vector> summarize_coverage(
    const std::vector<std::optional<IntervalRecord>>& intervals, const Vector& truth) {
  Vector hits = Vector::Zero(truth.size());
  Vector length = Vector::Zero(truth.size());
  std::size_t used = 0;
  for (const auto& iv : intervals) {
    if (!iv) continue;
    ++used;
    for (Eigen::Index j = 0; j < truth.size(); ++j) {
      hits(j) += (iv->lower(j) <= truth(j) && truth(j) <= iv->upper(j)) ? 1.0 : 0.0;
      length(j) += iv->upper(j) - iv->lower(j);
    }
  }
  if (used == 0) throw InferenceError("no simulation produced a bootstrap interval");
  return {hits / static_cast<double>(used), length / static_cast<double>(used)};
}

/// Bootstrap coverage study at a fixed bandwidth.
inline CoverageReport coverage_study(const DgpSpec& spec, std::size_t simulations, int boot_samples,
                                     double level, std::uint64_t seed, double bandwidth,
                                     const FitConfig& solver = {}, unsigned threads = 1) {
  if (!spec.bounds) throw StateError("DGP censoring bounds are not calibrated");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0,1)");
  if (simulations < 1) throw DomainError("coverage study needs at least one simulation");
  if (boot_samples < 2) throw DomainError("bootstrap needs at least two samples");
  if (!(bandwidth > 0.0)) throw DomainError("bandwidth must be positive");

  CoverageReport out;
  out.spec = spec;
  out.level = level;
  out.boot_samples = boot_samples;
  out.bandwidth = bandwidth;
  out.simulations = simulations;
  out.intervals.resize(simulations);

  FitConfig cfg = solver;
  cfg.tau = spec.tau;
  cfg.bandwidth = bandwidth;
  cfg.record_trace = false;

  parallel_for(simulations, threads, [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, r);
    auto draw = generate_dgp(spec, derive_seed(rs, 0));
    FitConfig local = cfg;
    local.seed = derive_seed(rs, 2);
    try {
      auto boot = percentile_bootstrap(draw.sample, local, boot_samples, level, derive_seed(rs, 3));
      out.intervals[r] = IntervalRecord{boot.lower, boot.upper};
    } catch (const std::exception&) {
      out.intervals[r].reset();
    }
  });
  for (const auto& iv : out.intervals) out.failures += iv ? 0 : 1;
  std::tie(out.ecp, out.eml) = summarize_coverage(out.intervals, spec.true_beta());
  return out;
}

}  // namespace cqr
