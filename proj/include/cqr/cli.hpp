#pragma once

// Command-line driver shared by the `cqr` executable and the tests.
// Exit status: 0 success, 2 usage or input validation, 3 numerical failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cqr/cqr.hpp"
#include "cqr/data_io.hpp"

namespace cqr::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;
inline constexpr int exit_numeric = 3;

struct CliConfig {
  std::string command;
  std::string input;
  std::string output;
  std::string table;
  double tau = 0.5;
  std::string method = "new";
  std::string kernel;  // empty: biquadratic for one covariate, eighth otherwise
  std::optional<double> bandwidth;
  std::string cv;
  bool cv_once = false;
  std::uint64_t seed = 1;
  int reps = 500;
  int boot = 0;
  double level = 0.95;
  int dgp = 1;
  std::size_t n = 200;
  double pc = 0.15;
  unsigned threads = 1;
  std::string methods = "new,icp,omni";
  std::size_t calib_draws = 100000;
  // losscurve
  double y = 0.0;
  double from = -3.0;
  double to = 3.0;
  int points = 121;
  std::string censoring = "normal";
  std::string censoring_file;
  double normal_step = 0.01;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline BandwidthGrid parse_cv(const std::string& spec, std::uint64_t seed) {
  std::vector<double> v;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--cv expects lo,hi,k,folds; bad field '" + item + "'");
    }
  }
  if (v.size() != 4) throw UsageError("--cv expects four fields lo,hi,k,folds");
  if (v[2] != std::floor(v[2]) || v[3] != std::floor(v[3])) {
    throw UsageError("--cv candidate count and folds must be integers");
  }
  if (!(v[0] <= v[1])) throw UsageError("--cv requires lo <= hi");
  return BandwidthGrid::linear(v[0], v[1], static_cast<int>(v[2]), static_cast<int>(v[3]), seed);
}

inline KernelSpec resolve_kernel(const CliConfig& c, Eigen::Index covariate_dim) {
  if (!c.kernel.empty()) return KernelSpec::parse(c.kernel);
  return covariate_dim > 1 ? KernelSpec{KernelKind::eighth_order} : KernelSpec{};
}

inline FitConfig fit_config(const CliConfig& c, Eigen::Index covariate_dim) {
  FitConfig cfg;
  cfg.tau = c.tau;
  cfg.seed = c.seed;
  cfg.kernel = resolve_kernel(c, covariate_dim);
  if (c.bandwidth) {
    cfg.bandwidth = *c.bandwidth;
  } else if (!c.cv.empty()) {
    cfg.bandwidth = parse_cv(c.cv, derive_seed(c.seed, 1));
  } else {
    auto g = std::get<BandwidthGrid>(cfg.bandwidth);
    g.seed = derive_seed(c.seed, 1);
    cfg.bandwidth = g;
  }
  return cfg;
}

inline nlohmann::json base_report(const CliConfig& c, nlohmann::json params) {
  return {{"command", c.command}, {"params", std::move(params)}, {"seed", c.seed}};
}

inline nlohmann::json bandwidth_param(const CliConfig& c) {
  if (c.bandwidth) return *c.bandwidth;
  return c.cv.empty() ? nlohmann::json("cv:default") : nlohmann::json("cv:" + c.cv);
}

inline void emit(const CliConfig& c, const std::string& text, std::ostream& out) {
  if (c.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.output, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + c.output + "'");
  f << text;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline int cmd_fit(const CliConfig& c, std::ostream& out) {
  auto sample = read_sample_csv_file(c.input);
  const auto cfg = detail::fit_config(c, sample.covariate_dim());
  auto report = detail::base_report(c, {{"input", c.input},
                                        {"tau", c.tau},
                                        {"method", c.method},
                                        {"kernel", cfg.kernel.name()},
                                        {"bandwidth", detail::bandwidth_param(c)},
                                        {"n", sample.size()}});
  QuantileFit fit;
  if (c.method == "icp") {
    fit = fit_icp(sample, c.tau, kaplan_meier_censoring(sample), cfg);
  } else {
    fit = fit_censored_qr(sample, cfg);
  }
  report["results"] = io::to_json(fit);
  report["diagnostics"] = io::diagnostics_json(fit.diagnostics);
  detail::emit(c, detail::dump(report), out);
  return exit_ok;
}

inline int cmd_bootstrap(const CliConfig& c, std::ostream& out) {
  if (c.boot < 2) throw UsageError("--boot must be at least 2");
  if (c.method != "new") throw UsageError("bootstrap supports --method new only");
  auto sample = read_sample_csv_file(c.input);
  const auto cfg = detail::fit_config(c, sample.covariate_dim());
  auto report = detail::base_report(c, {{"input", c.input},
                                        {"tau", c.tau},
                                        {"kernel", cfg.kernel.name()},
                                        {"bandwidth", detail::bandwidth_param(c)},
                                        {"boot", c.boot},
                                        {"level", c.level},
                                        {"n", sample.size()}});
  auto boot = percentile_bootstrap(sample, cfg, c.boot, c.level, derive_seed(c.seed, 3), c.threads);
  report["results"] = {{"estimate", io::to_json(boot.estimate)},
                       {"lower", io::to_json(boot.lower)},
                       {"upper", io::to_json(boot.upper)},
                       {"level", boot.level}};
  report["diagnostics"] = {{"bandwidth", boot.bandwidth},
                           {"failures", boot.failures},
                           {"successful", boot.replicate_betas.rows()}};
  detail::emit(c, detail::dump(report), out);
  return exit_ok;
}

inline std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::transform(item.begin(), item.end(), item.begin(), ::tolower);
    if (item == "new") {
      out.push_back(Method::NEW);
    } else if (item == "icp") {
      out.push_back(Method::ICP);
    } else if (item == "omni") {
      out.push_back(Method::OMNI);
    } else {
      throw UsageError("unknown method '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--methods is empty");
  return out;
}

inline int cmd_simulate(const CliConfig& c, std::ostream& out) {
  check_study_design(c.dgp, c.tau, c.pc);
  if (c.reps < 1) throw UsageError("--reps must be at least 1");
  auto spec = DgpSpec::make(c.dgp, c.tau, c.pc, c.n);
  spec = calibrate_censoring(spec, c.calib_draws, derive_seed(c.seed, 10));

  FitConfig solver;
  solver.kernel = detail::resolve_kernel(c, spec.covariate_dim());
  nlohmann::json params{{"dgp", c.dgp},
                        {"n", c.n},
                        {"pc", c.pc},
                        {"tau", c.tau},
                        {"kernel", solver.kernel.name()},
                        {"bandwidth", detail::bandwidth_param(c)},
                        {"calib_draws", c.calib_draws}};
  std::ostringstream table;
  nlohmann::json results;

  if (c.boot > 0) {
    if (!c.bandwidth) throw UsageError("coverage runs (--boot) need a fixed --bandwidth");
    if (c.boot < 2) throw UsageError("--boot must be at least 2");
    params["reps"] = c.reps;
    params["boot"] = c.boot;
    params["level"] = c.level;
    auto cov = coverage_study(spec, static_cast<std::size_t>(c.reps), c.boot, c.level, c.seed,
                              *c.bandwidth, solver, c.threads);
    results = io::to_json(cov);
    write_coverage_csv(table, cov);
  } else {
    const auto methods = parse_methods(c.methods);
    params["reps"] = c.reps;
    params["methods"] = c.methods;
    BandwidthPolicy policy;
    if (c.bandwidth) {
      policy = BandwidthPolicy::fixed_at(*c.bandwidth);
    } else {
      // the four-covariate design tunes once on a wider grid by default
      BandwidthGrid g = c.cv.empty() ? (c.dgp == 4 ? BandwidthGrid::linear(0.5, 2.0, 15, 5, 0)
                                                   : BandwidthGrid::linear(0.05, 0.5, 15, 5, 0))
                                     : detail::parse_cv(c.cv, 0);
      const bool once = c.cv_once || (c.cv.empty() && c.dgp == 4);
      policy = once ? BandwidthPolicy::from_first(g) : BandwidthPolicy::per_replicate(g);
      params["bandwidth_policy"] = once ? "cv-first-replicate" : "cv-per-replicate";
    }
    auto report = run_study(spec, methods, static_cast<std::size_t>(c.reps), c.seed, policy, solver,
                            c.threads);
    results = io::to_json(report);
    write_study_csv(table, report);
  }

  auto report = detail::base_report(c, params);
  report["results"] = results;
  report["diagnostics"] = {{"censoring_bounds", {spec.bounds->lower, spec.bounds->upper}},
                           {"validated_censoring",
                            censoring_proportion(spec, *spec.bounds, c.calib_draws,
                                                 derive_seed(c.seed, 11))}};
  if (!c.table.empty()) {
    std::ofstream f(c.table, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + c.table + "'");
    f << table.str();
  }
  detail::emit(c, detail::dump(report), out);
  return exit_ok;
}

/// Standard normal c.d.f. sampled on [-8, 8] with the given step and held
/// constant between grid points.
inline StepDistribution discretized_normal(double step) {
  if (!(step > 0.0)) throw UsageError("--normal-step must be positive");
  boost::math::normal nd;
  std::vector<double> t;
  std::vector<double> g;
  const auto count = static_cast<int>(std::floor(16.0 / step + 1e-9));
  for (int k = 0; k <= count; ++k) {
    const double s = -8.0 + k * step;
    t.push_back(s);
    g.push_back(boost::math::cdf(nd, s));
  }
  return StepDistribution(t, g);
}

inline int cmd_losscurve(const CliConfig& c, std::ostream& out) {
  if (c.points < 1) throw UsageError("--points must be at least 1");
  if (!(c.from <= c.to)) throw UsageError("empty grid: --from must not exceed --to");
  if (c.points == 1 && c.from != c.to) {
    throw UsageError("a one-point grid needs --from equal to --to");
  }
  require_tau(c.tau);
  StepDistribution g;
  if (c.censoring == "normal") {
    g = discretized_normal(c.normal_step);
  } else if (c.censoring == "none") {
    g = StepDistribution();
  } else if (c.censoring == "file") {
    std::ifstream in(c.censoring_file);
    if (!in) throw UsageError("cannot open censoring file '" + c.censoring_file + "'");
    g = read_step_distribution_csv(in);
  } else {
    throw UsageError("--censoring must be normal, none or file");
  }
  std::ostringstream csv;
  csv << "a,check,censored\n";
  for (int k = 0; k < c.points; ++k) {
    const double a = c.points == 1 ? c.from : c.from + (c.to - c.from) * k / (c.points - 1);
    csv << io::fmt(a) << ',' << io::fmt(check_loss(a, c.y, c.tau)) << ','
        << io::fmt(censored_loss(a, c.y, c.tau, g)) << '\n';
  }
  detail::emit(c, csv.str(), out);
  return exit_ok;
}

/// Parses `args` (argv without the program name) and runs the command.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CliConfig c;
  CLI::App app{"Censored quantile regression: fitting, bootstrap, simulation studies"};
  app.require_subcommand(1);

  const auto add_fit_flags = [&](CLI::App* sub) {
    sub->add_option("--input", c.input, "CSV with header y,delta,x1,...,xd")->required();
    sub->add_option("--tau", c.tau, "quantile level in (0,1)");
    sub->add_option("--kernel", c.kernel, "biquadratic or eighth")
        ->check(CLI::IsMember({"biquadratic", "eighth"}));
    auto* bw = sub->add_option("--bandwidth", c.bandwidth, "fixed Beran bandwidth");
    sub->add_option("--cv", c.cv, "cross-validation grid lo,hi,k,folds")->excludes(bw);
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--out", c.output, "output JSON path (stdout when omitted)");
  };

  auto* fit = app.add_subcommand("fit", "fit a censored quantile regression");
  add_fit_flags(fit);
  fit->add_option("--method", c.method, "new or icp")->check(CLI::IsMember({"new", "icp"}));

  auto* boot = app.add_subcommand("bootstrap", "percentile bootstrap intervals");
  add_fit_flags(boot);
  boot->add_option("--method", c.method, "new")->check(CLI::IsMember({"new", "icp"}));
  boot->add_option("--boot", c.boot, "number of bootstrap samples")->required();
  boot->add_option("--level", c.level, "confidence level");
  boot->add_option("--threads", c.threads, "worker threads");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study on a simulation design");
  sim->add_option("--dgp", c.dgp, "design 1-4")->required();
  sim->add_option("--n", c.n, "sample size");
  sim->add_option("--pc", c.pc, "target censoring proportion")->required();
  sim->add_option("--tau", c.tau, "quantile level");
  sim->add_option("--reps", c.reps, "number of replicates");
  sim->add_option("--methods", c.methods, "comma list of new,icp,omni");
  sim->add_option("--kernel", c.kernel, "biquadratic or eighth")
      ->check(CLI::IsMember({"biquadratic", "eighth"}));
  auto* sbw = sim->add_option("--bandwidth", c.bandwidth, "fixed bandwidth");
  sim->add_option("--cv", c.cv, "cross-validation grid lo,hi,k,folds")->excludes(sbw);
  sim->add_flag("--cv-once", c.cv_once, "tune the bandwidth on the first replicate only");
  sim->add_option("--boot", c.boot, "bootstrap samples per replicate (coverage study)");
  sim->add_option("--level", c.level, "confidence level for coverage");
  sim->add_option("--calib-draws", c.calib_draws, "Monte Carlo draws for censoring calibration");
  sim->add_option("--seed", c.seed, "random seed");
  sim->add_option("--threads", c.threads, "worker threads");
  sim->add_option("--out", c.output, "output JSON path (stdout when omitted)");
  sim->add_option("--table", c.table, "output CSV table path");

  auto* curve = app.add_subcommand("losscurve", "check and censored loss on a grid");
  curve->add_option("--y", c.y, "response value");
  curve->add_option("--tau", c.tau, "quantile level");
  curve->add_option("--from", c.from, "grid start");
  curve->add_option("--to", c.to, "grid end");
  curve->add_option("--points", c.points, "number of grid points");
  curve->add_option("--censoring", c.censoring, "normal, none or file");
  curve->add_option("--censoring-file", c.censoring_file, "CSV with header t,G");
  curve->add_option("--normal-step", c.normal_step, "grid step of the discretized normal");
  curve->add_option("--out", c.output, "output CSV path (stdout when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }

  try {
    if (fit->parsed()) {
      c.command = "fit";
      return cmd_fit(c, out);
    }
    if (boot->parsed()) {
      c.command = "bootstrap";
      return cmd_bootstrap(c, out);
    }
    if (sim->parsed()) {
      c.command = "simulate";
      return cmd_simulate(c, out);
    }
    c.command = "losscurve";
    return cmd_losscurve(c, out);
  } catch (const CsvError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::logic_error& e) {
    // DomainError, ShapeError, UsageError, StateError
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    // RankError, InferenceError, CalibrationError
    err << "numerical failure: " << e.what() << "\n";
    return exit_numeric;
  }
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cqr::cli
