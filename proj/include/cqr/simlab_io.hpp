#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include "cqr/simlab.hpp"

namespace cqr {

namespace io {

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline nlohmann::json to_json(const DgpSpec& spec) {
  nlohmann::json j{{"dgp", spec.id},
                   {"tau", spec.tau},
                   {"pc", spec.target_censoring},
                   {"n", spec.n}};
  if (spec.bounds) j["censoring_bounds"] = {spec.bounds->lower, spec.bounds->upper};
  return j;
}

inline nlohmann::json to_json(const MethodSummary& s) {
  return {{"method", method_name(s.method)},
          {"bias", to_json(s.bias)},
          {"rmse", to_json(s.rmse)},
          {"mae", to_json(s.mae)},
          {"mad", s.mad},
          {"aggregate", {{"bias", s.agg_bias}, {"rmse", s.agg_rmse}, {"mae", s.agg_mae}}},
          {"replicates_used", s.used},
          {"failures", s.failures}};
}

inline nlohmann::json to_json(const SimulationReport& r) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : r.methods) methods.push_back(to_json(m));
  return {{"design", to_json(r.spec)},
          {"replicates", r.replicates},
          {"mean_censoring", r.mean_censoring},
          {"methods", methods}};
}

inline nlohmann::json to_json(const CoverageReport& r) {
  return {{"design", to_json(r.spec)},
          {"level", r.level},
          {"boot_samples", r.boot_samples},
          {"bandwidth", r.bandwidth},
          {"simulations", r.simulations},
          {"failures", r.failures},
          {"ecp", to_json(r.ecp)},
          {"eml", to_json(r.eml)}};
}

inline nlohmann::json to_json(const QuantileFit& f) {
  return {{"beta", to_json(f.beta)},
          {"tau", f.tau},
          {"objective", f.objective_value},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"restart_chosen", f.restart_chosen}};
}

inline nlohmann::json diagnostics_json(const FitDiagnostics& d) {
  return {{"c4_warning", d.c4_warning},
          {"beran_fallbacks", d.beran_fallbacks},
          {"icp_fallback", d.icp_fallback},
          {"capped_weights", d.capped_weights},
          {"condition_number", d.condition_number},
          {"bandwidth", d.bandwidth},
          {"epsilon", d.epsilon},
          {"epsilon_clipped", d.epsilon_clipped}};
}

// Shortest round-trip representation, locale independent.
inline std::string fmt(double v) {
  if (v == 0.0) v = 0.0;  // no negative zero in output
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  for (int prec = 1; prec < 17; ++prec) {
    char trial[32];
    std::snprintf(trial, sizeof trial, "%.*g", prec, v);
    if (std::strtod(trial, nullptr) == v) return trial;
  }
  return s;
}

}  // namespace io

/// One row per method: n, p_c, method, then bias/RMSE/MAE per coefficient
/// and MAD. For the four-covariate design the aggregated metrics follow.
inline void write_study_csv(std::ostream& out, const SimulationReport& r, bool header = true) {
  const auto p = r.spec.true_beta().size();
  if (header) {
    out << "dgp,n,pc,tau,method";
    for (const char* metric : {"bias", "rmse", "mae"}) {
      for (Eigen::Index j = 0; j < p; ++j) out << ',' << metric << "_b" << j;
    }
    out << ",mad";
    if (r.spec.id == 4) out << ",agg_bias,agg_rmse,agg_mae";
    out << ",used,failures\n";
  }
  for (const auto& m : r.methods) {
    out << r.spec.id << ',' << r.spec.n << ',' << io::fmt(r.spec.target_censoring) << ','
        << io::fmt(r.spec.tau) << ',' << method_name(m.method);
    for (const Vector* v : {&m.bias, &m.rmse, &m.mae}) {
      for (Eigen::Index j = 0; j < p; ++j) out << ',' << io::fmt((*v)(j));
    }
    out << ',' << io::fmt(m.mad);
    if (r.spec.id == 4) {
      out << ',' << io::fmt(m.agg_bias) << ',' << io::fmt(m.agg_rmse) << ',' << io::fmt(m.agg_mae);
    }
    out << ',' << m.used << ',' << m.failures << '\n';
  }
}

inline void write_coverage_csv(std::ostream& out, const CoverageReport& r, bool header = true) {
  const auto p = r.ecp.size();
  if (header) {
    out << "dgp,n,pc,tau,method";
    for (Eigen::Index j = 0; j < p; ++j) out << ",ecp_b" << j;
    for (Eigen::Index j = 0; j < p; ++j) out << ",eml_b" << j;
    out << ",simulations,failures\n";
  }
  out << r.spec.id << ',' << r.spec.n << ',' << io::fmt(r.spec.target_censoring) << ','
      << io::fmt(r.spec.tau) << ",NEW";
  for (Eigen::Index j = 0; j < p; ++j) out << ',' << io::fmt(r.ecp(j));
  for (Eigen::Index j = 0; j < p; ++j) out << ',' << io::fmt(r.eml(j));
  out << ',' << r.simulations << ',' << r.failures << '\n';
}

}  // namespace cqr
