#pragma once

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "cqr/errors.hpp"
#include "cqr/sample.hpp"
#include "cqr/step_distribution.hpp"

namespace cqr {

/// Malformed input file; `line()` is 1-based (0 when not tied to a line).
class CsvError : public std::invalid_argument {
 public:
  CsvError(const std::string& what, std::size_t line)
      : std::invalid_argument(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_number(const std::string& s, std::size_t line) {
  if (s.empty()) throw CsvError("empty field", line);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw CsvError("not a finite number: '" + s + "'", line);
  }
  return v;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

/// Reads `y,delta,x1,...,xd` (header required, d >= 0). An intercept column
/// is prepended to the covariates.
inline SurvivalSample read_sample_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw CsvError("empty input", 1);
  ++lineno;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "y" || header[1] != "delta") {
    throw CsvError("header must start with 'y,delta'", lineno);
  }
  for (std::size_t j = 2; j < header.size(); ++j) {
    if (header[j] != "x" + std::to_string(j - 1)) {
      throw CsvError("expected column 'x" + std::to_string(j - 1) + "', found '" + header[j] + "'",
                     lineno);
    }
  }
  const std::size_t d = header.size() - 2;

  std::vector<double> ys;
  std::vector<int> deltas;
  std::vector<double> xs;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw CsvError("expected " + std::to_string(header.size()) + " fields, found " +
                         std::to_string(f.size()),
                     lineno);
    }
    ys.push_back(detail::parse_number(f[0], lineno));
    if (f[1] != "0" && f[1] != "1") throw CsvError("delta must be 0 or 1", lineno);
    deltas.push_back(f[1] == "1" ? 1 : 0);
    for (std::size_t j = 0; j < d; ++j) xs.push_back(detail::parse_number(f[2 + j], lineno));
  }
  if (ys.empty()) throw CsvError("no data rows", lineno);

  const auto n = static_cast<Eigen::Index>(ys.size());
  Vector y = Eigen::Map<const Vector>(ys.data(), n);
  Matrix cov(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      cov(i, j) = xs[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j)];
    }
  }
  return SurvivalSample::with_intercept(std::move(y), std::move(deltas), cov);
}

inline SurvivalSample read_sample_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'", 0);
  return read_sample_csv(in);
}

/// Reads a step c.d.f. from `t,G` rows (header required).
inline StepDistribution read_step_distribution_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw CsvError("empty input", 1);
  ++lineno;
  const auto header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "t" || header[1] != "G") {
    throw CsvError("header must be 't,G'", lineno);
  }
  std::vector<double> t;
  std::vector<double> g;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 2) throw CsvError("expected 2 fields", lineno);
    t.push_back(detail::parse_number(f[0], lineno));
    g.push_back(detail::parse_number(f[1], lineno));
  }
  try {
    return StepDistribution(t, g);
  } catch (const std::logic_error& e) {
    throw CsvError(e.what(), 0);
  }
}

}  // namespace cqr
