#pragma once

// Reference implementations used only by the tests. They are deliberately
// naive (direct formulas, quadratic loops, exhaustive enumeration) and share
// no code with the library beyond plain Eigen containers.

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

inline double rho(double a, double y, double tau) {
  const double r = y - a;
  return r > 0.0 ? tau * r : (tau - 1.0) * r;
}

/// Right-continuous step c.d.f. given by (time, value) pairs sorted by time.
struct Step {
  std::vector<double> t;
  std::vector<double> g;

  double at(double s) const {
    double v = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k] <= s) v = g[k];
    }
    return v;
  }
};

/// Signed integral of G over [0, a] by summing rectangles between the
/// breakpoints that fall inside the interval.
inline double integral(const Step& G, double a) {
  const double lo = std::min(0.0, a);
  const double hi = std::max(0.0, a);
  std::vector<double> cuts{lo, hi};
  for (double s : G.t) {
    if (s > lo && s < hi) cuts.push_back(s);
  }
  std::sort(cuts.begin(), cuts.end());
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    area += G.at(cuts[k]) * (cuts[k + 1] - cuts[k]);
  }
  return a >= 0.0 ? area : -area;
}

inline double phi(double a, double y, double tau, const Step& G) {
  return rho(a, y, tau) - (1.0 - tau) * integral(G, a);
}

/// Weighted product-limit estimate of the censoring c.d.f. written as the
/// textbook product over distinct censoring times t of
/// (1 - d_t / n_t), with d_t the weight censored at t and n_t the weight
/// with y >= t. Hazards are clamped to [0, 1].
inline Step km_censoring(const std::vector<double>& y, const std::vector<int>& delta,
                         const std::vector<double>& w = {}) {
  std::vector<double> times;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    if (delta[i] == 0 && wi != 0.0) times.push_back(y[i]);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  Step out;
  double surv = 1.0;
  for (double t : times) {
    double d = 0.0;
    double n = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double wi = w.empty() ? 1.0 : w[i];
      if (y[i] >= t) n += wi;
      if (y[i] == t && delta[i] == 0) d += wi;
    }
    if (!(d > 0.0) || !(n > 0.0)) continue;
    const double h = std::clamp(d / n, 0.0, 1.0);
    surv *= 1.0 - h;
    out.t.push_back(t);
    out.g.push_back(1.0 - surv);
    if (surv <= 0.0) break;
  }
  return out;
}

inline double biquadratic(double u) {
  return std::abs(u) <= 1.0 ? 15.0 / 16.0 * std::pow(1.0 - u * u, 2) : 0.0;
}

inline double eighth(double u) {
  if (std::abs(u) > 1.0) return 0.0;
  return (1.0 - u * u) *
         (35.0 - 385.0 * std::pow(u, 2) + 1001.0 * std::pow(u, 4) - 715.0 * std::pow(u, 6)) /
         13.0;
}

/// Beran estimate of the censoring c.d.f. at x0 with a product kernel on
/// covariates divided by their sample standard deviation.
inline Step beran_censoring(const std::vector<double>& y, const std::vector<int>& delta,
                            const Eigen::MatrixXd& z, const Eigen::VectorXd& x0,
                            const std::function<double(double)>& kernel, double h,
                            bool* fallback = nullptr) {
  const auto n = z.rows();
  std::vector<double> sd(static_cast<std::size_t>(z.cols()), 1.0);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) m += z(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v += (z(i, j) - m) * (z(i, j) - m);
    if (n > 1 && v > 0.0) sd[static_cast<std::size_t>(j)] = std::sqrt(v / static_cast<double>(n - 1));
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double k = 1.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      k *= kernel((z(i, j) - x0(j)) / sd[static_cast<std::size_t>(j)] / h);
    }
    w[static_cast<std::size_t>(i)] = k;
    total += k;
  }
  if (fallback) *fallback = !(total > 0.0);
  if (!(total > 0.0)) return km_censoring(y, delta);
  for (auto& v : w) v /= total;
  return km_censoring(y, delta, w);
}

/// Weighted quantile-regression loss sum_i w_i rho(x_i'b, y_i).
inline double qr_loss(const Eigen::MatrixXd& x, const std::vector<double>& y,
                      const Eigen::VectorXd& b, double tau, const std::vector<double>& w = {}) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double wi = w.empty() ? 1.0 : w[static_cast<std::size_t>(i)];
    s += wi * rho(x.row(i).dot(b), y[static_cast<std::size_t>(i)], tau);
  }
  return s;
}

/// Exact (weighted) quantile regression for one or two coefficients by
/// enumerating every basic solution: a linear program attains its optimum
/// at a vertex, i.e. a fit interpolating p observations.
inline std::pair<Eigen::VectorXd, double> qr_exact(const Eigen::MatrixXd& x,
                                                   const std::vector<double>& y, double tau,
                                                   const std::vector<double>& w = {}) {
  const auto n = x.rows();
  const auto p = x.cols();
  Eigen::VectorXd best;
  double best_loss = std::numeric_limits<double>::infinity();
  const auto consider = [&](const Eigen::VectorXd& b) {
    const double l = qr_loss(x, y, b, tau, w);
    if (l < best_loss) {
      best_loss = l;
      best = b;
    }
  };
  if (p == 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!w.empty() && w[static_cast<std::size_t>(i)] == 0.0) continue;
      consider(Eigen::VectorXd::Constant(1, y[static_cast<std::size_t>(i)] / x(i, 0)));
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = i + 1; k < n; ++k) {
        if (!w.empty() &&
            (w[static_cast<std::size_t>(i)] == 0.0 || w[static_cast<std::size_t>(k)] == 0.0)) {
          continue;
        }
        Eigen::Matrix2d a;
        a << x(i, 0), x(i, 1), x(k, 0), x(k, 1);
        if (std::abs(a.determinant()) < 1e-12) continue;
        Eigen::Vector2d r(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(k)]);
        consider(a.partialPivLu().solve(r));
      }
    }
  }
  return {best, best_loss};
}

/// Root of e ln e = -c on (0, 1/e) with Boost's TOMS 748 bracketing solver.
inline double epsilon_root(double c) {
  const auto f = [c](double e) { return e * std::log(e) + c; };
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = 500;
  const double e_max = std::exp(-1.0);
  auto r = boost::math::tools::toms748_solve(f, std::numeric_limits<double>::min(), e_max, tol, iters);
  return 0.5 * (r.first + r.second);
}

/// Type-1 empirical quantile: the smallest order statistic x_(k) with
/// k / B >= q, found by scanning k (no rounding shortcut).
inline double type1_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto b = static_cast<long double>(v.size());
  for (std::size_t k = 1; k <= v.size(); ++k) {
    // compare k >= q*B with a tolerance proportional to q*B
    const long double qb = static_cast<long double>(q) * b;
    if (static_cast<long double>(k) >= qb - 1e-9L * std::max<long double>(1.0L, qb)) {
      return v[k - 1];
    }
  }
  return v.back();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

/// Composite Simpson rule on [a, b] with m (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int m) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace oracle
