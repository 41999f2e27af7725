#pragma once

// Modified Brooks-Corey relative permeability curves and a bounded
// Levenberg-Marquardt fit of their six coefficients.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ffino/core/error.hpp"

namespace ffino {

struct RelPermCoeffs {
  double krw_max = 0.649;
  double krg_max = 0.0435;
  double swi = 0.42;
  double sgr = 0.075;
  double m = 2.63;
  double n = 2.18;

  std::array<double, 6> as_array() const { return {krw_max, krg_max, swi, sgr, m, n}; }
  static RelPermCoeffs from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

  void validate() const {
    const bool ok = krw_max > 0 && krw_max <= 1 && krg_max > 0 && krg_max <= 1 && swi >= 0 && sgr >= 0 &&
                    swi + sgr < 1 && m > 0 && n > 0 && std::isfinite(m) && std::isfinite(n);
    if (!ok) {
      throw ConfigError("invalid relative permeability coefficients: krw_max=" + std::to_string(krw_max) +
                        " krg_max=" + std::to_string(krg_max) + " Swi=" + std::to_string(swi) +
                        " Sgr=" + std::to_string(sgr) + " m=" + std::to_string(m) + " n=" + std::to_string(n));
    }
  }
};

inline void to_json(nlohmann::json& j, const RelPermCoeffs& c) {
  j = {{"krw_max", c.krw_max}, {"krg_max", c.krg_max}, {"swi", c.swi}, {"sgr", c.sgr}, {"m", c.m}, {"n", c.n}};
}

inline void from_json(const nlohmann::json& j, RelPermCoeffs& c) {
  try {
    j.at("krw_max").get_to(c.krw_max);
    j.at("krg_max").get_to(c.krg_max);
    j.at("swi").get_to(c.swi);
    j.at("sgr").get_to(c.sgr);
    j.at("m").get_to(c.m);
    j.at("n").get_to(c.n);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("relative permeability JSON: ") + e.what());
  }
}

/// The three coefficient sets compared in the relative-permeability study.
inline RelPermCoeffs reference_relperm_case(char which) {
  switch (which) {
    case 'a': return {0.768, 0.031, 0.50, 0.03, 3.808, 1.052};
    case 'b': return {0.642, 0.056, 0.37, 0.08, 1.453, 3.317};
    case 'c': return {0.530, 0.042, 0.34, 0.12, 1.560, 1.930};
  }
  throw ConfigError(std::string("unknown relative permeability case '") + which + "'");
}
inline constexpr double kReferenceInjectionRate = 169900.0;

struct RelPerm {
  double krw, krg;
};

/// krw, krg at water saturation sw. Outside [Swi, 1 - Sgr] the normalized
/// saturation saturates at 0 or 1.
inline RelPerm mbc_eval(double sw, const RelPermCoeffs& c) {
  c.validate();
  // ug = 1 - uw keeps both endpoint identities exact in floating point
  const double d = (1.0 - c.sgr) - c.swi;
  const double uw = std::clamp((sw - c.swi) / d, 0.0, 1.0);
  const double ug = 1.0 - uw;
  return {c.krw_max * std::pow(uw, c.m), c.krg_max * std::pow(ug, c.n)};
}

struct RelPermPoint {
  double sw, krw, krg;
};

/// n points evenly spaced over the mobile range [Swi, 1 - Sgr].
inline std::vector<RelPermPoint> mbc_curve(const RelPermCoeffs& c, std::size_t n) {
  std::vector<RelPermPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double sw = c.swi + (1.0 - c.sgr - c.swi) * static_cast<double>(i) / static_cast<double>(n - 1);
    const auto kr = mbc_eval(sw, c);
    pts.push_back({sw, kr.krw, kr.krg});
  }
  return pts;
}

struct FitResult {
  RelPermCoeffs coeffs;
  double residual = 0.0;  // sum of squared residuals over both curves
  std::size_t iterations = 0;
};

/// Raised when the fit hits its iteration cap; carries the best iterate.
class FitError : public NumericalError {
 public:
  FitError(const std::string& msg, FitResult best) : NumericalError(msg), best_(best) {}
  const FitResult& best() const { return best_; }

 private:
  FitResult best_;
};

namespace detail {

struct FitBounds {
  std::array<double, 6> lo{1e-4, 1e-4, 0.0, 0.0, 0.05, 0.05};
  std::array<double, 6> hi{1.0, 1.0, 0.95, 0.95, 20.0, 20.0};
};

inline std::array<double, 6> project(std::array<double, 6> p, const FitBounds& b) {
  for (int i = 0; i < 6; ++i) p[i] = std::clamp(p[i], b.lo[i], b.hi[i]);
  // keep a mobile range of at least 1% by shrinking the larger endpoint
  const double excess = p[2] + p[3] - 0.99;
  if (excess > 0) (p[2] >= p[3] ? p[2] : p[3]) -= excess;
  return p;
}

/// Residual vector [krw residuals; krg residuals] and its Jacobian (6 columns).
inline double residuals(const std::vector<RelPermPoint>& pts, const std::array<double, 6>& p, Eigen::VectorXd& r,
                        Eigen::MatrixXd* jac) {
  const std::size_t n = pts.size();
  r.resize(2 * n);
  if (jac) jac->setZero(2 * n, 6);
  const double kw = p[0], kg = p[1], swi = p[2], sgr = p[3], m = p[4], ne = p[5];
  const double d = 1.0 - sgr - swi;
  for (std::size_t i = 0; i < n; ++i) {
    const double sw = pts[i].sw;
    const double aw = (sw - swi) / d;
    const double ag = (1.0 - sw - sgr) / d;
    const double uw = std::clamp(aw, 0.0, 1.0);
    const double ug = std::clamp(ag, 0.0, 1.0);
    const double pw = std::pow(uw, m), pg = std::pow(ug, ne);
    r[i] = kw * pw - pts[i].krw;
    r[n + i] = kg * pg - pts[i].krg;
    if (!jac) continue;
    auto& J = *jac;
    J(i, 0) = pw;
    J(n + i, 1) = pg;
    if (uw > 0 && aw < 1) {
      const double dfw = kw * m * std::pow(uw, m - 1);  // d krw / d uw
      // uw = (sw - swi) / (1 - sgr - swi)
      J(i, 2) = dfw * ((-1.0) * d + (sw - swi)) / (d * d);
      J(i, 3) = dfw * (sw - swi) / (d * d);
      J(i, 4) = kw * pw * std::log(uw);
    }
    if (ug > 0 && ag < 1) {
      const double dfg = kg * ne * std::pow(ug, ne - 1);
      // ug = (1 - sw - sgr) / (1 - sgr - swi)
      J(n + i, 2) = dfg * (1.0 - sw - sgr) / (d * d);
      J(n + i, 3) = dfg * ((-1.0) * d + (1.0 - sw - sgr)) / (d * d);
      J(n + i, 5) = kg * pg * std::log(ug);
    }
  }
  return r.squaredNorm();
}

}  // namespace detail

struct FitOptions {
  std::size_t max_iterations = 2000;
  double gradient_tol = 1e-14;
  double step_tol = 1e-13;
};

/// Joint least-squares fit of both curves, bounded to the valid coefficient
/// region (projected Levenberg-Marquardt).
inline FitResult mbc_fit(const std::vector<RelPermPoint>& points, const RelPermCoeffs& init = {},
                         const FitOptions& opt = {}) {
  if (points.size() < 8) {
    throw ConfigError("mbc_fit needs at least 8 points, got " + std::to_string(points.size()));
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.sw) || !std::isfinite(p.krw) || !std::isfinite(p.krg)) {
      throw ConfigError("mbc_fit: non-finite point");
    }
  }
  const detail::FitBounds bounds;
  auto p = detail::project(init.as_array(), bounds);
  Eigen::VectorXd r, r_try;
  Eigen::MatrixXd J;
  double cost = detail::residuals(points, p, r, &J);
  double lambda = 1e-3;
  FitResult best{RelPermCoeffs::from_array(p), cost, 0};
  for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
    const Eigen::VectorXd g = J.transpose() * r;
    // projected gradient: ignore components pushing against an active bound
    double pg = 0;
    std::array<bool, 6> active{};
    for (int i = 0; i < 6; ++i) {
      const bool at_lo = p[i] <= bounds.lo[i] && g[i] > 0;
      const bool at_hi = p[i] >= bounds.hi[i] && g[i] < 0;
      active[i] = at_lo || at_hi;
      if (!active[i]) pg = std::max(pg, std::abs(g[i]));
    }
    if (pg < opt.gradient_tol || cost < 1e-28) return {RelPermCoeffs::from_array(p), cost, it};
    const Eigen::MatrixXd A = J.transpose() * J;
    bool improved = false;
    for (int attempt = 0; attempt < 40 && !improved; ++attempt) {
      Eigen::MatrixXd Ad = A;
      Eigen::VectorXd rhs = -g;
      for (int i = 0; i < 6; ++i) Ad(i, i) += lambda * std::max(A(i, i), 1e-12);
      // parameters pinned at a bound stay fixed for this step
      for (int i = 0; i < 6; ++i) {
        if (!active[i]) continue;
        Ad.row(i).setZero();
        Ad.col(i).setZero();
        Ad(i, i) = 1.0;
        rhs[i] = 0.0;
      }
      const Eigen::VectorXd step = Ad.ldlt().solve(rhs);
      std::array<double, 6> trial = p;
      for (int i = 0; i < 6; ++i) trial[i] += step[i];
      trial = detail::project(trial, bounds);
      const double c_try = detail::residuals(points, trial, r_try, nullptr);
      if (std::isfinite(c_try) && c_try < cost) {
        double moved = 0;
        for (int i = 0; i < 6; ++i) moved = std::max(moved, std::abs(trial[i] - p[i]) / std::max(1.0, std::abs(p[i])));
        const double rel_drop = (cost - c_try) / std::max(cost, 1e-300);
        p = trial;
        cost = detail::residuals(points, p, r, &J);
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        best = {RelPermCoeffs::from_array(p), cost, it};
        if (moved < opt.step_tol || rel_drop < 1e-15) return best;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) return best;  // no descent direction left: stationary within round-off
  }
  throw FitError("mbc_fit did not converge in " + std::to_string(opt.max_iterations) +
                     " iterations (residual " + std::to_string(best.residual) + ")",
                 best);
}

}  // namespace ffino
