#pragma once

// Analytic stand-in for the reservoir simulator: a Buckley-Leverett frontal
// plume for gas saturation and a line-source (exponential integral) solution
// for pressure buildup. Smooth, monotone in time, and dependent on every
// sampled input; not a physical simulation.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ffino/datagen/grid.hpp"
#include "ffino/datagen/relperm.hpp"

namespace ffino {

/// Exponential integral E1(x) for x > 0: power series below 1, continued
/// fraction (modified Lentz) above.
inline double expint_e1(double x) {
  if (!(x > 0)) throw std::domain_error("expint_e1: argument must be positive, got " + std::to_string(x));
  constexpr double euler_gamma = 0.57721566490153286061;
  if (x < 1.0) {
    double sum = 0.0, term = 1.0;
    for (int k = 1; k < 100; ++k) {
      term *= -x / k;
      const double add = term / k;
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return -euler_gamma - std::log(x) - sum;
  }
  if (x > 700.0) return 0.0;
  constexpr double tiny = 1e-300;
  double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 1000; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x);
}

struct ToyPhysicsConstants {
  double mu_g = 0.0094;  // mPa s, gas
  double mu_w = 0.547;   // mPa s, water at 50 C
  double thickness = kThickness;
  double eta0 = 160.0;     // m^2 / day per mD: hydraulic diffusivity scale
  double dp_scale = 2.0e-3;  // bar per (m^3/day * mPa s / mD)
};

/// Gas fractional flow f_g(S_g) and its derivative, with S_w = 1 - S_g.
struct FractionalFlow {
  RelPermCoeffs c;
  double mu_g, mu_w;

  double operator()(double sg) const {
    const auto kr = mbc_eval(1.0 - sg, c);
    const double lg = kr.krg / mu_g, lw = kr.krw / mu_w;
    return lg + lw > 0 ? lg / (lg + lw) : 0.0;
  }

  double derivative(double sg) const {
    const double d = (1.0 - c.sgr) - c.swi;
    const double sw = 1.0 - sg;
    const double uw = std::clamp((sw - c.swi) / d, 0.0, 1.0);
    const double ug = 1.0 - uw;
    const double lg = c.krg_max * std::pow(ug, c.n) / mu_g;
    const double lw = c.krw_max * std::pow(uw, c.m) / mu_w;
    if (lg + lw <= 0) return 0.0;
    const bool mobile = ug > 0 && ug < 1;
    const double dlg = mobile ? c.krg_max * c.n * std::pow(ug, c.n - 1) / (d * mu_g) : 0.0;
    const double dlw = mobile ? -c.krw_max * c.m * std::pow(uw, c.m - 1) / (d * mu_w) : 0.0;
    return (dlg * lw - lg * dlw) / ((lg + lw) * (lg + lw));
  }
};

struct WelgeFront {
  double s_front;  // shock gas saturation
  double slope;    // f_g(s_front) / s_front = dx/dt multiplier of the front
};

/// Welge tangent from the initial state S_g = 0: the saturation maximizing
/// the chord slope f_g(S) / S, refined by bisection on f_g'(S) S - f_g(S).
inline WelgeFront welge_front(const RelPermCoeffs& c, double mu_g, double mu_w) {
  c.validate();
  const FractionalFlow f{c, mu_g, mu_w};
  const double lo = c.sgr, hi = 1.0 - c.swi;
  const std::size_t n = 4000;
  std::size_t best = 1;
  double best_slope = -1.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double s = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
    const double slope = f(s) / s;
    if (slope > best_slope) {
      best_slope = slope;
      best = i;
    }
  }
  auto at = [&](std::size_t i) { return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n); };
  double a = at(best - 1), b = at(std::min(best + 1, n));
  auto h = [&](double s) { return f.derivative(s) * s - f(s); };
  if (best < n && h(a) > 0 && h(b) < 0) {
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      const double mid = 0.5 * (a + b);
      (h(mid) > 0 ? a : b) = mid;
    }
    const double s = 0.5 * (a + b);
    return {s, f(s) / s};
  }
  // no interior tangent: fall back to the maximum chord on the grid
  return {at(best), best_slope};
}

struct ToyInputs {
  const std::vector<double>* kh;     // nr x nz, mD
  const std::vector<double>* aniso;  // nr x nz
  const std::vector<double>* phi;    // nr x nz
  double q;                          // m^3 / day
  RelPermCoeffs coeffs;
};

struct ToyTargets {
  std::vector<double> sg;  // 12 x nr x nz
  std::vector<double> dp;  // 12 x nr x nz, bar
};

/// Deterministic analytic response at the report days.
///
/// Saturation: per row z a front radius r_F = sqrt(Q t f' w(z) / (pi h phi_bar)),
/// with w(z) the row-mean permeability relative to the global mean, tilted
/// towards the top by the row-mean anisotropy; S_g = S_front sqrt(1 - (r/r_F)^2)
/// inside the front.
/// Pressure: dp = A Q mu_w / kbar(z) E1(r^2 / (4 eta0 kbar(z) t)).
inline ToyTargets toy_targets(const ToyInputs& in, const Grid& grid, const ToyPhysicsConstants& k = {}) {
  const std::size_t nr = grid.nr, nz = grid.nz;
  const auto& kh = *in.kh;
  const auto& an = *in.aniso;
  const auto& phi = *in.phi;
  if (kh.size() != grid.cells() || an.size() != grid.cells() || phi.size() != grid.cells()) {
    throw std::invalid_argument("toy_targets: field sizes do not match the " + std::to_string(nr) + "x" +
                                std::to_string(nz) + " grid");
  }
  const auto front = welge_front(in.coeffs, k.mu_g, k.mu_w);
  double kmean = 0, phimean = 0;
  for (std::size_t i = 0; i < kh.size(); ++i) {
    kmean += kh[i];
    phimean += phi[i];
  }
  kmean /= static_cast<double>(kh.size());
  phimean /= static_cast<double>(kh.size());
  std::vector<double> krow(nz, 0.0), arow(nz, 0.0);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nz; ++j) {
      krow[j] += kh[i * nz + j] / static_cast<double>(nr);
      arow[j] += an[i * nz + j] / static_cast<double>(nr);
    }
  const double cap = 1.0 - in.coeffs.swi;
  const double s_front = std::min(front.s_front, cap);
  ToyTargets out;
  out.sg.assign(Grid::steps() * nr * nz, 0.0);
  out.dp.assign(Grid::steps() * nr * nz, 0.0);
  for (std::size_t s = 0; s < Grid::steps(); ++s) {
    const double t = kReportDays[s];
    for (std::size_t j = 0; j < nz; ++j) {
      const double tilt = 1.0 + 0.5 * arow[j] * (1.0 - 2.0 * grid.z_centers[j] / k.thickness);
      const double w = krow[j] / kmean * tilt;
      const double rf2 = in.q * t * front.slope * w / (std::numbers::pi * k.thickness * phimean);
      const double amp = k.dp_scale * in.q * k.mu_w / krow[j];
      for (std::size_t i = 0; i < nr; ++i) {
        const double r = grid.r_centers[i];
        const std::size_t at = (s * nr + i) * nz + j;
        const double u = 1.0 - r * r / rf2;
        out.sg[at] = u > 0 ? std::min(s_front * std::sqrt(u), cap) : 0.0;
        out.dp[at] = amp * expint_e1(r * r / (4.0 * k.eta0 * krow[j] * t));
      }
    }
  }
  return out;
}

}  // namespace ffino
