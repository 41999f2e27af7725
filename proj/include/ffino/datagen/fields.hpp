#pragma once

// Spatial input fields: fractal horizontal permeability, skew-normal vertical
// anisotropy and porosity correlated with log permeability.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ffino/core/fft.hpp"
#include "ffino/core/random.hpp"
#include "ffino/datagen/lhs.hpp"

namespace ffino {

struct SpectralFieldParams {
  double hurst = 0.5;
  double anisotropy_ratio = 1.0;  // >= 1; larger stretches correlation along the rotated r direction
  double rotation = 0.0;          // radians
};

namespace detail {

/// Spectral amplitude at integer wavenumber (kr, kz), counted in cycles per
/// domain along each axis.
inline double field_amplitude(double kr, double kz, const SpectralFieldParams& p) {
  const double c = std::cos(p.rotation), s = std::sin(p.rotation);
  const double u = c * kr + s * kz;
  const double v = -s * kr + c * kz;
  const double k = std::sqrt(u * u + p.anisotropy_ratio * p.anisotropy_ratio * v * v);
  return std::pow(1.0 + k, -(p.hurst + 1.0));
}

inline double signed_freq(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
}

/// In-place 2-D complex FFT of a row-major nr x nz array.
inline void fft2(std::vector<std::complex<double>>& a, std::size_t nr, std::size_t nz, bool inverse) {
  const auto& pz = fft_plan<double>(nz);
  const auto& pr = fft_plan<double>(nr);
  std::vector<std::complex<double>> tmp(std::max(nr, nz));
  for (std::size_t i = 0; i < nr; ++i) {
    pz.transform(a.data() + i * nz, tmp.data(), inverse);
    std::copy_n(tmp.data(), nz, a.data() + i * nz);
  }
  for (std::size_t j = 0; j < nz; ++j) {
    pr.transform(a.data() + j, tmp.data(), inverse, nz);
    for (std::size_t i = 0; i < nr; ++i) a[i * nz + j] = tmp[i];
  }
}

}  // namespace detail

/// Zero-mean Gaussian random field with power spectrum (1 + |k|)^-(2H + 2).
/// Filtering white noise keeps it real. The variance is relative to the
/// isotropic H = 0.5 field on the same grid, so the field flattens as H grows.
inline std::vector<double> spectral_gaussian_field(std::size_t nr, std::size_t nz, const SpectralFieldParams& p,
                                                   Rng& rng) {
  std::vector<std::complex<double>> a(nr * nz);
  for (auto& v : a) v = rng.normal();
  detail::fft2(a, nr, nz, false);
  double ref = 0.0;
  const SpectralFieldParams ref_params{};
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nz; ++j) {
      const double kr = detail::signed_freq(i, nr), kz = detail::signed_freq(j, nz);
      const bool dc = i == 0 && j == 0;
      const double amp = dc ? 0.0 : detail::field_amplitude(kr, kz, p);
      if (!dc) ref += std::pow(detail::field_amplitude(kr, kz, ref_params), 2);
      a[i * nz + j] *= amp;
    }
  detail::fft2(a, nr, nz, true);
  // normalized inverse gives variance mean(A^2); divide by the reference's
  const double n = static_cast<double>(nr * nz);
  const double scale = 1.0 / (n * std::sqrt(ref / n));
  std::vector<double> out(nr * nz);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i].real() * scale;
  return out;
}

struct KhParams {
  double k_min = kKhRange.lo;
  double k_base = 290.0;
  double k_max = kKhRange.hi;
  double log_sd = 0.45;  // standard deviation of ln(kh) for the reference spectrum
  SpectralFieldParams shape;
};

/// Per-map generator parameters, drawn around the calibrated defaults.
inline KhParams sample_kh_params(Rng& rng) {
  KhParams p;
  p.k_base = rng.uniform(220.0, 340.0);
  p.log_sd = rng.uniform(0.30, 0.60);
  p.shape.hurst = rng.uniform(0.2, 0.9);
  p.shape.anisotropy_ratio = rng.uniform(1.0, 4.0);
  p.shape.rotation = rng.uniform(-std::numbers::pi / 6, std::numbers::pi / 6);
  return p;
}

/// Fractal horizontal permeability (mD): median ~ k_base, clamped to [k_min, k_max].
inline std::vector<double> fractal_kh(std::uint64_t seed, const KhParams& p, std::size_t nr, std::size_t nz) {
  if (!(p.k_min < p.k_base && p.k_base < p.k_max) || p.k_min < kKhRange.lo || p.k_max > kKhRange.hi) {
    throw ConfigError("fractal_kh: need " + std::to_string(kKhRange.lo) + " <= k_min < k_base < k_max <= " +
                      std::to_string(kKhRange.hi) + ", got " + std::to_string(p.k_min) + ", " +
                      std::to_string(p.k_base) + ", " + std::to_string(p.k_max));
  }
  Rng rng(seed);
  const auto g = spectral_gaussian_field(nr, nz, p.shape, rng);
  std::vector<double> kh(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) kh[i] = std::clamp(p.k_base * std::exp(p.log_sd * g[i]), p.k_min, p.k_max);
  return kh;
}

struct AnisoParams {
  // skew-normal location/scale/shape; chosen so the clamped population has
  // mean ~0.305 and standard deviation ~0.134
  double location = 0.141;
  double scale = 0.212;
  double shape = 4.0;
};

namespace detail {
inline void standardize(std::vector<double>& v) {
  double mean = 0, sq = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / static_cast<double>(v.size()));
  for (double& x : v) x = sd > 0 ? (x - mean) / sd : 0.0;
}
}  // namespace detail

/// Spatially coherent skew-normal anisotropy k_v/k_h in [0.01, 1]:
/// X = location + scale * (delta |g1| + sqrt(1 - delta^2) g2) with g1, g2
/// independent standardized Gaussian fields and delta = shape / sqrt(1 + shape^2).
inline std::vector<double> aniso_map(std::uint64_t seed, std::size_t nr, std::size_t nz, const AnisoParams& a = {}) {
  Rng rng(seed);
  SpectralFieldParams sp;
  sp.hurst = rng.uniform(0.3, 0.8);
  sp.anisotropy_ratio = rng.uniform(1.0, 3.0);
  sp.rotation = rng.uniform(-std::numbers::pi / 8, std::numbers::pi / 8);
  auto g1 = spectral_gaussian_field(nr, nz, sp, rng);
  auto g2 = spectral_gaussian_field(nr, nz, sp, rng);
  detail::standardize(g1);
  detail::standardize(g2);
  const double delta = a.shape / std::sqrt(1.0 + a.shape * a.shape);
  const double rest = std::sqrt(1.0 - delta * delta);
  std::vector<double> out(g1.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.location + a.scale * (delta * std::abs(g1[i]) + rest * g2[i]);
    out[i] = std::clamp(x, kAnisoRange.lo, kAnisoRange.hi);
  }
  return out;
}

/// Log-linear map sending kh in [44.1, 1000] mD onto phi in [0.140, 0.345].
inline double porosity_trend(double kh) {
  const double b = (kPhiRange.hi - kPhiRange.lo) / (std::log10(kKhRange.hi) - std::log10(kKhRange.lo));
  return kPhiRange.lo + b * (std::log10(kh) - std::log10(kKhRange.lo));
}

inline constexpr double kPorosityNoiseSd = 0.005;

/// Porosity from permeability plus N(0, noise_sd^2), clamped to the porosity range.
inline std::vector<double> porosity_from_perm(const std::vector<double>& kh, std::uint64_t seed,
                                              double noise_sd = kPorosityNoiseSd) {
  Rng rng(seed);
  std::vector<double> phi(kh.size());
  for (std::size_t i = 0; i < kh.size(); ++i) {
    const double noise = noise_sd > 0 ? rng.normal(0.0, noise_sd) : 0.0;
    phi[i] = std::clamp(porosity_trend(kh[i]) + noise, kPhiRange.lo, kPhiRange.hi);
  }
  return phi;
}

}  // namespace ffino
