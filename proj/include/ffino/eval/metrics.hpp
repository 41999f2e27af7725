#pragma once

// R^2, RMSE, SSIM and AOI-restricted relative error on flat arrays.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ffino/core/error.hpp"

namespace ffino {

namespace detail {
template <typename A, typename B>
void check_same_size(std::span<const A> y, std::span<const B> yh, const char* what) {
  if (y.size() != yh.size()) {
    throw std::invalid_argument(std::string(what) + ": size mismatch " + std::to_string(y.size()) + " vs " +
                                std::to_string(yh.size()));
  }
}
}  // namespace detail

template <typename A, typename B = A>
double r2_score(std::span<const A> y, std::span<const B> yh) {
  detail::check_same_size(y, yh, "r2");
  if (y.size() < 2) throw std::invalid_argument("r2: need at least 2 elements");
  double mean = 0;
  for (auto v : y) mean += static_cast<double>(v);
  mean /= static_cast<double>(y.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y[i]) - static_cast<double>(yh[i]);
    const double c = static_cast<double>(y[i]) - mean;
    ss_res += d * d;
    ss_tot += c * c;
  }
  if (ss_tot == 0.0) throw NumericalError("r2: reference has zero variance");
  return 1.0 - ss_res / ss_tot;
}

template <typename A, typename B = A>
double rmse(std::span<const A> y, std::span<const B> yh) {
  detail::check_same_size(y, yh, "rmse");
  if (y.empty()) throw std::invalid_argument("rmse: empty input");
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y[i]) - static_cast<double>(yh[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(y.size()));
}

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double s = 0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2 * sigma * sigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

/// Mean local SSIM of two rows x cols fields over all fully contained
/// windows. The dynamic range L is max - min of the reference y.
template <typename A, typename B = A>
double ssim(std::span<const A> y, std::span<const B> yh, std::size_t rows, std::size_t cols, const SsimOptions& o = {}) {
  detail::check_same_size(y, yh, "ssim");
  if (y.size() != rows * cols) {
    throw std::invalid_argument("ssim: field has " + std::to_string(y.size()) + " values, expected " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (rows < o.window || cols < o.window) {
    throw std::invalid_argument("ssim: field " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " smaller than the " + std::to_string(o.window) + "-cell window");
  }
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double L = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (!(L > 0)) throw NumericalError("ssim: reference has zero dynamic range");
  const double c1 = (o.k1 * L) * (o.k1 * L), c2 = (o.k2 * L) * (o.k2 * L);
  const auto w = gaussian_taps(o.window, o.sigma);
  const std::size_t orow = rows - o.window + 1, ocol = cols - o.window + 1;

  // separable filtering of the five moment images, valid region only
  std::vector<double> src[5];
  for (auto& s : src) s.resize(rows * cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    const double a = static_cast<double>(y[i]), b = static_cast<double>(yh[i]);
    src[0][i] = a;
    src[1][i] = b;
    src[2][i] = a * a;
    src[3][i] = b * b;
    src[4][i] = a * b;
  }
  std::vector<double> tmp(rows * ocol), filt[5];
  for (int k = 0; k < 5; ++k) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ocol; ++c) {
        double s = 0;
        for (std::size_t t = 0; t < o.window; ++t) s += w[t] * src[k][r * cols + c + t];
        tmp[r * ocol + c] = s;
      }
    filt[k].assign(orow * ocol, 0.0);
    for (std::size_t r = 0; r < orow; ++r)
      for (std::size_t c = 0; c < ocol; ++c) {
        double s = 0;
        for (std::size_t t = 0; t < o.window; ++t) s += w[t] * tmp[(r + t) * ocol + c];
        filt[k][r * ocol + c] = s;
      }
  }
  double total = 0;
  for (std::size_t i = 0; i < orow * ocol; ++i) {
    const double mx = filt[0][i], my = filt[1][i];
    const double vx = filt[2][i] - mx * mx, vy = filt[3][i] - my * my, cxy = filt[4][i] - mx * my;
    total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(orow * ocol);
}

struct AOIConfig {
  double sg_threshold = 0.01;
  double dp_threshold = 0.005;  // bar

  double threshold(const std::string& target) const {
    if (target == "sg") return sg_threshold;
    if (target == "dp") return dp_threshold;
    throw ConfigError("unknown target '" + target + "' (expected sg or dp)");
  }
};

struct MreResult {
  double value = 0.0;
  std::size_t cells = 0;  // AOI size
  bool empty() const { return cells == 0; }
};

/// sum_AOI |yh - y| / sum_AOI |y| over the cells where y >= threshold. An empty
/// AOI yields 0 with cells == 0.
template <typename A, typename B = A>
MreResult mre_aoi(std::span<const A> y, std::span<const B> yh, double threshold) {
  detail::check_same_size(y, yh, "mre");
  double num = 0, den = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(static_cast<double>(y[i]) >= threshold)) continue;
    num += std::abs(static_cast<double>(yh[i]) - static_cast<double>(y[i]));
    den += std::abs(static_cast<double>(y[i]));
    ++n;
  }
  if (n == 0 || den == 0) return {0.0, n};
  return {num / den, n};
}

/// Mean over AOI cells of |yh - y| / |y|.
template <typename A, typename B = A>
MreResult mre_aoi_per_cell(std::span<const A> y, std::span<const B> yh, double threshold) {
  detail::check_same_size(y, yh, "mre");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = static_cast<double>(y[i]);
    if (!(a >= threshold) || a == 0) continue;
    s += std::abs(static_cast<double>(yh[i]) - a) / std::abs(a);
    ++n;
  }
  return {n ? s / static_cast<double>(n) : 0.0, n};
}

}  // namespace ffino
