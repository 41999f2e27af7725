#pragma once

// Relative Lp loss with a first-derivative term along the radial axis.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ffino/core/error.hpp"
#include "ffino/core/tensor.hpp"

namespace ffino {

struct LossConfig {
  double p = 2.0;
  double beta = 0.5;
  bool physical_r = false;  // divide radial differences by the cell-center spacing

  void validate() const {
    if (!(p >= 1.0) || !(beta >= 0.0)) {
      throw ConfigError("loss needs p >= 1 and beta >= 0, got p=" + std::to_string(p) + " beta=" + std::to_string(beta));
    }
  }
};

namespace detail {

inline double lp_norm(const std::vector<double>& v, double p) {
  double s = 0;
  if (p == 2.0) {
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

/// d||v||_p / dv_i, zero when v == 0.
inline std::vector<double> lp_norm_grad(const std::vector<double>& v, double norm, double p) {
  std::vector<double> g(v.size(), 0.0);
  if (norm == 0.0) return g;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a == 0.0) continue;
    g[i] = (p == 2.0 ? v[i] : std::copysign(std::pow(a, p - 1.0), v[i])) / std::pow(norm, p - 1.0);
  }
  return g;
}

}  // namespace detail

/// ||y - yh||_p / ||y||_p + beta ||D(y - yh)||_p / ||D y||_p for tensors whose
/// last two axes are (N_r, N_z). D is the forward difference along N_r (index
/// space, or divided by dr when cfg.physical_r). Norms run over the whole batch.
/// The reference y is treated as a constant.
template <typename T>
Tensor<T> lp_loss(const Tensor<T>& y, const Tensor<T>& y_hat, const LossConfig& cfg = {},
                  const std::vector<double>& r_centers = {}) {
  cfg.validate();
  if (y.shape() != y_hat.shape()) {
    throw std::invalid_argument("lp_loss: shape mismatch " + shape_str(y.shape()) + " vs " + shape_str(y_hat.shape()));
  }
  if (y.ndim() < 2) throw std::invalid_argument("lp_loss: need at least 2 axes, got " + shape_str(y.shape()));
  const std::size_t nz = y.dim(y.ndim() - 1), nr = y.dim(y.ndim() - 2);
  const std::size_t outer = y.size() / (nr * nz);
  const bool use_d = cfg.beta > 0;
  if (use_d && nr < 2) throw std::invalid_argument("lp_loss: derivative term needs N_r >= 2");
  if (use_d && cfg.physical_r && r_centers.size() != nr) {
    throw ConfigError("lp_loss: physical radial differences need " + std::to_string(nr) + " radii, got " +
                      std::to_string(r_centers.size()));
  }
  std::vector<double> inv_dr(nr > 1 ? nr - 1 : 0, 1.0);
  if (cfg.physical_r)
    for (std::size_t i = 0; i + 1 < nr; ++i) inv_dr[i] = 1.0 / (r_centers[i + 1] - r_centers[i]);

  const auto yv = y.data(), hv = y_hat.data();
  std::vector<double> e(y.size()), ref(y.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = static_cast<double>(hv[i]) - static_cast<double>(yv[i]);
    ref[i] = yv[i];
  }
  auto diff_r = [&](const std::vector<double>& v) {
    std::vector<double> d(outer * (nr - 1) * nz);
    for (std::size_t b = 0; b < outer; ++b)
      for (std::size_t i = 0; i + 1 < nr; ++i)
        for (std::size_t j = 0; j < nz; ++j)
          d[(b * (nr - 1) + i) * nz + j] = (v[(b * nr + i + 1) * nz + j] - v[(b * nr + i) * nz + j]) * inv_dr[i];
    return d;
  };
  const double ny = detail::lp_norm(ref, cfg.p);
  if (ny == 0.0) throw NumericalError("lp_loss: reference has zero norm");
  const double ne = detail::lp_norm(e, cfg.p);
  double loss = ne / ny;
  std::vector<double> de;
  double nde = 0, ndy = 0;
  if (use_d) {
    de = diff_r(e);
    ndy = detail::lp_norm(diff_r(ref), cfg.p);
    if (ndy == 0.0) throw NumericalError("lp_loss: reference has zero radial derivative norm");
    nde = detail::lp_norm(de, cfg.p);
    loss += cfg.beta * nde / ndy;
  }

  auto bw = [e = std::move(e), de = std::move(de), inv_dr = std::move(inv_dr), ne, ny, nde, ndy, nr, nz, outer, cfg,
             use_d](Node<T>& self) {
    auto& g = self.parents[1]->grad_buffer();
    const double up = self.grad[0];
    const auto ge = detail::lp_norm_grad(e, ne, cfg.p);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(up * ge[i] / ny);
    if (!use_d) return;
    const auto gd = detail::lp_norm_grad(de, nde, cfg.p);
    const double s = up * cfg.beta / ndy;
    for (std::size_t b = 0; b < outer; ++b)
      for (std::size_t i = 0; i + 1 < nr; ++i)
        for (std::size_t j = 0; j < nz; ++j) {
          const double v = s * gd[(b * (nr - 1) + i) * nz + j] * inv_dr[i];
          g[(b * nr + i + 1) * nz + j] += static_cast<T>(v);
          g[(b * nr + i) * nz + j] -= static_cast<T>(v);
        }
  };
  // the reference enters as a constant: only y_hat receives a gradient
  const Tensor<T> y_const = y.requires_grad() ? y.detach() : y;
  return detail::make_result<T>({1}, {static_cast<T>(loss)}, {&y_const.node(), &y_hat.node()}, bw, "lp_loss");
}

}  // namespace ffino
