#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ffino/core/error.hpp"
#include "ffino/nn/layers.hpp"

namespace ffino {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
void check_finite_grads(const ParamList<T>& params) {
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
      }
    }
  }
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamList<T>& params, double max_norm) {
  check_finite_grads(params);
  double sq = 0;
  for (const auto& p : params)
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      auto& g = p.tensor.node()->grad;
      for (auto& x : g) x = static_cast<T>(static_cast<double>(x) * s);
    }
  }
  return norm;
}

template <typename T>
void zero_grads(ParamList<T>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

/// Adam with bias correction. Moments are kept in double so the update is
/// reproducible regardless of the parameter precision.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(const ParamList<T>& params, AdamConfig cfg = {}) : cfg_(cfg) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor.size(), 0.0);
      v_.emplace_back(p.tensor.size(), 0.0);
    }
  }

  std::size_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  /// One update from the gradients currently stored on the parameters.
  /// A parameter without a gradient is treated as having a zero gradient.
  void step(ParamList<T>& params, double lr) {
    if (params.size() != m_.size()) {
      throw std::logic_error("Adam: parameter list has " + std::to_string(params.size()) + " entries, state has " +
                             std::to_string(m_.size()));
    }
    check_finite_grads(params);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k].tensor;
      if (p.size() != m_[k].size()) {
        throw std::logic_error("Adam: state for '" + params[k].name + "' does not match its shape");
      }
      const auto g = p.grad();
      auto w = p.mutable_data();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace ffino
