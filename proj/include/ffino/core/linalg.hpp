#pragma once

#include <Eigen/Core>

#include "ffino/core/tensor.hpp"

namespace ffino {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

namespace detail {

inline void check_matmul(const Shape& a, const Shape& b, const char* op) {
  if (a.empty() || b.size() != 2 || a.back() != b[0]) {
    throw std::invalid_argument(std::string(op) + ": inner dimensions disagree for " + shape_str(a) +
                                " @ " + shape_str(b));
  }
}

}  // namespace detail

/// a[..., M, K] @ b[K, N] -> [..., M, N]; leading axes of `a` are batched.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_matmul(a.shape(), b.shape(), "matmul");
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t rows = a.size() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<T> out(rows * n);
  MatMap<T>(out.data(), rows, n).noalias() =
      ConstMatMap<T>(a.data().data(), rows, k) * ConstMatMap<T>(b.data().data(), k, n);
  auto bw = [rows, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    ConstMatMap<T> g(self.grad.data(), rows, n);
    if (pa.requires_grad) {
      MatMap<T>(pa.grad_buffer().data(), rows, k).noalias() += g * ConstMatMap<T>(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MatMap<T>(pb.grad_buffer().data(), k, n).noalias() += ConstMatMap<T>(pa.value.data(), rows, k).transpose() * g;
    }
  };
  return detail::make_result<T>(std::move(out_shape), std::move(out), {&a.node(), &b.node()}, bw, "matmul");
}

/// Affine map over the trailing axis: x[..., K] @ w[K, N] + bias[N].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  detail::check_matmul(x.shape(), w.shape(), "linear");
  const std::size_t k = w.dim(0);
  const std::size_t n = w.dim(1);
  if (bias.size() != n) {
    throw std::invalid_argument("linear: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(n) +
                                " outputs");
  }
  const std::size_t rows = x.size() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  std::vector<T> out(rows * n);
  MatMap<T> om(out.data(), rows, n);
  om.noalias() = ConstMatMap<T>(x.data().data(), rows, k) * ConstMatMap<T>(w.data().data(), k, n);
  om.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data().data(), n);
  auto bw = [rows, k, n](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    ConstMatMap<T> g(self.grad.data(), rows, n);
    if (px.requires_grad) {
      MatMap<T>(px.grad_buffer().data(), rows, k).noalias() += g * ConstMatMap<T>(pw.value.data(), k, n).transpose();
    }
    if (pw.requires_grad) {
      MatMap<T>(pw.grad_buffer().data(), k, n).noalias() += ConstMatMap<T>(px.value.data(), rows, k).transpose() * g;
    }
    if (pb.requires_grad) {
      T* gb = pb.grad_buffer().data();
      const T* gp = self.grad.data();
      for (std::size_t c = 0; c < n; ++c) {
        T s = 0;
        for (std::size_t r = 0; r < rows; ++r) s += gp[r * n + c];
        gb[c] += s;
      }
    }
  };
  return detail::make_result<T>(std::move(out_shape), std::move(out), {&x.node(), &w.node(), &bias.node()}, bw,
                                "linear");
}

}  // namespace ffino
