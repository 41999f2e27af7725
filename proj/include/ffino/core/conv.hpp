#pragma once

#include "ffino/core/linalg.hpp"

namespace ffino {

enum class Padding { same, valid };

namespace detail {

struct ConvGeometry {
  std::size_t batch, cin, h, w;
  std::size_t cout, kh, kw;
  std::size_t stride;
  std::size_t oh, ow;
  std::size_t pad_top, pad_left;

  std::size_t patch() const { return cin * kh * kw; }
  std::size_t out_plane() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad_top == 0 && pad_left == 0; }
};

inline std::size_t same_out(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

inline ConvGeometry conv_geometry(const Shape& x, const Shape& w, Padding padding, std::size_t stride) {
  if (x.size() != 4 || w.size() != 4) {
    throw std::invalid_argument("conv2d: expected x[B,C,H,W] and w[Cout,Cin,kh,kw], got " + shape_str(x) + " and " +
                                shape_str(w));
  }
  if (x[1] != w[1]) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(x[1]) + " channels but kernel " + shape_str(w) +
                                " expects " + std::to_string(w[1]));
  }
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  ConvGeometry g{x[0], x[1], x[2], x[3], w[0], w[2], w[3], stride, 0, 0, 0, 0};
  if (padding == Padding::same) {
    g.oh = same_out(g.h, stride);
    g.ow = same_out(g.w, stride);
    const std::size_t need_h = (g.oh - 1) * stride + g.kh;
    const std::size_t need_w = (g.ow - 1) * stride + g.kw;
    g.pad_top = need_h > g.h ? (need_h - g.h) / 2 : 0;
    g.pad_left = need_w > g.w ? (need_w - g.w) / 2 : 0;
  } else {
    if (g.kh > g.h || g.kw > g.w) {
      throw std::invalid_argument("conv2d: kernel " + shape_str(w) + " larger than unpadded input " + shape_str(x));
    }
    g.oh = (g.h - g.kh) / stride + 1;
    g.ow = (g.w - g.kw) / stride + 1;
  }
  return g;
}

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.cin; ++c) {
    const T* xc = x + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          T* dst = row + oy * g.ow;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(y) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad_left);
            dst[ox] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.w)) ? T(0) : src[xx];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.cin; ++c) {
    T* xc = dx + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = xc + static_cast<std::size_t>(y) * g.w;
          const T* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(g.w)) dst[xx] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D cross-correlation plus bias: x[B,Cin,H,W], w[Cout,Cin,kh,kw], b[Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Padding padding = Padding::same,
                 std::size_t stride = 1) {
  const auto g = detail::conv_geometry(x.shape(), w.shape(), padding, stride);
  if (b.size() != g.cout) {
    throw std::invalid_argument("conv2d: bias " + shape_str(b.shape()) + " does not match " +
                                std::to_string(g.cout) + " output channels");
  }
  const std::size_t in_item = g.cin * g.h * g.w;
  const std::size_t out_item = g.cout * g.out_plane();
  std::vector<T> out(g.batch * out_item);
  ConstMatMap<T> wm(w.data().data(), g.cout, g.patch());
  const auto bias = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(b.data().data(), g.cout);
  std::vector<T> col(g.pointwise() ? 0 : g.patch() * g.out_plane());
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x.data().data() + n * in_item;
    MatMap<T> om(out.data() + n * out_item, g.cout, g.out_plane());
    if (g.pointwise()) {
      om.noalias() = wm * ConstMatMap<T>(xn, g.cin, g.out_plane());
    } else {
      detail::im2col(g, xn, col.data());
      om.noalias() = wm * ConstMatMap<T>(col.data(), g.patch(), g.out_plane());
    }
    om.colwise() += bias;
  }
  auto bw = [g, in_item, out_item](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    ConstMatMap<T> wm(pw.value.data(), g.cout, g.patch());
    std::vector<T> col(g.pointwise() ? 0 : g.patch() * g.out_plane());
    std::vector<T> dcol(col.size());
    for (std::size_t n = 0; n < g.batch; ++n) {
      ConstMatMap<T> gm(self.grad.data() + n * out_item, g.cout, g.out_plane());
      const T* xn = px.value.data() + n * in_item;
      if (pb.requires_grad) {
        auto& gb = pb.grad_buffer();
        const T* gp = self.grad.data() + n * out_item;
        for (std::size_t c = 0; c < g.cout; ++c) {
          T s = 0;
          for (std::size_t i = 0; i < g.out_plane(); ++i) s += gp[c * g.out_plane() + i];
          gb[c] += s;
        }
      }
      if (g.pointwise()) {
        if (pw.requires_grad) {
          MatMap<T>(pw.grad_buffer().data(), g.cout, g.patch()).noalias() +=
              gm * ConstMatMap<T>(xn, g.cin, g.out_plane()).transpose();
        }
        if (px.requires_grad) {
          MatMap<T>(px.grad_buffer().data() + n * in_item, g.cin, g.out_plane()).noalias() += wm.transpose() * gm;
        }
        continue;
      }
      if (pw.requires_grad) {
        detail::im2col(g, xn, col.data());
        MatMap<T>(pw.grad_buffer().data(), g.cout, g.patch()).noalias() +=
            gm * ConstMatMap<T>(col.data(), g.patch(), g.out_plane()).transpose();
      }
      if (px.requires_grad) {
        MatMap<T>(dcol.data(), g.patch(), g.out_plane()).noalias() = wm.transpose() * gm;
        detail::col2im_add(g, dcol.data(), px.grad_buffer().data() + n * in_item);
      }
    }
  };
  return detail::make_result<T>({g.batch, g.cout, g.oh, g.ow}, std::move(out), {&x.node(), &w.node(), &b.node()}, bw,
                                "conv2d");
}

/// Nearest-neighbour 2x upsampling of the two trailing axes.
template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  if (x.ndim() != 4) throw std::invalid_argument("upsample_nearest2x: expected [B,C,H,W], got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  std::vector<T> out(planes * 4 * h * w);
  const auto& v = x.node()->value;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const T* src = v.data() + p * h * w + (y / 2) * w;
      T* dst = out.data() + (p * 2 * h + y) * 2 * w;
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
    }
  }
  auto bw = [planes, h, w](Node<T>& self) {
    auto& gx = self.parents[0]->grad_buffer();
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t y = 0; y < 2 * h; ++y) {
        const T* src = self.grad.data() + (p * 2 * h + y) * 2 * w;
        T* dst = gx.data() + p * h * w + (y / 2) * w;
        for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
      }
    }
  };
  return detail::make_result<T>({x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {&x.node()}, bw, "upsample");
}

/// Concatenate [B,Ca,...] and [B,Cb,...] along axis 1.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() < 2 || a.ndim() != b.ndim() || a.dim(0) != b.dim(0) ||
      !std::equal(a.shape().begin() + 2, a.shape().end(), b.shape().begin() + 2)) {
    throw std::invalid_argument("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0);
  const std::size_t ia = a.size() / batch;
  const std::size_t ib = b.size() / batch;
  std::vector<T> out(a.size() + b.size());
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(a.data().data() + n * ia, ia, out.data() + n * (ia + ib));
    std::copy_n(b.data().data() + n * ib, ib, out.data() + n * (ia + ib) + ia);
  }
  Shape shape = a.shape();
  shape[1] += b.dim(1);
  auto bw = [batch, ia, ib](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t n = 0; n < batch; ++n) {
      const T* g = self.grad.data() + n * (ia + ib);
      if (pa.requires_grad) {
        T* d = pa.grad_buffer().data() + n * ia;
        for (std::size_t i = 0; i < ia; ++i) d[i] += g[i];
      }
      if (pb.requires_grad) {
        T* d = pb.grad_buffer().data() + n * ib;
        for (std::size_t i = 0; i < ib; ++i) d[i] += g[ia + i];
      }
    }
  };
  return detail::make_result<T>(std::move(shape), std::move(out), {&a.node(), &b.node()}, bw, "concat");
}

}  // namespace ffino
