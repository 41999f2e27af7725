#pragma once

// Spectral convolutions over the two trailing (r, z) axes of [B, C, N_r, N_z].
//
// Only the retained modes are ever formed: the truncated forward transform,
// the per-mode channel mixing and the zero-padded inverse transform are each
// a dense product against a precomputed partial DFT basis. This equals
// rfft -> keep low modes -> mix -> irfft exactly, and keeps the adjoints
// plain transposed GEMMs.
//
// Complex weights are stored as real tensors with a trailing (re, im) axis.

#include <numbers>

#include "ffino/core/linalg.hpp"

namespace ffino {

namespace detail {

inline double dft_angle(std::size_t k, std::size_t n, std::size_t len) {
  return 2.0 * std::numbers::pi * static_cast<double>((k * n) % len) / static_cast<double>(len);
}

/// Truncated real transform along an axis of length `len`, keeping bins [0, modes).
template <typename T>
struct RealAxisBasis {
  std::size_t len = 0, modes = 0;
  RowMatrix<T> fwd;  // [len, 2*modes]   x @ fwd = [Re | Im]
  RowMatrix<T> inv;  // [2*modes, len]   [Re | Im] @ inv = irfft(zero-padded spectrum)

  RealAxisBasis(std::size_t len_, std::size_t modes_) : len(len_), modes(modes_), fwd(len_, 2 * modes_), inv(2 * modes_, len_) {
    for (std::size_t k = 0; k < modes; ++k) {
      const bool edge = k == 0 || 2 * k == len;
      const double c = (edge ? 1.0 : 2.0) / static_cast<double>(len);
      for (std::size_t n = 0; n < len; ++n) {
        const double a = dft_angle(k, n, len);
        fwd(n, k) = static_cast<T>(std::cos(a));
        fwd(n, modes + k) = static_cast<T>(-std::sin(a));
        inv(k, n) = static_cast<T>(c * std::cos(a));
        inv(modes + k, n) = static_cast<T>(-c * std::sin(a));
      }
    }
  }
};

/// Complex transform along the full-length axis restricted to a set of
/// frequency rows. basis = [cos; sin] of shape [2*rows, len].
template <typename T>
struct ComplexAxisBasis {
  std::vector<std::size_t> freqs;
  RowMatrix<T> basis;

  ComplexAxisBasis(std::size_t len, std::vector<std::size_t> f) : freqs(std::move(f)), basis(2 * freqs.size(), len) {
    const std::size_t nr = freqs.size();
    for (std::size_t i = 0; i < nr; ++i) {
      for (std::size_t n = 0; n < len; ++n) {
        const double a = dft_angle(freqs[i], n, len);
        basis(i, n) = static_cast<T>(std::cos(a));
        basis(nr + i, n) = static_cast<T>(std::sin(a));
      }
    }
  }
};

/// Re/im planes laid out [mode][row][col].
template <typename T>
struct ModePlanes {
  std::size_t modes = 0, rows = 0, cols = 0;
  std::vector<T> re, im;

  ModePlanes() = default;
  ModePlanes(std::size_t m, std::size_t r, std::size_t c) : modes(m), rows(r), cols(c), re(m * r * c, T(0)), im(m * r * c, T(0)) {}
  std::size_t at(std::size_t m, std::size_t r, std::size_t c) const { return (m * rows + r) * cols + c; }
  MatMap<T> re_mat(std::size_t m) { return MatMap<T>(re.data() + m * rows * cols, rows, cols); }
  MatMap<T> im_mat(std::size_t m) { return MatMap<T>(im.data() + m * rows * cols, rows, cols); }
  ConstMatMap<T> re_mat(std::size_t m) const { return ConstMatMap<T>(re.data() + m * rows * cols, rows, cols); }
  ConstMatMap<T> im_mat(std::size_t m) const { return ConstMatMap<T>(im.data() + m * rows * cols, rows, cols); }
};

/// Source of one mode's [Cin, Cout] complex weight block inside a parameter
/// tensor of shape [..., Cin, Cout, 2].
struct WeightBlock {
  std::size_t param;   // which parameter tensor
  std::size_t offset;  // element offset of the block
};

template <typename T>
ModePlanes<T> gather_weights(const std::vector<const Node<T>*>& params, const std::vector<WeightBlock>& blocks,
                             std::size_t cin, std::size_t cout) {
  ModePlanes<T> w(blocks.size(), cin, cout);
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    const T* src = params[blocks[m].param]->value.data() + blocks[m].offset;
    for (std::size_t i = 0; i < cin * cout; ++i) {
      w.re[m * cin * cout + i] = src[2 * i];
      w.im[m * cin * cout + i] = src[2 * i + 1];
    }
  }
  return w;
}

template <typename T>
void scatter_weight_grads(const std::vector<Node<T>*>& params, const std::vector<WeightBlock>& blocks,
                          const ModePlanes<T>& gw) {
  const std::size_t block = gw.rows * gw.cols;
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    Node<T>* p = params[blocks[m].param];
    if (!p->requires_grad) continue;
    T* dst = p->grad_buffer().data() + blocks[m].offset;
    for (std::size_t i = 0; i < block; ++i) {
      dst[2 * i] += gw.re[m * block + i];
      dst[2 * i + 1] += gw.im[m * block + i];
    }
  }
}

/// y[m] = x[m] @ w[m] (complex).
template <typename T>
ModePlanes<T> mix_modes(const ModePlanes<T>& x, const ModePlanes<T>& w) {
  ModePlanes<T> y(x.modes, x.rows, w.cols);
  for (std::size_t m = 0; m < x.modes; ++m) {
    auto xr = x.re_mat(m), xi = x.im_mat(m);
    auto wr = w.re_mat(m), wi = w.im_mat(m);
    y.re_mat(m).noalias() = xr * wr - xi * wi;
    y.im_mat(m).noalias() = xr * wi + xi * wr;
  }
  return y;
}

/// Adjoint of mix_modes: x_bar = y_bar conj(w)^T, w_bar = conj(x)^T y_bar.
template <typename T>
void mix_modes_backward(const ModePlanes<T>& gy, const ModePlanes<T>& x, const ModePlanes<T>& w, ModePlanes<T>* gx,
                        ModePlanes<T>* gw) {
  for (std::size_t m = 0; m < x.modes; ++m) {
    auto gr = gy.re_mat(m), gi = gy.im_mat(m);
    if (gx) {
      auto wr = w.re_mat(m), wi = w.im_mat(m);
      gx->re_mat(m).noalias() = gr * wr.transpose() + gi * wi.transpose();
      gx->im_mat(m).noalias() = gi * wr.transpose() - gr * wi.transpose();
    }
    if (gw) {
      auto xr = x.re_mat(m), xi = x.im_mat(m);
      gw->re_mat(m).noalias() = xr.transpose() * gr + xi.transpose() * gi;
      gw->im_mat(m).noalias() = xr.transpose() * gi - xi.transpose() * gr;
    }
  }
}

inline void check_spectral_input(const Shape& x, std::size_t cin, const char* op) {
  if (x.size() != 4 || x[1] != cin) {
    throw std::invalid_argument(std::string(op) + ": expected input [B, " + std::to_string(cin) + ", N_r, N_z], got " +
                                shape_str(x));
  }
}

inline void check_modes(std::size_t modes, std::size_t len, const char* axis, const char* op) {
  if (modes == 0 || modes > len / 2 + 1) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(modes) + " modes along " + axis +
                                " exceed the capacity " + std::to_string(len / 2 + 1) + " of a length-" +
                                std::to_string(len) + " axis");
  }
}

/// Retained full-axis frequency rows for the 2-D transform: the low band
/// [0, modes) and its mirror -1 .. -(modes - 1), without duplicates, so the
/// retained set is closed under negation. Returned as (frequency, weight
/// tensor 0/1, block index).
struct BandRow {
  std::size_t freq, band, index;
};

inline std::vector<BandRow> two_band_rows(std::size_t len, std::size_t modes) {
  std::vector<BandRow> rows;
  for (std::size_t i = 0; i < modes; ++i) rows.push_back({i, 0, i});
  for (std::size_t i = 1; i < modes; ++i) {
    const std::size_t f = len - i;
    if (f >= modes) rows.push_back({f, 1, i - 1});
  }
  return rows;
}

}  // namespace detail

/// Shape-checked description of a 2-D spectral weight pair.
struct SpectralShape2D {
  std::size_t modes_r, modes_z, cin, cout;
  Shape weight_shape() const { return {modes_r, modes_z, cin, cout, 2}; }
};

/// Kernel integral with a full 2-D Fourier multiplier.
///
/// x: [B, Cin, N_r, N_z]; w_pos: [modes_r, modes_z, Cin, Cout, 2] for
/// r-frequencies 0 .. modes_r - 1; w_neg: [modes_r - 1, modes_z, Cin, Cout, 2]
/// for r-frequencies -1 .. -(modes_r - 1), left undefined when modes_r == 1.
/// z uses the half spectrum.
template <typename T>
Tensor<T> spectral_conv2d(const Tensor<T>& x, const Tensor<T>& w_pos, const Tensor<T>& w_neg) {
  constexpr const char* op = "spectral_conv2d";
  if (w_pos.ndim() != 5 || w_pos.dim(4) != 2) {
    throw std::invalid_argument(std::string(op) + ": weights must be [m_r, m_z, Cin, Cout, 2], got " +
                                shape_str(w_pos.shape()));
  }
  const std::size_t mr = w_pos.dim(0), mz = w_pos.dim(1), cin = w_pos.dim(2), cout = w_pos.dim(3);
  const Shape neg_shape{mr - 1, mz, cin, cout, 2};
  if (mr > 1 ? (!w_neg.defined() || w_neg.shape() != neg_shape) : w_neg.defined()) {
    throw std::invalid_argument(std::string(op) + ": negative-band weights must be " +
                                (mr > 1 ? shape_str(neg_shape) : std::string("absent")) + " for " + std::to_string(mr) +
                                " r-modes, got " + (w_neg.defined() ? shape_str(w_neg.shape()) : std::string("none")));
  }
  detail::check_spectral_input(x.shape(), cin, op);
  const std::size_t batch = x.dim(0), nr = x.dim(2), nz = x.dim(3);
  detail::check_modes(mr, nr, "r", op);
  detail::check_modes(mz, nz, "z", op);

  const auto band = detail::two_band_rows(nr, mr);
  const std::size_t nrow = band.size();
  std::vector<std::size_t> freqs;
  std::vector<detail::WeightBlock> blocks;  // mode = row * mz + k
  for (const auto& b : band) {
    freqs.push_back(b.freq);
    for (std::size_t k = 0; k < mz; ++k) blocks.push_back({b.band, ((b.index * mz) + k) * cin * cout * 2});
  }
  auto zb = std::make_shared<detail::RealAxisBasis<T>>(nz, mz);
  auto rb = std::make_shared<detail::ComplexAxisBasis<T>>(nr, freqs);
  const std::size_t q = 2 * mz;
  const std::size_t nmodes = nrow * mz;

  // forward: z transform, then r transform of the retained columns
  auto forward_modes = [=](const T* xin, std::size_t channels) {
    const std::size_t bc = batch * channels;
    RowMatrix<T> zt(nr, bc * q);
    {
      RowMatrix<T> zrows = ConstMatMap<T>(xin, bc * nr, nz) * zb->fwd;
      for (std::size_t p = 0; p < bc; ++p)
        for (std::size_t h = 0; h < nr; ++h)
          for (std::size_t j = 0; j < q; ++j) zt(h, p * q + j) = zrows(p * nr + h, j);
    }
    RowMatrix<T> f = rb->basis * zt;  // [2*nrow, bc*q]
    detail::ModePlanes<T> xm(nmodes, batch, channels);
    for (std::size_t i = 0; i < nrow; ++i)
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t k = 0; k < mz; ++k) {
            const std::size_t col = (b * channels + c) * q;
            const std::size_t at = xm.at(i * mz + k, b, c);
            xm.re[at] = f(i, col + k) + f(nrow + i, col + mz + k);
            xm.im[at] = f(i, col + mz + k) - f(nrow + i, col + k);
          }
    return xm;
  };
  // inverse: r synthesis then z synthesis
  auto inverse_modes = [=](const detail::ModePlanes<T>& ym, std::size_t channels, T* out) {
    const std::size_t bc = batch * channels;
    RowMatrix<T> u(2 * nrow, bc * q);
    for (std::size_t i = 0; i < nrow; ++i)
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t k = 0; k < mz; ++k) {
            const std::size_t col = (b * channels + c) * q;
            const std::size_t at = ym.at(i * mz + k, b, c);
            u(i, col + k) = ym.re[at];
            u(i, col + mz + k) = ym.im[at];
            u(nrow + i, col + k) = -ym.im[at];
            u(nrow + i, col + mz + k) = ym.re[at];
          }
    RowMatrix<T> g = rb->basis.transpose() * u;  // [nr, bc*q]
    g *= T(1) / static_cast<T>(nr);
    RowMatrix<T> grows(bc * nr, q);
    for (std::size_t p = 0; p < bc; ++p)
      for (std::size_t h = 0; h < nr; ++h)
        for (std::size_t j = 0; j < q; ++j) grows(p * nr + h, j) = g(h, p * q + j);
    MatMap<T>(out, bc * nr, nz).noalias() = grows * zb->inv;
  };

  auto xm = std::make_shared<detail::ModePlanes<T>>(forward_modes(x.data().data(), cin));
  const auto wm = detail::gather_weights<T>({w_pos.node().get(), w_neg.node().get()}, blocks, cin, cout);
  const auto ym = detail::mix_modes(*xm, wm);
  std::vector<T> out(batch * cout * nr * nz);
  inverse_modes(ym, cout, out.data());

  auto bw = [=](Node<T>& self) {
    auto& px = *self.parents[0];
    std::vector<Node<T>*> params{self.parents[1].get(), self.parents[2].get()};
    // adjoint of the synthesis: analysis of the output gradient
    const std::size_t bco = batch * cout;
    RowMatrix<T> grows = ConstMatMap<T>(self.grad.data(), bco * nr, nz) * zb->inv.transpose();
    RowMatrix<T> gt(nr, bco * q);
    for (std::size_t p = 0; p < bco; ++p)
      for (std::size_t h = 0; h < nr; ++h)
        for (std::size_t j = 0; j < q; ++j) gt(h, p * q + j) = grows(p * nr + h, j);
    RowMatrix<T> gu = rb->basis * gt;
    gu *= T(1) / static_cast<T>(nr);
    detail::ModePlanes<T> gy(nmodes, batch, cout);
    for (std::size_t i = 0; i < nrow; ++i)
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < cout; ++c)
          for (std::size_t k = 0; k < mz; ++k) {
            const std::size_t col = (b * cout + c) * q;
            const std::size_t at = gy.at(i * mz + k, b, c);
            gy.re[at] = gu(i, col + k) + gu(nrow + i, col + mz + k);
            gy.im[at] = gu(i, col + mz + k) - gu(nrow + i, col + k);
          }
    const auto wmb = detail::gather_weights<T>({params[0], params[1]}, blocks, cin, cout);
    detail::ModePlanes<T> gx(nmodes, batch, cin);
    detail::ModePlanes<T> gw(nmodes, cin, cout);
    const bool want_w = params[0]->requires_grad || (params[1] && params[1]->requires_grad);
    detail::mix_modes_backward(gy, *xm, wmb, px.requires_grad ? &gx : nullptr, want_w ? &gw : nullptr);
    if (want_w) detail::scatter_weight_grads(params, blocks, gw);
    if (!px.requires_grad) return;
    // adjoint of the analysis
    const std::size_t bci = batch * cin;
    RowMatrix<T> f(2 * nrow, bci * q);
    for (std::size_t i = 0; i < nrow; ++i)
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t k = 0; k < mz; ++k) {
            const std::size_t col = (b * cin + c) * q;
            const std::size_t at = gx.at(i * mz + k, b, c);
            f(i, col + k) = gx.re[at];
            f(i, col + mz + k) = gx.im[at];
            f(nrow + i, col + mz + k) = gx.re[at];
            f(nrow + i, col + k) = -gx.im[at];
          }
    RowMatrix<T> zt = rb->basis.transpose() * f;  // [nr, bci*q]
    RowMatrix<T> zrows(bci * nr, q);
    for (std::size_t p = 0; p < bci; ++p)
      for (std::size_t h = 0; h < nr; ++h)
        for (std::size_t j = 0; j < q; ++j) zrows(p * nr + h, j) = zt(h, p * q + j);
    MatMap<T>(px.grad_buffer().data(), bci * nr, nz).noalias() += zrows * zb->fwd.transpose();
  };
  return detail::make_result<T>({batch, cout, nr, nz}, std::move(out), {&x.node(), &w_pos.node(), &w_neg.node()}, bw,
                                op);
}

/// Factorized kernel integral: independent 1-D Fourier multipliers along r
/// and z, summed in physical space.
///
/// x: [B, Cin, N_r, N_z]; w_r: [modes_r, Cin, Cout, 2]; w_z: [modes_z, Cin, Cout, 2].
template <typename T>
Tensor<T> spectral_conv_factorized(const Tensor<T>& x, const Tensor<T>& w_r, const Tensor<T>& w_z) {
  constexpr const char* op = "spectral_conv_factorized";
  if (w_r.ndim() != 4 || w_z.ndim() != 4 || w_r.dim(3) != 2 || w_z.dim(3) != 2 || w_r.dim(1) != w_z.dim(1) ||
      w_r.dim(2) != w_z.dim(2)) {
    throw std::invalid_argument(std::string(op) + ": weights must be [m, Cin, Cout, 2] with matching channels, got " +
                                shape_str(w_r.shape()) + " and " + shape_str(w_z.shape()));
  }
  const std::size_t mr = w_r.dim(0), mz = w_z.dim(0), cin = w_r.dim(1), cout = w_r.dim(2);
  detail::check_spectral_input(x.shape(), cin, op);
  const std::size_t batch = x.dim(0), nr = x.dim(2), nz = x.dim(3);
  detail::check_modes(mr, nr, "r", op);
  detail::check_modes(mz, nz, "z", op);
  auto rb = std::make_shared<detail::RealAxisBasis<T>>(nr, mr);
  auto zb = std::make_shared<detail::RealAxisBasis<T>>(nz, mz);
  std::vector<detail::WeightBlock> rblocks, zblocks;
  for (std::size_t k = 0; k < mr; ++k) rblocks.push_back({0, k * cin * cout * 2});
  for (std::size_t k = 0; k < mz; ++k) zblocks.push_back({0, k * cin * cout * 2});
  const std::size_t qr = 2 * mr, qz = 2 * mz;

  // z branch: modes over the last axis, rows (b, h)
  auto z_analysis = [=](const T* xin, std::size_t channels) {
    RowMatrix<T> s = ConstMatMap<T>(xin, batch * channels * nr, nz) * zb->fwd;  // [(b,c,h), qz]
    detail::ModePlanes<T> m(mz, batch * nr, channels);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t h = 0; h < nr; ++h)
          for (std::size_t k = 0; k < mz; ++k) {
            const std::size_t row = (b * channels + c) * nr + h;
            m.re[m.at(k, b * nr + h, c)] = s(row, k);
            m.im[m.at(k, b * nr + h, c)] = s(row, mz + k);
          }
    return m;
  };
  auto z_pack = [=](const detail::ModePlanes<T>& m, std::size_t channels) {
    RowMatrix<T> s(batch * channels * nr, qz);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t h = 0; h < nr; ++h)
          for (std::size_t k = 0; k < mz; ++k) {
            const std::size_t row = (b * channels + c) * nr + h;
            s(row, k) = m.re[m.at(k, b * nr + h, c)];
            s(row, mz + k) = m.im[m.at(k, b * nr + h, c)];
          }
    return s;
  };
  // r branch: modes over axis 2, rows (b, w)
  auto r_analysis = [=](const T* xin, std::size_t channels) {
    detail::ModePlanes<T> m(mr, batch * nz, channels);
    RowMatrix<T> s(qr, nz);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < channels; ++c) {
        s.noalias() = rb->fwd.transpose() * ConstMatMap<T>(xin + (b * channels + c) * nr * nz, nr, nz);
        for (std::size_t k = 0; k < mr; ++k)
          for (std::size_t w = 0; w < nz; ++w) {
            m.re[m.at(k, b * nz + w, c)] = s(k, w);
            m.im[m.at(k, b * nz + w, c)] = s(mr + k, w);
          }
      }
    return m;
  };
  auto r_pack = [=](const detail::ModePlanes<T>& m, std::size_t b, std::size_t c, RowMatrix<T>& s) {
    for (std::size_t k = 0; k < mr; ++k)
      for (std::size_t w = 0; w < nz; ++w) {
        s(k, w) = m.re[m.at(k, b * nz + w, c)];
        s(mr + k, w) = m.im[m.at(k, b * nz + w, c)];
      }
  };

  auto xz = std::make_shared<detail::ModePlanes<T>>(z_analysis(x.data().data(), cin));
  auto xr = std::make_shared<detail::ModePlanes<T>>(r_analysis(x.data().data(), cin));
  const auto wz = detail::gather_weights<T>({w_z.node().get()}, zblocks, cin, cout);
  const auto wr = detail::gather_weights<T>({w_r.node().get()}, rblocks, cin, cout);
  std::vector<T> out(batch * cout * nr * nz);
  {
    MatMap<T>(out.data(), batch * cout * nr, nz).noalias() = z_pack(detail::mix_modes(*xz, wz), cout) * zb->inv;
    const auto yr = detail::mix_modes(*xr, wr);
    RowMatrix<T> s(qr, nz);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < cout; ++c) {
        r_pack(yr, b, c, s);
        MatMap<T>(out.data() + (b * cout + c) * nr * nz, nr, nz).noalias() += rb->inv.transpose() * s;
      }
  }

  auto bw = [=](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pwr = *self.parents[1];
    auto& pwz = *self.parents[2];
    const T* g = self.grad.data();
    // z branch: analysis of the gradient with the synthesis basis transposed
    detail::ModePlanes<T> gyz(mz, batch * nr, cout);
    {
      RowMatrix<T> s = ConstMatMap<T>(g, batch * cout * nr, nz) * zb->inv.transpose();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < cout; ++c)
          for (std::size_t h = 0; h < nr; ++h)
            for (std::size_t k = 0; k < mz; ++k) {
              const std::size_t row = (b * cout + c) * nr + h;
              gyz.re[gyz.at(k, b * nr + h, c)] = s(row, k);
              gyz.im[gyz.at(k, b * nr + h, c)] = s(row, mz + k);
            }
    }
    detail::ModePlanes<T> gyr(mr, batch * nz, cout);
    {
      RowMatrix<T> s(qr, nz);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < cout; ++c) {
          s.noalias() = rb->inv * ConstMatMap<T>(g + (b * cout + c) * nr * nz, nr, nz);
          for (std::size_t k = 0; k < mr; ++k)
            for (std::size_t w = 0; w < nz; ++w) {
              gyr.re[gyr.at(k, b * nz + w, c)] = s(k, w);
              gyr.im[gyr.at(k, b * nz + w, c)] = s(mr + k, w);
            }
        }
    }
    const auto wzb = detail::gather_weights<T>({&pwz}, zblocks, cin, cout);
    const auto wrb = detail::gather_weights<T>({&pwr}, rblocks, cin, cout);
    detail::ModePlanes<T> gxz(mz, batch * nr, cin), gxr(mr, batch * nz, cin);
    detail::ModePlanes<T> gwz(mz, cin, cout), gwr(mr, cin, cout);
    detail::mix_modes_backward(gyz, *xz, wzb, px.requires_grad ? &gxz : nullptr, pwz.requires_grad ? &gwz : nullptr);
    detail::mix_modes_backward(gyr, *xr, wrb, px.requires_grad ? &gxr : nullptr, pwr.requires_grad ? &gwr : nullptr);
    if (pwz.requires_grad) detail::scatter_weight_grads<T>({&pwz}, zblocks, gwz);
    if (pwr.requires_grad) detail::scatter_weight_grads<T>({&pwr}, rblocks, gwr);
    if (!px.requires_grad) return;
    T* gx = px.grad_buffer().data();
    MatMap<T>(gx, batch * cin * nr, nz).noalias() += z_pack(gxz, cin) * zb->fwd.transpose();
    RowMatrix<T> s(qr, nz);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < cin; ++c) {
        r_pack(gxr, b, c, s);
        MatMap<T>(gx + (b * cin + c) * nr * nz, nr, nz).noalias() += rb->fwd * s;
      }
  };
  return detail::make_result<T>({batch, cout, nr, nz}, std::move(out), {&x.node(), &w_r.node(), &w_z.node()}, bw, op);
}

}  // namespace ffino
