#pragma once

// Mixed-radix FFT for arbitrary lengths plus autodiff-aware rfft/irfft/fft
// along a chosen tensor axis.
//
// Conventions: forward transforms are unnormalized with kernel e^{-2 pi i kn/N};
// inverse transforms divide by N. irfft reads floor(N/2)+1 bins and ignores the
// imaginary part of the DC bin (and of the Nyquist bin when N is even).

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "ffino/core/tensor.hpp"

namespace ffino {

template <typename T>
using Complex = std::complex<T>;

namespace detail {

template <typename T>
inline Complex<T> cmul(Complex<T> a, Complex<T> b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
template <typename T>
inline Complex<T> cmul_conj(Complex<T> a, Complex<T> b) {  // a * conj(b)
  return {a.real() * b.real() + a.imag() * b.imag(), a.imag() * b.real() - a.real() * b.imag()};
}

}  // namespace detail

/// Precomputed factorization and twiddles for one transform length.
template <typename T>
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("FftPlan: zero-length transform");
    twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles_[k] = Complex<T>(static_cast<T>(std::cos(phase)), static_cast<T>(std::sin(phase)));
    }
    std::size_t rest = n;
    for (std::size_t p : {4, 2, 3, 5}) {
      while (rest % p == 0 && rest > 1) {
        factors_.push_back(p);
        rest /= p;
      }
    }
    for (std::size_t p = 7; rest > 1; p += 2) {
      while (rest % p == 0) {
        factors_.push_back(p);
        rest /= p;
      }
    }
    if (factors_.empty()) factors_.push_back(1);
  }

  std::size_t size() const { return n_; }

  /// out[k] = sum_n in[n * stride] e^{-+2 pi i kn/N}; unnormalized in both directions.
  void transform(const Complex<T>* in, Complex<T>* out, bool inverse, std::size_t stride = 1) const {
    if (n_ == 1) {
      out[0] = in[0];
      return;
    }
    work(out, in, 1, stride, 0, inverse);
  }

 private:
  void work(Complex<T>* out, const Complex<T>* in, std::size_t fstride, std::size_t stride, std::size_t level,
            bool inverse) const {
    const std::size_t p = factors_[level];
    std::size_t m = n_;
    for (std::size_t l = 0; l <= level; ++l) m /= factors_[l];
    const Complex<T>* src = in;
    if (m == 1) {
      for (std::size_t q = 0; q < p; ++q, src += fstride * stride) out[q] = *src;
    } else {
      for (std::size_t q = 0; q < p; ++q, src += fstride * stride) work(out + q * m, src, fstride * p, stride, level + 1, inverse);
    }
    butterfly(out, fstride, m, p, inverse);
  }

  Complex<T> twiddle(std::size_t idx, bool inverse) const {
    const Complex<T> t = twiddles_[idx];
    return inverse ? std::conj(t) : t;
  }

  void butterfly(Complex<T>* out, std::size_t fstride, std::size_t m, std::size_t p, bool inverse) const {
    if (p == 2) {
      for (std::size_t u = 0; u < m; ++u) {
        const Complex<T> t = detail::cmul(out[u + m], twiddle(u * fstride, inverse));
        out[u + m] = out[u] - t;
        out[u] += t;
      }
      return;
    }
    if (p == 4) {
      for (std::size_t u = 0; u < m; ++u) {
        const Complex<T> a0 = out[u];
        const Complex<T> a1 = detail::cmul(out[u + m], twiddle(u * fstride, inverse));
        const Complex<T> a2 = detail::cmul(out[u + 2 * m], twiddle(2 * u * fstride, inverse));
        const Complex<T> a3 = detail::cmul(out[u + 3 * m], twiddle(3 * u * fstride, inverse));
        const Complex<T> s02 = a0 + a2, d02 = a0 - a2, s13 = a1 + a3, d13 = a1 - a3;
        // multiply d13 by -i (forward) or +i (inverse)
        const Complex<T> rot = inverse ? Complex<T>(-d13.imag(), d13.real()) : Complex<T>(d13.imag(), -d13.real());
        out[u] = s02 + s13;
        out[u + m] = d02 + rot;
        out[u + 2 * m] = s02 - s13;
        out[u + 3 * m] = d02 - rot;
      }
      return;
    }
    thread_local std::vector<Complex<T>> scratch;
    scratch.resize(p);
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t q = 0; q < p; ++q) scratch[q] = out[u + q * m];
      for (std::size_t q1 = 0; q1 < p; ++q1) {
        const std::size_t k = u + q1 * m;
        Complex<T> acc = scratch[0];
        std::size_t idx = 0;
        for (std::size_t q = 1; q < p; ++q) {
          idx += fstride * k;
          idx %= n_;
          acc += detail::cmul(scratch[q], twiddle(idx, inverse));
        }
        out[k] = acc;
      }
    }
  }

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<Complex<T>> twiddles_;
};

/// Shared, immutable plan for length n.
template <typename T>
const FftPlan<T>& fft_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan<T>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan<T>>(n);
  return *slot;
}

// ---------------------------------------------------------------------------
// Raw 1-D kernels on contiguous buffers

namespace fft1d {

/// n real samples -> n/2+1 bins.
template <typename T>
void rfft(const T* x, std::size_t n, Complex<T>* out) {
  thread_local std::vector<Complex<T>> in, full;
  in.resize(n);
  full.resize(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = Complex<T>(x[i], T(0));
  fft_plan<T>(n).transform(in.data(), full.data(), false);
  std::copy_n(full.begin(), n / 2 + 1, out);
}

/// n/2+1 bins -> n real samples (normalized).
template <typename T>
void irfft(const Complex<T>* spec, std::size_t n, T* x) {
  thread_local std::vector<Complex<T>> in, full;
  in.assign(n, Complex<T>(0, 0));
  full.resize(n);
  const std::size_t bins = n / 2 + 1;
  in[0] = Complex<T>(spec[0].real(), T(0));
  for (std::size_t k = 1; k < bins; ++k) {
    if (2 * k == n) {
      in[k] = Complex<T>(spec[k].real(), T(0));
    } else {
      in[k] = spec[k];
      in[n - k] = std::conj(spec[k]);
    }
  }
  fft_plan<T>(n).transform(in.data(), full.data(), true);
  const T scale = T(1) / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = full[i].real() * scale;
}

/// Adjoint of rfft: x_bar[n] = Re sum_k g[k] e^{+i theta_kn}.
template <typename T>
void rfft_adjoint(const Complex<T>* g, std::size_t n, T* x_bar) {
  thread_local std::vector<Complex<T>> in, full;
  in.assign(n, Complex<T>(0, 0));
  full.resize(n);
  std::copy_n(g, n / 2 + 1, in.begin());
  fft_plan<T>(n).transform(in.data(), full.data(), true);
  for (std::size_t i = 0; i < n; ++i) x_bar[i] += full[i].real();
}

/// Adjoint of irfft: spec_bar[k] = (c_k / n) rfft(g)[k], c_k = 1 on DC/Nyquist, 2 elsewhere.
template <typename T>
void irfft_adjoint(const T* g, std::size_t n, Complex<T>* spec_bar) {
  thread_local std::vector<Complex<T>> tmp;
  const std::size_t bins = n / 2 + 1;
  tmp.resize(bins);
  rfft(g, n, tmp.data());
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = k == 0 || 2 * k == n;
    const T c = (edge ? T(1) : T(2)) / static_cast<T>(n);
    spec_bar[k] += tmp[k] * c;
  }
}

}  // namespace fft1d

// ---------------------------------------------------------------------------
// Tensor-level ops

namespace detail {

struct AxisLayout {
  std::size_t outer, len, inner;
};

inline AxisLayout axis_layout(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                                shape_str(shape));
  }
  AxisLayout l{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  if (l.len == 0) throw std::invalid_argument(std::string(op) + ": zero-length axis");
  return l;
}

/// Gather line (o, i) along the axis into buf, run fn, scatter back.
template <typename Src, typename Dst, typename F>
void for_each_line(const AxisLayout& in, const AxisLayout& out, const Src* src, Dst* dst, F&& fn) {
  thread_local std::vector<Src> line_in;
  thread_local std::vector<Dst> line_out;
  line_in.resize(in.len);
  line_out.resize(out.len);
  for (std::size_t o = 0; o < in.outer; ++o) {
    for (std::size_t i = 0; i < in.inner; ++i) {
      for (std::size_t k = 0; k < in.len; ++k) line_in[k] = src[(o * in.len + k) * in.inner + i];
      for (std::size_t k = 0; k < out.len; ++k) line_out[k] = dst[(o * out.len + k) * out.inner + i];
      fn(line_in.data(), line_out.data());
      for (std::size_t k = 0; k < out.len; ++k) dst[(o * out.len + k) * out.inner + i] = line_out[k];
    }
  }
}

template <typename T>
Complex<T>* as_complex(std::vector<T>& v) {
  return reinterpret_cast<Complex<T>*>(v.data());
}
template <typename T>
const Complex<T>* as_complex(const std::vector<T>& v) {
  return reinterpret_cast<const Complex<T>*>(v.data());
}

}  // namespace detail

/// Real-to-half-spectrum transform along `axis`.
template <typename T>
ComplexTensor<T> rfft(const Tensor<T>& x, std::size_t axis) {
  const auto in = detail::axis_layout(x.shape(), axis, "rfft");
  const std::size_t n = in.len;
  const detail::AxisLayout out{in.outer, n / 2 + 1, in.inner};
  Shape shape = x.shape();
  shape[axis] = out.len;
  std::vector<T> value(2 * shape_numel(shape), T(0));
  detail::for_each_line(in, out, x.data().data(), detail::as_complex(value),
                        [n](const T* line, Complex<T>* spec) { fft1d::rfft(line, n, spec); });
  auto bw = [in, out, n](Node<T>& self) {
    auto& gx = self.parents[0]->grad_buffer();
    detail::for_each_line(out, in, detail::as_complex(self.grad), gx.data(),
                          [n](const Complex<T>* g, T* xb) { fft1d::rfft_adjoint(g, n, xb); });
  };
  return ComplexTensor<T>(detail::make_node<T>(std::move(shape), std::move(value), {&x.node()}, bw, "rfft", true));
}

/// Half-spectrum-to-real transform along `axis`, producing `length` samples.
template <typename T>
Tensor<T> irfft(const ComplexTensor<T>& spec, std::size_t axis, std::size_t length) {
  if (length == 0) throw std::invalid_argument("irfft: zero-length output");
  const auto in = detail::axis_layout(spec.shape(), axis, "irfft");
  if (in.len != length / 2 + 1) {
    throw std::invalid_argument("irfft: axis has " + std::to_string(in.len) + " bins but length " +
                                std::to_string(length) + " needs " + std::to_string(length / 2 + 1));
  }
  const detail::AxisLayout out{in.outer, length, in.inner};
  Shape shape = spec.shape();
  shape[axis] = length;
  std::vector<T> value(shape_numel(shape), T(0));
  detail::for_each_line(in, out, detail::as_complex(spec.node()->value), value.data(),
                        [length](const Complex<T>* s, T* line) { fft1d::irfft(s, length, line); });
  auto bw = [in, out, length](Node<T>& self) {
    auto& gs = self.parents[0]->grad_buffer();
    detail::for_each_line(out, in, self.grad.data(), detail::as_complex(gs),
                          [length](const T* g, Complex<T>* sb) { fft1d::irfft_adjoint(g, length, sb); });
  };
  return detail::make_result<T>(std::move(shape), std::move(value), {&spec.node()}, bw, "irfft");
}

/// Full complex transform along `axis` (inverse divides by the length).
template <typename T>
ComplexTensor<T> fft(const ComplexTensor<T>& x, std::size_t axis, bool inverse = false) {
  const auto l = detail::axis_layout(x.shape(), axis, "fft");
  const std::size_t n = l.len;
  const T scale = inverse ? T(1) / static_cast<T>(n) : T(1);
  std::vector<T> value(x.node()->value.size());
  auto run = [n](const detail::AxisLayout& lay, const Complex<T>* src, Complex<T>* dst, bool inv, T s) {
    detail::for_each_line(lay, lay, src, dst, [n, inv, s](const Complex<T>* a, Complex<T>* b) {
      fft_plan<T>(n).transform(a, b, inv);
      for (std::size_t k = 0; k < n; ++k) b[k] *= s;
    });
  };
  run(l, detail::as_complex(x.node()->value), detail::as_complex(value), inverse, scale);
  // Adjoint of the unnormalized forward DFT is the unnormalized inverse and vice versa.
  auto bw = [l, inverse, scale, run](Node<T>& self) {
    std::vector<T> tmp(self.grad.size());
    run(l, detail::as_complex(self.grad), detail::as_complex(tmp), !inverse, scale);
    auto& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
  };
  return ComplexTensor<T>(detail::make_node<T>(x.shape(), std::move(value), {&x.node()}, bw, "fft", true));
}

/// View a complex tensor as real pairs: shape (..., 2).
template <typename T>
Tensor<T> as_real(const ComplexTensor<T>& x) {
  Shape shape = x.shape();
  shape.push_back(2);
  return detail::make_result<T>(std::move(shape), x.node()->value, {&x.node()},
                                [](Node<T>& self) {
                                  auto& g = self.parents[0]->grad_buffer();
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                },
                                "as_real");
}

/// Inverse of as_real: a trailing axis of length 2 becomes (re, im).
template <typename T>
ComplexTensor<T> as_complex(const Tensor<T>& x) {
  if (x.ndim() < 2 || x.shape().back() != 2) {
    throw std::invalid_argument("as_complex: trailing axis must have length 2, got " + shape_str(x.shape()));
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  return ComplexTensor<T>(detail::make_node<T>(std::move(shape), x.node()->value, {&x.node()},
                                               [](Node<T>& self) {
                                                 auto& g = self.parents[0]->grad_buffer();
                                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                               },
                                               "as_complex", true));
}

}  // namespace ffino
