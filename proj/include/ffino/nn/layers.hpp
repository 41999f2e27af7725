#pragma once

// Parameter containers and forward functions for the operator building
// blocks: pointwise channel maps, fully connected nets, the U-Net branch and
// the three spectral layer types (Fourier, U-Fourier, factorized Fourier).

#include <string>

#include "ffino/core/conv.hpp"
#include "ffino/core/random.hpp"
#include "ffino/nn/spectral.hpp"

namespace ffino {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

namespace init {

template <typename T>
Tensor<T> uniform(const Shape& shape, double bound, Rng& rng) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(shape, std::move(v), true);
}

/// Spectral weights: scale * U[0, 1) on both parts, scale = 1 / (Cin * Cout).
template <typename T>
Tensor<T> spectral(const Shape& shape, std::size_t cin, std::size_t cout, Rng& rng) {
  const double scale = 1.0 / static_cast<double>(cin * cout);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(scale * rng.uniform());
  return Tensor<T>(shape, std::move(v), true);
}

}  // namespace init

/// Convolution with bias; 1x1 kernels realize pointwise channel maps.
template <typename T>
struct ConvParams {
  Tensor<T> weight;  // [Cout, Cin, k, k]
  Tensor<T> bias;    // [Cout]
  std::size_t stride = 1;

  ConvParams() = default;
  ConvParams(std::size_t cin, std::size_t cout, std::size_t kernel, std::size_t stride_, Rng& rng) : stride(stride_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * kernel * kernel));
    weight = init::uniform<T>({cout, cin, kernel, kernel}, bound, rng);
    bias = init::uniform<T>({cout}, bound, rng);
  }

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, Padding::same, stride); }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }

  static std::size_t count(std::size_t cin, std::size_t cout, std::size_t kernel) {
    return cout * cin * kernel * kernel + cout;
  }
};

/// Fully connected net: affine + ReLU between layers, last layer linear.
template <typename T>
struct FnnParams {
  std::vector<std::size_t> widths;
  std::vector<Tensor<T>> weights;  // [d_in, d_out]
  std::vector<Tensor<T>> biases;

  FnnParams() = default;
  FnnParams(std::vector<std::size_t> widths_, Rng& rng) : widths(std::move(widths_)) {
    if (widths.size() < 2) throw std::invalid_argument("FnnParams: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths[i]));
      weights.push_back(init::uniform<T>({widths[i], widths[i + 1]}, bound, rng));
      biases.push_back(init::uniform<T>({widths[i + 1]}, bound, rng));
    }
  }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back({prefix + ".fc" + std::to_string(i) + ".weight", weights[i]});
      out.push_back({prefix + ".fc" + std::to_string(i) + ".bias", biases[i]});
    }
  }

  static std::size_t count(const std::vector<std::size_t>& widths) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) n += widths[i] * widths[i + 1] + widths[i + 1];
    return n;
  }
};

template <typename T>
Tensor<T> fnn_forward(const Tensor<T>& x, const FnnParams<T>& p) {
  if (x.ndim() == 0 || x.shape().back() != p.widths.front()) {
    throw std::invalid_argument("fnn_forward: trailing dimension of " + shape_str(x.shape()) + " does not match input width " +
                                std::to_string(p.widths.front()));
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    h = linear(h, p.weights[i], p.biases[i]);
    if (i + 1 < p.weights.size()) h = relu(h);
  }
  return h;
}

/// U-Net with constant channel count: `depth` stride-2 downsampling convs,
/// a two-conv bottleneck, then per level nearest upsampling, skip
/// concatenation and a 1x1 fuse. depth 0 is the plain two-conv stack.
template <typename T>
struct UNetParams {
  std::size_t depth = 0;
  std::size_t channels = 0;
  std::vector<ConvParams<T>> down;
  ConvParams<T> bottleneck1, bottleneck2;
  std::vector<ConvParams<T>> fuse;

  UNetParams() = default;
  UNetParams(std::size_t channels_, std::size_t depth_, Rng& rng) : depth(depth_), channels(channels_) {
    for (std::size_t i = 0; i < depth; ++i) down.emplace_back(channels, channels, 3, 2, rng);
    bottleneck1 = ConvParams<T>(channels, channels, 3, 1, rng);
    bottleneck2 = ConvParams<T>(channels, channels, 3, 1, rng);
    for (std::size_t i = 0; i < depth; ++i) fuse.emplace_back(2 * channels, channels, 1, 1, rng);
  }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    for (std::size_t i = 0; i < depth; ++i) down[i].collect(prefix + ".down" + std::to_string(i), out);
    bottleneck1.collect(prefix + ".bottleneck1", out);
    bottleneck2.collect(prefix + ".bottleneck2", out);
    for (std::size_t i = 0; i < depth; ++i) fuse[i].collect(prefix + ".fuse" + std::to_string(i), out);
  }

  static std::size_t count(std::size_t channels, std::size_t depth) {
    return depth * ConvParams<T>::count(channels, channels, 3) + 2 * ConvParams<T>::count(channels, channels, 3) +
           depth * ConvParams<T>::count(2 * channels, channels, 1);
  }
};

template <typename T>
Tensor<T> unet_forward(const Tensor<T>& x, const UNetParams<T>& p) {
  if (x.ndim() != 4 || x.dim(1) != p.channels) {
    throw std::invalid_argument("unet_forward: expected [B, " + std::to_string(p.channels) + ", H, W], got " +
                                shape_str(x.shape()));
  }
  const std::size_t factor = std::size_t{1} << p.depth;
  if (x.dim(2) % factor != 0 || x.dim(3) % factor != 0) {
    throw std::invalid_argument("unet_forward: spatial dims " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                                " must be divisible by 2^depth = " + std::to_string(factor));
  }
  std::vector<Tensor<T>> skips{x};
  Tensor<T> h = x;
  for (std::size_t i = 0; i < p.depth; ++i) {
    h = relu(p.down[i](h));
    skips.push_back(h);
  }
  h = p.bottleneck2(relu(p.bottleneck1(h)));
  for (std::size_t i = p.depth; i-- > 0;) {
    h = p.fuse[i](concat_channels(upsample_nearest2x(relu(h)), skips[i]));
  }
  return h;
}

/// Full 2-D Fourier multiplier weights: positive r-frequencies 0 .. m_r - 1
/// and their negatives -1 .. -(m_r - 1).
template <typename T>
struct SpectralWeights2D {
  Tensor<T> pos;  // [modes_r, modes_z, Cin, Cout, 2]
  Tensor<T> neg;  // [modes_r - 1, modes_z, Cin, Cout, 2]; undefined when modes_r == 1

  SpectralWeights2D() = default;
  SpectralWeights2D(std::size_t channels, std::size_t modes_r, std::size_t modes_z, Rng& rng) {
    pos = init::spectral<T>({modes_r, modes_z, channels, channels, 2}, channels, channels, rng);
    if (modes_r > 1) neg = init::spectral<T>({modes_r - 1, modes_z, channels, channels, 2}, channels, channels, rng);
  }
  void collect(const std::string& prefix, ParamList<T>& out) const {
    out.push_back({prefix + ".pos", pos});
    if (neg.defined()) out.push_back({prefix + ".neg", neg});
  }
  static std::size_t count(std::size_t channels, std::size_t modes_r, std::size_t modes_z) {
    return (2 * modes_r - 1) * modes_z * channels * channels * 2;
  }
};

/// One 1-D multiplier per spatial dimension.
template <typename T>
struct FactorizedWeights {
  Tensor<T> r, z;  // [modes_d, Cin, Cout, 2]

  FactorizedWeights() = default;
  FactorizedWeights(std::size_t channels, std::size_t modes_r, std::size_t modes_z, Rng& rng) {
    r = init::spectral<T>({modes_r, channels, channels, 2}, channels, channels, rng);
    z = init::spectral<T>({modes_z, channels, channels, 2}, channels, channels, rng);
  }
  void collect(const std::string& prefix, ParamList<T>& out) const {
    out.push_back({prefix + ".r", r});
    out.push_back({prefix + ".z", z});
  }
  static std::size_t count(std::size_t channels, std::size_t modes_r, std::size_t modes_z) {
    return (modes_r + modes_z) * channels * channels * 2;
  }
};

template <typename T>
Tensor<T> spectral_conv2d(const Tensor<T>& z, const SpectralWeights2D<T>& w) {
  return spectral_conv2d(z, w.pos, w.neg);
}

template <typename T>
Tensor<T> spectral_conv_factorized(const Tensor<T>& z, const FactorizedWeights<T>& w) {
  return spectral_conv_factorized(z, w.r, w.z);
}

namespace detail {
inline void check_width(const Shape& z, std::size_t width, const char* op) {
  if (z.size() != 4 || z[1] != width) {
    throw std::invalid_argument(std::string(op) + ": input " + shape_str(z) + " does not match layer width " +
                                std::to_string(width));
  }
}
}  // namespace detail

/// Factorized Fourier layer: z + relu(W2 relu(W1 K(z) + b1) + b2).
template <typename T>
struct FFourierParams {
  FactorizedWeights<T> kernel;
  ConvParams<T> ff1, ff2;  // 1x1: width -> hidden -> width

  FFourierParams() = default;
  FFourierParams(std::size_t width, std::size_t hidden, std::size_t modes_r, std::size_t modes_z, Rng& rng)
      : kernel(width, modes_r, modes_z, rng), ff1(width, hidden, 1, 1, rng), ff2(hidden, width, 1, 1, rng) {}

  std::size_t width() const { return ff2.out_channels(); }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    kernel.collect(prefix + ".spectral", out);
    ff1.collect(prefix + ".ff1", out);
    ff2.collect(prefix + ".ff2", out);
  }
  static std::size_t count(std::size_t width, std::size_t hidden, std::size_t modes_r, std::size_t modes_z) {
    return FactorizedWeights<T>::count(width, modes_r, modes_z) + ConvParams<T>::count(width, hidden, 1) +
           ConvParams<T>::count(hidden, width, 1);
  }
};

template <typename T>
Tensor<T> f_fourier_layer(const Tensor<T>& z, const FFourierParams<T>& p) {
  detail::check_width(z.shape(), p.width(), "f_fourier_layer");
  return add(z, relu(p.ff2(relu(p.ff1(spectral_conv_factorized(z, p.kernel))))));
}

/// Fourier layer (optionally with a U-Net branch):
/// relu(K(z) [+ U(z)] + W z + b).
template <typename T>
struct UFourierParams {
  SpectralWeights2D<T> kernel;
  ConvParams<T> pointwise;  // W and b
  UNetParams<T> unet;
  bool with_unet = true;

  UFourierParams() = default;
  UFourierParams(std::size_t width, std::size_t modes_r, std::size_t modes_z, std::size_t unet_depth, bool with_unet_,
                 Rng& rng)
      : kernel(width, modes_r, modes_z, rng), pointwise(width, width, 1, 1, rng), with_unet(with_unet_) {
    if (with_unet) unet = UNetParams<T>(width, unet_depth, rng);
  }

  std::size_t width() const { return pointwise.out_channels(); }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    kernel.collect(prefix + ".spectral", out);
    pointwise.collect(prefix + ".pointwise", out);
    if (with_unet) unet.collect(prefix + ".unet", out);
  }
  static std::size_t count(std::size_t width, std::size_t modes_r, std::size_t modes_z, std::size_t unet_depth,
                           bool with_unet) {
    return SpectralWeights2D<T>::count(width, modes_r, modes_z) + ConvParams<T>::count(width, width, 1) +
           (with_unet ? UNetParams<T>::count(width, unet_depth) : 0);
  }
};

template <typename T>
Tensor<T> u_fourier_layer(const Tensor<T>& z, const UFourierParams<T>& p) {
  detail::check_width(z.shape(), p.width(), "u_fourier_layer");
  Tensor<T> h = add(spectral_conv2d(z, p.kernel), p.pointwise(z));
  if (p.with_unet) h = add(h, unet_forward(z, p.unet));
  return relu(h);
}

}  // namespace ffino
