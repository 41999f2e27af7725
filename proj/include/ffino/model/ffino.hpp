#pragma once

// The FFINO operator: a MIONet-style encoder (spatial branch, scalar branch,
// time trunk, additive branch merger, multiplicative branch-trunk merger)
// followed by a decoder of spectral layers and pointwise projections.

#include <utility>

#include "ffino/model/config.hpp"
#include "ffino/nn/layers.hpp"

namespace ffino {

/// (label, shape) for each intermediate tensor of one forward pass.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

/// z[s * B_T + t, c, ...] = b[s, c, ...] * trunk[t, c].
template <typename T>
Tensor<T> branch_trunk_merge(const Tensor<T>& b, const Tensor<T>& trunk) {
  if (b.ndim() < 2 || trunk.ndim() != 2 || trunk.dim(1) != b.dim(1)) {
    throw std::invalid_argument("branch_trunk_merge: branch " + shape_str(b.shape()) + " and trunk " +
                                shape_str(trunk.shape()) + " disagree on the feature width");
  }
  const std::size_t bs = b.dim(0), bt = trunk.dim(0), c = b.dim(1);
  const std::size_t plane = b.size() / (bs * c);
  std::vector<T> out(bs * bt * c * plane);
  const T* bv = b.data().data();
  const T* tv = trunk.data().data();
  for (std::size_t s = 0; s < bs; ++s)
    for (std::size_t t = 0; t < bt; ++t)
      for (std::size_t k = 0; k < c; ++k) {
        const T w = tv[t * c + k];
        const T* src = bv + (s * c + k) * plane;
        T* dst = out.data() + ((s * bt + t) * c + k) * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] * w;
      }
  Shape shape = b.shape();
  shape[0] = bs * bt;
  auto bw = [bs, bt, c, plane](Node<T>& self) {
    auto& pb = *self.parents[0];
    auto& pt = *self.parents[1];
    const T* g = self.grad.data();
    for (std::size_t s = 0; s < bs; ++s)
      for (std::size_t t = 0; t < bt; ++t)
        for (std::size_t k = 0; k < c; ++k) {
          const T* gp = g + ((s * bt + t) * c + k) * plane;
          const T* bp = pb.value.data() + (s * c + k) * plane;
          if (pb.requires_grad) {
            const T w = pt.value[t * c + k];
            T* d = pb.grad_buffer().data() + (s * c + k) * plane;
            for (std::size_t p = 0; p < plane; ++p) d[p] += gp[p] * w;
          }
          if (pt.requires_grad) {
            T acc = T(0);
            for (std::size_t p = 0; p < plane; ++p) acc += gp[p] * bp[p];
            pt.grad_buffer()[t * c + k] += acc;
          }
        }
  };
  return detail::make_result<T>(std::move(shape), std::move(out), {&b.node(), &trunk.node()}, bw, "branch_trunk_merge");
}

template <typename T>
struct DecoderLayer {
  LayerKind kind;
  FFourierParams<T> f;  // used by f_fourier
  UFourierParams<T> u;  // used by u_fourier and fourier

  Tensor<T> operator()(const Tensor<T>& z) const {
    return kind == LayerKind::f_fourier ? f_fourier_layer(z, f) : u_fourier_layer(z, u);
  }
};

template <typename T>
class FfinoModel {
 public:
  FfinoModel() = default;

  /// Initializes every parameter from `config.seed`.
  explicit FfinoModel(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    Rng rng(derive_seed(config_.seed, 0, 0x6d6f64656cULL));
    const auto& c = config_;
    branch1_ = ConvParams<T>(c.spatial_in_channels, c.width, 1, 1, rng);
    branch2_ = FnnParams<T>(widths(c.scalar_in_dim, c.branch_hidden, c.width), rng);
    trunk_ = FnnParams<T>(widths(c.trunk_in_dim, c.trunk_hidden, c.width), rng);
    proj1_ = ConvParams<T>(c.width, c.width, 1, 1, rng);
    for (LayerKind k : c.decoder_layers()) {
      DecoderLayer<T> layer{k, {}, {}};
      if (k == LayerKind::f_fourier) {
        layer.f = FFourierParams<T>(c.width, c.feedforward_width(), c.modes_r, c.modes_z, rng);
      } else {
        layer.u = UFourierParams<T>(c.width, c.modes_r, c.modes_z, c.unet_depth, k == LayerKind::u_fourier, rng);
      }
      layers_.push_back(std::move(layer));
    }
    proj2_ = ConvParams<T>(c.width, c.projection_width, 1, 1, rng);
    proj3_ = ConvParams<T>(c.projection_width, 1, 1, 1, rng);
  }

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }

  /// spatial [B_S, C_sp, N_r, N_z], scalars [B_S, d_s], times [B_T, d_t]
  /// -> z [B_S * B_T, width, N_r, N_z].
  Tensor<T> encode(const Tensor<T>& spatial, const Tensor<T>& scalars, const Tensor<T>& times,
                   ShapeTrace* trace = nullptr) const {
    const auto& c = config_;
    if (spatial.ndim() != 4 || spatial.dim(1) != c.spatial_in_channels) {
      throw std::invalid_argument("encode: spatial input must be [B_S, " + std::to_string(c.spatial_in_channels) +
                                  ", N_r, N_z], got " + shape_str(spatial.shape()));
    }
    if (scalars.ndim() != 2 || scalars.dim(1) != c.scalar_in_dim || scalars.dim(0) != spatial.dim(0)) {
      throw std::invalid_argument("encode: scalar input must be [" + std::to_string(spatial.dim(0)) + ", " +
                                  std::to_string(c.scalar_in_dim) + "], got " + shape_str(scalars.shape()));
    }
    if (times.ndim() != 2 || times.dim(1) != c.trunk_in_dim) {
      throw std::invalid_argument("encode: time input must be [B_T, " + std::to_string(c.trunk_in_dim) + "], got " +
                                  shape_str(times.shape()));
    }
    auto record = [&](const char* label, const Tensor<T>& t) {
      if (trace) trace->emplace_back(label, t.shape());
    };
    const Tensor<T> b1 = branch1_(spatial);
    record("branch1", b1);
    const Tensor<T> b2 = fnn_forward(scalars, branch2_);
    record("branch2", b2);
    const Tensor<T> b = add(b1, reshape(b2, {b2.dim(0), b2.dim(1), 1, 1}));
    record("branch_merger", b);
    const Tensor<T> t = fnn_forward(times, trunk_);
    record("trunk", t);
    const Tensor<T> z = branch_trunk_merge(b, t);
    record("branch_trunk_merger", z);
    return z;
  }

  /// z [B, width, N_r, N_z] -> [B, 1, N_r, N_z].
  Tensor<T> decode(const Tensor<T>& z, ShapeTrace* trace = nullptr) const {
    if (z.ndim() != 4 || z.dim(1) != config_.width) {
      throw std::invalid_argument("decode: expected [B, " + std::to_string(config_.width) + ", N_r, N_z], got " +
                                  shape_str(z.shape()));
    }
    auto record = [&](const std::string& label, const Tensor<T>& t) {
      if (trace) trace->emplace_back(label, t.shape());
    };
    Tensor<T> h = proj1_(z);
    record("projection1", h);
    std::size_t nf = 0, nu = 0, np = 0;
    for (const auto& layer : layers_) {
      h = layer(h);
      if (layer.kind == LayerKind::f_fourier) record("f_fourier" + std::to_string(++nf), h);
      else if (layer.kind == LayerKind::u_fourier) record("u_fourier" + std::to_string(++nu), h);
      else record("fourier" + std::to_string(++np), h);
    }
    h = relu(proj2_(h));
    record("projection2", h);
    h = proj3_(h);
    record("projection3", h);
    return h;
  }

  /// -> [B_S, B_T, N_r, N_z], in units of target / target_scale.
  Tensor<T> forward(const Tensor<T>& spatial, const Tensor<T>& scalars, const Tensor<T>& times,
                    ShapeTrace* trace = nullptr) const {
    const Tensor<T> y = decode(encode(spatial, scalars, times, trace), trace);
    const Tensor<T> out = reshape(y, {spatial.dim(0), times.dim(0), y.dim(2), y.dim(3)});
    if (trace) trace->emplace_back("reshape", out.shape());
    return out;
  }

  /// Every learnable tensor with a stable hierarchical name, in init order.
  ParamList<T> parameters() const {
    ParamList<T> out;
    branch1_.collect("branch1", out);
    branch2_.collect("branch2", out);
    trunk_.collect("trunk", out);
    proj1_.collect("projection1", out);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string name = "decoder" + std::to_string(i) + "." + to_string(layers_[i].kind);
      if (layers_[i].kind == LayerKind::f_fourier) layers_[i].f.collect(name, out);
      else layers_[i].u.collect(name, out);
    }
    proj2_.collect("projection2", out);
    proj3_.collect("projection3", out);
    return out;
  }

  /// Enumerated element count of all stored parameters.
  std::size_t enumerate_params() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.size();
    return n;
  }

  /// Closed-form count for a configuration (no model needed).
  static std::size_t param_count(const ModelConfig& c) {
    const std::size_t w = c.width;
    std::size_t n = ConvParams<T>::count(c.spatial_in_channels, w, 1);
    n += FnnParams<T>::count(widths(c.scalar_in_dim, c.branch_hidden, w));
    n += FnnParams<T>::count(widths(c.trunk_in_dim, c.trunk_hidden, w));
    n += ConvParams<T>::count(w, w, 1);
    for (LayerKind k : c.decoder_layers()) {
      if (k == LayerKind::f_fourier) n += FFourierParams<T>::count(w, c.feedforward_width(), c.modes_r, c.modes_z);
      else n += UFourierParams<T>::count(w, c.modes_r, c.modes_z, c.unet_depth, k == LayerKind::u_fourier);
    }
    n += ConvParams<T>::count(w, c.projection_width, 1) + ConvParams<T>::count(c.projection_width, 1, 1);
    return n;
  }

  const ConvParams<T>& branch1() const { return branch1_; }
  const FnnParams<T>& branch2() const { return branch2_; }
  const FnnParams<T>& trunk() const { return trunk_; }
  const ConvParams<T>& projection3() const { return proj3_; }

 private:
  static std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> v{in};
    v.insert(v.end(), hidden.begin(), hidden.end());
    v.push_back(out);
    return v;
  }

  ModelConfig config_;
  ConvParams<T> branch1_;
  FnnParams<T> branch2_, trunk_;
  ConvParams<T> proj1_;
  std::vector<DecoderLayer<T>> layers_;
  ConvParams<T> proj2_, proj3_;
};

}  // namespace ffino
