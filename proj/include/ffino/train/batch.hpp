#pragma once

// Assembles (B_S samples) x (B_T report times) model inputs and targets.

#include <string>
#include <vector>

#include "ffino/core/tensor.hpp"
#include "ffino/datagen/dataset.hpp"
#include "ffino/model/ffino.hpp"

namespace ffino {

template <typename T>
struct Batch {
  Tensor<T> spatial;  // [B_S, 5, N_r, N_z]
  Tensor<T> scalars;  // [B_S, 7]
  Tensor<T> times;    // [B_T, 1]
  Tensor<T> target;   // [B_S, B_T, N_r, N_z], divided by the target scale; undefined if no target
};

/// Per-sample model inputs computed once and reused across epochs.
struct SampleFeatures {
  std::vector<float> spatial;
  std::vector<float> scalars;
};

inline std::vector<SampleFeatures> precompute_features(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<SampleFeatures> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back({spatial_features(ds.samples.at(i), ds.grid), scalar_features(ds.samples.at(i))});
  return out;
}

/// `rows` index into `features` / `samples` in parallel. An empty target name skips the target.
template <typename T>
Batch<T> make_batch(const std::vector<const Sample*>& samples, const std::vector<const SampleFeatures*>& features,
                    const std::vector<std::size_t>& steps, const Grid& grid, const std::string& target, double scale) {
  const std::size_t bs = samples.size(), bt = steps.size(), cells = grid.cells();
  std::vector<T> sp, sc, tm, tg;
  sp.reserve(bs * kSpatialChannels * cells);
  for (std::size_t s = 0; s < bs; ++s) {
    sp.insert(sp.end(), features[s]->spatial.begin(), features[s]->spatial.end());
    sc.insert(sc.end(), features[s]->scalars.begin(), features[s]->scalars.end());
  }
  for (std::size_t k : steps) tm.push_back(static_cast<T>(time_feature(k)));
  const std::size_t ds = sc.size() / bs;
  Batch<T> b{Tensor<T>({bs, kSpatialChannels, grid.nr, grid.nz}, std::move(sp)), Tensor<T>({bs, ds}, std::move(sc)), Tensor<T>({bt, 1}, std::move(tm)), {}};
  if (!target.empty()) {
    tg.reserve(bs * bt * cells);
    const double inv = 1.0 / scale;
    for (std::size_t s = 0; s < bs; ++s) {
      const auto& y = samples[s]->target(target);
      for (std::size_t k : steps)
        for (std::size_t c = 0; c < cells; ++c) tg.push_back(static_cast<T>(static_cast<double>(y[k * cells + c]) * inv));
    }
    b.target = Tensor<T>({bs, bt, grid.nr, grid.nz}, std::move(tg));
  }
  return b;
}

/// Model output for one sample at all report times, in physical units: [12 * N_r * N_z].
template <typename T>
std::vector<float> predict_sample(const FfinoModel<T>& model, const Sample& sample, const SampleFeatures& f,
                                  const Grid& grid) {
  NoGradGuard guard;
  std::vector<std::size_t> steps(Grid::steps());
  for (std::size_t k = 0; k < steps.size(); ++k) steps[k] = k;
  const auto b = make_batch<T>({&sample}, {&f}, steps, grid, "", 1.0);
  const auto y = model.forward(b.spatial, b.scalars, b.times);
  const double scale = model.config().target_scale;
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(static_cast<double>(y[i]) * scale);
  return out;
}

}  // namespace ffino
