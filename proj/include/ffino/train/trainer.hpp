#pragma once

// Epoch loop over shuffled sample batches and random report-time subsets.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffino/model/checkpoint.hpp"
#include "ffino/train/batch.hpp"
#include "ffino/train/loss.hpp"
#include "ffino/train/optimizer.hpp"

namespace ffino {

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_decay = 0.985;  // per epoch
  std::size_t epochs = 50;
  std::size_t batch_samples = 4;  // B_S
  std::size_t batch_times = 4;    // B_T
  std::uint64_t seed = 0;
  std::string target = "sg";
  double target_scale = 0.0;  // 0: 1 for sg, training-set max for dp
  LossConfig loss;
  double clip_norm = 10.0;  // <= 0 disables clipping
  std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
  std::size_t max_steps = 0;         // 0: unlimited
  std::string checkpoint_path;       // empty: no checkpoints
  std::string log_path;              // empty: no CSV log

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("training config: " + msg);
    };
    need(lr0 > 0, "lr0 must be positive");
    need(lr_decay > 0 && lr_decay <= 1, "lr_decay must be in (0, 1]");
    need(epochs >= 1, "epochs must be at least 1");
    need(batch_samples >= 1, "batch_samples must be at least 1");
    need(batch_times >= 1 && batch_times <= Grid::steps(), "batch_times must be in [1, 12]");
    need(target == "sg" || target == "dp", "target must be sg or dp, got '" + target + "'");
    need(target_scale >= 0, "target_scale must be non-negative");
    loss.validate();
  }

  double lr_at(std::size_t epoch) const { return lr0 * std::pow(lr_decay, static_cast<double>(epoch)); }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr0", c.lr0},
       {"lr_decay", c.lr_decay},
       {"epochs", c.epochs},
       {"batch_samples", c.batch_samples},
       {"batch_times", c.batch_times},
       {"seed", c.seed},
       {"target", c.target},
       {"target_scale", c.target_scale},
       {"loss", {{"p", c.loss.p}, {"beta", c.loss.beta}, {"physical_r", c.loss.physical_r}}},
       {"clip_norm", c.clip_norm},
       {"checkpoint_every", c.checkpoint_every},
       {"max_steps", c.max_steps},
       {"optimizer", {{"name", "adam"}, {"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}}}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  try {
    auto get = [&](const char* key, auto& v) {
      if (j.contains(key)) j.at(key).get_to(v);
    };
    get("lr0", c.lr0);
    get("lr_decay", c.lr_decay);
    get("epochs", c.epochs);
    get("batch_samples", c.batch_samples);
    get("batch_times", c.batch_times);
    get("seed", c.seed);
    get("target", c.target);
    get("target_scale", c.target_scale);
    get("clip_norm", c.clip_norm);
    get("checkpoint_every", c.checkpoint_every);
    get("max_steps", c.max_steps);
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      if (l.contains("p")) l.at("p").get_to(c.loss.p);
      if (l.contains("beta")) l.at("beta").get_to(c.loss.beta);
      if (l.contains("physical_r")) l.at("physical_r").get_to(c.loss.physical_r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config JSON: ") + e.what());
  }
}

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;  // mean over the epoch's steps
  std::size_t steps = 0;
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t steps = 0;
  double seconds = 0;
  double target_scale = 1.0;
};

/// Time indices for one step: the first B_T of a random permutation of the
/// 12 report steps, so every time index is equally likely.
inline std::vector<std::size_t> draw_time_subset(Rng& rng, std::size_t bt) {
  std::vector<std::size_t> all(Grid::steps());
  std::iota(all.begin(), all.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(all));
  all.resize(bt);
  return all;
}

inline double auto_target_scale(const Dataset& ds, const std::vector<std::size_t>& indices, const std::string& target) {
  if (target == "sg") return 1.0;
  double m = 0;
  for (std::size_t i : indices)
    for (float v : ds.samples.at(i).target(target)) m = std::max(m, std::abs(static_cast<double>(v)));
  return m > 0 ? m : 1.0;
}

/// Writes to a sibling temp file and renames, so a crash never leaves a torn checkpoint.
template <typename T>
void save_checkpoint_atomic(const FfinoModel<T>& model, const std::string& path, const nlohmann::json& extra) {
  const std::string tmp = path + ".tmp";
  save_checkpoint(model, tmp, extra);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

/// Trains `model` in place on ds.samples[indices]. Throws NumericalError on a
/// non-finite loss or gradient; checkpoints already written are left untouched.
template <typename T>
TrainResult train(FfinoModel<T>& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (indices.empty()) throw ConfigError("training set is empty");
  if (ds.grid.nr != model.config().grid_nr || ds.grid.nz != model.config().grid_nz) {
    throw ConfigError("dataset grid " + std::to_string(ds.grid.nr) + "x" + std::to_string(ds.grid.nz) +
                      " does not match model grid " + std::to_string(model.config().grid_nr) + "x" +
                      std::to_string(model.config().grid_nz));
  }
  TrainResult result;
  result.target_scale = cfg.target_scale > 0 ? cfg.target_scale : auto_target_scale(ds, indices, cfg.target);
  model.mutable_config().target = cfg.target;
  model.mutable_config().target_scale = result.target_scale;

  const auto features = precompute_features(ds, indices);
  auto params = model.parameters();
  Adam<T> opt(params);
  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot open loss log '" + cfg.log_path + "'");
    log << "epoch,lr,train_loss\n";
  }
  auto checkpoint = [&](std::size_t epoch) {
    if (cfg.checkpoint_path.empty()) return;
    save_checkpoint_atomic(model, cfg.checkpoint_path, {{"epoch", epoch}, {"steps", result.steps}, {"train", cfg}});
  };

  const auto t_start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(indices.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(cfg.seed, epoch, 0x747261696eULL));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cfg.lr_at(epoch);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_samples) {
      if (cfg.max_steps && result.steps >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), start + cfg.batch_samples);
      std::vector<const Sample*> samples;
      std::vector<const SampleFeatures*> feats;
      for (std::size_t k = start; k < end; ++k) {
        samples.push_back(&ds.samples[indices[order[k]]]);
        feats.push_back(&features[order[k]]);
      }
      const auto steps = draw_time_subset(rng, cfg.batch_times);
      const auto batch = make_batch<T>(samples, feats, steps, ds.grid, cfg.target, result.target_scale);
      const auto pred = model.forward(batch.spatial, batch.scalars, batch.times);
      const auto loss = lp_loss(batch.target, pred, cfg.loss, ds.grid.r_centers);
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(result.steps));
      }
      backward(loss);
      if (cfg.clip_norm > 0) clip_grad_norm(params, cfg.clip_norm);
      opt.step(params, rec.lr);
      zero_grads(params);
      loss_sum += value;
      ++rec.steps;
      ++result.steps;
    }
    if (rec.steps == 0) break;
    rec.train_loss = loss_sum / static_cast<double>(rec.steps);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (log) {
      char line[128];
      std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", rec.epoch, rec.lr, rec.train_loss);
      log << line << std::flush;
    }
    if (on_epoch) on_epoch(rec);
    const bool last = epoch + 1 == cfg.epochs || (cfg.max_steps && result.steps >= cfg.max_steps);
    if (!last && cfg.checkpoint_every && (epoch + 1) % cfg.checkpoint_every == 0) checkpoint(epoch);
    if (last) break;
  }
  checkpoint(result.log.empty() ? 0 : result.log.back().epoch);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace ffino
