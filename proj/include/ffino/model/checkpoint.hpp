#pragma once

// FCK1 checkpoints: the model config plus every parameter as float32.

#include "ffino/io/container.hpp"
#include "ffino/model/ffino.hpp"

namespace ffino {

inline constexpr int kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const FfinoModel<T>& model, const std::string& path, const nlohmann::json& extra = {}) {
  nlohmann::json tensors = nlohmann::json::array();
  std::string blobs;
  for (const auto& p : model.parameters()) {
    const auto offset = io::append_f32(blobs, p.tensor.data().data(), p.tensor.size());
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"dtype", "f32"}, {"offset", offset}});
  }
  nlohmann::json header{{"format", "FCK1"}, {"version", kCheckpointVersion}, {"config", model.config()},
                        {"tensors", tensors}};
  if (!extra.is_null()) header["extra"] = extra;
  io::write_container(path, "FCK1", header, blobs);
}

/// Header of a checkpoint without materializing the model.
inline nlohmann::json read_checkpoint_header(const std::string& path) {
  return io::read_container(path, "FCK1").header;
}

template <typename T>
FfinoModel<T> load_checkpoint(const std::string& path) {
  const auto c = io::read_container(path, "FCK1");
  const auto& h = c.header;
  if (h.value("version", -1) != kCheckpointVersion) {
    throw IoError("'" + path + "' has checkpoint version " + h.value("version", nlohmann::json()).dump() +
                  ", expected " + std::to_string(kCheckpointVersion));
  }
  if (!h.contains("config") || !h.contains("tensors")) throw IoError("'" + path + "' header lacks config or tensors");
  FfinoModel<T> model(h.at("config").get<ModelConfig>());
  auto params = model.parameters();
  const auto& tensors = h.at("tensors");
  if (tensors.size() != params.size()) {
    throw IoError("'" + path + "' stores " + std::to_string(tensors.size()) + " tensors, config implies " +
                  std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = tensors[i];
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    if (name != params[i].name || shape != params[i].tensor.shape()) {
      throw IoError("'" + path + "' tensor " + std::to_string(i) + " is " + name + " " + shape_str(shape) +
                    ", expected " + params[i].name + " " + shape_str(params[i].tensor.shape()));
    }
    const auto values = c.read_f32<T>(entry.at("offset").get<std::uint64_t>(), shape_numel(shape), name);
    auto dst = params[i].tensor.mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
  }
  return model;
}

}  // namespace ffino
