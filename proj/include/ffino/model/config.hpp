#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffino/core/error.hpp"

namespace ffino {

enum class LayerKind { f_fourier, u_fourier, fourier };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::f_fourier: return "f_fourier";
    case LayerKind::u_fourier: return "u_fourier";
    case LayerKind::fourier: return "fourier";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "f_fourier") return LayerKind::f_fourier;
  if (s == "u_fourier") return LayerKind::u_fourier;
  if (s == "fourier") return LayerKind::fourier;
  throw ConfigError("unknown decoder layer '" + s + "' (expected f_fourier, u_fourier or fourier)");
}

struct ModelConfig {
  std::size_t width = 36;
  std::size_t modes_r = 32;
  std::size_t modes_z = 17;
  std::size_t n_f_fourier = 3;
  std::size_t m_u_fourier = 3;
  std::string decoder_preset = "ffino";  // ffino | fmionet_like | custom
  std::vector<LayerKind> custom_layers;  // used when preset == custom
  std::size_t projection_width = 128;
  std::size_t spatial_in_channels = 5;
  std::size_t scalar_in_dim = 7;
  std::size_t trunk_in_dim = 1;
  std::vector<std::size_t> branch_hidden{64, 64};
  std::vector<std::size_t> trunk_hidden{64, 64};
  std::size_t unet_depth = 2;
  std::size_t ff_hidden = 0;  // feedforward width inside F-Fourier layers; 0 means `width`
  std::size_t grid_nr = 192;
  std::size_t grid_nz = 64;
  std::string target = "sg";   // sg | dp
  double target_scale = 1.0;   // network output is target / target_scale
  std::uint64_t seed = 0;

  std::size_t feedforward_width() const { return ff_hidden == 0 ? width : ff_hidden; }

  /// Decoder layer list implied by the preset.
  std::vector<LayerKind> decoder_layers() const {
    if (decoder_preset == "ffino") {
      std::vector<LayerKind> v(n_f_fourier, LayerKind::f_fourier);
      v.insert(v.end(), m_u_fourier, LayerKind::u_fourier);
      return v;
    }
    if (decoder_preset == "fmionet_like") return std::vector<LayerKind>(6, LayerKind::u_fourier);
    if (decoder_preset == "custom") return custom_layers;
    throw ConfigError("unknown decoder preset '" + decoder_preset + "' (expected ffino, fmionet_like or custom)");
  }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("model config: " + msg);
    };
    need(width > 0, "width must be positive");
    need(modes_r > 0 && modes_z > 0, "mode counts must be positive");
    need(modes_r <= grid_nr / 2 + 1, "modes_r " + std::to_string(modes_r) + " exceeds capacity " +
                                         std::to_string(grid_nr / 2 + 1) + " of N_r = " + std::to_string(grid_nr));
    need(modes_z <= grid_nz / 2 + 1, "modes_z " + std::to_string(modes_z) + " exceeds capacity " +
                                         std::to_string(grid_nz / 2 + 1) + " of N_z = " + std::to_string(grid_nz));
    need(!decoder_layers().empty(), "decoder layer list is empty");
    need(projection_width > 0 && spatial_in_channels > 0 && scalar_in_dim > 0 && trunk_in_dim > 0,
         "input and projection widths must be positive");
    need(target == "sg" || target == "dp", "target must be sg or dp, got '" + target + "'");
    need(target_scale > 0, "target_scale must be positive");
    const std::size_t f = std::size_t{1} << unet_depth;
    bool has_unet = false;
    for (auto k : decoder_layers()) has_unet = has_unet || k == LayerKind::u_fourier;
    need(!has_unet || (grid_nr % f == 0 && grid_nz % f == 0),
         "grid " + std::to_string(grid_nr) + "x" + std::to_string(grid_nz) + " must be divisible by 2^unet_depth = " +
             std::to_string(f));
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  std::vector<std::string> custom;
  for (auto k : c.custom_layers) custom.push_back(to_string(k));
  j = nlohmann::json{{"width", c.width},
                     {"modes_r", c.modes_r},
                     {"modes_z", c.modes_z},
                     {"n_f_fourier", c.n_f_fourier},
                     {"m_u_fourier", c.m_u_fourier},
                     {"decoder_preset", c.decoder_preset},
                     {"custom_layers", custom},
                     {"projection_width", c.projection_width},
                     {"spatial_in_channels", c.spatial_in_channels},
                     {"scalar_in_dim", c.scalar_in_dim},
                     {"trunk_in_dim", c.trunk_in_dim},
                     {"branch_hidden", c.branch_hidden},
                     {"trunk_hidden", c.trunk_hidden},
                     {"unet_depth", c.unet_depth},
                     {"ff_hidden", c.ff_hidden},
                     {"grid_nr", c.grid_nr},
                     {"grid_nz", c.grid_nz},
                     {"target", c.target},
                     {"target_scale", c.target_scale},
                     {"seed", c.seed}};
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("width", c.width);
    get("modes_r", c.modes_r);
    get("modes_z", c.modes_z);
    get("n_f_fourier", c.n_f_fourier);
    get("m_u_fourier", c.m_u_fourier);
    get("decoder_preset", c.decoder_preset);
    if (j.contains("custom_layers")) {
      c.custom_layers.clear();
      for (const auto& s : j.at("custom_layers")) c.custom_layers.push_back(layer_kind_from_string(s.get<std::string>()));
    }
    get("projection_width", c.projection_width);
    get("spatial_in_channels", c.spatial_in_channels);
    get("scalar_in_dim", c.scalar_in_dim);
    get("trunk_in_dim", c.trunk_in_dim);
    get("branch_hidden", c.branch_hidden);
    get("trunk_hidden", c.trunk_hidden);
    get("unet_depth", c.unet_depth);
    get("ff_hidden", c.ff_hidden);
    get("grid_nr", c.grid_nr);
    get("grid_nz", c.grid_nz);
    get("target", c.target);
    get("target_scale", c.target_scale);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

}  // namespace ffino
