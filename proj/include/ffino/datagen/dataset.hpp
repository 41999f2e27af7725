#pragma once

// Sample generation, the FDS1 dataset file and model-ready feature views.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffino/datagen/fields.hpp"
#include "ffino/datagen/grid.hpp"
#include "ffino/datagen/lhs.hpp"
#include "ffino/datagen/physics.hpp"
#include "ffino/datagen/relperm.hpp"
#include "ffino/io/container.hpp"

namespace ffino {

struct Sample {
  std::size_t index = 0;
  double q = 0.0;  // m^3 / day
  RelPermCoeffs coeffs;
  std::vector<float> kh, aniso, phi;  // nr x nz
  std::vector<float> sg, dp;          // 12 x nr x nz

  const std::vector<float>& target(const std::string& name) const {
    if (name == "sg") return sg;
    if (name == "dp") return dp;
    throw ConfigError("unknown target '" + name + "' (expected sg or dp)");
  }
};

struct GenerateOptions {
  std::size_t nr = 192, nz = 64;
  std::optional<RelPermCoeffs> fixed_coeffs;  // replaces the sampled curve coefficients
  ToyPhysicsConstants physics;
  std::size_t threads = 1;
};

/// Samples per Latin-hypercube block. Sample i takes row i % 64 of block i / 64,
/// so a sample depends only on (seed, i) and never on the dataset size.
inline constexpr std::size_t kLhsBlock = 64;

namespace detail {
enum SeedSalt : std::uint64_t { kSaltLhs = 0x6c6873, kSaltKh = 1, kSaltKhParams = 2, kSaltAniso = 3, kSaltPhi = 4 };

inline std::vector<float> to_f32(const std::vector<double>& v) { return {v.begin(), v.end()}; }
}  // namespace detail

inline Sample generate_sample(std::uint64_t seed, std::size_t index, const GenerateOptions& opt = {}) {
  const Grid grid(opt.nr, opt.nz);
  const std::size_t block = index / kLhsBlock, row = index % kLhsBlock;
  const auto scalars = lhs_sample(kLhsBlock, scalar_ranges(), derive_seed(seed, block, detail::kSaltLhs));
  const double* s = scalars.data() + row * kScalarNames.size();

  Sample out;
  out.index = index;
  out.q = s[0];
  out.coeffs = opt.fixed_coeffs ? *opt.fixed_coeffs : RelPermCoeffs{s[1], s[2], s[3], s[4], s[5], s[6]};
  out.coeffs.validate();

  Rng prng(derive_seed(seed, index, detail::kSaltKhParams));
  const auto khp = sample_kh_params(prng);
  const auto kh = fractal_kh(derive_seed(seed, index, detail::kSaltKh), khp, opt.nr, opt.nz);
  const auto an = aniso_map(derive_seed(seed, index, detail::kSaltAniso), opt.nr, opt.nz);
  const auto phi = porosity_from_perm(kh, derive_seed(seed, index, detail::kSaltPhi));
  const auto targets = toy_targets({&kh, &an, &phi, out.q, out.coeffs}, grid, opt.physics);
  out.kh = detail::to_f32(kh);
  out.aniso = detail::to_f32(an);
  out.phi = detail::to_f32(phi);
  out.sg = detail::to_f32(targets.sg);
  out.dp = detail::to_f32(targets.dp);
  return out;
}

struct Dataset {
  Grid grid;
  std::uint64_t seed = 0;
  std::optional<RelPermCoeffs> fixed_coeffs;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

/// Samples are generated independently; with threads > 1 they are computed
/// concurrently into fixed slots, so the result is identical to the serial one.
inline Dataset generate_dataset(std::size_t n, std::uint64_t seed, const GenerateOptions& opt = {}) {
  if (n == 0) throw ConfigError("dataset size must be at least 1");
  Dataset ds{Grid(opt.nr, opt.nz), seed, opt.fixed_coeffs, std::vector<Sample>(n)};
  const std::size_t threads = std::clamp<std::size_t>(opt.threads, 1, n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) ds.samples[i] = generate_sample(seed, i, opt);
    return ds;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) ds.samples[i] = generate_sample(seed, i, opt);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return ds;
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  using nlohmann::json;
  const std::vector<std::size_t> field_shape{ds.grid.nr, ds.grid.nz};
  const std::vector<std::size_t> target_shape{Grid::steps(), ds.grid.nr, ds.grid.nz};
  std::string blobs;
  json samples = json::array();
  for (const auto& s : ds.samples) {
    json arrays = json::array();
    auto put = [&](const char* name, const std::vector<float>& v, const std::vector<std::size_t>& shape) {
      std::size_t expect = 1;
      for (auto d : shape) expect *= d;
      if (v.size() != expect) {
        throw ConfigError(std::string("sample ") + std::to_string(s.index) + " array '" + name + "' has " +
                          std::to_string(v.size()) + " values, expected " + std::to_string(expect));
      }
      arrays.push_back({{"name", name}, {"shape", shape}, {"dtype", "f32"}, {"offset", io::append_f32(blobs, v.data(), v.size())}});
    };
    put("kh", s.kh, field_shape);
    put("aniso", s.aniso, field_shape);
    put("phi", s.phi, field_shape);
    put("sg", s.sg, target_shape);
    put("dp", s.dp, target_shape);
    samples.push_back({{"index", s.index}, {"q", s.q}, {"coeffs", s.coeffs}, {"arrays", arrays}});
  }
  json header = {{"format", "FDS1"},
                 {"version", 1},
                 {"grid", ds.grid.to_json()},
                 {"seed", ds.seed},
                 {"n", ds.samples.size()},
                 {"samples", samples}};
  if (ds.fixed_coeffs) header["fixed_coeffs"] = *ds.fixed_coeffs;
  io::write_container(path, "FDS1", header, blobs);
}

inline Dataset read_dataset(const std::string& path) {
  const auto c = io::read_container(path, "FDS1");
  Dataset ds;
  try {
    const auto& h = c.header;
    if (h.at("format") != "FDS1" || h.at("version") != 1) {
      throw IoError("'" + path + "': unsupported dataset format " + h.at("format").dump() + " version " +
                    h.at("version").dump());
    }
    ds.grid = Grid(h.at("grid").at("nr").get<std::size_t>(), h.at("grid").at("nz").get<std::size_t>());
    ds.seed = h.at("seed").get<std::uint64_t>();
    if (h.contains("fixed_coeffs")) ds.fixed_coeffs = h.at("fixed_coeffs").get<RelPermCoeffs>();
    const std::size_t cells = ds.grid.cells();
    for (const auto& js : h.at("samples")) {
      Sample s;
      s.index = js.at("index").get<std::size_t>();
      s.q = js.at("q").get<double>();
      s.coeffs = js.at("coeffs").get<RelPermCoeffs>();
      for (const auto& a : js.at("arrays")) {
        const auto name = a.at("name").get<std::string>();
        if (a.at("dtype") != "f32") throw IoError("'" + path + "': array '" + name + "' has unsupported dtype " + a.at("dtype").dump());
        std::size_t count = 1;
        for (auto d : a.at("shape")) count *= d.get<std::size_t>();
        const bool field = name == "kh" || name == "aniso" || name == "phi";
        const std::size_t expect = field ? cells : Grid::steps() * cells;
        if (count != expect) {
          throw IoError("'" + path + "': sample " + std::to_string(s.index) + " array '" + name + "' has " +
                        std::to_string(count) + " values, grid requires " + std::to_string(expect));
        }
        auto values = c.read_f32<float>(a.at("offset").get<std::uint64_t>(), count,
                                        "sample " + std::to_string(s.index) + "/" + name);
        if (name == "kh") s.kh = std::move(values);
        else if (name == "aniso") s.aniso = std::move(values);
        else if (name == "phi") s.phi = std::move(values);
        else if (name == "sg") s.sg = std::move(values);
        else if (name == "dp") s.dp = std::move(values);
        else throw IoError("'" + path + "': unknown array '" + name + "'");
      }
      if (s.kh.empty() || s.aniso.empty() || s.phi.empty() || s.sg.empty() || s.dp.empty()) {
        throw IoError("'" + path + "': sample " + std::to_string(s.index) + " is missing arrays");
      }
      ds.samples.push_back(std::move(s));
    }
    if (ds.samples.size() != h.at("n").get<std::size_t>()) {
      throw IoError("'" + path + "': header declares " + h.at("n").dump() + " samples, found " +
                    std::to_string(ds.samples.size()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': malformed dataset header: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
  return ds;
}

/// Number of leading samples used for training: ceil(0.923 n).
inline std::size_t default_train_count(std::size_t n) { return (923 * n + 999) / 1000; }

// ---- model-ready views -------------------------------------------------------

inline constexpr std::size_t kSpatialChannels = 5;

/// [5, nr, nz]: normalized log10 kh, anisotropy, normalized porosity,
/// normalized log radius, relative depth.
inline std::vector<float> spatial_features(const Sample& s, const Grid& g) {
  const std::size_t cells = g.cells();
  std::vector<float> out(kSpatialChannels * cells);
  const double lk0 = std::log10(kKhRange.lo), lk1 = std::log10(kKhRange.hi);
  const double lr = std::log(kOuterRadius / kWellRadius);
  for (std::size_t i = 0; i < g.nr; ++i)
    for (std::size_t j = 0; j < g.nz; ++j) {
      const std::size_t c = i * g.nz + j;
      out[c] = static_cast<float>((std::log10(static_cast<double>(s.kh[c])) - lk0) / (lk1 - lk0));
      out[cells + c] = s.aniso[c];
      out[2 * cells + c] = static_cast<float>(kPhiRange.normalize(s.phi[c]));
      out[3 * cells + c] = static_cast<float>(std::log(g.r_centers[i] / kWellRadius) / lr);
      out[4 * cells + c] = static_cast<float>(g.z_centers[j] / kThickness);
    }
  return out;
}

/// [7]: Q and the six curve coefficients, each min-max normalized over its sampling range.
inline std::vector<float> scalar_features(const Sample& s) {
  const auto r = scalar_ranges();
  const auto a = s.coeffs.as_array();
  std::vector<float> out{static_cast<float>(r[0].normalize(s.q))};
  for (std::size_t i = 0; i < 6; ++i) out.push_back(static_cast<float>(r[i + 1].normalize(a[i])));
  return out;
}

/// Trunk coordinate for report step k: day / 180.
inline float time_feature(std::size_t step) {
  return static_cast<float>(kReportDays.at(step) / kReportDays.back());
}

struct FieldStats {
  double mean = 0, sd = 0, min = 0, max = 0;
};

inline nlohmann::json to_json_stats(const FieldStats& s) {
  return {{"mean", s.mean}, {"std", s.sd}, {"min", s.min}, {"max", s.max}};
}

/// Pooled statistics over every sample (fields over cells, scalars per sample).
inline nlohmann::json dataset_summary(const Dataset& ds) {
  auto stats = [](auto&& each) {
    double sum = 0, sq = 0, lo = INFINITY, hi = -INFINITY;
    std::size_t n = 0;
    each([&](double v) {
      sum += v;
      sq += v * v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++n;
    });
    FieldStats s;
    s.mean = sum / static_cast<double>(n);
    s.sd = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - s.mean * s.mean));
    s.min = lo;
    s.max = hi;
    return to_json_stats(s);
  };
  auto over_field = [&](std::vector<float> Sample::*field) {
    return stats([&](auto&& f) {
      for (const auto& s : ds.samples)
        for (float v : s.*field) f(v);
    });
  };
  nlohmann::json out;
  out["kh"] = over_field(&Sample::kh);
  out["aniso"] = over_field(&Sample::aniso);
  out["phi"] = over_field(&Sample::phi);
  out["Q"] = stats([&](auto&& f) {
    for (const auto& s : ds.samples) f(s.q);
  });
  for (std::size_t k = 0; k < 6; ++k) {
    out[kScalarNames[k + 1]] = stats([&](auto&& f) {
      for (const auto& s : ds.samples) f(s.coeffs.as_array()[k]);
    });
  }
  out["sg"] = over_field(&Sample::sg);
  out["dp"] = over_field(&Sample::dp);
  return out;
}

}  // namespace ffino
