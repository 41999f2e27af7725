#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffino/core/error.hpp"

namespace ffino {

inline constexpr std::array<double, 12> kReportDays{1, 4, 9, 16, 25, 37, 52, 70, 91, 116, 145, 180};
inline constexpr double kWellRadius = 0.0762;      // m
inline constexpr double kOuterRadius = 30480.0;    // m
inline constexpr double kThickness = 97.536;       // m

/// Radial-vertical grid: geometric cell edges in r from the well radius to
/// the outer radius (centers are geometric means of their edges), uniform in z.
struct Grid {
  std::size_t nr = 192, nz = 64;
  std::vector<double> r_edges, r_centers, z_centers;

  Grid() : Grid(192, 64) {}
  Grid(std::size_t nr_, std::size_t nz_) : nr(nr_), nz(nz_) {
    if (nr < 2 || nz < 2) {
      throw ConfigError("grid needs at least 2 cells per axis, got " + std::to_string(nr) + "x" + std::to_string(nz));
    }
    const double ratio = std::log(kOuterRadius / kWellRadius);
    for (std::size_t i = 0; i <= nr; ++i) {
      r_edges.push_back(kWellRadius * std::exp(ratio * static_cast<double>(i) / static_cast<double>(nr)));
    }
    for (std::size_t i = 0; i < nr; ++i) r_centers.push_back(std::sqrt(r_edges[i] * r_edges[i + 1]));
    for (std::size_t j = 0; j < nz; ++j) {
      z_centers.push_back(kThickness * (static_cast<double>(j) + 0.5) / static_cast<double>(nz));
    }
  }

  std::size_t cells() const { return nr * nz; }
  static constexpr std::size_t steps() { return kReportDays.size(); }

  nlohmann::json to_json() const {
    return {{"nr", nr},
            {"nz", nz},
            {"r_min", kWellRadius},
            {"r_max", kOuterRadius},
            {"thickness", kThickness},
            {"r_spacing", "geometric"},
            {"report_days", kReportDays}};
  }
};

}  // namespace ffino
