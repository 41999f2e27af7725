#pragma once

#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "ffino/core/error.hpp"
#include "ffino/core/random.hpp"

namespace ffino {

struct Range {
  double lo, hi;
  double mid() const { return 0.5 * (lo + hi); }
  double normalize(double v) const { return (v - lo) / (hi - lo); }
};

/// Sampling ranges of the seven scalar inputs, in this order:
/// Q, krw_max, krg_max, Swi, Sgr, m, n.
inline constexpr std::array<const char*, 7> kScalarNames{"Q", "krw_max", "krg_max", "Swi", "Sgr", "m", "n"};
inline std::vector<Range> scalar_ranges() {
  return {{25500.0, 255000.0}, {0.530, 0.768}, {0.031, 0.056}, {0.340, 0.500},
          {0.030, 0.120},      {1.453, 3.808}, {1.052, 3.317}};
}

inline constexpr Range kKhRange{44.1, 1000.0};
inline constexpr Range kAnisoRange{0.01, 1.00};
inline constexpr Range kPhiRange{0.140, 0.345};

/// Latin hypercube: row-major n x d matrix. Each dimension places exactly one
/// sample in each of its n equal-width strata, jittered uniformly inside.
inline std::vector<double> lhs_sample(std::size_t n, const std::vector<Range>& ranges, std::uint64_t seed) {
  if (n == 0) throw ConfigError("lhs_sample: n must be at least 1");
  for (const auto& r : ranges) {
    if (!(r.lo < r.hi)) throw ConfigError("lhs_sample: empty range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
  }
  const std::size_t d = ranges.size();
  std::vector<double> out(n * d);
  Rng rng(derive_seed(seed, 0, 0x6c6873ULL));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    const double width = (ranges[j].hi - ranges[j].lo) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = ranges[j].lo + (static_cast<double>(perm[i]) + rng.uniform()) * width;
      out[i * d + j] = std::min(v, ranges[j].hi);
    }
  }
  return out;
}

}  // namespace ffino
