#pragma once

// Brute-force spectral convolutions: explicit O(N^2) DFT sums over the full
// grid with an explicit mode mask. Independent of the library's FFT and of
// its partial-basis GEMM formulation.

#include <complex>
#include <numbers>
#include <vector>

namespace ffino::testing {

using cd = std::complex<double>;

inline cd twiddle(double sign, std::size_t k, std::size_t n, std::size_t len) {
  const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(k * n) / static_cast<double>(len);
  return {std::cos(a), std::sin(a)};
}

/// Complex weight lookup w[..., ci, co] from a [.., Cin, Cout, 2] buffer.
inline cd weight_at(const std::vector<double>& w, std::size_t block, std::size_t cin, std::size_t cout, std::size_t ci,
                    std::size_t co) {
  const std::size_t at = ((block * cin + ci) * cout + co) * 2;
  return {w[at], w[at + 1]};
}

/// x: [B, Cin, nr, nz]; w_pos: [mr, mz, Cin, Cout, 2], w_neg: [mr-1, mz, Cin,
/// Cout, 2]. Frequency -j (j = 1..mr-1) uses w_neg block j-1 unless it already
/// falls inside the positive band.
inline std::vector<double> dense_spectral_conv2d(const std::vector<double>& x, std::size_t batch, std::size_t cin,
                                                 std::size_t nr, std::size_t nz, const std::vector<double>& w_pos,
                                                 const std::vector<double>& w_neg, std::size_t mr, std::size_t mz,
                                                 std::size_t cout) {
  std::vector<double> y(batch * cout * nr * nz, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    // full 2-D DFT per input channel
    std::vector<cd> X(cin * nr * nz);
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t kr = 0; kr < nr; ++kr)
        for (std::size_t kz = 0; kz < nz; ++kz) {
          cd s = 0;
          for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t z = 0; z < nz; ++z)
              s += x[((b * cin + c) * nr + r) * nz + z] * twiddle(-1, kr, r, nr) * twiddle(-1, kz, z, nz);
          X[(c * nr + kr) * nz + kz] = s;
        }
    // masked multiply into the half spectrum (kz <= nz/2)
    const std::size_t half = nz / 2 + 1;
    std::vector<cd> Y(cout * nr * half, cd(0));
    for (std::size_t kr = 0; kr < nr; ++kr) {
      const bool pos = kr < mr;
      const bool neg = !pos && nr - kr < mr;
      if (!pos && !neg) continue;
      const std::size_t idx = pos ? kr : nr - kr - 1;
      const auto& w = pos ? w_pos : w_neg;
      for (std::size_t kz = 0; kz < mz; ++kz)
        for (std::size_t co = 0; co < cout; ++co) {
          cd s = 0;
          for (std::size_t ci = 0; ci < cin; ++ci)
            s += X[(ci * nr + kr) * nz + kz] * weight_at(w, idx * mz + kz, cin, cout, ci, co);
          Y[(co * nr + kr) * half + kz] = s;
        }
    }
    // inverse: complex along r, real (Hermitian-extended) along z
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t z = 0; z < nz; ++z) {
          double s = 0;
          for (std::size_t kr = 0; kr < nr; ++kr)
            for (std::size_t kz = 0; kz < half; ++kz) {
              const double c = (kz == 0 || 2 * kz == nz) ? 1.0 : 2.0;
              s += c * (Y[(co * nr + kr) * half + kz] * twiddle(1, kr, r, nr) * twiddle(1, kz, z, nz)).real();
            }
          y[((b * cout + co) * nr + r) * nz + z] = s / static_cast<double>(nr * nz);
        }
  }
  return y;
}

/// 1-D truncated multiplier along one axis, for every line of the other axis.
/// along_r selects axis 2 (length nr) versus axis 3 (length nz).
inline void dense_axis_multiplier(const std::vector<double>& x, std::size_t batch, std::size_t cin, std::size_t nr,
                                  std::size_t nz, const std::vector<double>& w, std::size_t modes, std::size_t cout,
                                  bool along_r, std::vector<double>& y) {
  const std::size_t len = along_r ? nr : nz;
  const std::size_t lines = along_r ? nz : nr;
  auto at = [&](std::size_t b, std::size_t c, std::size_t channels, std::size_t line, std::size_t n) {
    const std::size_t r = along_r ? n : line;
    const std::size_t z = along_r ? line : n;
    return ((b * channels + c) * nr + r) * nz + z;
  };
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t l = 0; l < lines; ++l) {
      std::vector<cd> X(cin * modes);
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t k = 0; k < modes; ++k) {
          cd s = 0;
          for (std::size_t n = 0; n < len; ++n) s += x[at(b, c, cin, l, n)] * twiddle(-1, k, n, len);
          X[c * modes + k] = s;
        }
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t n = 0; n < len; ++n) {
          double s = 0;
          for (std::size_t k = 0; k < modes; ++k) {
            cd yk = 0;
            for (std::size_t ci = 0; ci < cin; ++ci) yk += X[ci * modes + k] * weight_at(w, k, cin, cout, ci, co);
            const double c = (k == 0 || 2 * k == len) ? 1.0 : 2.0;
            s += c * (yk * twiddle(1, k, n, len)).real();
          }
          y[at(b, co, cout, l, n)] += s / static_cast<double>(len);
        }
    }
}

inline std::vector<double> dense_spectral_conv_factorized(const std::vector<double>& x, std::size_t batch,
                                                          std::size_t cin, std::size_t nr, std::size_t nz,
                                                          const std::vector<double>& w_r,
                                                          const std::vector<double>& w_z, std::size_t mr,
                                                          std::size_t mz, std::size_t cout) {
  std::vector<double> y(batch * cout * nr * nz, 0.0);
  dense_axis_multiplier(x, batch, cin, nr, nz, w_r, mr, cout, true, y);
  dense_axis_multiplier(x, batch, cin, nr, nz, w_z, mz, cout, false, y);
  return y;
}

}  // namespace ffino::testing
