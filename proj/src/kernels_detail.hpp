#pragma once

// Pieces shared by the serial and parallel kernels so both evaluate the
// same arithmetic.

#include <cmath>
#include <cstddef>
#include <vector>

namespace m2p::kernels::detail {

struct LerpTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
};

// Half-pixel-center source taps for resampling `in` samples to `out`.
inline std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double last = static_cast<double>(in - 1);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > last) src = last;
    const double fl = std::floor(src);
    taps[i].lo = static_cast<std::size_t>(fl);
    taps[i].hi = taps[i].lo + 1 < in ? taps[i].lo + 1 : in - 1;
    taps[i].frac = src - fl;
  }
  return taps;
}

// Normalized periodic Gaussian weights for offsets -radius..radius.
inline std::vector<double> smoothing_weights(double sigma, std::ptrdiff_t& radius) {
  radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

inline std::ptrdiff_t wrap(std::ptrdiff_t i, std::ptrdiff_t n) {
  const std::ptrdiff_t r = i % n;
  return r < 0 ? r + n : r;
}

inline std::ptrdiff_t clamp_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

}  // namespace m2p::kernels::detail
