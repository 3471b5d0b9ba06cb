#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "m2p/grid.hpp"

// Data-parallel inner loops of the pipeline. Every kernel exists twice:
// `serial` holds the plain reference loops kept for testing and benchmarking,
// `parallel` holds the OpenMP versions the library calls. Pair counts,
// bilinear resize and periodic smoothing agree bit-exactly; the local mean
// and non-local means kernels reorder sums and agree to ~1e-12.
namespace m2p::kernels {

enum class Boundary { Periodic, NonPeriodic };

// 1D Gaussian weights used for adaptive thresholding. Odd ksize <= 7 uses the
// fixed binomial tables, larger sizes use sigma = 0.3 * ((ksize - 1) / 2 - 1) + 0.8.
std::vector<double> gaussian_kernel_1d(int ksize);

// Reflect-101 border index (abcd|cba), valid for any n >= 1.
std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n);

// Shift-space layout shared by pair counts and correlation maps.
// Periodic: w x h grid, zero shift at (w / 2, h / 2), cell (i, j) holds shift
// ((i - w / 2) mod w, (j - h / 2) mod h).
// Non-periodic: (2w - 1) x (2h - 1) grid, zero shift at (w - 1, h - 1).
struct ShiftLayout {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t center_x = 0;
  std::size_t center_y = 0;
};
ShiftLayout shift_layout(std::size_t w, std::size_t h, Boundary boundary);

namespace serial {

// out = sum over x of [map(x + r) == a] * [map(x) == b], in ShiftLayout order.
std::vector<std::int64_t> pair_counts(const PhaseMap& map, std::uint8_t a, std::uint8_t b,
                                      Boundary boundary);

// Half-pixel-center bilinear sampling, source coordinate clamped, no antialias.
GrayImage bilinear_resize(const GrayImage& src, std::size_t out_w, std::size_t out_h);

// Gaussian-weighted ksize x ksize mean with replicated borders.
GrayImage gaussian_local_mean(const GrayImage& src, int ksize);

// Pixelwise non-local means. Weight exp(-d2 / h^2) with d2 the mean squared
// difference over template windows; reflect-101 borders.
GrayImage nlm_denoise(const GrayImage& src, double h, int template_size, int search_size);

// In-place periodic separable Gaussian smoothing of an x-fastest 3D field.
// sigma[axis] == 0 leaves that axis untouched. Kernel radius ceil(3 sigma).
void gaussian_smooth_periodic(std::vector<double>& field, std::size_t nx, std::size_t ny,
                              std::size_t nz, std::array<double, 3> sigma);

}  // namespace serial

namespace parallel {

std::vector<std::int64_t> pair_counts(const PhaseMap& map, std::uint8_t a, std::uint8_t b,
                                      Boundary boundary);
GrayImage bilinear_resize(const GrayImage& src, std::size_t out_w, std::size_t out_h);
GrayImage gaussian_local_mean(const GrayImage& src, int ksize);
GrayImage nlm_denoise(const GrayImage& src, double h, int template_size, int search_size);
void gaussian_smooth_periodic(std::vector<double>& field, std::size_t nx, std::size_t ny,
                              std::size_t nz, std::array<double, 3> sigma);

}  // namespace parallel

}  // namespace m2p::kernels
