#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "m2p/dataio.hpp"

namespace m2p::synth {

using Dims = std::array<std::size_t, 3>;
using CorrLen = std::array<double, 3>;

// Gaussian white noise smoothed with a periodic Gaussian of width corr_len
// per axis, then thresholded so exactly round(vf_target * N) voxels are 1.
Volume3D gen_volume(const Dims& dims, double vf_target, const CorrLen& corr_len, std::uint64_t seed);
Volume3D gen_volume(const Dims& dims, double vf_target, double corr_len, std::uint64_t seed);

// Fraction of periodic x-neighbour pairs with different labels.
double interface_density_x(const Volume3D& v);

inline constexpr double kPropertyLower = 1.0;
inline constexpr double kPropertyUpper = 50.0;

// E = lower + (upper - lower) * vf * (c + (1 - c) * vf), c = 1 - s, where
// s is the x interface density divided by its random-mixture value
// 2 vf (1 - vf), clamped to [0, 1]. Monotone in vf for fixed s.
double planted_property(const Volume3D& v);

struct EnsembleSpec {
  std::size_t count = 100;
  Dims dims{40, 40, 40};
  double vf_lo = 0.2;
  double vf_hi = 0.8;
  // Correlation lengths are drawn uniformly per sample and per axis.
  double corr_lo = 0.5;
  double corr_hi = 2.0;
  std::uint64_t seed = 0;
};

struct Sample {
  std::string id;
  double vf_target = 0.0;
  CorrLen corr_len{};
  Volume3D volume;
  double property = 0.0;
};

// Volume fractions follow a stratified sweep: vf_i = lo + (hi - lo)(i + 1/2)/count.
std::vector<Sample> gen_ensemble(const EnsembleSpec& spec);

// Writes `<id>.bin`/`.meta` per sample plus `manifest.csv` (target = planted
// property, dimensionless).
std::filesystem::path write_ensemble(const std::vector<Sample>& samples, const std::filesystem::path& dir);

}  // namespace m2p::synth
