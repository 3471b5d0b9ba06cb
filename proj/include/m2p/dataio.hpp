#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "m2p/feature_set.hpp"

namespace m2p {

enum class Unit { GPa, KgfPerMm2, Dimensionless };

Unit parse_unit(std::string_view text);  // "GPa", "kgf_mm2", "dimensionless"
std::string_view to_string(Unit unit);

inline constexpr double kStandardGravity = 9.80665;
inline constexpr std::size_t kCompositionArity = 22;

// Element concentrations in manifest-header order. The wt%/at% convention is
// carried as metadata only.
struct CompositionVector {
  std::vector<std::string> element_names;
  std::vector<double> values;
  std::string convention = "unspecified";
};

struct SampleManifest {
  std::string sample_id;
  std::vector<std::filesystem::path> image_paths;  // 1..3 entries
  double target_value = 0.0;
  Unit target_unit = Unit::Dimensionless;
  std::optional<CompositionVector> composition;
};

// Manifest CSV:
//   sample_id,image_1[,image_2,image_3],target,target_unit[,<22 element columns>]
// Relative image paths resolve against the manifest's directory and must exist.
// A comment line "# composition_units=<text>" sets the composition convention.
std::vector<SampleManifest> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<SampleManifest>& samples, const std::filesystem::path& path);

// 1 GPa = 1000 / g kgf/mm^2 with g the standard gravity.
double convert_hardness(double value, Unit from, Unit to);

// Rewrites every GPa target as kgf/mm^2 so downstream stages see one unit.
void normalize_hardness(std::vector<SampleManifest>& samples);

// Two-phase voxel volume stored x-fastest: voxel (x, y, z) at x + nx * (y + ny * z).
struct Volume3D {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;
  std::vector<std::uint8_t> voxels;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + nx * (y + ny * z);
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t z) const {
    return voxels[index(x, y, z)];
  }
  double volume_fraction() const;
};

void check_volume(const Volume3D& volume);

// Raw payload `<name>.bin` (one byte per voxel) plus text sidecar
// `<name>.meta` with `nx = ..`, `ny = ..`, `nz = ..` lines.
std::filesystem::path volume_sidecar(const std::filesystem::path& payload);
Volume3D load_volume(const std::filesystem::path& payload);
void save_volume(const Volume3D& volume, const std::filesystem::path& payload);

// Feature files. `.csv` paths use the CSV fallback, everything else is MPFV1:
//   "MPFV" | u32 version=1 | u32 dim | u32 count | u16 len + extractor_id
//   count x ( u16 len + sample_id | dim x f32 )
// All integers and floats little-endian.
FeatureSet read_features(const std::filesystem::path& path);
void write_features(const FeatureSet& set, const std::filesystem::path& path);

FeatureSet decode_mpfv(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mpfv(const FeatureSet& set);

}  // namespace m2p
