#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include "m2p/dataio.hpp"
#include "m2p/grid.hpp"

namespace m2p {

// ---------------------------------------------------------------------------
// Sections of 3D volumes

enum class SectionMode { Center, Index };

// Section normal to x at index i has width ny and height nz (pixel (y, z));
// normal to y: width nx, height nz (pixel (x, z)); normal to z: width nx,
// height ny (pixel (x, y)). Center mode uses floor(n / 2) on every axis;
// Index mode uses `indices` = {i_x, i_y, i_z}.
struct Sections {
  PhaseMap normal_x;
  PhaseMap normal_y;
  PhaseMap normal_z;
  std::array<const PhaseMap*, 3> all() const { return {&normal_x, &normal_y, &normal_z}; }
};

Sections extract_sections(const Volume3D& volume, SectionMode mode = SectionMode::Center,
                          std::array<std::size_t, 3> indices = {0, 0, 0});

// ---------------------------------------------------------------------------
// Geometry. All crops keep the top-left region.

template <typename T>
Grid<T> crop_top_left(const Grid<T>& img, std::size_t w, std::size_t h) {
  if (w < 1 || h < 1 || w > img.width() || h > img.height()) {
    throw Error("crop_top_left: requested " + std::to_string(w) + "x" + std::to_string(h) +
                " exceeds source " + std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  Grid<T> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out(x, y) = img(x, y);
  }
  return out;
}

template <typename T>
Grid<T> crop_to_patch_multiple(const Grid<T>& img, std::size_t patch) {
  if (patch < 1 || img.width() < patch || img.height() < patch) {
    throw Error("crop_to_patch_multiple: image smaller than one patch");
  }
  return crop_top_left(img, img.width() / patch * patch, img.height() / patch * patch);
}

template <typename T>
Grid<T> crop_largest_square_multiple(const Grid<T>& img, std::size_t patch) {
  const std::size_t side = std::min(img.width(), img.height());
  if (patch < 1 || side < patch) throw Error("crop_largest_square_multiple: image smaller than one patch");
  const std::size_t s = side / patch * patch;
  return crop_top_left(img, s, s);
}

// Each pixel becomes a k x k block carrying the same label.
PhaseMap replicate_upsample(const PhaseMap& map, std::size_t k);

// Half-pixel-center bilinear resize without antialiasing.
GrayImage bilinear_resize(const GrayImage& img, std::size_t out_w, std::size_t out_h);

RgbImage to_rgb(const GrayImage& img);
RgbImage to_rgb(const PhaseMap& map);
GrayImage channel_average(const RgbImage& img);

GrayImage to_gray(const PhaseMap& map);

// ---------------------------------------------------------------------------
// Backend-specific input preparation

enum class Backend { DinoV2, Clip, Sam, None };

Backend parse_backend(std::string_view text);  // dinov2, clip, sam, none
std::string_view to_string(Backend backend);

// CLIP -> fixed 224, SAM -> fixed 1024, DINOv2 -> patch multiple only.
struct PreprocessSpec {
  Backend backend = Backend::None;
  std::size_t patch_size = 14;
  std::optional<std::size_t> target_size;

  // Defaults: DINOv2 patch 14, CLIP patch 16 / 224, SAM patch 14 / 1024.
  static PreprocessSpec for_backend(Backend backend);
  void validate() const;
};

// Binary-section flow: DINOv2 crops to the patch multiple; CLIP/SAM replicate
// each pixel into ceil(target / side) blocks and keep the top-left target
// square. Backend None returns the map unchanged.
RgbImage prepare_binary(const PhaseMap& map, const PreprocessSpec& spec);
PhaseMap prepare_binary_labels(const PhaseMap& map, const PreprocessSpec& spec);

// Grayscale micrograph flow: DINOv2 crops both sides to patch multiples;
// CLIP/SAM crop the largest square patch multiple and bilinearly resize to
// the target side.
RgbImage prepare_gray(const GrayImage& img, const PreprocessSpec& spec);
GrayImage prepare_gray_plane(const GrayImage& img, const PreprocessSpec& spec);

// ---------------------------------------------------------------------------
// Segmentation of grayscale micrographs

// Strength h and offset c are in 8-bit intensity units (0..255) and are
// rescaled to the [0, 1] pixel range internally.
struct SegmentParams {
  double h = 10.0;
  int template_window = 7;
  int search_window = 21;
  int block_size = 11;
  double offset = 2.0;
  bool denoise = true;
  // Relabel so that label 1 is the minority phase.
  bool normalize_polarity = true;
};

// Non-local means denoise -> pixel > Gaussian local mean - c -> binary map.
PhaseMap segment(const GrayImage& img, const SegmentParams& params = {});

}  // namespace m2p
