#include "m2p/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "m2p/error.hpp"
#include "m2p/kernels.hpp"

namespace m2p {

void check_gray(const GrayImage& img) {
  if (img.empty()) throw Error("gray image: empty");
  for (double v : img.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("gray image: pixel outside [0,1]");
  }
}

void check_phase_map(const PhaseMap& map) {
  if (map.empty()) throw Error("phase map: empty");
  for (auto v : map.data()) {
    if (v > 1) throw Error("phase map: non-binary label");
  }
}

double volume_fraction(const PhaseMap& map, std::uint8_t label) {
  if (map.empty()) return 0.0;
  const auto n = std::count(map.data().begin(), map.data().end(), label);
  return static_cast<double>(n) / static_cast<double>(map.size());
}

Sections extract_sections(const Volume3D& v, SectionMode mode, std::array<std::size_t, 3> indices) {
  if (v.nx < 1 || v.ny < 1 || v.nz < 1) throw Error("extract_sections: degenerate dims");
  check_volume(v);
  if (mode == SectionMode::Center) {
    indices = {v.nx / 2, v.ny / 2, v.nz / 2};
  } else if (indices[0] >= v.nx || indices[1] >= v.ny || indices[2] >= v.nz) {
    throw Error("extract_sections: section index out of range");
  }
  Sections s{PhaseMap(v.ny, v.nz), PhaseMap(v.nx, v.nz), PhaseMap(v.nx, v.ny)};
  for (std::size_t z = 0; z < v.nz; ++z) {
    for (std::size_t y = 0; y < v.ny; ++y) s.normal_x(y, z) = v.at(indices[0], y, z);
    for (std::size_t x = 0; x < v.nx; ++x) s.normal_y(x, z) = v.at(x, indices[1], z);
  }
  for (std::size_t y = 0; y < v.ny; ++y) {
    for (std::size_t x = 0; x < v.nx; ++x) s.normal_z(x, y) = v.at(x, y, indices[2]);
  }
  return s;
}

PhaseMap replicate_upsample(const PhaseMap& map, std::size_t k) {
  if (k < 1) throw Error("replicate_upsample: factor must be >= 1");
  PhaseMap out(map.width() * k, map.height() * k);
  for (std::size_t y = 0; y < out.height(); ++y) {
    for (std::size_t x = 0; x < out.width(); ++x) out(x, y) = map(x / k, y / k);
  }
  return out;
}

GrayImage bilinear_resize(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
  if (out_w < 1 || out_h < 1) throw Error("bilinear_resize: non-positive output dims");
  if (img.empty()) throw Error("bilinear_resize: empty input");
  return kernels::parallel::bilinear_resize(img, out_w, out_h);
}

RgbImage to_rgb(const GrayImage& img) {
  RgbImage out{img.width(), img.height(), {}};
  for (auto& c : out.channels) c = img.values();
  return out;
}

RgbImage to_rgb(const PhaseMap& map) { return to_rgb(to_gray(map)); }

GrayImage to_gray(const PhaseMap& map) {
  GrayImage out(map.width(), map.height());
  for (std::size_t i = 0; i < map.size(); ++i) out.data()[i] = map.data()[i] ? 1.0 : 0.0;
  return out;
}

GrayImage channel_average(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = img.channels[0][i];
    const double b = img.channels[1][i];
    const double c = img.channels[2][i];
    // Identical planes average back exactly.
    out.data()[i] = (a == b && b == c) ? a : (a + b + c) / 3.0;
  }
  return out;
}

Backend parse_backend(std::string_view text) {
  if (text == "dinov2") return Backend::DinoV2;
  if (text == "clip") return Backend::Clip;
  if (text == "sam") return Backend::Sam;
  if (text == "none") return Backend::None;
  throw Error("unknown backend '" + std::string(text) + "'");
}

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::DinoV2:
      return "dinov2";
    case Backend::Clip:
      return "clip";
    case Backend::Sam:
      return "sam";
    case Backend::None:
      return "none";
  }
  return "none";
}

PreprocessSpec PreprocessSpec::for_backend(Backend backend) {
  switch (backend) {
    case Backend::DinoV2:
      return {backend, 14, std::nullopt};
    case Backend::Clip:
      return {backend, 16, 224};
    case Backend::Sam:
      return {backend, 14, 1024};
    case Backend::None:
      break;
  }
  return {Backend::None, 1, std::nullopt};
}

void PreprocessSpec::validate() const {
  if (patch_size < 1) throw Error("preprocess: patch size must be positive");
  switch (backend) {
    case Backend::Clip:
      if (target_size != 224u) throw Error("preprocess: CLIP requires target 224");
      break;
    case Backend::Sam:
      if (target_size != 1024u) throw Error("preprocess: SAM requires target 1024");
      break;
    case Backend::DinoV2:
      if (target_size) throw Error("preprocess: DINOv2 takes no fixed target size");
      break;
    case Backend::None:
      break;
  }
}

PhaseMap prepare_binary_labels(const PhaseMap& map, const PreprocessSpec& spec) {
  spec.validate();
  check_phase_map(map);
  switch (spec.backend) {
    case Backend::None:
      return map;
    case Backend::DinoV2:
      return crop_to_patch_multiple(map, spec.patch_size);
    case Backend::Clip:
    case Backend::Sam: {
      const std::size_t target = *spec.target_size;
      const std::size_t side = std::min(map.width(), map.height());
      const std::size_t k = (target + side - 1) / side;
      return crop_top_left(replicate_upsample(map, k), target, target);
    }
  }
  return map;
}

RgbImage prepare_binary(const PhaseMap& map, const PreprocessSpec& spec) {
  return to_rgb(prepare_binary_labels(map, spec));
}

GrayImage prepare_gray_plane(const GrayImage& img, const PreprocessSpec& spec) {
  spec.validate();
  check_gray(img);
  switch (spec.backend) {
    case Backend::None:
      return img;
    case Backend::DinoV2:
      return crop_to_patch_multiple(img, spec.patch_size);
    case Backend::Clip:
    case Backend::Sam: {
      const auto square = crop_largest_square_multiple(img, spec.patch_size);
      return bilinear_resize(square, *spec.target_size, *spec.target_size);
    }
  }
  return img;
}

RgbImage prepare_gray(const GrayImage& img, const PreprocessSpec& spec) {
  return to_rgb(prepare_gray_plane(img, spec));
}

PhaseMap segment(const GrayImage& img, const SegmentParams& params) {
  check_gray(img);
  const std::size_t min_side = std::min(img.width(), img.height());
  if (params.block_size < 3 || params.block_size % 2 == 0) {
    throw Error("segment: block size must be odd and >= 3 (even block size)");
  }
  if (static_cast<std::size_t>(params.block_size) > min_side) {
    throw Error("segment: threshold block larger than image");
  }
  GrayImage smooth = img;
  if (params.denoise) {
    if (params.template_window < 1 || params.template_window % 2 == 0 || params.search_window < 1 ||
        params.search_window % 2 == 0) {
      throw Error("segment: denoise windows must be odd and positive");
    }
    if (static_cast<std::size_t>(params.template_window) > min_side ||
        static_cast<std::size_t>(params.search_window) > min_side) {
      throw Error("segment: denoise window larger than image");
    }
    if (!(params.h > 0.0)) throw Error("segment: denoise strength must be positive");
    smooth = kernels::parallel::nlm_denoise(img, params.h / 255.0, params.template_window,
                                            params.search_window);
  }
  const GrayImage mean = kernels::parallel::gaussian_local_mean(smooth, params.block_size);
  const double c = params.offset / 255.0;
  PhaseMap out(img.width(), img.height());
  std::size_t ones = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool on = smooth.data()[i] > mean.data()[i] - c;
    out.data()[i] = on ? 1 : 0;
    ones += on;
  }
  if (params.normalize_polarity && 2 * ones > out.size()) {
    for (auto& v : out.data()) v = static_cast<std::uint8_t>(1 - v);
  }
  return out;
}

}  // namespace m2p
