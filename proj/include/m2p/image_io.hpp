#pragma once

#include <filesystem>

#include "m2p/grid.hpp"

namespace m2p {

// PNG (any bit depth/colour type; colour is averaged to gray) and binary or
// ASCII PGM. Intensities are scaled to [0, 1].
GrayImage read_image(const std::filesystem::path& path);

// 8-bit output, format chosen by extension (.png or .pgm).
void write_image(const GrayImage& img, const std::filesystem::path& path);
void write_image(const PhaseMap& map, const std::filesystem::path& path);

}  // namespace m2p
