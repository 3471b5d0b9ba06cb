#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "m2p/error.hpp"

namespace m2p {

// Dense row-major 2D grid. Pixel (x, y) lives at data[y * width + x].
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}
  Grid(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_) {
      throw Error("grid: pixel count " + std::to_string(data_.size()) + " != " +
                  std::to_string(width_) + "x" + std::to_string(height_));
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

// Grayscale intensities in [0, 1].
using GrayImage = Grid<double>;
// Two-phase label map, labels in {0, 1}.
using PhaseMap = Grid<std::uint8_t>;

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::array<std::vector<double>, 3> channels;
};

void check_gray(const GrayImage& img);
void check_phase_map(const PhaseMap& map);

// Fraction of pixels carrying `label`.
double volume_fraction(const PhaseMap& map, std::uint8_t label = 1);

}  // namespace m2p
