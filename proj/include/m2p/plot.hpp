#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "m2p/evaluation.hpp"

namespace m2p::plot {

struct Frame {
  double width = 480.0;
  double height = 480.0;
  double margin = 48.0;
};

// Maps [lo, hi] onto the plot area; y grows upward in data space.
struct Axes {
  double lo = 0.0;
  double hi = 1.0;
  Frame frame;

  double px_x(double v) const;
  double px_y(double v) const;
};

// Shared square axes over truth and prediction, padded by 5% of the range
// (or by 1 when all values coincide).
Axes parity_axes(std::span<const ParityRow> rows, Frame frame = {});

std::string parity_svg(std::span<const ParityRow> rows, Frame frame = {});
void render_parity_svg(const std::filesystem::path& parity_csv, const std::filesystem::path& out);

// Bar chart of per-fold errors with a dashed line at their mean.
std::string fold_error_svg(std::span<const double> fold_mape, Frame frame = {});

}  // namespace m2p::plot
