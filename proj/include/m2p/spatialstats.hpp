#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "m2p/feature_set.hpp"
#include "m2p/grid.hpp"
#include "m2p/kernels.hpp"

namespace m2p {

using kernels::Boundary;

// Ordered phase pair (a, b). a == b is an autocorrelation.
struct CorrelationKind {
  std::uint8_t phase_a = 1;
  std::uint8_t phase_b = 1;

  static CorrelationKind autocorrelation(std::uint8_t phase) { return {phase, phase}; }
  static CorrelationKind cross(std::uint8_t a, std::uint8_t b) { return {a, b}; }
  bool is_auto() const { return phase_a == phase_b; }
  bool operator==(const CorrelationKind&) const = default;
};

Boundary parse_boundary(std::string_view text);  // periodic, nonperiodic
std::string_view to_string(Boundary boundary);

// S(r) = P(x + r in phase a and x in phase b), laid out with the zero shift
// at (center_x, center_y) (see kernels::ShiftLayout).
struct CorrelationMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t center_x = 0;
  std::size_t center_y = 0;
  std::vector<double> values;
  CorrelationKind kind;
  Boundary boundary = Boundary::Periodic;

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
  double zero_shift() const { return at(center_x, center_y); }
};

// Two-point statistics via FFT. Periodic maps divide by the pixel count and
// keep the input dims; non-periodic maps zero-pad, divide each shift by its
// number of valid pixel pairs and span (2w - 1) x (2h - 1). Pair counts are
// rounded to integers before normalization, so results are exact rationals.
CorrelationMap two_point(const PhaseMap& map, CorrelationKind kind, Boundary boundary);

// Same statistics for many maps, evaluated in parallel; output order matches input.
std::vector<CorrelationMap> two_point_batch(std::span<const PhaseMap> maps, CorrelationKind kind,
                                            Boundary boundary);

// Odd square window centred on the zero shift.
CorrelationMap center_crop_map(const CorrelationMap& map, std::size_t side);

// Row-major flattening.
std::vector<double> vectorize(const CorrelationMap& map);

// "twopoint/<auto|cross>/<periodic|nonperiodic>"
std::string twopoint_extractor_id(CorrelationKind kind, Boundary boundary);

}  // namespace m2p
