#include "m2p/spatialstats.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <cstdlib>
#include <memory>
#include <mutex>

#include "m2p/error.hpp"

namespace m2p {

namespace {

// FFTW's planner is not re-entrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) throw Error("twopoint: FFT planning failed");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  fftw_plan get() const { return plan_; }

 private:
  fftw_plan plan_;
};

// raw[r] = sum_x a(x + r) b(x), circular over a tw x th grid.
std::vector<double> circular_correlation(const std::vector<double>& a, const std::vector<double>* b,
                                         std::size_t tw, std::size_t th) {
  const std::size_t n = tw * th;
  const std::size_t nc = th * (tw / 2 + 1);
  RealBuffer real(fftw_alloc_real(n));
  ComplexBuffer fa(fftw_alloc_complex(nc));
  ComplexBuffer fb(b ? fftw_alloc_complex(nc) : nullptr);
  if (!real || !fa || (b && !fb)) throw std::bad_alloc();

  std::unique_ptr<Plan> forward;
  std::unique_ptr<Plan> inverse;
  {
    std::lock_guard lock(planner_mutex());
    forward = std::make_unique<Plan>(fftw_plan_dft_r2c_2d(static_cast<int>(th), static_cast<int>(tw),
                                                          real.get(), fa.get(), FFTW_ESTIMATE));
    inverse = std::make_unique<Plan>(fftw_plan_dft_c2r_2d(static_cast<int>(th), static_cast<int>(tw),
                                                          fa.get(), real.get(), FFTW_ESTIMATE));
  }

  std::copy(a.begin(), a.end(), real.get());
  fftw_execute_dft_r2c(forward->get(), real.get(), fa.get());
  fftw_complex* other = fa.get();
  if (b) {
    std::copy(b->begin(), b->end(), real.get());
    fftw_execute_dft_r2c(forward->get(), real.get(), fb.get());
    other = fb.get();
  }
  for (std::size_t k = 0; k < nc; ++k) {
    const double ar = fa[k][0], ai = fa[k][1];
    const double br = other[k][0], bi = other[k][1];
    fa[k][0] = ar * br + ai * bi;
    fa[k][1] = ai * br - ar * bi;
  }
  fftw_execute_dft_c2r(inverse->get(), fa.get(), real.get());
  std::vector<double> out(real.get(), real.get() + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

std::ptrdiff_t wrap(std::ptrdiff_t i, std::ptrdiff_t n) {
  const std::ptrdiff_t r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

Boundary parse_boundary(std::string_view text) {
  if (text == "periodic") return Boundary::Periodic;
  if (text == "nonperiodic") return Boundary::NonPeriodic;
  throw Error("unknown boundary '" + std::string(text) + "'");
}

std::string_view to_string(Boundary boundary) {
  return boundary == Boundary::Periodic ? "periodic" : "nonperiodic";
}

std::string twopoint_extractor_id(CorrelationKind kind, Boundary boundary) {
  return std::string("twopoint/") + (kind.is_auto() ? "auto" : "cross") + "/" +
         std::string(to_string(boundary));
}

CorrelationMap two_point(const PhaseMap& map, CorrelationKind kind, Boundary boundary) {
  if (map.empty()) throw Error("twopoint: empty image");
  for (auto v : map.data()) {
    if (v > 1) throw Error("twopoint: non-binary input");
  }
  if (kind.phase_a > 1 || kind.phase_b > 1) throw Error("twopoint: phase must be 0 or 1");

  const std::size_t w = map.width();
  const std::size_t h = map.height();
  const bool periodic = boundary == Boundary::Periodic;
  const std::size_t tw = periodic ? w : 2 * w - 1;
  const std::size_t th = periodic ? h : 2 * h - 1;

  std::vector<double> ia(tw * th, 0.0);
  std::vector<double> ib;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) ia[y * tw + x] = map(x, y) == kind.phase_a ? 1.0 : 0.0;
  }
  if (!kind.is_auto()) {
    ib.assign(tw * th, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) ib[y * tw + x] = map(x, y) == kind.phase_b ? 1.0 : 0.0;
    }
  }
  const auto raw = circular_correlation(ia, kind.is_auto() ? nullptr : &ib, tw, th);

  const auto layout = kernels::shift_layout(w, h, boundary);
  CorrelationMap out{layout.width, layout.height, layout.center_x, layout.center_y,
                     std::vector<double>(layout.width * layout.height), kind, boundary};
  for (std::size_t j = 0; j < layout.height; ++j) {
    const auto sy = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(layout.center_y);
    const auto ry = static_cast<std::size_t>(wrap(sy, static_cast<std::ptrdiff_t>(th)));
    for (std::size_t i = 0; i < layout.width; ++i) {
      const auto sx = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(layout.center_x);
      const auto rx = static_cast<std::size_t>(wrap(sx, static_cast<std::ptrdiff_t>(tw)));
      const double v = raw[ry * tw + rx];
      const double count = std::nearbyint(v);
      if (std::abs(v - count) > 0.25) throw Error("twopoint: FFT round-off too large");
      const double pairs = periodic ? static_cast<double>(w * h)
                                    : static_cast<double>((w - static_cast<std::size_t>(std::abs(sx))) *
                                                          (h - static_cast<std::size_t>(std::abs(sy))));
      out.values[j * layout.width + i] = count / pairs;
    }
  }
  return out;
}

std::vector<CorrelationMap> two_point_batch(std::span<const PhaseMap> maps, CorrelationKind kind,
                                            Boundary boundary) {
  std::vector<CorrelationMap> out(maps.size());
  const auto n = static_cast<std::ptrdiff_t>(maps.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = two_point(maps[static_cast<std::size_t>(i)], kind, boundary);
    } catch (...) {
#pragma omp critical(m2p_twopoint_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

CorrelationMap center_crop_map(const CorrelationMap& map, std::size_t side) {
  if (side % 2 == 0) throw Error("center_crop_map: side must be odd");
  if (side > map.width || side > map.height) throw Error("center_crop_map: side too large");
  const std::size_t r = side / 2;
  if (map.center_x < r || map.center_y < r || map.center_x + r >= map.width ||
      map.center_y + r >= map.height) {
    throw Error("center_crop_map: window leaves the map");
  }
  CorrelationMap out{side, side, r, r, std::vector<double>(side * side), map.kind, map.boundary};
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      out.values[y * side + x] = map.at(map.center_x - r + x, map.center_y - r + y);
    }
  }
  return out;
}

std::vector<double> vectorize(const CorrelationMap& map) { return map.values; }

}  // namespace m2p
