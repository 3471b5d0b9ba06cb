#include <cmath>

#include "kernels_detail.hpp"
#include "m2p/kernels.hpp"

namespace m2p::kernels::parallel {

std::vector<std::int64_t> pair_counts(const PhaseMap& map, std::uint8_t a, std::uint8_t b,
                                      Boundary boundary) {
  const auto w = static_cast<std::ptrdiff_t>(map.width());
  const auto h = static_cast<std::ptrdiff_t>(map.height());
  const ShiftLayout layout = shift_layout(map.width(), map.height(), boundary);
  const auto cells = static_cast<std::ptrdiff_t>(layout.width * layout.height);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(cells), 0);

  // 0/1 indicator of phase a per pixel.
  std::vector<std::uint8_t> is_a(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) is_a[i] = map.data()[i] == a;

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t cell = 0; cell < cells; ++cell) {
    const auto i = cell % static_cast<std::ptrdiff_t>(layout.width);
    const auto j = cell / static_cast<std::ptrdiff_t>(layout.width);
    const auto sx = i - static_cast<std::ptrdiff_t>(layout.center_x);
    const auto sy = j - static_cast<std::ptrdiff_t>(layout.center_y);
    std::int64_t count = 0;
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      std::ptrdiff_t ty = y + sy;
      if (boundary == Boundary::Periodic) {
        ty = detail::wrap(ty, h);
      } else if (ty < 0 || ty >= h) {
        continue;
      }
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        if (map(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) != b) continue;
        std::ptrdiff_t tx = x + sx;
        if (boundary == Boundary::Periodic) {
          tx = detail::wrap(tx, w);
        } else if (tx < 0 || tx >= w) {
          continue;
        }
        count += is_a[static_cast<std::size_t>(ty * w + tx)];
      }
    }
    counts[static_cast<std::size_t>(cell)] = count;
  }
  return counts;
}

GrayImage bilinear_resize(const GrayImage& src, std::size_t out_w, std::size_t out_h) {
  const auto tx = detail::lerp_taps(src.width(), out_w);
  const auto ty = detail::lerp_taps(src.height(), out_h);
  GrayImage out(out_w, out_h);
  const auto rows = static_cast<std::ptrdiff_t>(out_h);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t yi = 0; yi < rows; ++yi) {
    const auto y = static_cast<std::size_t>(yi);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double top = src(tx[x].lo, ty[y].lo) * (1.0 - tx[x].frac) + src(tx[x].hi, ty[y].lo) * tx[x].frac;
      const double bot = src(tx[x].lo, ty[y].hi) * (1.0 - tx[x].frac) + src(tx[x].hi, ty[y].hi) * tx[x].frac;
      out(x, y) = top * (1.0 - ty[y].frac) + bot * ty[y].frac;
    }
  }
  return out;
}

GrayImage gaussian_local_mean(const GrayImage& src, int ksize) {
  const auto k = gaussian_kernel_1d(ksize);
  const std::ptrdiff_t r = ksize / 2;
  const auto w = static_cast<std::ptrdiff_t>(src.width());
  const auto h = static_cast<std::ptrdiff_t>(src.height());
  GrayImage horiz(src.width(), src.height());
  GrayImage out(src.width(), src.height());
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double sum = 0.0;
        for (std::ptrdiff_t d = -r; d <= r; ++d) {
          sum += k[static_cast<std::size_t>(d + r)] *
                 src(static_cast<std::size_t>(detail::clamp_index(x + d, w)), static_cast<std::size_t>(y));
        }
        horiz(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = sum;
      }
    }
#pragma omp for schedule(static)
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double sum = 0.0;
        for (std::ptrdiff_t d = -r; d <= r; ++d) {
          sum += k[static_cast<std::size_t>(d + r)] *
                 horiz(static_cast<std::size_t>(x), static_cast<std::size_t>(detail::clamp_index(y + d, h)));
        }
        out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = sum;
      }
    }
  }
  return out;
}

// Offset-major non-local means: for every search offset the squared
// difference image is box-summed over the template window, so the template
// cost drops from t^2 to 2t per pixel and offset.
GrayImage nlm_denoise(const GrayImage& src, double h, int template_size, int search_size) {
  const std::ptrdiff_t tr = template_size / 2;
  const std::ptrdiff_t sr = search_size / 2;
  const std::ptrdiff_t border = tr + sr;
  const auto w = static_cast<std::ptrdiff_t>(src.width());
  const auto hh = static_cast<std::ptrdiff_t>(src.height());
  const std::ptrdiff_t pw = w + 2 * border;
  const std::ptrdiff_t ph = hh + 2 * border;
  std::vector<double> padded(static_cast<std::size_t>(pw * ph));
  for (std::ptrdiff_t y = 0; y < ph; ++y) {
    for (std::ptrdiff_t x = 0; x < pw; ++x) {
      padded[static_cast<std::size_t>(y * pw + x)] =
          src(static_cast<std::size_t>(reflect101(x - border, w)),
              static_cast<std::size_t>(reflect101(y - border, hh)));
    }
  }
  auto P = [&](std::ptrdiff_t x, std::ptrdiff_t y) { return padded[static_cast<std::size_t>(y * pw + x)]; };

  // Squared differences live on the template-extended image region.
  const std::ptrdiff_t dw = w + 2 * tr;
  const std::ptrdiff_t dh = hh + 2 * tr;
  std::vector<double> diff(static_cast<std::size_t>(dw * dh));
  std::vector<double> rowsum(static_cast<std::size_t>(w * dh));
  std::vector<double> weight_sum(static_cast<std::size_t>(w * hh), 0.0);
  std::vector<double> value_sum(static_cast<std::size_t>(w * hh), 0.0);
  const double scale = 1.0 / (h * h * static_cast<double>(template_size * template_size));

#pragma omp parallel
  for (std::ptrdiff_t dy = -sr; dy <= sr; ++dy) {
    for (std::ptrdiff_t dx = -sr; dx <= sr; ++dx) {
#pragma omp for schedule(static)
      for (std::ptrdiff_t y = 0; y < dh; ++y) {
        const std::ptrdiff_t py = y + border - tr;
        for (std::ptrdiff_t x = 0; x < dw; ++x) {
          const std::ptrdiff_t px = x + border - tr;
          const double d = P(px, py) - P(px + dx, py + dy);
          diff[static_cast<std::size_t>(y * dw + x)] = d * d;
        }
      }
#pragma omp for schedule(static)
      for (std::ptrdiff_t y = 0; y < dh; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
          double s = 0.0;
          for (std::ptrdiff_t o = 0; o <= 2 * tr; ++o) s += diff[static_cast<std::size_t>(y * dw + x + o)];
          rowsum[static_cast<std::size_t>(y * w + x)] = s;
        }
      }
#pragma omp for schedule(static)
      for (std::ptrdiff_t y = 0; y < hh; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
          double d2 = 0.0;
          for (std::ptrdiff_t o = 0; o <= 2 * tr; ++o) d2 += rowsum[static_cast<std::size_t>((y + o) * w + x)];
          const double wgt = std::exp(-d2 * scale);
          const auto idx = static_cast<std::size_t>(y * w + x);
          weight_sum[idx] += wgt;
          value_sum[idx] += wgt * P(x + border + dx, y + border + dy);
        }
      }
    }
  }

  GrayImage out(src.width(), src.height());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = value_sum[i] / weight_sum[i];
  return out;
}

void gaussian_smooth_periodic(std::vector<double>& field, std::size_t nx, std::size_t ny,
                              std::size_t nz, std::array<double, 3> sigma) {
  const std::array<std::size_t, 3> n{nx, ny, nz};
  const std::array<std::size_t, 3> stride{1, nx, nx * ny};
  for (int axis = 0; axis < 3; ++axis) {
    if (sigma[static_cast<std::size_t>(axis)] <= 0.0) continue;
    std::ptrdiff_t radius = 0;
    const auto wts = detail::smoothing_weights(sigma[static_cast<std::size_t>(axis)], radius);
    const std::size_t len = n[static_cast<std::size_t>(axis)];
    const std::size_t step = stride[static_cast<std::size_t>(axis)];
    const auto lines = static_cast<std::ptrdiff_t>(field.size() / len);
#pragma omp parallel
    {
      std::vector<double> line(len);
#pragma omp for schedule(static)
      for (std::ptrdiff_t li = 0; li < lines; ++li) {
        const auto l = static_cast<std::size_t>(li);
        const std::size_t base = (l % step) + (l / step) * step * len;
        for (std::size_t i = 0; i < len; ++i) line[i] = field[base + i * step];
        for (std::size_t i = 0; i < len; ++i) {
          double acc = 0.0;
          for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
            const auto s = detail::wrap(static_cast<std::ptrdiff_t>(i) + k, static_cast<std::ptrdiff_t>(len));
            acc += wts[static_cast<std::size_t>(k + radius)] * line[static_cast<std::size_t>(s)];
          }
          field[base + i * step] = acc;
        }
      }
    }
  }
}

}  // namespace m2p::kernels::parallel
