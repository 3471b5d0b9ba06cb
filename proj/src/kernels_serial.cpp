#include <cmath>

#include "kernels_detail.hpp"
#include "m2p/error.hpp"
#include "m2p/kernels.hpp"

namespace m2p::kernels {

std::vector<double> gaussian_kernel_1d(int ksize) {
  if (ksize < 1 || ksize % 2 == 0) throw Error("gaussian kernel: size must be odd and positive");
  switch (ksize) {
    case 1:
      return {1.0};
    case 3:
      return {0.25, 0.5, 0.25};
    case 5:
      return {0.0625, 0.25, 0.375, 0.25, 0.0625};
    case 7:
      return {0.03125, 0.109375, 0.21875, 0.28125, 0.21875, 0.109375, 0.03125};
    default:
      break;
  }
  const double sigma = 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8;
  const double scale = -0.5 / (sigma * sigma);
  std::vector<double> w(static_cast<std::size_t>(ksize));
  double total = 0.0;
  for (int i = 0; i < ksize; ++i) {
    const double x = i - (ksize - 1) * 0.5;
    w[static_cast<std::size_t>(i)] = std::exp(scale * x * x);
    total += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= total;
  return w;
}

std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

ShiftLayout shift_layout(std::size_t w, std::size_t h, Boundary boundary) {
  if (boundary == Boundary::Periodic) return {w, h, w / 2, h / 2};
  return {2 * w - 1, 2 * h - 1, w - 1, h - 1};
}

namespace serial {

std::vector<std::int64_t> pair_counts(const PhaseMap& map, std::uint8_t a, std::uint8_t b,
                                      Boundary boundary) {
  const auto w = static_cast<std::ptrdiff_t>(map.width());
  const auto h = static_cast<std::ptrdiff_t>(map.height());
  const ShiftLayout layout = shift_layout(map.width(), map.height(), boundary);
  std::vector<std::int64_t> counts(layout.width * layout.height, 0);
  for (std::size_t j = 0; j < layout.height; ++j) {
    for (std::size_t i = 0; i < layout.width; ++i) {
      const auto sx = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(layout.center_x);
      const auto sy = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(layout.center_y);
      std::int64_t count = 0;
      for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
          if (map(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) != b) continue;
          std::ptrdiff_t tx = x + sx;
          std::ptrdiff_t ty = y + sy;
          if (boundary == Boundary::Periodic) {
            tx = detail::wrap(tx, w);
            ty = detail::wrap(ty, h);
          } else if (tx < 0 || tx >= w || ty < 0 || ty >= h) {
            continue;
          }
          if (map(static_cast<std::size_t>(tx), static_cast<std::size_t>(ty)) == a) ++count;
        }
      }
      counts[j * layout.width + i] = count;
    }
  }
  return counts;
}

GrayImage bilinear_resize(const GrayImage& src, std::size_t out_w, std::size_t out_h) {
  const auto tx = detail::lerp_taps(src.width(), out_w);
  const auto ty = detail::lerp_taps(src.height(), out_h);
  GrayImage out(out_w, out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
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
  GrayImage out(src.width(), src.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double sum = 0.0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        const auto sy = static_cast<std::size_t>(detail::clamp_index(y + dy, h));
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const auto sx = static_cast<std::size_t>(detail::clamp_index(x + dx, w));
          sum += k[static_cast<std::size_t>(dy + r)] * k[static_cast<std::size_t>(dx + r)] * src(sx, sy);
        }
      }
      out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = sum;
    }
  }
  return out;
}

GrayImage nlm_denoise(const GrayImage& src, double h, int template_size, int search_size) {
  const std::ptrdiff_t tr = template_size / 2;
  const std::ptrdiff_t sr = search_size / 2;
  const auto w = static_cast<std::ptrdiff_t>(src.width());
  const auto hh = static_cast<std::ptrdiff_t>(src.height());
  const double inv_h2 = 1.0 / (h * h);
  const double inv_t2 = 1.0 / static_cast<double>(template_size * template_size);
  auto px = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
    return src(static_cast<std::size_t>(reflect101(x, w)), static_cast<std::size_t>(reflect101(y, hh)));
  };
  GrayImage out(src.width(), src.height());
  for (std::ptrdiff_t y = 0; y < hh; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double weight_sum = 0.0;
      double value_sum = 0.0;
      for (std::ptrdiff_t dy = -sr; dy <= sr; ++dy) {
        for (std::ptrdiff_t dx = -sr; dx <= sr; ++dx) {
          double d2 = 0.0;
          for (std::ptrdiff_t oy = -tr; oy <= tr; ++oy) {
            for (std::ptrdiff_t ox = -tr; ox <= tr; ++ox) {
              const double diff = px(x + ox, y + oy) - px(x + dx + ox, y + dy + oy);
              d2 += diff * diff;
            }
          }
          const double wgt = std::exp(-d2 * inv_t2 * inv_h2);
          weight_sum += wgt;
          value_sum += wgt * px(x + dx, y + dy);
        }
      }
      out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = value_sum / weight_sum;
    }
  }
  return out;
}

void gaussian_smooth_periodic(std::vector<double>& field, std::size_t nx, std::size_t ny,
                              std::size_t nz, std::array<double, 3> sigma) {
  const std::array<std::size_t, 3> n{nx, ny, nz};
  const std::array<std::size_t, 3> stride{1, nx, nx * ny};
  std::vector<double> line;
  for (int axis = 0; axis < 3; ++axis) {
    if (sigma[static_cast<std::size_t>(axis)] <= 0.0) continue;
    std::ptrdiff_t radius = 0;
    const auto wts = detail::smoothing_weights(sigma[static_cast<std::size_t>(axis)], radius);
    const std::size_t len = n[static_cast<std::size_t>(axis)];
    const std::size_t step = stride[static_cast<std::size_t>(axis)];
    line.resize(len);
    const std::size_t lines = field.size() / len;
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t base = (l % step) + (l / step) * step * len;
      for (std::size_t i = 0; i < len; ++i) line[i] = field[base + i * step];
      for (std::size_t i = 0; i < len; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          const auto src = detail::wrap(static_cast<std::ptrdiff_t>(i) + k, static_cast<std::ptrdiff_t>(len));
          acc += wts[static_cast<std::size_t>(k + radius)] * line[static_cast<std::size_t>(src)];
        }
        field[base + i * step] = acc;
      }
    }
  }
}

}  // namespace serial
}  // namespace m2p::kernels
