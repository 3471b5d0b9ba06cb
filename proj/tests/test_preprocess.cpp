#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "m2p/error.hpp"
#include "m2p/image_io.hpp"
#include "m2p/preprocess.hpp"
#include "m2p/rng.hpp"
#include "oracles.hpp"

using namespace m2p;

namespace {

Volume3D random_volume(std::size_t n, Rng& rng) {
  Volume3D v{n, n, n, std::vector<std::uint8_t>(n * n * n)};
  for (auto& x : v.voxels) x = rng.uniform() < 0.5 ? 1 : 0;
  return v;
}

GrayImage ramp(std::size_t w, std::size_t h) {
  GrayImage g(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) g(x, y) = static_cast<double>((x * 31 + y * 17) % 256) / 255.0;
  return g;
}

GrayImage stripes(std::size_t n, double lo, double hi) {
  GrayImage g(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) g(x, y) = x % 2 ? hi : lo;
  return g;
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("sections of a constant volume") {
  const Volume3D v{51, 51, 51, std::vector<std::uint8_t>(51 * 51 * 51, 0)};
  const auto s = extract_sections(v);
  for (const PhaseMap* m : s.all()) {
    CHECK(m->width() == 51);
    CHECK(m->height() == 51);
    CHECK(std::all_of(m->data().begin(), m->data().end(), [](auto x) { return x == 0; }));
  }
}

TEST_CASE("single centre voxel appears once per section") {
  Volume3D v{9, 9, 9, std::vector<std::uint8_t>(729, 0)};
  v.voxels[v.index(4, 4, 4)] = 1;
  const auto s = extract_sections(v);
  for (const PhaseMap* m : s.all()) CHECK(std::count(m->data().begin(), m->data().end(), 1) == 1);
}

TEST_CASE("sections match direct indexing") {
  Rng rng(8);
  const auto v = random_volume(8, rng);
  const auto s = extract_sections(v);
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t b = 0; b < 8; ++b) {
      CHECK(s.normal_x(a, b) == v.at(4, a, b));
      CHECK(s.normal_y(a, b) == v.at(a, 4, b));
      CHECK(s.normal_z(a, b) == v.at(a, b, 4));
    }
  }
  const auto idx = extract_sections(v, SectionMode::Index, {1, 2, 3});
  CHECK(idx.normal_x(5, 6) == v.at(1, 5, 6));
  CHECK(idx.normal_y(5, 6) == v.at(5, 2, 6));
  CHECK(idx.normal_z(5, 6) == v.at(5, 6, 3));
  CHECK_THROWS_AS(extract_sections(v, SectionMode::Index, {8, 0, 0}), Error);
}

TEST_CASE("patch-multiple crops") {
  CHECK(crop_to_patch_multiple(GrayImage(51, 51), 14).width() == 42);
  const auto g = crop_to_patch_multiple(GrayImage(662, 731), 14);
  CHECK(g.width() == 658);
  CHECK(g.height() == 728);
  const auto same = ramp(42, 42);
  CHECK(crop_to_patch_multiple(same, 14) == same);
  CHECK_THROWS_AS(crop_to_patch_multiple(GrayImage(10, 20), 14), Error);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const std::size_t patch = 1 + rng.below(20);
    const std::size_t w = patch + rng.below(100);
    const std::size_t h = patch + rng.below(100);
    const auto c = crop_to_patch_multiple(GrayImage(w, h), patch);
    CHECK(c.width() % patch == 0);
    CHECK(c.height() % patch == 0);
    CHECK(w - c.width() < patch);
    CHECK(h - c.height() < patch);
  }
}

TEST_CASE("largest square crop") {
  CHECK(crop_largest_square_multiple(GrayImage(662, 731), 16).width() == 656);
  CHECK(crop_largest_square_multiple(GrayImage(662, 731), 16).height() == 656);
  CHECK(crop_largest_square_multiple(GrayImage(662, 731), 14).width() == 658);
  CHECK(crop_largest_square_multiple(GrayImage(224, 224), 16).width() == 224);
}

TEST_CASE("top-left crop") {
  GrayImage g(3, 3);
  for (std::size_t i = 0; i < 9; ++i) g.data()[i] = static_cast<double>(i) / 10.0;
  const auto c = crop_top_left(g, 2, 2);
  CHECK(c.values() == std::vector<double>{0.0, 0.1, 0.3, 0.4});
  CHECK(crop_top_left(g, 3, 3) == g);
  CHECK(crop_top_left(GrayImage(255, 255), 224, 224).width() == 224);
  CHECK_THROWS_AS(crop_top_left(g, 4, 2), Error);
}

TEST_CASE("replicated upsampling") {
  const PhaseMap m51(51, 51);
  CHECK(replicate_upsample(m51, 5).width() == 255);
  CHECK(replicate_upsample(m51, 21).height() == 1071);
  PhaseMap cb(2, 2, std::vector<std::uint8_t>{0, 1, 1, 0});
  CHECK(replicate_upsample(cb, 1) == cb);
  const auto up = replicate_upsample(cb, 3);
  REQUIRE(up.width() == 6);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) CHECK(up(x, y) == cb(x / 3, y / 3));
  CHECK_THROWS_AS(replicate_upsample(cb, 0), Error);

  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_map(1 + rng.below(9), 1 + rng.below(9), 0.3, rng);
    CHECK(volume_fraction(replicate_upsample(m, 1 + rng.below(6))) == volume_fraction(m));
  }
}

TEST_CASE("bilinear resize fixture") {
  GrayImage g(2, 2, std::vector<double>{0, 1, 1, 0});
  const auto r = bilinear_resize(g, 4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) CHECK(r(x, y) == doctest::Approx(oracle::kBilinear4x4[y][x]).epsilon(1e-15));
}

TEST_CASE("bilinear resize properties") {
  const auto g = ramp(37, 23);
  const auto same = bilinear_resize(g, 37, 23);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(same.data()[i] - g.data()[i]) < 1e-12);
  const auto flat = bilinear_resize(GrayImage(13, 7, 0.3), 50, 9);
  for (double v : flat.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
  const auto [lo, hi] = std::minmax_element(g.data().begin(), g.data().end());
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{5, 90}, {224, 224}, {1, 1}}) {
    const auto r = bilinear_resize(g, w, h);
    for (double v : r.data()) {
      CHECK(v >= *lo - 1e-12);
      CHECK(v <= *hi + 1e-12);
    }
  }
  CHECK_THROWS_AS(bilinear_resize(g, 0, 4), Error);
}

TEST_CASE("rgb expansion") {
  const GrayImage half(4, 3, 0.5);
  const auto rgb = to_rgb(half);
  for (const auto& ch : rgb.channels)
    for (double v : ch) CHECK(v == 0.5);
  const PhaseMap m(2, 1, std::vector<std::uint8_t>{0, 1});
  const auto prgb = to_rgb(m);
  for (const auto& ch : prgb.channels) CHECK(ch == std::vector<double>{0.0, 1.0});
  const auto g = ramp(9, 5);
  CHECK(channel_average(to_rgb(g)) == g);
}

TEST_CASE("backend flows") {
  const PhaseMap m(51, 51);
  CHECK(prepare_binary_labels(m, PreprocessSpec::for_backend(Backend::DinoV2)).width() == 42);
  CHECK(prepare_binary_labels(m, PreprocessSpec::for_backend(Backend::Clip)).width() == 224);
  CHECK(prepare_binary_labels(m, PreprocessSpec::for_backend(Backend::Sam)).width() == 1024);
  CHECK(prepare_binary(m, PreprocessSpec::for_backend(Backend::Clip)).channels[0].size() == 224u * 224u);
  const GrayImage g(662, 731, 0.25);
  CHECK(prepare_gray_plane(g, PreprocessSpec::for_backend(Backend::DinoV2)).width() == 658);
  CHECK(prepare_gray_plane(g, PreprocessSpec::for_backend(Backend::DinoV2)).height() == 728);
  CHECK(prepare_gray_plane(g, PreprocessSpec::for_backend(Backend::Clip)).width() == 224);
  const auto sam = PreprocessSpec::for_backend(Backend::Sam);
  CHECK(sam.patch_size == 14);
  const auto s = prepare_gray_plane(g, sam);
  CHECK(s.width() == 1024);
  CHECK(s.height() == 1024);
  CHECK(s(511, 700) == doctest::Approx(0.25).epsilon(1e-15));
  PreprocessSpec bad = PreprocessSpec::for_backend(Backend::Clip);
  bad.target_size = 1024;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(parse_backend("sam") == Backend::Sam);
  CHECK_THROWS_AS(parse_backend("vgg"), Error);
}

TEST_CASE("segmentation of a constant image gives one label") {
  const auto out = segment(GrayImage(32, 32, 0.4));
  const auto first = out.data()[0];
  CHECK(std::all_of(out.data().begin(), out.data().end(), [&](auto v) { return v == first; }));
}

TEST_CASE("two-level stripes segment to the global split") {
  SegmentParams p;
  p.denoise = false;
  p.block_size = 3;
  const auto img = stripes(8, 0.1, 0.9);
  const auto out = segment(img, p);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(out.data()[i] == (img.data()[i] > 0.5 ? 1 : 0));
  GrayImage again(8, 8);
  for (std::size_t i = 0; i < again.size(); ++i) again.data()[i] = out.data()[i];
  CHECK(segment(again, p) == out);
}

TEST_CASE("segmentation output is binary and minority-labelled") {
  Rng rng(12);
  GrayImage g(40, 40);
  for (std::size_t y = 0; y < 40; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      const bool blob = (x - 12.0) * (x - 12.0) + (y - 20.0) * (y - 20.0) < 49.0;
      g(x, y) = std::clamp((blob ? 0.8 : 0.3) + 0.05 * rng.normal(), 0.0, 1.0);
    }
  SegmentParams p;
  p.search_window = 11;
  p.block_size = 21;
  const auto out = segment(g, p);
  std::size_t ones = 0;
  for (auto v : out.data()) {
    CHECK(v <= 1);
    ones += v;
  }
  CHECK(2 * ones <= out.size());
}

TEST_CASE("segmentation parameter errors") {
  const GrayImage g(16, 16, 0.5);
  SegmentParams p;
  p.block_size = 4;
  CHECK_THROWS_WITH_AS(segment(g, p), doctest::Contains("even block"), Error);
  p.block_size = 11;
  p.search_window = 21;
  CHECK_THROWS_WITH_AS(segment(g, p), doctest::Contains("larger than image"), Error);
  p.denoise = false;
  p.block_size = 17;
  CHECK_THROWS_AS(segment(g, p), Error);
}

TEST_CASE("image files") {
  oracle::TempDir dir("images");
  const auto g = ramp(17, 9);
  write_image(g, dir / "g.png");
  write_image(g, dir / "g.pgm");
  const auto png = read_image(dir / "g.png");
  const auto pgm = read_image(dir / "g.pgm");
  CHECK(png.width() == 17);
  CHECK(png.height() == 9);
  CHECK(png == pgm);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(png.data()[i] - g.data()[i]) <= 0.5 / 255.0 + 1e-12);
  const PhaseMap m(3, 2, std::vector<std::uint8_t>{0, 1, 1, 0, 0, 1});
  write_image(m, dir / "m.png");
  const auto back = read_image(dir / "m.png");
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(back.data()[i] == static_cast<double>(m.data()[i]));
  oracle::write_text(dir / "a.pgm", "P2\n# c\n2 2\n4\n0 1 2 4\n");
  CHECK(read_image(dir / "a.pgm").values() == std::vector<double>{0.0, 0.25, 0.5, 1.0});
  CHECK_THROWS_AS(read_image(dir / "missing.png"), Error);
}

}
