#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "m2p/csv.hpp"
#include "m2p/dataio.hpp"
#include "m2p/error.hpp"
#include "m2p/rng.hpp"
#include "oracles.hpp"

using namespace m2p;

namespace {

std::string elements_header(std::size_t n) {
  std::string h;
  for (std::size_t i = 0; i < n; ++i) h += ",E" + std::to_string(i);
  return h;
}

std::string zeros(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += ",0";
  return s;
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("csv split handles quotes and trimming") {
  const auto row = csv::split_line(R"(a, "b,c" ,"d""e",)");
  REQUIRE(row.size() == 4);
  CHECK(row[0] == "a");
  CHECK(row[1] == "b,c");
  CHECK(row[2] == "d\"e");
  CHECK(row[3].empty());
  CHECK(csv::split_line(csv::join({"x,y", "q\"t", "plain"})) == csv::Row{"x,y", "q\"t", "plain"});
}

TEST_CASE("csv numbers are strict and round-trip") {
  CHECK(csv::parse_double("1.5") == 1.5);
  CHECK_FALSE(csv::parse_double("1.5x"));
  CHECK_FALSE(csv::parse_double(""));
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-20, 20));
    CHECK(csv::parse_double(csv::format_double(v)) == v);
  }
}

TEST_CASE("manifest rows keep order and units") {
  oracle::TempDir dir("manifest");
  for (const char* n : {"a.png", "b.png", "c.png"}) oracle::write_text(dir / n, "x");
  oracle::write_text(dir / "m.csv",
                     "sample_id,image_1,target,target_unit\n"
                     "a,a.png,100,kgf_mm2\n"
                     "b,b.png,2.5,GPa\n"
                     "c,c.png,7,dimensionless\n");
  auto m = load_manifest(dir / "m.csv");
  REQUIRE(m.size() == 3);
  CHECK(m[0].sample_id == "a");
  CHECK(m[1].sample_id == "b");
  CHECK(m[2].sample_id == "c");
  CHECK(m[1].target_unit == Unit::GPa);
  CHECK(m[1].image_paths.front() == dir / "b.png");
  CHECK_FALSE(m[0].composition);
  normalize_hardness(m);
  CHECK(m[1].target_unit == Unit::KgfPerMm2);
  CHECK(m[1].target_value == doctest::Approx(2.5 * 1000.0 / 9.80665).epsilon(1e-14));
  CHECK(m[0].target_value == 100.0);
}

TEST_CASE("manifest errors") {
  oracle::TempDir dir("manifest_err");
  oracle::write_text(dir / "a.png", "x");
  oracle::write_text(dir / "b.png", "x");
  const auto fails_with = [&](const std::string& text, const std::string& needle) {
    oracle::write_text(dir / "m.csv", text);
    try {
      load_manifest(dir / "m.csv");
      FAIL("expected an error containing " << needle);
    } catch (const Error& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  fails_with("sample_id,image_1,target,target_unit" + elements_header(21) + "\na,a.png,1,GPa" + zeros(21) + "\n",
             "composition arity");
  fails_with("sample_id,image_1,target,target_unit\na,a.png,1,GPa\na,b.png,2,GPa\n", "duplicate sample_id");
  fails_with("sample_id,image_1,target,target_unit\na,a.png,abc,GPa\n", "non-numeric target");
  fails_with("sample_id,image_1,target,target_unit\na,missing.png,1,GPa\n", "missing image");
  CHECK_THROWS_WITH_AS(load_manifest(dir / "nope.csv"), doctest::Contains("missing file"), Error);
}

TEST_CASE("manifest with compositions round-trips") {
  oracle::TempDir dir("manifest_comp");
  oracle::write_text(dir / "a.png", "x");
  std::string text = "# composition_units=wt%\nsample_id,image_1,target,target_unit" + elements_header(22) +
                     "\na,a.png,300,kgf_mm2";
  for (int i = 0; i < 22; ++i) text += "," + std::to_string(i);
  oracle::write_text(dir / "m.csv", text + "\n");
  const auto m = load_manifest(dir / "m.csv");
  REQUIRE(m.size() == 1);
  REQUIRE(m[0].composition);
  CHECK(m[0].composition->convention == "wt%");
  CHECK(m[0].composition->element_names.size() == 22);
  CHECK(m[0].composition->values[21] == 21.0);
  write_manifest(m, dir / "copy.csv");
  const auto again = load_manifest(dir / "copy.csv");
  CHECK(again[0].composition->values == m[0].composition->values);
  CHECK(again[0].composition->convention == "wt%");
}

TEST_CASE("hardness conversion") {
  CHECK(convert_hardness(1.0, Unit::GPa, Unit::KgfPerMm2) == doctest::Approx(101.9716).epsilon(1e-6));
  CHECK(convert_hardness(3.7, Unit::GPa, Unit::GPa) == 3.7);
  CHECK_THROWS_AS(convert_hardness(1.0, Unit::GPa, Unit::Dimensionless), Error);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(0.01, 5000.0);
    const double back = convert_hardness(convert_hardness(v, Unit::GPa, Unit::KgfPerMm2), Unit::KgfPerMm2, Unit::GPa);
    CHECK(std::abs(back - v) / v < 1e-12);
  }
}

TEST_CASE("volumes") {
  oracle::TempDir dir("volume");
  SUBCASE("zeros") {
    Volume3D v{51, 51, 51, std::vector<std::uint8_t>(51 * 51 * 51, 0)};
    save_volume(v, dir / "z.bin");
    const auto back = load_volume(dir / "z.bin");
    CHECK(back.volume_fraction() == 0.0);
    CHECK(back.nx == 51);
  }
  SUBCASE("checkerboard") {
    Volume3D v{4, 4, 4, std::vector<std::uint8_t>(64)};
    for (std::size_t z = 0; z < 4; ++z)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) v.voxels[v.index(x, y, z)] = (x + y + z) % 2;
    save_volume(v, dir / "c.bin");
    const auto back = load_volume(dir / "c.bin");
    CHECK(back.voxels == v.voxels);
    CHECK(back.volume_fraction() == 0.5);
  }
  SUBCASE("size mismatch") {
    oracle::write_text(dir / "s.meta", "nx = 2\nny = 2\nnz = 2\n");
    oracle::write_text(dir / "s.bin", std::string(7, '\0'));
    CHECK_THROWS_WITH_AS(load_volume(dir / "s.bin"), doctest::Contains("size mismatch"), Error);
  }
  SUBCASE("bad label") {
    oracle::write_text(dir / "l.meta", "nx = 2\nny = 1\nnz = 1\n");
    oracle::write_text(dir / "l.bin", std::string("\x01\x02", 2));
    CHECK_THROWS_WITH_AS(load_volume(dir / "l.bin"), doctest::Contains("label outside"), Error);
  }
}

TEST_CASE("MPFV1 hand-built fixture") {
  const auto bytes = oracle::from_hex(oracle::kMpfvHex);
  REQUIRE(bytes.size() == 52);
  const FeatureSet set = decode_mpfv(bytes);
  CHECK(set.extractor_id() == "test");
  CHECK(set.dim() == 3);
  REQUIRE(set.size() == 2);
  CHECK(set.id(0) == "a");
  CHECK(set.id(1) == "b");
  CHECK(std::vector<double>(set.row(0).begin(), set.row(0).end()) == std::vector<double>{1, 2, 3});
  CHECK(std::vector<double>(set.row(1).begin(), set.row(1).end()) == std::vector<double>{-1.5, 0, 0.25});
  CHECK(encode_mpfv(set) == bytes);
}

TEST_CASE("MPFV1 malformed input") {
  auto bytes = oracle::from_hex(oracle::kMpfvHex);
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_mpfv(bytes), doctest::Contains("bad magic"), Error);
  }
  SUBCASE("version") {
    bytes[4] = 2;
    CHECK_THROWS_WITH_AS(decode_mpfv(bytes), doctest::Contains("version"), Error);
  }
  SUBCASE("truncated") {
    bytes.pop_back();
    CHECK_THROWS_WITH_AS(decode_mpfv(bytes), doctest::Contains("truncated"), Error);
  }
  SUBCASE("nan") {
    const auto nan = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    for (int i = 0; i < 4; ++i) bytes[48 + i] = static_cast<std::uint8_t>(nan >> (8 * i));
    CHECK_THROWS_WITH_AS(decode_mpfv(bytes), doctest::Contains("NaN"), Error);
  }
  SUBCASE("duplicate id") {
    bytes[39] = 'a';
    CHECK_THROWS_WITH_AS(decode_mpfv(bytes), doctest::Contains("duplicate"), Error);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_mpfv(bytes), Error);
  }
}

TEST_CASE("MPFV1 and CSV round trips on random sets") {
  oracle::TempDir dir("mpfv");
  Rng rng(2024);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t dim = 1 + rng.below(40);
    const std::size_t count = rng.below(12);
    FeatureSet set("rand/" + std::to_string(trial));
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<double> v(dim);
      for (auto& x : v) x = static_cast<double>(static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-6, 6))));
      set.add("id_" + std::to_string(i) + (rng.below(2) ? "_x" : ""), v);
    }
    const auto path = dir / "f.mpfv";
    write_features(set, path);
    const FeatureSet back = read_features(path);
    CHECK(back == set);
    CHECK(back.extractor_id() == set.extractor_id());
    if (trial % 10 == 0 && count > 0) {
      write_features(set, dir / "f.csv");
      CHECK(read_features(dir / "f.csv") == set);
    }
  }
}

TEST_CASE("MPFV1 rounds values to 32-bit") {
  FeatureSet set("r");
  set.add("x", std::vector<double>{0.1});
  const auto back = decode_mpfv(encode_mpfv(set));
  CHECK(back.row(0)[0] == static_cast<double>(0.1f));
}

}
