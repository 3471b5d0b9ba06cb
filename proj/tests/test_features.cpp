#include <cmath>

#include "doctest.h"
#include "m2p/error.hpp"
#include "m2p/features.hpp"
#include "m2p/rng.hpp"

using namespace m2p;

namespace {

FeatureVector fv(const std::string& id, std::vector<double> v, const std::string& ex = "e") {
  return {id, ex, std::move(v)};
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("concat and mean aggregation") {
  const std::vector<FeatureVector> three{fv("s", std::vector<double>(1024, 1.0)), fv("s", std::vector<double>(1024, 2.0)),
                                         fv("s", std::vector<double>(1024, 3.0))};
  const auto cat = aggregate(three, Aggregation::Concat);
  CHECK(cat.values.size() == 3072);
  CHECK(cat.values[1023] == 1.0);
  CHECK(cat.values[1024] == 2.0);
  CHECK(cat.values[3071] == 3.0);

  const std::vector<FeatureVector> same{fv("s", {1, 2}), fv("s", {1, 2}), fv("s", {1, 2})};
  CHECK(aggregate(same, Aggregation::Mean).values == std::vector<double>{1, 2});

  const std::vector<FeatureVector> abc{fv("s", {3, 0, -6}), fv("s", {6, 1, 0}), fv("s", {0, 2, 3})};
  CHECK(aggregate(abc, Aggregation::Mean).values == std::vector<double>{3, 1, -1});

  CHECK_THROWS_AS(aggregate(std::vector<FeatureVector>{}, Aggregation::Mean), Error);
  const std::vector<FeatureVector> ragged{fv("s", {1}), fv("s", {1, 2})};
  CHECK_THROWS_WITH_AS(aggregate(ragged, Aggregation::Mean), doctest::Contains("length mismatch"), Error);
  CHECK(aggregate(ragged, Aggregation::Concat).values.size() == 3);
  const std::vector<FeatureVector> mixed{fv("s", {1}, "a"), fv("s", {1}, "b")};
  CHECK_THROWS_AS(aggregate(mixed, Aggregation::Concat), Error);
}

TEST_CASE("mean pooling commutes with per-dimension linear maps") {
  Rng rng(1);
  std::vector<FeatureVector> secs;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v(6);
    for (auto& x : v) x = rng.normal();
    secs.push_back(fv("s", v));
  }
  std::vector<double> a(6), b(6);
  for (std::size_t d = 0; d < 6; ++d) {
    a[d] = rng.normal();
    b[d] = rng.normal();
  }
  auto mapped = secs;
  for (auto& s : mapped)
    for (std::size_t d = 0; d < 6; ++d) s.values[d] = a[d] * s.values[d] + b[d];
  const auto lhs = aggregate(mapped, Aggregation::Mean).values;
  const auto mean = aggregate(secs, Aggregation::Mean).values;
  for (std::size_t d = 0; d < 6; ++d) CHECK(lhs[d] == doctest::Approx(a[d] * mean[d] + b[d]).epsilon(1e-12));
}

TEST_CASE("section grouping") {
  FeatureSet s("twopoint/auto/periodic");
  s.add(section_id("b", 1), std::vector<double>{4, 5});
  s.add(section_id("a", 0), std::vector<double>{1, 2});
  s.add(section_id("b", 0), std::vector<double>{3, 3});
  s.add(section_id("a", 1), std::vector<double>{0, 0});
  const auto cat = aggregate_sections(s, Aggregation::Concat);
  REQUIRE(cat.size() == 2);
  CHECK(cat.id(0) == "b");
  CHECK(cat.id(1) == "a");
  CHECK(std::vector<double>(cat.row(0).begin(), cat.row(0).end()) == std::vector<double>{3, 3, 4, 5});
  CHECK(cat.extractor_id() == "twopoint/auto/periodic");
  const auto mean = aggregate_sections(s, Aggregation::Mean);
  CHECK(std::vector<double>(mean.row(1).begin(), mean.row(1).end()) == std::vector<double>{0.5, 1});
  FeatureSet bad("x");
  bad.add("plain", std::vector<double>{1});
  CHECK_THROWS_AS(aggregate_sections(bad, Aggregation::Mean), Error);
}

TEST_CASE("composition appended at the end") {
  CompositionVector comp;
  for (int i = 0; i < 22; ++i) {
    comp.element_names.push_back("E" + std::to_string(i));
    comp.values.push_back(0.5 * i);
  }
  const auto base = fv("s", std::vector<double>(1024, 7.0));
  const auto out = append_composition(base, comp);
  CHECK(out.values.size() == 1046);
  CHECK(std::equal(base.values.begin(), base.values.end(), out.values.begin()));
  for (int i = 0; i < 22; ++i) CHECK(out.values[1024 + i] == 0.5 * i);
  CompositionVector zero{comp.element_names, std::vector<double>(22, 0.0), "at%"};
  const auto z = append_composition(fv("s", {1}), zero);
  CHECK(z.values == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  comp.values.pop_back();
  CHECK_THROWS_WITH_AS(append_composition(base, comp), doctest::Contains("arity"), Error);
}

TEST_CASE("standardizer") {
  Eigen::MatrixXd two(2, 1);
  two << 0, 2;
  const auto s = fit_standardizer(two);
  CHECK(s.means()(0) == 1.0);
  CHECK(s.stds()(0) == 1.0);
  CHECK(s.apply(two)(0, 0) == -1.0);
  CHECK(s.apply(two)(1, 0) == 1.0);

  Rng rng(2);
  Eigen::MatrixXd x(50, 4);
  for (Eigen::Index i = 0; i < 50; ++i) {
    x(i, 0) = 3 + 5 * rng.normal();
    x(i, 1) = -2 + 0.01 * rng.normal();
    x(i, 2) = 4.0;
    x(i, 3) = rng.uniform();
  }
  const auto st = fit_standardizer(x);
  const Eigen::MatrixXd z = st.apply(x);
  for (Eigen::Index d : {0, 1, 3}) {
    CHECK(std::abs(z.col(d).mean()) < 1e-10);
    CHECK(std::abs(std::sqrt(z.col(d).array().square().mean()) - 1.0) < 1e-10);
  }
  CHECK(z.col(2).isZero(0.0));
  const Eigen::MatrixXd back = st.invert(z);
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-10);
  const auto again = fit_standardizer(z);
  CHECK((again.means().array().abs() < 1e-10).all());
  CHECK((again.apply(z) - z).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(fit_standardizer(Eigen::MatrixXd(1, 3)), Error);

  FeatureSet set("e");
  set.add("a", std::vector<double>{0});
  set.add("b", std::vector<double>{2});
  const auto applied = apply_standardizer(fit_standardizer(set), set);
  CHECK(applied.row(1)[0] == 1.0);
}

TEST_CASE("SAM patch pooling") {
  CHECK(sam_patch_pool({{1, 2, 3}}) == std::vector<double>{1, 2, 3});
  CHECK(sam_patch_pool({{1, -2}, {-1, 2}}) == std::vector<double>{0, 0});
  CHECK(sam_patch_pool({{1, 2}, {3, 4}, {5, 9}}) == std::vector<double>{3, 5});
  CHECK_THROWS_WITH_AS(sam_patch_pool({{1, 2}, {3}}), doctest::Contains("ragged"), Error);
}

}
