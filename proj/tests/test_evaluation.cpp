#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <omp.h>

#include "doctest.h"
#include "m2p/error.hpp"
#include "m2p/evaluation.hpp"
#include "m2p/rng.hpp"
#include "oracles.hpp"

using namespace m2p;

namespace {

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
  return ids;
}

// Rows live on a `factors`-dimensional subspace of R^d; the target is a
// positive affine function of the factors.
struct Planted {
  FeatureSet set{"planted"};
  Eigen::VectorXd y;
};

Planted planted(std::size_t n, Eigen::Index d, Eigen::Index factors, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd load(factors, d);
  for (Eigen::Index i = 0; i < factors; ++i)
    for (Eigen::Index j = 0; j < d; ++j) load(i, j) = rng.normal();
  Eigen::VectorXd w(factors);
  for (Eigen::Index i = 0; i < factors; ++i) w(i) = 1.0 + rng.uniform();
  Planted p;
  p.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    Eigen::RowVectorXd f(factors);
    for (Eigen::Index i = 0; i < factors; ++i) f(i) = rng.normal();
    const Eigen::RowVectorXd row = f * load;
    p.set.add("s" + std::to_string(r), std::vector<double>(row.data(), row.data() + d));
    p.y(static_cast<Eigen::Index>(r)) = 20.0 + f.dot(w);
  }
  return p;
}

std::vector<std::size_t> iota(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v(b - a);
  std::iota(v.begin(), v.end(), a);
  return v;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("mape") {
  CHECK(mape(std::vector<double>{100, 200}, std::vector<double>{110, 180}) == doctest::Approx(10.0).epsilon(1e-14));
  const std::vector<double> y{3, -4, 5.5};
  CHECK(mape(y, y) == 0.0);
  CHECK(mape(y, std::vector<double>{6, -8, 11}) == doctest::Approx(100.0).epsilon(1e-14));
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(10), b(10), ca(10), cb(10);
    const double c = 0.01 + 100 * rng.uniform();
    for (std::size_t i = 0; i < 10; ++i) {
      a[i] = 1 + rng.uniform();
      b[i] = rng.normal();
      ca[i] = c * a[i];
      cb[i] = c * b[i];
    }
    CHECK(mape(ca, cb) == doctest::Approx(mape(a, b)).epsilon(1e-12));
  }
  CHECK_THROWS_WITH_AS(mape(std::vector<double>{0, 1}, std::vector<double>{1, 1}), doctest::Contains("zero"), Error);
  CHECK_THROWS_AS(mape(std::vector<double>{1}, std::vector<double>{1, 1}), Error);
}

TEST_CASE("population std") {
  CHECK(population_std(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(population_std(std::vector<double>{3}) == 0.0);
}

TEST_CASE("holdout split sizes and partition") {
  const auto ids = make_ids(5900);
  const auto plan = holdout_split(ids, 42);
  CHECK(plan.rows(Subset::Test).size() == 590);
  CHECK(plan.rows(Subset::Train).size() == 4248);
  CHECK(plan.rows(Subset::Validation).size() == 1062);
  std::vector<std::size_t> all;
  for (auto s : {Subset::Train, Subset::Validation, Subset::Test}) {
    const auto r = plan.rows(s);
    all.insert(all.end(), r.begin(), r.end());
  }
  std::sort(all.begin(), all.end());
  CHECK(all == iota(0, 5900));
  CHECK(holdout_split(ids, 42).assignment == plan.assignment);
  CHECK(holdout_split(ids, 43).assignment != plan.assignment);
  for (std::size_t n = 10; n < 300; n += 7) {
    const auto p = holdout_split(make_ids(n), n);
    const std::size_t test = n / 10;
    const std::size_t val = (n - test) * 20 / 100;
    CHECK(p.rows(Subset::Test).size() == test);
    CHECK(p.rows(Subset::Validation).size() == val);
    CHECK(p.rows(Subset::Train).size() == n - test - val);
  }
  CHECK_THROWS_WITH_AS(holdout_split(make_ids(9), 1), doctest::Contains("too few"), Error);
}

TEST_CASE("k-fold assignment") {
  for (std::size_t n : {10u, 11u, 149u, 150u}) {
    for (std::size_t k : {2u, 5u, 10u}) {
      const auto a = kfold_assign(n, k, 7);
      std::vector<std::size_t> sizes(k, 0);
      for (auto f : a) {
        REQUIRE(f < k);
        ++sizes[f];
      }
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
      CHECK(*lo >= 1);
      CHECK(kfold_assign(n, k, 7) == a);
    }
  }
  CHECK(kfold_assign(100, 10, 1) != kfold_assign(100, 10, 2));
  CHECK_THROWS_AS(kfold_assign(3, 5, 1), Error);
  CHECK_THROWS_AS(kfold_assign(10, 1, 1), Error);
}

TEST_CASE("feasible k and default grid") {
  CHECK(max_feasible_k(1, 10) == 0);
  CHECK(max_feasible_k(5, 10) == 4);
  CHECK(max_feasible_k(100, 10) == 10);
  const auto g = default_pc_grid(1000);
  CHECK(g.size() == 30);
  CHECK(g.front() == 2);
  CHECK(g.back() == 60);
  CHECK(default_pc_grid(7) == std::vector<std::size_t>{2, 4, 6});
  CHECK(default_pc_grid(1) == std::vector<std::size_t>{1});
}

TEST_CASE("grid search picks the planted rank") {
  const auto p = planted(200, 20, 3, 5);
  const Eigen::MatrixXd x = p.set.matrix();
  const auto train = iota(0, 150);
  const auto val = iota(150, 200);
  ModelRecipe lr;
  lr.regressor.type = ModelType::Lr;
  const auto grid = iota(1, 11);
  const auto res = grid_search_pcs(x, p.y, train, val, lr, grid);
  CHECK(res.best_k == 3);
  CHECK(res.entries.size() == 10);
  for (const auto& e : res.entries) {
    CHECK(e.mape >= 0.0);
    if (e.k < 3) CHECK(e.mape > 0.1);
  }
  const auto best = std::find_if(res.entries.begin(), res.entries.end(), [&](const GridEntry& e) { return e.k == res.best_k; });
  for (const auto& e : res.entries) CHECK(best->mape <= e.mape + kGridTieTolerance);

  const std::vector<std::size_t> one{7};
  CHECK(grid_search_pcs(x, p.y, train, val, lr, one).best_k == 7);
  const std::vector<std::size_t> bad{0, 3};
  CHECK_THROWS_WITH_AS(grid_search_pcs(x, p.y, train, val, lr, bad), doctest::Contains("infeasible"), Error);
  const std::vector<std::size_t> big{21};
  CHECK_THROWS_AS(grid_search_pcs(x, p.y, train, val, lr, big), Error);
  CHECK_THROWS_AS(grid_search_pcs(x, p.y, train, val, lr, std::vector<std::size_t>{}), Error);
}

TEST_CASE("grid search over C for SVR") {
  const auto p = planted(80, 6, 2, 6);
  ModelRecipe svr;
  svr.regressor.type = ModelType::Svr;
  const std::vector<std::size_t> grid{1, 2};
  const auto res = grid_search_pcs(p.set.matrix(), p.y, iota(0, 60), iota(60, 80), svr, grid);
  CHECK(res.entries.size() == 6);
  CHECK(std::count_if(res.entries.begin(), res.entries.end(), [](const GridEntry& e) { return e.c == 100.0; }) == 2);
  CHECK(std::find(svr.svr_c_grid.begin(), svr.svr_c_grid.end(), res.best_c) != svr.svr_c_grid.end());
}

TEST_CASE("holdout protocol and parity data") {
  const auto p = planted(120, 10, 3, 7);
  ModelRecipe pr;
  pr.regressor.type = ModelType::Pr;
  const std::vector<std::size_t> grid{1, 2, 3, 4, 5};
  const auto rep = run_holdout(p.set, p.y, pr, grid, 3);
  CHECK(rep.grid.best_k == 3);
  CHECK(rep.test_mape < 1e-6);
  CHECK(rep.parity.size() == rep.plan.rows(Subset::Train).size() + rep.plan.rows(Subset::Test).size());
  for (const auto& r : rep.parity) {
    CHECK(std::abs(r.truth - r.prediction) < 1e-6 * std::abs(r.truth));
    CHECK((r.subset == "train" || r.subset == "test"));
  }

  oracle::TempDir dir("parity");
  write_parity_csv(rep.parity, dir / "parity.csv");
  const auto back = read_parity_csv(dir / "parity.csv");
  REQUIRE(back.size() == rep.parity.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].sample_id == rep.parity[i].sample_id);
    CHECK(back[i].truth == rep.parity[i].truth);
    CHECK(back[i].prediction == rep.parity[i].prediction);
    CHECK(back[i].subset == rep.parity[i].subset);
  }
  oracle::write_text(dir / "bad.csv", "sample_id,truth,prediction,subset\na,1,x,train\n");
  CHECK_THROWS_WITH_AS(read_parity_csv(dir / "bad.csv"), doctest::Contains("non-numeric"), Error);
  oracle::write_text(dir / "hdr.csv", "id,truth,prediction,subset\n");
  CHECK_THROWS_AS(read_parity_csv(dir / "hdr.csv"), Error);
}

TEST_CASE("duplicate rows across folds are detected") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 1, 2, 3, 4;
  const std::vector<std::size_t> split{0, 0, 1, 1};
  const auto d = find_cross_fold_duplicates(x, split);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == std::pair<std::size_t, std::size_t>{0, 2});
  CHECK(d[1] == std::pair<std::size_t, std::size_t>{1, 3});
  const std::vector<std::size_t> together{0, 1, 0, 1};
  CHECK(find_cross_fold_duplicates(x, together).empty());

  const auto p = planted(60, 8, 2, 8);
  FeatureSet doubled("planted");
  Eigen::VectorXd y(120);
  for (std::size_t i = 0; i < 60; ++i) {
    doubled.add(p.set.id(i) + "a", p.set.row(i));
    doubled.add(p.set.id(i) + "b", p.set.row(i));
    y(static_cast<Eigen::Index>(2 * i)) = y(static_cast<Eigen::Index>(2 * i + 1)) = p.y(static_cast<Eigen::Index>(i));
  }
  CvConfig cfg;
  cfg.recipe.regressor.type = ModelType::Lr;
  cfg.pc_grid = {1, 2, 3};
  cfg.seed = 4;
  CHECK(nested_cv(doubled, y, cfg).duplicate_leaks > 0);
  CHECK(nested_cv(p.set, p.y, cfg).duplicate_leaks == 0);
}

TEST_CASE("nested cross-validation on planted data") {
  const auto p = planted(150, 30, 4, 9);
  const Eigen::MatrixXd x = p.set.matrix();
  for (bool standardize : {false, true}) {
    CvConfig cfg;
    cfg.recipe.regressor.type = ModelType::Lr;
    cfg.recipe.standardize = standardize;
    cfg.seed = 11;

    std::vector<FitEvent> events;
    const FitObserver obs = [&](const FitEvent& e) { events.push_back(e); };
    const auto rep = nested_cv(p.set, p.y, cfg, &obs);
    CHECK(rep.fold_results.size() == 10);
    CHECK(rep.mean < 1.0);
    double sum = 0.0;
    std::vector<double> m;
    for (const auto& f : rep.fold_results) {
      sum += f.mape;
      m.push_back(f.mape);
    }
    CHECK(std::abs(rep.mean - sum / 10.0) < 1e-12);
    CHECK(std::abs(rep.std - population_std(m)) < 1e-12);
    CHECK(rep.leave_one_out_std.size() == 10);

    // Outer test folds partition the data.
    std::vector<std::string> seen;
    std::vector<std::set<std::size_t>> test_rows(10);
    for (const auto& f : rep.fold_results) {
      for (const auto& id : f.test_ids) {
        seen.push_back(id);
        test_rows[f.index].insert(*p.set.find(id));
      }
    }
    std::sort(seen.begin(), seen.end());
    auto all = p.set.ids();
    std::sort(all.begin(), all.end());
    CHECK(seen == all);

    // Every fitted mean comes from training rows of the matching outer fold.
    std::size_t final_fits = 0;
    for (const auto& e : events) {
      REQUIRE(e.outer_fold >= 0);
      for (std::size_t r : e.rows) CHECK(test_rows[static_cast<std::size_t>(e.outer_fold)].count(r) == 0);
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.cols());
      for (std::size_t r : e.rows) mean += x.row(static_cast<Eigen::Index>(r)).transpose();
      mean /= static_cast<double>(e.rows.size());
      if (e.stage == "standardizer" || !standardize) {
        CHECK((e.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
      } else {
        CHECK(e.mean.cwiseAbs().maxCoeff() < 1e-12);
      }
      if (e.inner_fold < 0 && e.stage == "pca") {
        ++final_fits;
        CHECK(e.rows.size() == 150 - test_rows[static_cast<std::size_t>(e.outer_fold)].size());
      }
    }
    CHECK(final_fits == 10);
    CHECK(events.size() == (standardize ? 2u : 1u) * 10 * 6);
  }
}

TEST_CASE("nested cross-validation reports are reproducible") {
  const auto p = planted(90, 12, 3, 10);
  CvConfig cfg;
  cfg.recipe.regressor.type = ModelType::Svr;
  cfg.pc_grid = {2, 3, 4};
  cfg.seed = 99;
  const auto a = nested_cv(p.set, p.y, cfg).to_json();
  const int threads = omp_get_max_threads();
  omp_set_num_threads(3);
  const auto b = nested_cv(p.set, p.y, cfg).to_json();
  omp_set_num_threads(threads);
  CHECK(a == b);
  cfg.seed = 100;
  CHECK(nested_cv(p.set, p.y, cfg).to_json() != a);
  CHECK(a.find("\"std_ddof\": 0") != std::string::npos);
  CHECK(a.find("\"c\":") != std::string::npos);

  cfg.pc_grid = {50};
  CHECK_THROWS_WITH_AS(nested_cv(p.set, p.y, cfg), doctest::Contains("no feasible k"), Error);
  cfg.folds = 100;
  CHECK_THROWS_AS(nested_cv(p.set, p.y, cfg), Error);
}

}
