#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "m2p/error.hpp"
#include "m2p/evaluation.hpp"
#include "m2p/regression.hpp"
#include "m2p/rng.hpp"
#include "oracles.hpp"

using namespace m2p;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal();
  return x;
}

double sse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm(); }

// Independent expansion: constant, linears, then products x_i x_j for i <= j.
Eigen::VectorXd quadratic_row(const Eigen::RowVectorXd& x) {
  const Eigen::Index k = x.size();
  Eigen::VectorXd out(1 + k + k * (k + 1) / 2);
  Eigen::Index p = 0;
  out(p++) = 1.0;
  for (Eigen::Index i = 0; i < k; ++i) out(p++) = x(i);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) out(p++) = x(i) * x(j);
  return out;
}

struct SinData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

SinData sin_data(std::size_t n, Rng& rng) {
  SinData d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    d.x(i, 0) = rng.uniform(0.0, std::numbers::pi);
    d.y(i) = std::sin(d.x(i, 0)) + 1.0;
  }
  return d;
}

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("linear regression recovers planted models") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  const Eigen::VectorXd y = (2.0 * x.col(0)).array() + 1.0;
  const auto m = fit_lr(x, y);
  CHECK(std::abs(m.weights(0) - 2.0) < 1e-10);
  CHECK(std::abs(m.intercept - 1.0) < 1e-10);

  const auto flat = fit_lr(x, Eigen::VectorXd::Constant(6, 4.5));
  CHECK(flat.weights.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(flat.intercept - 4.5) < 1e-12);

  Rng rng(1);
  const Eigen::MatrixXd xs = gaussian(80, 6, rng);
  const Eigen::VectorXd w = gaussian(6, 1, rng).col(0);
  const Eigen::VectorXd ys = (xs * w).array() - 0.75;
  const auto fit = fit_lr(xs, ys);
  CHECK((fit.weights - w).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(fit.intercept + 0.75) < 1e-8);
  CHECK((predict(fit, xs) - ys).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("least squares residual is orthogonal and optimal") {
  Rng rng(2);
  const Eigen::MatrixXd x = gaussian(60, 5, rng);
  Eigen::VectorXd y = gaussian(60, 1, rng).col(0);
  const auto m = fit_lr(x, y);
  const Eigen::VectorXd r = y - predict(m, x);
  CHECK((x.transpose() * r).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(r.sum()) < 1e-8);
  const double base = sse(predict(m, x), y);
  for (int t = 0; t < 50; ++t) {
    LinearModel p = m;
    for (Eigen::Index j = 0; j < p.weights.size(); ++j) p.weights(j) += 1e-3 * rng.normal();
    p.intercept += 1e-3 * rng.normal();
    CHECK(sse(predict(p, x), y) >= base);
  }
}

TEST_CASE("underdetermined fit gives the minimal-norm solution") {
  Rng rng(3);
  const Eigen::MatrixXd x = gaussian(4, 10, rng);
  const Eigen::VectorXd y = gaussian(4, 1, rng).col(0);
  const auto m = fit_lr(x, y);
  CHECK((predict(m, x) - y).cwiseAbs().maxCoeff() < 1e-8);
  // Minimal norm weights live in the row space of the centred design.
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd proj = xc.transpose() * (xc * xc.transpose()).completeOrthogonalDecomposition().pseudoInverse() * xc;
  CHECK((proj * m.weights - m.weights).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ridge shrinks weights") {
  Rng rng(4);
  const Eigen::MatrixXd x = gaussian(40, 3, rng);
  const Eigen::VectorXd y = x * Eigen::Vector3d(1, -2, 3);
  CHECK(fit_lr(x, y, 10.0).weights.norm() < fit_lr(x, y).weights.norm());
}

TEST_CASE("quadratic basis size and order") {
  CHECK(poly_basis_size(24, PolyTerms::Full) == 325);
  CHECK(poly_basis_size(1, PolyTerms::Full) == 3);
  CHECK(poly_basis_size(5, PolyTerms::PureSquares) == 11);
  for (std::size_t k = 1; k < 30; ++k) CHECK(poly_basis_size(k, PolyTerms::Full) == 1 + k + k * (k + 1) / 2);
  Rng rng(5);
  const Eigen::MatrixXd x = gaussian(7, 4, rng);
  const Eigen::MatrixXd e = poly_expand(x, PolyTerms::Full);
  REQUIRE(e.cols() == 14);
  for (Eigen::Index i = 0; i < 7; ++i) {
    const Eigen::VectorXd ref = quadratic_row(x.row(i));
    CHECK((e.row(i).transpose() - ref.tail(14)).cwiseAbs().maxCoeff() == 0.0);
  }
  const Eigen::MatrixXd sq = poly_expand(x, PolyTerms::PureSquares);
  REQUIRE(sq.cols() == 8);
  CHECK(sq(2, 5) == x(2, 1) * x(2, 1));
}

TEST_CASE("polynomial regression recovers planted quadratics") {
  Rng rng(6);
  Eigen::MatrixXd x = gaussian(50, 2, rng);
  Eigen::VectorXd y = x.col(0).cwiseProduct(x.col(1));
  const auto m = fit_pr(x, y);
  REQUIRE(m.weights.size() == 6);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(6);
  expect(4) = 1.0;
  CHECK((m.weights - expect).cwiseAbs().maxCoeff() < 1e-8);

  const Eigen::MatrixXd x4 = gaussian(120, 4, rng);
  const Eigen::VectorXd w = gaussian(15, 1, rng).col(0);
  Eigen::VectorXd y4(120);
  for (Eigen::Index i = 0; i < 120; ++i) y4(i) = quadratic_row(x4.row(i)).dot(w);
  const auto m4 = fit_pr(x4, y4);
  CHECK((m4.weights - w).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((predict(m4, x4) - y4).cwiseAbs().maxCoeff() < 1e-8);

  const Eigen::VectorXd lin = (x4 * Eigen::Vector4d(1, 2, 3, 4)).array() + 5.0;
  const auto ml = fit_pr(x4, lin);
  CHECK(ml.weights.tail(10).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(ml.weights(0) - 5.0) < 1e-8);
}

TEST_CASE("polynomial fit is a least squares optimum") {
  Rng rng(7);
  const Eigen::MatrixXd x = gaussian(60, 3, rng);
  const Eigen::VectorXd y = gaussian(60, 1, rng).col(0);
  const auto m = fit_pr(x, y);
  const double base = sse(predict(m, x), y);
  for (int t = 0; t < 50; ++t) {
    PolyModel p = m;
    for (Eigen::Index j = 0; j < p.weights.size(); ++j) p.weights(j) += 1e-3 * rng.normal();
    CHECK(sse(predict(p, x), y) >= base);
  }
}

TEST_CASE("SVR fits a smooth function") {
  Rng rng(8);
  const auto train = sin_data(200, rng);
  const auto test = sin_data(200, rng);
  SvrParams p;
  p.c = 10.0;
  const auto m = fit_svr(train.x, train.y, p);
  CHECK(m.converged);
  CHECK(mape(test.y, predict(m, test.x)) < 5.0);
}

TEST_CASE("SVR constant target") {
  Rng rng(9);
  const Eigen::MatrixXd x = gaussian(30, 2, rng);
  const auto m = fit_svr(x, Eigen::VectorXd::Constant(30, 3.0));
  CHECK(m.support_vectors.rows() == 0);
  CHECK(m.bias == doctest::Approx(3.0).epsilon(1e-9));
  CHECK((predict(m, gaussian(5, 2, rng)).array() - 3.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("SVR KKT conditions at convergence") {
  Rng rng(10);
  for (int t = 0; t < 5; ++t) {
    const Eigen::MatrixXd x = gaussian(80, 3, rng);
    Eigen::VectorXd y(80);
    for (Eigen::Index i = 0; i < 80; ++i) y(i) = std::sin(x(i, 0)) + 0.5 * x(i, 1) * x(i, 2) + 0.05 * rng.normal();
    SvrParams p;
    p.c = t == 4 ? 100.0 : 1.0 + t;
    p.kernel = t == 3 ? SvrKernel::Linear : SvrKernel::Rbf;
    const auto sol = solve_svr(x, y, p);
    const auto& m = sol.model;
    REQUIRE(m.converged);
    CHECK(sol.max_violation < p.tol);
    CHECK(std::abs(sol.beta.sum()) < 1e-6);
    CHECK(sol.beta.cwiseAbs().maxCoeff() <= p.c + 1e-12);
    const Eigen::VectorXd f = predict(m, x);
    for (Eigen::Index i = 0; i < 80; ++i) {
      const double r = y(i) - f(i);
      const double b = sol.beta(i);
      if (std::abs(r) < m.epsilon - p.tol) CHECK(b == 0.0);
      if (b != 0.0 && std::abs(b) < p.c) CHECK(std::abs(std::abs(r) - m.epsilon) < 10 * p.tol);
      if (std::abs(r) > m.epsilon + p.tol) CHECK(std::abs(b) == doctest::Approx(p.c));
    }
  }
}

TEST_CASE("SVR scaling rule") {
  Rng rng(11);
  const auto d = sin_data(60, rng);
  SvrParams p;
  p.c = 5.0;
  p.epsilon = 0.05;
  p.tol = 1e-6;
  const auto base = fit_svr(d.x, d.y, p);
  for (double c : {0.5, 3.0, 40.0}) {
    SvrParams q = p;
    q.c *= c;
    q.epsilon *= c;
    q.tol *= c;
    q.gamma = base.gamma;
    const auto scaled = fit_svr(d.x, (c * d.y.array()).matrix(), q);
    const Eigen::VectorXd a = predict(base, d.x) * c;
    const Eigen::VectorXd b = predict(scaled, d.x);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4 * c);
  }
}

TEST_CASE("SVR iteration cap reports the best iterate") {
  Rng rng(12);
  const auto d = sin_data(100, rng);
  SvrParams p;
  p.c = 100.0;
  p.max_iter = 3;
  p.tol = 1e-9;
  try {
    (void)fit_svr(d.x, d.y, p);
    FAIL("expected SvrNotConverged");
  } catch (const SvrNotConverged& e) {
    CHECK_FALSE(e.best().converged);
    CHECK(e.best().iterations == 3);
    CHECK(predict(e.best(), d.x).allFinite());
  }
  p.c = -1.0;
  CHECK_THROWS_AS(fit_svr(d.x, d.y, p), Error);
}

TEST_CASE("predictions follow row permutations") {
  Rng rng(13);
  const Eigen::MatrixXd x = gaussian(40, 3, rng);
  const Eigen::VectorXd y = x.col(0) + x.col(1).cwiseAbs2();
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(40);
  perm.setIdentity();
  std::vector<int> idx(perm.indices().data(), perm.indices().data() + 40);
  shuffle(std::span<int>(idx), rng);
  for (int i = 0; i < 40; ++i) perm.indices()(i) = idx[static_cast<std::size_t>(i)];
  for (auto type : {ModelType::Lr, ModelType::Pr, ModelType::Svr}) {
    RegressorSpec spec;
    spec.type = type;
    const auto m = fit(spec, x, y);
    const Eigen::MatrixXd px = perm * x;
    const Eigen::VectorXd a = perm * predict(m, x);
    CHECK((predict(m, px) - a).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(predict(m, gaussian(2, 4, rng)), Error);
  }
}

TEST_CASE("serialization is bit-exact") {
  Rng rng(14);
  const Eigen::MatrixXd x = gaussian(50, 3, rng);
  const Eigen::VectorXd y = (x.col(0).array() * 0.3 + x.col(2).array().square() + 2.0).matrix();
  const Eigen::MatrixXd probe = gaussian(20, 3, rng);
  oracle::TempDir dir("regression");
  for (auto type : {ModelType::Lr, ModelType::Pr, ModelType::Svr}) {
    RegressorSpec spec;
    spec.type = type;
    spec.poly_terms = PolyTerms::Full;
    const auto m = fit(spec, x, y);
    const auto back = deserialize(serialize(m));
    CHECK(model_type(back) == type);
    CHECK(serialize(back) == serialize(m));
    const Eigen::VectorXd a = predict(m, probe);
    const Eigen::VectorXd b = predict(back, probe);
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(std::memcmp(&a(i), &b(i), sizeof(double)) == 0);
    const auto path = dir / (std::string(to_string(type)) + ".txt");
    save_model(m, path);
    CHECK(serialize(load_model(path)) == serialize(m));
  }
  CHECK_THROWS_AS(deserialize("not a model"), Error);
  CHECK_THROWS_AS(parse_model_type("rf"), Error);
}

}
