#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "m2p/error.hpp"

namespace m2p {

// ---------------------------------------------------------------------------
// Linear and polynomial least squares

struct LinearModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
};

// Least squares with intercept via complete orthogonal decomposition of the
// centred design; rank-deficient or n <= k systems get the minimal-norm
// weights (with a logged warning for n <= k). ridge > 0 adds an L2 penalty
// on the weights.
LinearModel fit_lr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge = 0.0);
Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x);

enum class PolyTerms { Full, PureSquares };

// Quadratic basis, in order: 1, x_1..x_k, then for Full every product
// x_i x_j with i <= j in row-major (i outer) order, for PureSquares x_i^2.
std::size_t poly_basis_size(std::size_t k, PolyTerms terms);
// Basis columns without the leading constant.
Eigen::MatrixXd poly_expand(const Eigen::MatrixXd& x, PolyTerms terms);

struct PolyModel {
  std::size_t input_dim = 0;
  PolyTerms terms = PolyTerms::Full;
  Eigen::VectorXd weights;  // over the full basis, constant first
};

struct PolyOptions {
  PolyTerms terms = PolyTerms::Full;
  double ridge = 0.0;
};

PolyModel fit_pr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const PolyOptions& options = {});
Eigen::VectorXd predict(const PolyModel& model, const Eigen::MatrixXd& x);

// ---------------------------------------------------------------------------
// Epsilon support vector regression

enum class SvrKernel { Rbf, Linear };

struct SvrParams {
  SvrKernel kernel = SvrKernel::Rbf;
  double gamma = 0.0;     // <= 0: 1 / (k * var(standardized X))
  double c = 1.0;
  double epsilon = -1.0;  // < 0: 0.1 * std(y)
  double tol = 1e-3;      // KKT violation threshold
  std::size_t max_iter = 0;  // 0: max(10^7, 100 n)
  bool standardize = true;
};

// f(x) = sum_i dual_coef_i K(sv_i, s(x)) + bias, s = stored per-dimension
// standardization (identity when disabled). Scaling y, epsilon, C and tol by
// the same c > 0 scales every prediction by c.
struct SvrModel {
  SvrKernel kernel = SvrKernel::Rbf;
  double gamma = 1.0;
  double c = 1.0;
  double epsilon = 0.0;
  Eigen::VectorXd scale_mean;
  Eigen::VectorXd scale_std;  // 0 marks a constant input dimension
  Eigen::MatrixXd support_vectors;  // standardized, one per row
  Eigen::VectorXd dual_coef;        // alpha_i - alpha_i^*
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

class SvrNotConverged : public Error {
 public:
  SvrNotConverged(const std::string& what, SvrModel best) : Error(what), best_(std::move(best)) {}
  const SvrModel& best() const { return best_; }

 private:
  SvrModel best_;
};

// Full dual solution (all training points, zero coefficients included) for
// KKT inspection.
struct SvrSolution {
  SvrModel model;           // support vectors only
  Eigen::VectorXd beta;     // per training point
  double max_violation = 0.0;
};

SvrSolution solve_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrParams& params);
SvrModel fit_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrParams& params = {});
Eigen::VectorXd predict(const SvrModel& model, const Eigen::MatrixXd& x);

// ---------------------------------------------------------------------------
// Uniform handle

enum class ModelType { Lr, Pr, Svr };

ModelType parse_model_type(std::string_view text);  // lr, pr, svr
std::string_view to_string(ModelType type);

struct RegressorSpec {
  ModelType type = ModelType::Lr;
  double ridge = 0.0;
  PolyTerms poly_terms = PolyTerms::Full;
  SvrParams svr;
};

using Regressor = std::variant<LinearModel, PolyModel, SvrModel>;

Regressor fit(const RegressorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
Eigen::VectorXd predict(const Regressor& model, const Eigen::MatrixXd& x);
ModelType model_type(const Regressor& model);

// Self-describing text: header line, type tag, hyperparameters and arrays,
// numbers in shortest round-trip form so deserialization is bit-exact.
std::string serialize(const Regressor& model);
Regressor deserialize(std::string_view text);
void save_model(const Regressor& model, const std::filesystem::path& path);
Regressor load_model(const std::filesystem::path& path);

}  // namespace m2p
