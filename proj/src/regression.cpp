#include "m2p/regression.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "m2p/csv.hpp"
#include "m2p/log.hpp"

namespace m2p {

LinearModel fit_lr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge) {
  if (x.rows() != y.size()) throw Error("fit_lr: row count mismatch");
  if (x.rows() < 1) throw Error("fit_lr: no samples");
  if (ridge < 0.0) throw Error("fit_lr: ridge must be >= 0");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y(i))) throw Error("fit_lr: non-finite target");
  }
  if (x.rows() <= x.cols()) {
    log::warn("fit_lr: n = " + std::to_string(x.rows()) + " <= k = " + std::to_string(x.cols()) +
              ", using the minimal-norm solution");
  }
  const Eigen::VectorXd x_mean = x.colwise().mean().transpose();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean.transpose();
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearModel model;
  if (x.cols() == 0) {
    model.weights = Eigen::VectorXd();
  } else if (ridge > 0.0) {
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += ridge;
    model.weights = gram.ldlt().solve(xc.transpose() * yc);
  } else {
    model.weights = xc.completeOrthogonalDecomposition().solve(yc);
  }
  model.intercept = y_mean - (x.cols() ? x_mean.dot(model.weights) : 0.0);
  return model;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.weights.size()) throw Error("predict: dimension mismatch");
  return (x * model.weights).array() + model.intercept;
}

std::size_t poly_basis_size(std::size_t k, PolyTerms terms) {
  return terms == PolyTerms::Full ? 1 + k + k * (k + 1) / 2 : 1 + 2 * k;
}

Eigen::MatrixXd poly_expand(const Eigen::MatrixXd& x, PolyTerms terms) {
  const auto k = static_cast<std::size_t>(x.cols());
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(poly_basis_size(k, terms) - 1));
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) out.col(col++) = x.col(i);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    if (terms == PolyTerms::Full) {
      for (Eigen::Index j = i; j < x.cols(); ++j) out.col(col++) = x.col(i).cwiseProduct(x.col(j));
    } else {
      out.col(col++) = x.col(i).cwiseProduct(x.col(i));
    }
  }
  return out;
}

PolyModel fit_pr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const PolyOptions& options) {
  const Eigen::MatrixXd z = poly_expand(x, options.terms);
  const LinearModel lin = fit_lr(z, y, options.ridge);
  PolyModel model;
  model.input_dim = static_cast<std::size_t>(x.cols());
  model.terms = options.terms;
  model.weights.resize(z.cols() + 1);
  model.weights(0) = lin.intercept;
  model.weights.tail(z.cols()) = lin.weights;
  return model;
}

Eigen::VectorXd predict(const PolyModel& model, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != model.input_dim) throw Error("predict: dimension mismatch");
  const Eigen::MatrixXd z = poly_expand(x, model.terms);
  return (z * model.weights.tail(z.cols())).array() + model.weights(0);
}

ModelType parse_model_type(std::string_view text) {
  if (text == "lr") return ModelType::Lr;
  if (text == "pr") return ModelType::Pr;
  if (text == "svr") return ModelType::Svr;
  throw Error("unknown model type '" + std::string(text) + "'");
}

std::string_view to_string(ModelType type) {
  switch (type) {
    case ModelType::Lr:
      return "lr";
    case ModelType::Pr:
      return "pr";
    case ModelType::Svr:
      return "svr";
  }
  return "lr";
}

Regressor fit(const RegressorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  switch (spec.type) {
    case ModelType::Lr:
      return fit_lr(x, y, spec.ridge);
    case ModelType::Pr:
      return fit_pr(x, y, {spec.poly_terms, spec.ridge});
    case ModelType::Svr:
      return fit_svr(x, y, spec.svr);
  }
  throw Error("fit: unknown model type");
}

Eigen::VectorXd predict(const Regressor& model, const Eigen::MatrixXd& x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, model);
}

ModelType model_type(const Regressor& model) {
  switch (model.index()) {
    case 0:
      return ModelType::Lr;
    case 1:
      return ModelType::Pr;
    default:
      return ModelType::Svr;
  }
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kHeader = "m2p-model 1";

void put_vector(std::ostringstream& out, std::string_view key, const Eigen::VectorXd& v) {
  out << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << csv::format_double(v(i));
  out << '\n';
}

void put_matrix(std::ostringstream& out, std::string_view key, const Eigen::MatrixXd& m) {
  out << key << ' ' << m.rows() << ' ' << m.cols();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << csv::format_double(m(i, j));
  }
  out << '\n';
}

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : in_(std::string(text)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw Error("model file: unexpected end");
    return w;
  }
  void expect(std::string_view key) {
    const auto w = word();
    if (w != key) throw Error("model file: expected '" + std::string(key) + "', found '" + w + "'");
  }
  double number() {
    const auto w = word();
    const auto v = csv::parse_double(w);
    if (!v) throw Error("model file: bad number '" + w + "'");
    return *v;
  }
  std::size_t count() {
    const double v = number();
    if (v < 0 || v != std::floor(v)) throw Error("model file: bad count");
    return static_cast<std::size_t>(v);
  }
  Eigen::VectorXd vector(std::string_view key) {
    expect(key);
    Eigen::VectorXd v(static_cast<Eigen::Index>(count()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = number();
    return v;
  }
  Eigen::MatrixXd matrix(std::string_view key) {
    expect(key);
    const auto r = static_cast<Eigen::Index>(count());
    const auto c = static_cast<Eigen::Index>(count());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = number();
    }
    return m;
  }

 private:
  std::istringstream in_;
};

}  // namespace

std::string serialize(const Regressor& model) {
  std::ostringstream out;
  out << kHeader << '\n';
  if (const auto* lr = std::get_if<LinearModel>(&model)) {
    out << "type lr\n";
    out << "intercept " << csv::format_double(lr->intercept) << '\n';
    put_vector(out, "weights", lr->weights);
  } else if (const auto* pr = std::get_if<PolyModel>(&model)) {
    out << "type pr\n";
    out << "input_dim " << pr->input_dim << '\n';
    out << "terms " << (pr->terms == PolyTerms::Full ? "full" : "squares") << '\n';
    put_vector(out, "weights", pr->weights);
  } else {
    const auto& svr = std::get<SvrModel>(model);
    out << "type svr\n";
    out << "kernel " << (svr.kernel == SvrKernel::Rbf ? "rbf" : "linear") << '\n';
    out << "gamma " << csv::format_double(svr.gamma) << '\n';
    out << "c " << csv::format_double(svr.c) << '\n';
    out << "epsilon " << csv::format_double(svr.epsilon) << '\n';
    out << "bias " << csv::format_double(svr.bias) << '\n';
    out << "iterations " << svr.iterations << '\n';
    out << "converged " << (svr.converged ? 1 : 0) << '\n';
    put_vector(out, "scale_mean", svr.scale_mean);
    put_vector(out, "scale_std", svr.scale_std);
    put_matrix(out, "support_vectors", svr.support_vectors);
    put_vector(out, "dual_coef", svr.dual_coef);
  }
  return out.str();
}

Regressor deserialize(std::string_view text) {
  TokenReader in(text);
  in.expect("m2p-model");
  if (in.word() != "1") throw Error("model file: unsupported version");
  in.expect("type");
  const auto type = in.word();
  if (type == "lr") {
    LinearModel m;
    in.expect("intercept");
    m.intercept = in.number();
    m.weights = in.vector("weights");
    return m;
  }
  if (type == "pr") {
    PolyModel m;
    in.expect("input_dim");
    m.input_dim = in.count();
    in.expect("terms");
    const auto terms = in.word();
    if (terms != "full" && terms != "squares") throw Error("model file: unknown terms '" + terms + "'");
    m.terms = terms == "full" ? PolyTerms::Full : PolyTerms::PureSquares;
    m.weights = in.vector("weights");
    if (static_cast<std::size_t>(m.weights.size()) != poly_basis_size(m.input_dim, m.terms)) {
      throw Error("model file: polynomial weight count mismatch");
    }
    return m;
  }
  if (type == "svr") {
    SvrModel m;
    in.expect("kernel");
    const auto kernel = in.word();
    if (kernel != "rbf" && kernel != "linear") throw Error("model file: unknown kernel '" + kernel + "'");
    m.kernel = kernel == "rbf" ? SvrKernel::Rbf : SvrKernel::Linear;
    in.expect("gamma");
    m.gamma = in.number();
    in.expect("c");
    m.c = in.number();
    in.expect("epsilon");
    m.epsilon = in.number();
    in.expect("bias");
    m.bias = in.number();
    in.expect("iterations");
    m.iterations = in.count();
    in.expect("converged");
    m.converged = in.count() != 0;
    m.scale_mean = in.vector("scale_mean");
    m.scale_std = in.vector("scale_std");
    m.support_vectors = in.matrix("support_vectors");
    m.dual_coef = in.vector("dual_coef");
    if (m.dual_coef.size() != m.support_vectors.rows()) throw Error("model file: support vector count mismatch");
    return m;
  }
  throw Error("model file: unknown type '" + type + "'");
}

void save_model(const Regressor& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("model file: cannot write " + path.string());
  out << serialize(model);
  if (!out) throw Error("model file: I/O failure writing " + path.string());
}

Regressor load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("model file: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return deserialize(text.str());
}

}  // namespace m2p
