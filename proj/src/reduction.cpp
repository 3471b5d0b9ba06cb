#include "m2p/reduction.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/SVD>

#include "m2p/csv.hpp"
#include "m2p/error.hpp"

namespace m2p {

PcaModel fit_pca(const Eigen::MatrixXd& rows, Eigen::Index k) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  if (n < 2) throw Error("pca: need at least 2 samples");
  if (k < 1 || k > std::min(n - 1, d)) {
    throw Error("pca: k = " + std::to_string(k) + " outside [1, " + std::to_string(std::min(n - 1, d)) + "]");
  }
  PcaModel model;
  model.n_samples = static_cast<std::size_t>(n);
  model.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - model.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& singular = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();

  model.components.resize(k, d);
  model.explained_variance.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd axis = v.col(c);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    model.components.row(c) = axis.transpose();
    model.explained_variance(c) = singular(c) * singular(c) / static_cast<double>(n - 1);
  }
  model.total_variance = centered.squaredNorm() / static_cast<double>(n - 1);
  if (model.total_variance > 0.0) {
    model.explained_variance_ratio = model.explained_variance / model.total_variance;
  } else {
    model.explained_variance_ratio = Eigen::VectorXd::Zero(k);
  }
  return model;
}

PcaModel fit_pca(const FeatureSet& set, std::size_t k) {
  return fit_pca(set.matrix(), static_cast<Eigen::Index>(k));
}

PcaModel truncate(const PcaModel& model, Eigen::Index k) {
  if (k < 1 || k > model.k()) throw Error("pca: cannot truncate to " + std::to_string(k) + " components");
  PcaModel out = model;
  out.components = model.components.topRows(k);
  out.explained_variance = model.explained_variance.head(k);
  out.explained_variance_ratio = model.explained_variance_ratio.head(k);
  return out;
}

Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.dim()) {
    throw Error("pca: dimension mismatch, model " + std::to_string(model.dim()) + " vs input " +
                std::to_string(rows.cols()));
  }
  return (rows.rowwise() - model.mean.transpose()) * model.components.transpose();
}

FeatureSet transform(const PcaModel& model, const FeatureSet& set) {
  return FeatureSet::from_matrix(set.extractor_id() + "+pca" + std::to_string(model.k()), set.ids(),
                                 transform(model, set.matrix()));
}

Eigen::MatrixXd inverse_transform(const PcaModel& model, const Eigen::MatrixXd& scores) {
  if (scores.cols() != model.k()) throw Error("pca: score dimension mismatch");
  return (scores * model.components).rowwise() + model.mean.transpose();
}

std::vector<ScreeEntry> scree(const PcaModel& model, std::size_t n) {
  if (n > static_cast<std::size_t>(model.k())) throw Error("scree: more entries than components");
  std::vector<ScreeEntry> out;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = model.explained_variance_ratio(static_cast<Eigen::Index>(i));
    cumulative += r;
    out.push_back({i + 1, r, cumulative});
  }
  return out;
}

void write_scree_csv(const std::vector<ScreeEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("scree: cannot write " + path);
  out << "index,ratio,cumulative\n";
  for (const auto& e : entries) {
    out << e.index << ',' << csv::format_double(e.ratio) << ',' << csv::format_double(e.cumulative) << '\n';
  }
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error("pearson: need two equal-length series");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw Error("pearson: zero variance series");
  return sab / std::sqrt(saa * sbb);
}

double pc_volume_fraction_correlation(const FeatureSet& scores,
                                      const std::unordered_map<std::string, double>& volume_fraction) {
  std::vector<double> pc1, vf;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto it = volume_fraction.find(scores.id(i));
    if (it == volume_fraction.end()) throw Error("pc_volume_fraction_correlation: no volume fraction for '" + scores.id(i) + "'");
    pc1.push_back(scores.row(i)[0]);
    vf.push_back(it->second);
  }
  return pearson(pc1, vf);
}

}  // namespace m2p
