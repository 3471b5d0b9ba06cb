#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "m2p/feature_set.hpp"

namespace m2p {

// Principal axes of a feature ensemble. Components are orthonormal rows with
// non-increasing explained variance (divisor n - 1); each row's largest
// magnitude entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x d
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd explained_variance_ratio;
  double total_variance = 0.0;
  std::size_t n_samples = 0;

  Eigen::Index k() const { return components.rows(); }
  Eigen::Index dim() const { return components.cols(); }
};

// Top-k right singular directions of the centred n x d matrix.
// Requires n >= 2 and 1 <= k <= min(n - 1, d).
PcaModel fit_pca(const Eigen::MatrixXd& rows, Eigen::Index k);
PcaModel fit_pca(const FeatureSet& set, std::size_t k);

// Keeps the leading k components (same as refitting with k).
PcaModel truncate(const PcaModel& model, Eigen::Index k);

// scores = (x - mean) * components^T
Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& rows);
FeatureSet transform(const PcaModel& model, const FeatureSet& set);
Eigen::MatrixXd inverse_transform(const PcaModel& model, const Eigen::MatrixXd& scores);

struct ScreeEntry {
  std::size_t index = 0;  // 1-based
  double ratio = 0.0;
  double cumulative = 0.0;
};

std::vector<ScreeEntry> scree(const PcaModel& model, std::size_t n);
void write_scree_csv(const std::vector<ScreeEntry>& entries, const std::string& path);

double pearson(std::span<const double> a, std::span<const double> b);

// Pearson r between the first score column and per-sample volume fractions,
// matched by sample id.
double pc_volume_fraction_correlation(const FeatureSet& scores,
                                      const std::unordered_map<std::string, double>& volume_fraction);

}  // namespace m2p
