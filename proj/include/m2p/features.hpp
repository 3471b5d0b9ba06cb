#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "m2p/dataio.hpp"
#include "m2p/feature_set.hpp"

namespace m2p {

enum class Aggregation { Concat, Mean };

Aggregation parse_aggregation(std::string_view text);  // concat, mean
std::string_view to_string(Aggregation method);

// Combines the section vectors of one sample, in section order (x, y, z).
// The result keeps the sections' extractor id and takes the first vector's
// sample id.
FeatureVector aggregate(std::span<const FeatureVector> sections, Aggregation method);

// Groups records named "<sample>@<section>" by sample (sections in ascending
// numeric order) and aggregates each group. Samples keep first-appearance order.
FeatureSet aggregate_sections(const FeatureSet& sections, Aggregation method);

// Record id of section `index` of `sample_id`.
std::string section_id(const std::string& sample_id, std::size_t index);

// Composition occupies the trailing 22 positions.
FeatureVector append_composition(const FeatureVector& features, const CompositionVector& composition);

// Population (divisor N) statistics. Dimensions with zero spread map to 0.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd means, Eigen::VectorXd stds)
      : means_(std::move(means)), stds_(std::move(stds)) {}

  const Eigen::VectorXd& means() const { return means_; }
  const Eigen::VectorXd& stds() const { return stds_; }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  // Constant dimensions come back as their mean.
  Eigen::MatrixXd invert(const Eigen::MatrixXd& rows) const;

 private:
  Eigen::VectorXd means_;
  Eigen::VectorXd stds_;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& rows);
Standardizer fit_standardizer(const FeatureSet& set);
FeatureSet apply_standardizer(const Standardizer& s, const FeatureSet& set);

// Element-wise mean of patch tokens (rows) into one image-level vector.
std::vector<double> sam_patch_pool(const std::vector<std::vector<double>>& patch_tokens);

}  // namespace m2p
