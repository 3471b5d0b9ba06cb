#include "m2p/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "m2p/error.hpp"

namespace m2p {

Aggregation parse_aggregation(std::string_view text) {
  if (text == "concat") return Aggregation::Concat;
  if (text == "mean") return Aggregation::Mean;
  throw Error("unknown aggregation '" + std::string(text) + "'");
}

std::string_view to_string(Aggregation method) {
  return method == Aggregation::Concat ? "concat" : "mean";
}

FeatureVector aggregate(std::span<const FeatureVector> sections, Aggregation method) {
  if (sections.empty()) throw Error("aggregate: empty list");
  FeatureVector out{sections.front().sample_id, sections.front().extractor_id, {}};
  for (const auto& s : sections) {
    if (s.extractor_id != out.extractor_id) throw Error("aggregate: mixed extractors");
    if (s.values.empty()) throw Error("aggregate: empty section vector");
  }
  if (method == Aggregation::Concat) {
    for (const auto& s : sections) out.values.insert(out.values.end(), s.values.begin(), s.values.end());
    return out;
  }
  const std::size_t d = sections.front().values.size();
  out.values.assign(d, 0.0);
  for (const auto& s : sections) {
    if (s.values.size() != d) throw Error("aggregate: length mismatch under mean");
    for (std::size_t j = 0; j < d; ++j) out.values[j] += s.values[j];
  }
  const double n = static_cast<double>(sections.size());
  for (double& v : out.values) v /= n;
  return out;
}

std::string section_id(const std::string& sample_id, std::size_t index) {
  return sample_id + "@" + std::to_string(index);
}

FeatureSet aggregate_sections(const FeatureSet& sections, Aggregation method) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::map<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& id = sections.id(i);
    const auto at = id.rfind('@');
    if (at == std::string::npos || at + 1 == id.size()) {
      throw Error("aggregate: record '" + id + "' is not named <sample>@<section>");
    }
    const std::string sample = id.substr(0, at);
    std::size_t index = 0;
    try {
      index = std::stoul(id.substr(at + 1));
    } catch (const std::exception&) {
      throw Error("aggregate: bad section index in '" + id + "'");
    }
    auto [it, inserted] = groups.try_emplace(sample);
    if (inserted) order.push_back(sample);
    it->second[index] = i;
  }
  FeatureSet out(sections.extractor_id());
  std::size_t expected = 0;
  for (const auto& sample : order) {
    const auto& group = groups[sample];
    if (expected == 0) expected = group.size();
    if (group.size() != expected) {
      throw Error("aggregate: sample '" + sample + "' has " + std::to_string(group.size()) +
                  " sections, expected " + std::to_string(expected));
    }
    std::vector<FeatureVector> parts;
    for (const auto& [index, row] : group) parts.push_back(sections.vector(row));
    auto combined = aggregate(parts, method);
    out.add(sample, combined.values);
  }
  return out;
}

FeatureVector append_composition(const FeatureVector& features, const CompositionVector& composition) {
  if (composition.values.size() != kCompositionArity) {
    throw Error("append_composition: composition arity " + std::to_string(composition.values.size()) +
                " != " + std::to_string(kCompositionArity));
  }
  FeatureVector out = features;
  out.values.insert(out.values.end(), composition.values.begin(), composition.values.end());
  return out;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != means_.size()) throw Error("standardizer: dimension mismatch");
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    if (stds_(j) > 0.0) {
      out.col(j) = (rows.col(j).array() - means_(j)) / stds_(j);
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != means_.size()) throw Error("standardizer: dimension mismatch");
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    out.col(j) = rows.col(j).array() * stds_(j) + means_(j);
  }
  return out;
}

Standardizer fit_standardizer(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw Error("standardizer: need at least 2 samples");
  const Eigen::VectorXd means = rows.colwise().mean().transpose();
  Eigen::VectorXd stds(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - means(j)).square().mean();
    const double sd = std::sqrt(var);
    // Spread at round-off level of the mean counts as constant.
    stds(j) = sd > 1e-12 * std::max(1.0, std::abs(means(j))) ? sd : 0.0;
  }
  return {means, stds};
}

Standardizer fit_standardizer(const FeatureSet& set) { return fit_standardizer(set.matrix()); }

FeatureSet apply_standardizer(const Standardizer& s, const FeatureSet& set) {
  return FeatureSet::from_matrix(set.extractor_id(), set.ids(), s.apply(set.matrix()));
}

std::vector<double> sam_patch_pool(const std::vector<std::vector<double>>& patch_tokens) {
  if (patch_tokens.empty()) throw Error("sam_patch_pool: no patches");
  const std::size_t d = patch_tokens.front().size();
  if (d == 0) throw Error("sam_patch_pool: empty token");
  std::vector<double> out(d, 0.0);
  for (const auto& t : patch_tokens) {
    if (t.size() != d) throw Error("sam_patch_pool: ragged rows");
    for (std::size_t j = 0; j < d; ++j) out[j] += t[j];
  }
  for (double& v : out) v /= static_cast<double>(patch_tokens.size());
  return out;
}

}  // namespace m2p
