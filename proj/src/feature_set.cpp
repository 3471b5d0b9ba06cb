#include "m2p/feature_set.hpp"

#include <cmath>

#include "m2p/error.hpp"

namespace m2p {

void FeatureSet::add(const std::string& sample_id, std::span<const double> values) {
  if (values.empty()) throw Error("feature set: empty vector for '" + sample_id + "'");
  if (ids_.empty()) {
    dim_ = values.size();
  } else if (values.size() != dim_) {
    throw Error("feature set: length " + std::to_string(values.size()) + " for '" + sample_id +
                "' differs from " + std::to_string(dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("feature set: non-finite value for '" + sample_id + "'");
  }
  if (index_.contains(sample_id)) throw Error("feature set: duplicate id '" + sample_id + "'");
  index_.emplace(sample_id, ids_.size());
  ids_.push_back(sample_id);
  values_.insert(values_.end(), values.begin(), values.end());
}

std::optional<std::size_t> FeatureSet::find(const std::string& sample_id) const {
  const auto it = index_.find(sample_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> FeatureSet::at(const std::string& sample_id) const {
  const auto i = find(sample_id);
  if (!i) throw Error("feature set: unknown id '" + sample_id + "'");
  return row(*i);
}

FeatureVector FeatureSet::vector(std::size_t i) const {
  const auto r = row(i);
  return {ids_[i], extractor_id_, std::vector<double>(r.begin(), r.end())};
}

Eigen::MatrixXd FeatureSet::matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values_[i * dim_ + j];
    }
  }
  return m;
}

FeatureSet FeatureSet::from_matrix(std::string extractor_id, const std::vector<std::string>& ids,
                                   const Eigen::MatrixXd& values) {
  if (static_cast<std::size_t>(values.rows()) != ids.size()) {
    throw Error("feature set: id count does not match matrix rows");
  }
  FeatureSet set(std::move(extractor_id));
  std::vector<double> row(static_cast<std::size_t>(values.cols()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = values(static_cast<Eigen::Index>(i), j);
    }
    set.add(ids[i], row);
  }
  return set;
}

FeatureSet FeatureSet::select(std::span<const std::size_t> rows) const {
  FeatureSet out(extractor_id_);
  for (std::size_t r : rows) {
    if (r >= size()) throw Error("feature set: row index out of range");
    out.add(ids_[r], row(r));
  }
  return out;
}

}  // namespace m2p
