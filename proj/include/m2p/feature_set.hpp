#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace m2p {

// Descriptor of one sample (or one section of a sample) with provenance.
struct FeatureVector {
  std::string sample_id;
  std::string extractor_id;
  std::vector<double> values;
};

// Insertion-ordered collection of equal-length feature vectors keyed by
// sample id. Every vector is finite and ids are unique.
class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(std::string extractor_id) : extractor_id_(std::move(extractor_id)) {}

  // Throws on duplicate id, non-finite values, empty vector or length mismatch.
  void add(const std::string& sample_id, std::span<const double> values);
  void add(const FeatureVector& vector) { add(vector.sample_id, vector.values); }

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t dim() const { return dim_; }
  const std::string& extractor_id() const { return extractor_id_; }
  void set_extractor_id(std::string id) { extractor_id_ = std::move(id); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> find(const std::string& sample_id) const;
  std::span<const double> at(const std::string& sample_id) const;
  FeatureVector vector(std::size_t i) const;

  // n x d copy of the values.
  Eigen::MatrixXd matrix() const;
  static FeatureSet from_matrix(std::string extractor_id, const std::vector<std::string>& ids,
                                const Eigen::MatrixXd& values);

  // Rows in the given order (subset or permutation).
  FeatureSet select(std::span<const std::size_t> rows) const;

  bool operator==(const FeatureSet& other) const {
    return extractor_id_ == other.extractor_id_ && dim_ == other.dim_ && ids_ == other.ids_ &&
           values_ == other.values_;
  }

 private:
  std::string extractor_id_;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace m2p
