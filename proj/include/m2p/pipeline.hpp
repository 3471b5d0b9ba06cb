#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "m2p/error.hpp"

namespace m2p::pipeline {

inline constexpr std::array<std::string_view, 10> kStages{
    "synth", "preprocess", "twopoint", "aggregate", "augment", "pca", "train", "cv", "report", "plot"};

bool is_stage(std::string_view name);

// Failure inside a stage; what() starts with "stage '<name>': ".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Declarative run description:
//   # comment
//   stages = synth, twopoint, aggregate, pca, train, report
//   seed = 7
//   synth.count = 500
// Relative paths resolve against the directory holding the config file.
class Config {
 public:
  static Config parse(std::string_view text, const std::filesystem::path& base_dir = ".");
  static Config load(const std::filesystem::path& path);

  const std::vector<std::string>& stages() const { return stages_; }
  void set_stages(std::vector<std::string> stages);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback = {}) const;
  std::vector<std::size_t> get_sizes(const std::string& key, std::vector<std::size_t> fallback = {}) const;
  // Empty when absent; relative values resolve against the base directory.
  std::filesystem::path get_path(const std::string& key) const;

  std::uint64_t seed() const { return get_u64("seed", 0); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::vector<std::string> stages_;
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_ = ".";
};

struct RunResult {
  std::filesystem::path out_dir;
  std::filesystem::path report;  // empty unless the report stage ran
  std::vector<std::string> stages;
};

// Executes the stages in declared order. Artifacts land in `out_dir`.
RunResult run(const Config& config);

}  // namespace m2p::pipeline
