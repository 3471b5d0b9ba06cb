#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "m2p/feature_set.hpp"
#include "m2p/features.hpp"
#include "m2p/reduction.hpp"
#include "m2p/regression.hpp"

namespace m2p {

// 100 * mean(|y - y_hat| / |y|). Every true value must be nonzero.
double mape(std::span<const double> truth, std::span<const double> predicted);
double mape(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted);

// ---------------------------------------------------------------------------
// Splits

enum class Subset : std::uint8_t { Train, Validation, Test };
std::string_view to_string(Subset subset);

struct SplitPlan {
  std::uint64_t seed = 0;
  std::size_t test_percent = 10;
  std::size_t train_parts = 80;
  std::size_t val_parts = 20;
  std::vector<std::string> ids;
  std::vector<Subset> assignment;  // parallel to ids

  std::vector<std::size_t> rows(Subset subset) const;
};

// floor(n * test_percent / 100) test samples, the remainder split
// train:val = train_parts:val_parts with the validation share rounded down.
// Requires at least 10 samples.
SplitPlan holdout_split(const std::vector<std::string>& ids, std::uint64_t seed,
                        std::size_t test_percent = 10, std::size_t train_parts = 80,
                        std::size_t val_parts = 20);

// Shuffled k-fold assignment; fold sizes differ by at most one.
std::vector<std::size_t> kfold_assign(std::size_t n, std::size_t folds, std::uint64_t seed);

// Pairs (i, j), i < j, of identical feature rows placed in different folds.
std::vector<std::pair<std::size_t, std::size_t>> find_cross_fold_duplicates(
    const Eigen::MatrixXd& rows, std::span<const std::size_t> fold_of_row);

// ---------------------------------------------------------------------------
// Reduced-order model: [standardize] -> PCA(k) -> regressor

// Emitted whenever a standardizer or PCA is fitted, with the global row
// indices used and the fitted mean, so callers can audit for leakage.
struct FitEvent {
  std::string stage;  // "standardizer" or "pca"
  int outer_fold = -1;
  int inner_fold = -1;
  std::vector<std::size_t> rows;
  Eigen::VectorXd mean;
};
using FitObserver = std::function<void(const FitEvent&)>;

struct ModelRecipe {
  RegressorSpec regressor;
  bool standardize = false;
  // Candidate C values searched for SVR (ignored for LR/PR).
  std::vector<double> svr_c_grid{1.0, 10.0, 100.0};
};

struct ReducedModel {
  std::optional<Standardizer> standardizer;
  PcaModel pca;
  Regressor regressor;

  Eigen::VectorXd predict(const Eigen::MatrixXd& rows) const;
};

struct FitTag {
  int outer_fold = -1;
  int inner_fold = -1;
};

ReducedModel fit_reduced(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         std::span<const std::size_t> train_rows, std::size_t k,
                         const ModelRecipe& recipe, const FitObserver* observer = nullptr,
                         FitTag tag = {});

// ---------------------------------------------------------------------------
// Grid search over the number of principal components

struct GridEntry {
  std::size_t k = 0;
  double c = 0.0;  // SVR C, 0 for LR/PR
  double mape = 0.0;
};

struct GridSearchResult {
  std::size_t best_k = 0;
  double best_c = 0.0;
  std::vector<GridEntry> entries;
};

// MAPE differences below this many percentage points count as ties.
inline constexpr double kGridTieTolerance = 1e-9;

// PCA (and standardizer) fitted on train rows only; one model per grid
// point; the validation MAPE minimizer wins, ties go to the smallest k.
// Every k must satisfy 1 <= k <= min(|train| - 1, d).
GridSearchResult grid_search_pcs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 std::span<const std::size_t> train_rows,
                                 std::span<const std::size_t> val_rows, const ModelRecipe& recipe,
                                 std::span<const std::size_t> pc_grid,
                                 const FitObserver* observer = nullptr, FitTag tag = {});

// Largest k usable with `train_size` samples of dimension d.
std::size_t max_feasible_k(std::size_t train_size, std::size_t dim);
// {2, 4, ..., 60} capped at `limit`; {1} if nothing fits.
std::vector<std::size_t> default_pc_grid(std::size_t limit);

// ---------------------------------------------------------------------------
// Parity data

struct ParityRow {
  std::string sample_id;
  double truth = 0.0;
  double prediction = 0.0;
  std::string subset;
};

void write_parity_csv(const std::vector<ParityRow>& rows, const std::filesystem::path& path);
std::vector<ParityRow> read_parity_csv(const std::filesystem::path& path);

std::vector<ParityRow> parity_data(const ReducedModel& model, const SplitPlan& plan,
                                   const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// ---------------------------------------------------------------------------
// Protocols

struct HoldoutReport {
  SplitPlan plan;
  GridSearchResult grid;
  double validation_mape = 0.0;
  double test_mape = 0.0;
  ReducedModel model;
  std::vector<ParityRow> parity;
};

// Hold out a test set, grid-search k on train/validation, refit on train and
// score the test set.
HoldoutReport run_holdout(const FeatureSet& features, const Eigen::VectorXd& targets,
                          const ModelRecipe& recipe, std::span<const std::size_t> pc_grid,
                          std::uint64_t seed, const FitObserver* observer = nullptr);

struct CvConfig {
  ModelRecipe recipe;
  std::size_t folds = 10;
  std::size_t inner_folds = 5;
  std::vector<std::size_t> pc_grid;  // empty: default_pc_grid
  std::uint64_t seed = 0;
};

struct CvFold {
  std::size_t index = 0;
  std::size_t k = 0;
  double c = 0.0;
  double mape = 0.0;
  std::vector<std::string> test_ids;
};

struct CvReport {
  std::string model;
  std::string extractor_id;
  std::size_t folds = 0;
  std::size_t inner_folds = 0;
  std::uint64_t seed = 0;
  bool standardized = false;
  std::vector<CvFold> fold_results;
  double mean = 0.0;
  double std = 0.0;                     // population (divisor = fold count)
  std::vector<double> leave_one_out_std;  // std without fold i
  std::size_t duplicate_leaks = 0;

  std::string to_json() const;
};

// Outer k-fold; inside each outer-train portion an inner k-fold grid search
// picks k (and C for SVR), then the model is refit on the whole outer-train
// portion and scored on the outer test fold.
CvReport nested_cv(const FeatureSet& features, const Eigen::VectorXd& targets, const CvConfig& config,
                   const FitObserver* observer = nullptr);

double population_std(std::span<const double> values);

}  // namespace m2p
