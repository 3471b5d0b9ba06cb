#include "m2p/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "m2p/csv.hpp"
#include "m2p/error.hpp"
#include "m2p/log.hpp"
#include "m2p/rng.hpp"

namespace m2p {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Regressor fit_tolerant(const RegressorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  try {
    return fit(spec, x, y);
  } catch (const SvrNotConverged& e) {
    log::warn(std::string(e.what()) + "; using the last iterate");
    return e.best();
  }
}

void notify(const FitObserver* observer, std::string stage, FitTag tag, std::span<const std::size_t> rows,
            const Eigen::VectorXd& mean) {
  if (!observer || !*observer) return;
  FitEvent ev{std::move(stage), tag.outer_fold, tag.inner_fold,
              std::vector<std::size_t>(rows.begin(), rows.end()), mean};
  (*observer)(ev);
}

std::vector<double> candidate_cs(const ModelRecipe& recipe) {
  if (recipe.regressor.type != ModelType::Svr) return {0.0};
  if (recipe.svr_c_grid.empty()) return {recipe.regressor.svr.c};
  return recipe.svr_c_grid;
}

RegressorSpec with_c(RegressorSpec spec, double c) {
  if (spec.type == ModelType::Svr && c > 0.0) spec.svr.c = c;
  return spec;
}

// Smallest (k, c) whose score is within the tie tolerance of the minimum.
std::size_t pick_best(const std::vector<GridEntry>& entries) {
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) lowest = std::min(lowest, e.mape);
  std::size_t best = entries.size();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].mape > lowest + kGridTieTolerance) continue;
    if (best == entries.size() || entries[i].k < entries[best].k ||
        (entries[i].k == entries[best].k && entries[i].c < entries[best].c)) {
      best = i;
    }
  }
  return best;
}

}  // namespace

double mape(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size()) throw Error("mape: length mismatch");
  if (truth.empty()) throw Error("mape: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0.0) throw Error("mape: zero true value");
    sum += std::abs(truth[i] - predicted[i]) / std::abs(truth[i]);
  }
  return 100.0 * sum / static_cast<double>(truth.size());
}

double mape(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted) {
  return mape(std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())),
              std::span<const double>(predicted.data(), static_cast<std::size_t>(predicted.size())));
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

std::string_view to_string(Subset subset) {
  switch (subset) {
    case Subset::Train:
      return "train";
    case Subset::Validation:
      return "validation";
    case Subset::Test:
      return "test";
  }
  return "train";
}

std::vector<std::size_t> SplitPlan::rows(Subset subset) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == subset) out.push_back(i);
  }
  return out;
}

SplitPlan holdout_split(const std::vector<std::string>& ids, std::uint64_t seed, std::size_t test_percent,
                        std::size_t train_parts, std::size_t val_parts) {
  const std::size_t n = ids.size();
  if (n < 10) throw Error("holdout_split: too few samples (" + std::to_string(n) + " < 10)");
  if (test_percent >= 100 || train_parts == 0 || val_parts == 0) throw Error("holdout_split: bad proportions");
  SplitPlan plan{seed, test_percent, train_parts, val_parts, ids, std::vector<Subset>(n, Subset::Train)};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  const std::size_t n_test = n * test_percent / 100;
  const std::size_t rest = n - n_test;
  const std::size_t n_val = rest * val_parts / (train_parts + val_parts);
  for (std::size_t i = 0; i < n_test; ++i) plan.assignment[order[i]] = Subset::Test;
  for (std::size_t i = n_test; i < n_test + n_val; ++i) plan.assignment[order[i]] = Subset::Validation;
  return plan;
}

std::vector<std::size_t> kfold_assign(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error("kfold: need at least 2 folds");
  if (n < folds) throw Error("kfold: " + std::to_string(n) + " samples cannot fill " + std::to_string(folds) + " folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::size_t> fold(n);
  const std::size_t base = n / folds;
  const std::size_t extra = n % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold[order[pos++]] = f;
  }
  return fold;
}

std::vector<std::pair<std::size_t, std::size_t>> find_cross_fold_duplicates(
    const Eigen::MatrixXd& rows, std::span<const std::size_t> fold_of_row) {
  if (static_cast<std::size_t>(rows.rows()) != fold_of_row.size()) throw Error("duplicates: fold list size mismatch");
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> data = rows;
  std::unordered_map<std::string, std::vector<std::size_t>> buckets;
  const std::size_t bytes = static_cast<std::size_t>(rows.cols()) * sizeof(double);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    std::string key(bytes, '\0');
    std::memcpy(key.data(), data.row(i).data(), bytes);
    buckets[key].push_back(static_cast<std::size_t>(i));
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [key, members] : buckets) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        if (fold_of_row[members[a]] != fold_of_row[members[b]]) out.emplace_back(members[a], members[b]);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd ReducedModel::predict(const Eigen::MatrixXd& rows) const {
  const Eigen::MatrixXd scaled = standardizer ? standardizer->apply(rows) : rows;
  return m2p::predict(regressor, transform(pca, scaled));
}

ReducedModel fit_reduced(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> train_rows,
                         std::size_t k, const ModelRecipe& recipe, const FitObserver* observer, FitTag tag) {
  Eigen::MatrixXd xt = take_rows(x, train_rows);
  ReducedModel model;
  if (recipe.standardize) {
    model.standardizer = fit_standardizer(xt);
    notify(observer, "standardizer", tag, train_rows, model.standardizer->means());
    xt = model.standardizer->apply(xt);
  }
  model.pca = fit_pca(xt, static_cast<Eigen::Index>(k));
  notify(observer, "pca", tag, train_rows, model.pca.mean);
  model.regressor = fit_tolerant(recipe.regressor, transform(model.pca, xt), take(y, train_rows));
  return model;
}

std::size_t max_feasible_k(std::size_t train_size, std::size_t dim) {
  if (train_size < 2) return 0;
  return std::min(train_size - 1, dim);
}

std::vector<std::size_t> default_pc_grid(std::size_t limit) {
  std::vector<std::size_t> grid;
  for (std::size_t k = 2; k <= 60 && k <= limit; k += 2) grid.push_back(k);
  if (grid.empty()) grid.push_back(1);
  return grid;
}

GridSearchResult grid_search_pcs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 std::span<const std::size_t> train_rows, std::span<const std::size_t> val_rows,
                                 const ModelRecipe& recipe, std::span<const std::size_t> pc_grid,
                                 const FitObserver* observer, FitTag tag) {
  if (pc_grid.empty()) throw Error("grid_search_pcs: empty grid");
  if (train_rows.empty() || val_rows.empty()) throw Error("grid_search_pcs: empty train or validation set");
  const std::size_t limit = max_feasible_k(train_rows.size(), static_cast<std::size_t>(x.cols()));
  std::vector<std::size_t> grid(pc_grid.begin(), pc_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1 || grid.back() > limit) {
    throw Error("grid_search_pcs: infeasible grid, k must lie in [1, " + std::to_string(limit) + "]");
  }

  Eigen::MatrixXd xt = take_rows(x, train_rows);
  Eigen::MatrixXd xv = take_rows(x, val_rows);
  if (recipe.standardize) {
    const Standardizer s = fit_standardizer(xt);
    notify(observer, "standardizer", tag, train_rows, s.means());
    xt = s.apply(xt);
    xv = s.apply(xv);
  }
  const PcaModel pca = fit_pca(xt, static_cast<Eigen::Index>(grid.back()));
  notify(observer, "pca", tag, train_rows, pca.mean);
  const Eigen::MatrixXd st = transform(pca, xt);
  const Eigen::MatrixXd sv = transform(pca, xv);
  const Eigen::VectorXd yt = take(y, train_rows);
  const Eigen::VectorXd yv = take(y, val_rows);

  GridSearchResult result;
  for (std::size_t k : grid) {
    const auto kk = static_cast<Eigen::Index>(k);
    for (double c : candidate_cs(recipe)) {
      const Regressor model = fit_tolerant(with_c(recipe.regressor, c), st.leftCols(kk), yt);
      result.entries.push_back({k, c, mape(yv, predict(model, sv.leftCols(kk)))});
    }
  }
  const auto best = pick_best(result.entries);
  result.best_k = result.entries[best].k;
  result.best_c = result.entries[best].c;
  return result;
}

// ---------------------------------------------------------------------------

void write_parity_csv(const std::vector<ParityRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("parity: cannot write " + path.string());
  out << "sample_id,truth,prediction,subset\n";
  for (const auto& r : rows) {
    out << csv::join({r.sample_id, csv::format_double(r.truth), csv::format_double(r.prediction), r.subset}) << '\n';
  }
  if (!out) throw Error("parity: I/O failure writing " + path.string());
}

std::vector<ParityRow> read_parity_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows.front() != csv::Row{"sample_id", "truth", "prediction", "subset"}) {
    throw Error("parity: malformed header in " + path.string());
  }
  std::vector<ParityRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 4) throw Error("parity: malformed row " + std::to_string(i));
    const auto t = csv::parse_double(r[1]);
    const auto p = csv::parse_double(r[2]);
    if (!t || !p || !std::isfinite(*t) || !std::isfinite(*p)) {
      throw Error("parity: non-numeric value in row " + std::to_string(i));
    }
    out.push_back({r[0], *t, *p, r[3]});
  }
  return out;
}

std::vector<ParityRow> parity_data(const ReducedModel& model, const SplitPlan& plan, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y) {
  std::vector<ParityRow> out;
  for (Subset subset : {Subset::Train, Subset::Test}) {
    const auto rows = plan.rows(subset);
    if (rows.empty()) continue;
    const Eigen::VectorXd pred = model.predict(take_rows(x, rows));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.push_back({plan.ids[rows[i]], y(static_cast<Eigen::Index>(rows[i])), pred(static_cast<Eigen::Index>(i)),
                     std::string(to_string(subset))});
    }
  }
  return out;
}

HoldoutReport run_holdout(const FeatureSet& features, const Eigen::VectorXd& targets, const ModelRecipe& recipe,
                          std::span<const std::size_t> pc_grid, std::uint64_t seed, const FitObserver* observer) {
  if (static_cast<std::size_t>(targets.size()) != features.size()) throw Error("holdout: target count mismatch");
  const Eigen::MatrixXd x = features.matrix();
  HoldoutReport report;
  report.plan = holdout_split(features.ids(), seed);
  const auto train = report.plan.rows(Subset::Train);
  const auto val = report.plan.rows(Subset::Validation);
  const auto test = report.plan.rows(Subset::Test);
  report.grid = grid_search_pcs(x, targets, train, val, recipe, pc_grid, observer);
  for (const auto& e : report.grid.entries) {
    if (e.k == report.grid.best_k && e.c == report.grid.best_c) report.validation_mape = e.mape;
  }
  ModelRecipe final_recipe = recipe;
  final_recipe.regressor = with_c(recipe.regressor, report.grid.best_c);
  report.model = fit_reduced(x, targets, train, report.grid.best_k, final_recipe, observer);
  report.test_mape = mape(take(targets, test), report.model.predict(take_rows(x, test)));
  report.parity = parity_data(report.model, report.plan, x, targets);
  return report;
}

CvReport nested_cv(const FeatureSet& features, const Eigen::VectorXd& targets, const CvConfig& config,
                   const FitObserver* observer) {
  const std::size_t n = features.size();
  if (static_cast<std::size_t>(targets.size()) != n) throw Error("nested_cv: target count mismatch");
  if (n < config.folds) throw Error("nested_cv: fewer samples than folds");
  if (config.inner_folds < 2) throw Error("nested_cv: need at least 2 inner folds");
  const Eigen::MatrixXd x = features.matrix();
  const std::size_t d = features.dim();
  const auto fold_of = kfold_assign(n, config.folds, config.seed);

  CvReport report;
  report.model = std::string(to_string(config.recipe.regressor.type));
  report.extractor_id = features.extractor_id();
  report.folds = config.folds;
  report.inner_folds = config.inner_folds;
  report.seed = config.seed;
  report.standardized = config.recipe.standardize;
  report.duplicate_leaks = find_cross_fold_duplicates(x, fold_of).size();
  if (report.duplicate_leaks > 0) {
    log::warn("nested_cv: " + std::to_string(report.duplicate_leaks) +
              " identical feature rows fall into different folds");
  }
  report.fold_results.resize(config.folds);

  std::mutex observer_mutex;
  FitObserver guarded;
  if (observer && *observer) {
    guarded = [&](const FitEvent& ev) {
      std::lock_guard lock(observer_mutex);
      (*observer)(ev);
    };
  }
  const FitObserver* obs = guarded ? &guarded : nullptr;

  std::exception_ptr failure;
  const auto folds = static_cast<std::ptrdiff_t>(config.folds);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t fi = 0; fi < folds; ++fi) {
    try {
      const auto f = static_cast<std::size_t>(fi);
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);

      const auto inner_of = kfold_assign(train.size(), config.inner_folds, derive_seed(config.seed, f));
      const std::size_t largest_inner = (train.size() + config.inner_folds - 1) / config.inner_folds;
      const std::size_t limit = max_feasible_k(train.size() - largest_inner, d);
      std::vector<std::size_t> grid;
      if (config.pc_grid.empty()) {
        grid = default_pc_grid(limit);
      } else {
        for (std::size_t k : config.pc_grid) {
          if (k >= 1 && k <= limit) grid.push_back(k);
        }
        if (grid.empty()) throw Error("nested_cv: no feasible k in the grid (limit " + std::to_string(limit) + ")");
      }

      std::vector<GridEntry> totals;
      for (std::size_t g = 0; g < config.inner_folds; ++g) {
        std::vector<std::size_t> inner_train, inner_val;
        for (std::size_t i = 0; i < train.size(); ++i) (inner_of[i] == g ? inner_val : inner_train).push_back(train[i]);
        const auto res = grid_search_pcs(x, targets, inner_train, inner_val, config.recipe, grid, obs,
                                         {static_cast<int>(f), static_cast<int>(g)});
        if (totals.empty()) {
          totals = res.entries;
        } else {
          for (std::size_t e = 0; e < totals.size(); ++e) totals[e].mape += res.entries[e].mape;
        }
      }
      for (auto& e : totals) e.mape /= static_cast<double>(config.inner_folds);
      const GridEntry chosen = totals[pick_best(totals)];

      ModelRecipe final_recipe = config.recipe;
      final_recipe.regressor = with_c(config.recipe.regressor, chosen.c);
      const ReducedModel model = fit_reduced(x, targets, train, chosen.k, final_recipe, obs, {static_cast<int>(f), -1});
      CvFold& out = report.fold_results[f];
      out.index = f;
      out.k = chosen.k;
      out.c = chosen.c;
      out.mape = mape(take(targets, test), model.predict(take_rows(x, test)));
      for (std::size_t r : test) out.test_ids.push_back(features.id(r));
    } catch (...) {
#pragma omp critical(m2p_cv_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> scores;
  for (const auto& f : report.fold_results) scores.push_back(f.mape);
  report.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  report.std = population_std(scores);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::vector<double> rest;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (j != i) rest.push_back(scores[j]);
    }
    report.leave_one_out_std.push_back(population_std(rest));
  }
  return report;
}

std::string CvReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["extractor_id"] = extractor_id;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : fold_results) {
    nlohmann::ordered_json fj;
    fj["index"] = f.index;
    fj["k"] = f.k;
    if (model == "svr") fj["c"] = f.c;
    fj["mape"] = f.mape;
    j["folds"].push_back(fj);
  }
  j["mean"] = mean;
  j["std"] = std;
  j["std_ddof"] = 0;
  j["leave_one_fold_out_std"] = leave_one_out_std;
  j["outer_folds"] = folds;
  j["inner_folds"] = inner_folds;
  j["seed"] = seed;
  j["standardized"] = standardized;
  j["duplicate_leaks"] = duplicate_leaks;
  return j.dump(2);
}

}  // namespace m2p
