#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "m2p/error.hpp"
#include "m2p/pipeline.hpp"

namespace {

using m2p::pipeline::Config;

// Flags bound to config keys; only flags given on the command line override.
class Bindings {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& e = entries_.emplace_back(std::make_unique<Entry>());
    e->key = key;
    e->option = app->add_option(flag, e->value, help);
  }
  void add_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& value,
                const std::string& help) {
    auto& e = entries_.emplace_back(std::make_unique<Entry>());
    e->key = key;
    e->value = value;
    e->option = app->add_flag(flag, help);
  }
  void apply(Config& cfg) const {
    for (const auto& e : entries_) {
      if (e->option->count() > 0) cfg.set(e->key, e->value);
    }
  }

 private:
  struct Entry {
    CLI::Option* option = nullptr;
    std::string key;
    std::string value;
  };
  std::vector<std::unique_ptr<Entry>> entries_;
};

void add_model_flags(CLI::App* app, Bindings& b) {
  b.add(app, "--input", "model.input", "feature file (MPFV1 or CSV)");
  b.add(app, "--manifest", "input.manifest", "sample manifest with targets");
  b.add(app, "--model", "model.type", "lr, pr or svr");
  b.add(app, "--pc-grid", "model.pc_grid", "candidate component counts, comma separated");
  b.add_flag(app, "--standardize", "model.standardize", "true", "z-score features inside training folds");
  b.add(app, "--ridge", "model.ridge", "ridge penalty for lr/pr");
  b.add(app, "--poly-terms", "model.poly_terms", "full or squares");
  b.add(app, "--svr-c", "model.svr_c", "SVR C grid, comma separated");
  b.add(app, "--svr-kernel", "model.svr_kernel", "rbf or linear");
}

int summarize_cv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw m2p::Error("report: cannot open " + path);
  const auto j = nlohmann::ordered_json::parse(in);
  std::printf("model        %s\n", j.at("model").get<std::string>().c_str());
  std::printf("extractor    %s\n", j.at("extractor_id").get<std::string>().c_str());
  for (const auto& f : j.at("folds")) {
    std::printf("fold %-3zu    k=%-3zu MAPE %.3f%%\n", f.at("index").get<std::size_t>(), f.at("k").get<std::size_t>(),
                f.at("mape").get<double>());
  }
  std::printf("mean         %.3f%%\nstd          %.3f%%\n", j.at("mean").get<double>(), j.at("std").get<double>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microstructure-to-property regression toolkit"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "pipeline configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "extra key=value configuration entries");

  Bindings b;
  auto* run = app.add_subcommand("run", "run every stage listed in the config");

  auto* synth = app.add_subcommand("synth", "generate random two-phase volumes with a planted property");
  b.add(synth, "--count", "synth.count", "number of volumes");
  b.add(synth, "--dims", "synth.dims", "volume size, e.g. 32x32x32");
  b.add(synth, "--vf-range", "synth.vf_range", "volume fraction sweep lo,hi");
  b.add(synth, "--corr-len", "synth.corr_len", "correlation length or lo,hi");

  auto* pre = app.add_subcommand("preprocess", "sections, segmentation, crop and resize");
  b.add(pre, "--manifest", "input.manifest", "sample manifest");
  b.add(pre, "--backend", "preprocess.backend", "dinov2, clip, sam or none");
  b.add(pre, "--patch", "preprocess.patch", "patch size");
  b.add(pre, "--target", "preprocess.target", "target side for clip/sam");
  b.add(pre, "--section-mode", "preprocess.section_mode", "center or index");
  b.add(pre, "--section-index", "preprocess.section_index", "i_x,i_y,i_z for index mode");
  b.add(pre, "--segment", "preprocess.segment", "auto, always or never");
  b.add(pre, "--nlm-h", "segment.h", "denoising strength (8-bit units)");
  b.add(pre, "--template", "segment.template", "denoising template window");
  b.add(pre, "--search", "segment.search", "denoising search window");
  b.add(pre, "--block", "segment.block", "adaptive threshold block size");
  b.add(pre, "--offset", "segment.offset", "adaptive threshold offset (8-bit units)");
  b.add_flag(pre, "--no-denoise", "segment.denoise", "false", "skip non-local means");

  auto* tp = app.add_subcommand("twopoint", "two-point correlation features");
  b.add(tp, "--sections", "twopoint.sections", "section index written by preprocess");
  b.add(tp, "--kind", "twopoint.kind", "auto or cross");
  b.add(tp, "--phases", "twopoint.phases", "phase (auto) or phase pair (cross)");
  b.add(tp, "--boundary", "twopoint.boundary", "periodic or nonperiodic");
  b.add(tp, "--crop", "twopoint.crop", "odd side of the centred crop, 0 keeps the full map");
  b.add(tp, "--output", "twopoint.output", "output feature file");

  auto* agg = app.add_subcommand("aggregate", "combine section features per sample");
  b.add(agg, "--input", "aggregate.input", "section feature file");
  b.add(agg, "--method", "aggregate.method", "concat or mean");
  b.add(agg, "--output", "aggregate.output", "output feature file");

  auto* aug = app.add_subcommand("augment", "append composition vectors");
  b.add(aug, "--input", "augment.input", "feature file");
  b.add(aug, "--composition", "augment.composition", "composition CSV (sample_id + 22 elements)");
  b.add(aug, "--manifest", "input.manifest", "manifest with composition columns");
  b.add(aug, "--output", "augment.output", "output feature file");

  auto* pca = app.add_subcommand("pca", "principal component diagnostics");
  b.add(pca, "--input", "pca.input", "feature file");
  b.add(pca, "--components", "pca.components", "number of components");
  b.add(pca, "--scree", "pca.output", "scree CSV path");

  auto* train = app.add_subcommand("train", "hold-out grid search, refit and test");
  add_model_flags(train, b);
  b.add(train, "--parity", "train.output", "parity CSV path");

  auto* cv = app.add_subcommand("cv", "nested cross-validation");
  add_model_flags(cv, b);
  b.add(cv, "--folds", "cv.folds", "outer folds");
  b.add(cv, "--inner-folds", "cv.inner_folds", "inner folds");
  b.add(cv, "--output", "cv.output", "CV report path");

  auto* report = app.add_subcommand("report", "print a CV report, or write the run report");
  std::string cv_json;
  report->add_option("--cv", cv_json, "CV report JSON to summarize")->check(CLI::ExistingFile);

  auto* plot = app.add_subcommand("plot", "parity plot as SVG");
  b.add(plot, "--parity", "plot.parity", "parity CSV");
  b.add(plot, "--output", "plot.output", "SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed() && !cv_json.empty()) return summarize_cv(cv_json);

    Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw m2p::Error("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (!out_dir.empty()) cfg.set("out_dir", out_dir);
    b.apply(cfg);

    const auto subs = app.get_subcommands();
    if (!subs.empty() && subs.front() != run) cfg.set_stages({subs.front()->get_name()});
    if (cfg.stages().empty()) {
      std::cerr << app.help();
      return 1;
    }
    const auto result = m2p::pipeline::run(cfg);
    for (const auto& s : result.stages) std::cout << "done: " << s << '\n';
    if (!result.report.empty()) std::cout << "report: " << result.report.string() << '\n';
    return 0;
  } catch (const m2p::pipeline::StageError& e) {
    std::cerr << "m2p: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "m2p: " << e.what() << '\n';
    return 1;
  }
}
