#include "m2p/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "m2p/csv.hpp"
#include "m2p/dataio.hpp"
#include "m2p/evaluation.hpp"
#include "m2p/features.hpp"
#include "m2p/image_io.hpp"
#include "m2p/log.hpp"
#include "m2p/plot.hpp"
#include "m2p/preprocess.hpp"
#include "m2p/reduction.hpp"
#include "m2p/regression.hpp"
#include "m2p/spatialstats.hpp"
#include "m2p/synth.hpp"

namespace m2p::pipeline {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

bool is_stage(std::string_view name) {
  return std::find(kStages.begin(), kStages.end(), name) != kStages.end();
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  for (char ch : text) {
    if (ch == ',' || ch == 'x' || ch == ' ') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item += ch;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

Config Config::parse(std::string_view text, const fs::path& base_dir) {
  Config cfg;
  cfg.base_dir_ = base_dir;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    if (key == "stages") {
      std::vector<std::string> stages;
      std::string item;
      std::istringstream list(value);
      while (std::getline(list, item, ',')) {
        item = trim(item);
        if (!item.empty()) stages.push_back(item);
      }
      cfg.set_stages(std::move(stages));
    } else {
      cfg.values_[key] = value;
    }
  }
  return cfg;
}

Config Config::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void Config::set_stages(std::vector<std::string> stages) {
  for (const auto& s : stages) {
    if (!is_stage(s)) throw Error("config: unknown stage '" + s + "'");
  }
  stages_ = std::move(stages);
}

void Config::set(const std::string& key, const std::string& value) {
  if (key == "stages") {
    set_stages(parse("stages = " + value).stages());
    return;
  }
  values_[key] = value;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto v = csv::parse_double(get(key));
  if (!v) throw Error("config: '" + key + "' is not a number");
  return *v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string text = get(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("config: '" + key + "' is not a non-negative integer");
  }
  return v;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: '" + key + "' is not a boolean");
}

std::vector<double> Config::get_doubles(const std::string& key, std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) {
    const auto v = csv::parse_double(item);
    if (!v) throw Error("config: '" + key + "' has a non-numeric entry '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key, std::vector<std::size_t> fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::size_t> out;
  for (double v : get_doubles(key)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw Error("config: '" + key + "' needs non-negative integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

fs::path Config::get_path(const std::string& key) const {
  if (!has(key) || get(key).empty()) return {};
  const fs::path p = get(key);
  return p.is_absolute() ? p : base_dir_ / p;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct SectionRecord {
  std::string record_id;
  std::string sample_id;
  fs::path path;
  std::string kind;  // "phase" or "gray"
};

struct State {
  const Config& cfg;
  fs::path out;
  std::uint64_t seed = 0;
  fs::path manifest;
  fs::path sections_index;
  fs::path features;   // latest feature file
  fs::path parity;
  std::vector<double> fold_mape;
  std::unordered_map<std::string, double> volume_fraction;
  Json report;
};

std::string rel(const State& st, const fs::path& p) {
  const auto r = p.lexically_relative(st.out);
  return (r.empty() || *r.begin() == "..") ? p.generic_string() : r.generic_string();
}

fs::path output_path(const State& st, const std::string& stage, const std::string& fallback) {
  const auto p = st.cfg.get_path(stage + ".output");
  return p.empty() ? st.out / fallback : p;
}

fs::path need_input(const State& st, const std::string& key, const fs::path& current, const char* what) {
  const auto p = st.cfg.get_path(key);
  if (!p.empty()) return p;
  if (current.empty()) throw Error(std::string("no ") + what + " available (set " + key + " or run an earlier stage)");
  return current;
}

fs::path manifest_path(const State& st) { return need_input(st, "input.manifest", st.manifest, "manifest"); }

std::unordered_map<std::string, double> load_targets(const State& st) {
  auto samples = load_manifest(manifest_path(st));
  normalize_hardness(samples);
  std::unordered_map<std::string, double> out;
  for (const auto& s : samples) out[s.sample_id] = s.target_value;
  return out;
}

Eigen::VectorXd targets_for(const FeatureSet& set, const std::unordered_map<std::string, double>& targets) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto it = targets.find(set.id(i));
    if (it == targets.end()) throw Error("no target for sample '" + set.id(i) + "'");
    y(static_cast<Eigen::Index>(i)) = it->second;
  }
  return y;
}

bool is_volume(const fs::path& p) { return p.extension() == ".bin"; }

bool is_binary(const GrayImage& img) {
  return std::all_of(img.data().begin(), img.data().end(), [](double v) { return v == 0.0 || v == 1.0; });
}

PhaseMap to_phase(const GrayImage& img) {
  PhaseMap m(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) m.data()[i] = img.data()[i] > 0.5 ? 1 : 0;
  return m;
}

ModelRecipe recipe_from(const Config& cfg) {
  ModelRecipe r;
  r.regressor.type = parse_model_type(cfg.get("model.type", "pr"));
  r.regressor.ridge = cfg.get_double("model.ridge", 0.0);
  const std::string terms = cfg.get("model.poly_terms", "full");
  if (terms == "full") {
    r.regressor.poly_terms = PolyTerms::Full;
  } else if (terms == "squares") {
    r.regressor.poly_terms = PolyTerms::PureSquares;
  } else {
    throw Error("model.poly_terms must be full or squares");
  }
  const std::string kernel = cfg.get("model.svr_kernel", "rbf");
  if (kernel == "rbf") {
    r.regressor.svr.kernel = SvrKernel::Rbf;
  } else if (kernel == "linear") {
    r.regressor.svr.kernel = SvrKernel::Linear;
  } else {
    throw Error("model.svr_kernel must be rbf or linear");
  }
  r.regressor.svr.gamma = cfg.get_double("model.svr_gamma", 0.0);
  r.regressor.svr.epsilon = cfg.get_double("model.svr_epsilon", -1.0);
  r.svr_c_grid = cfg.get_doubles("model.svr_c", r.svr_c_grid);
  r.standardize = cfg.get_bool("model.standardize", false);
  return r;
}

Json recipe_json(const ModelRecipe& r) {
  Json j;
  j["type"] = std::string(to_string(r.regressor.type));
  j["standardize"] = r.standardize;
  j["standardizer_std"] = "population";
  if (r.regressor.type == ModelType::Pr) {
    j["poly_terms"] = r.regressor.poly_terms == PolyTerms::Full ? "full" : "squares";
  }
  if (r.regressor.type != ModelType::Svr) j["ridge"] = r.regressor.ridge;
  if (r.regressor.type == ModelType::Svr) {
    j["kernel"] = r.regressor.svr.kernel == SvrKernel::Rbf ? "rbf" : "linear";
    j["c_grid"] = r.svr_c_grid;
    j["gamma"] = r.regressor.svr.gamma > 0 ? Json(r.regressor.svr.gamma) : Json("auto");
    j["epsilon"] = r.regressor.svr.epsilon >= 0 ? Json(r.regressor.svr.epsilon) : Json("auto");
  }
  return j;
}

Json stage_synth(State& st) {
  synth::EnsembleSpec spec;
  spec.count = st.cfg.get_size("synth.count", spec.count);
  const auto dims = st.cfg.get_sizes("synth.dims", {spec.dims[0], spec.dims[1], spec.dims[2]});
  if (dims.size() != 3) throw Error("synth.dims needs three values");
  spec.dims = {dims[0], dims[1], dims[2]};
  const auto vf = st.cfg.get_doubles("synth.vf_range", {spec.vf_lo, spec.vf_hi});
  const auto corr = st.cfg.get_doubles("synth.corr_len", {spec.corr_lo, spec.corr_hi});
  if (vf.size() != 2) throw Error("synth.vf_range needs lo,hi");
  if (corr.empty() || corr.size() > 2) throw Error("synth.corr_len needs one value or lo,hi");
  spec.vf_lo = vf[0];
  spec.vf_hi = vf[1];
  spec.corr_lo = corr.front();
  spec.corr_hi = corr.back();
  spec.seed = st.seed;

  const auto samples = synth::gen_ensemble(spec);
  const fs::path dir = output_path(st, "synth", "synth");
  st.manifest = synth::write_ensemble(samples, dir);
  for (const auto& s : samples) st.volume_fraction[s.id] = s.volume.volume_fraction();
  log::info("synth: wrote " + std::to_string(samples.size()) + " volumes to " + dir.string());

  Json j;
  j["count"] = spec.count;
  j["dims"] = {spec.dims[0], spec.dims[1], spec.dims[2]};
  j["vf_range"] = {spec.vf_lo, spec.vf_hi};
  j["corr_len"] = {spec.corr_lo, spec.corr_hi};
  j["seed"] = spec.seed;
  j["property"] = "planted: lower + (upper - lower) * vf * (c + (1 - c) * vf), c = 1 - s_x";
  j["manifest"] = rel(st, st.manifest);
  return j;
}

Json stage_preprocess(State& st) {
  const fs::path manifest = manifest_path(st);
  auto samples = load_manifest(manifest);
  const Backend backend = parse_backend(st.cfg.get("preprocess.backend", "none"));
  PreprocessSpec spec = PreprocessSpec::for_backend(backend);
  spec.patch_size = st.cfg.get_size("preprocess.patch", spec.patch_size);
  if (st.cfg.has("preprocess.target")) spec.target_size = st.cfg.get_size("preprocess.target", 0);
  spec.validate();

  const std::string mode_text = st.cfg.get("preprocess.section_mode", "center");
  SectionMode mode;
  std::array<std::size_t, 3> indices{0, 0, 0};
  if (mode_text == "center") {
    mode = SectionMode::Center;
  } else if (mode_text == "index") {
    mode = SectionMode::Index;
    const auto idx = st.cfg.get_sizes("preprocess.section_index");
    if (idx.size() != 3) throw Error("preprocess.section_index needs three values");
    indices = {idx[0], idx[1], idx[2]};
  } else {
    throw Error("preprocess.section_mode must be center or index");
  }

  const std::string seg_mode = st.cfg.get("preprocess.segment", "auto");
  if (seg_mode != "auto" && seg_mode != "always" && seg_mode != "never") {
    throw Error("preprocess.segment must be auto, always or never");
  }
  SegmentParams seg;
  seg.h = st.cfg.get_double("segment.h", seg.h);
  seg.template_window = static_cast<int>(st.cfg.get_size("segment.template", 7));
  seg.search_window = static_cast<int>(st.cfg.get_size("segment.search", 21));
  seg.block_size = static_cast<int>(st.cfg.get_size("segment.block", 11));
  seg.offset = st.cfg.get_double("segment.offset", seg.offset);
  seg.denoise = st.cfg.get_bool("segment.denoise", seg.denoise);
  seg.normalize_polarity = st.cfg.get_bool("segment.polarity", seg.normalize_polarity);

  const fs::path dir = output_path(st, "preprocess", "preprocess");
  fs::create_directories(dir);
  std::vector<std::vector<SectionRecord>> per_sample(samples.size());
  std::vector<double> vf(samples.size(), 0.0);
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t si = 0; si < count; ++si) {
    try {
      const auto& s = samples[static_cast<std::size_t>(si)];
      std::vector<PhaseMap> phases;
      std::vector<GrayImage> grays;
      for (const auto& p : s.image_paths) {
        if (is_volume(p)) {
          const auto sections = extract_sections(load_volume(p), mode, indices);
          for (const PhaseMap* m : sections.all()) phases.push_back(*m);
          continue;
        }
        GrayImage img = read_image(p);
        const bool binary = is_binary(img);
        if (seg_mode == "always" || (seg_mode == "auto" && !binary)) {
          phases.push_back(segment(img, seg));
        } else if (binary) {
          phases.push_back(to_phase(img));
        } else {
          grays.push_back(std::move(img));
        }
      }
      auto& records = per_sample[static_cast<std::size_t>(si)];
      double vf_sum = 0.0;
      for (const auto& m : phases) {
        const std::string id = section_id(s.sample_id, records.size());
        const PhaseMap out = prepare_binary_labels(m, spec);
        vf_sum += volume_fraction(out);
        const fs::path file = dir / (id + ".png");
        write_image(out, file);
        records.push_back({id, s.sample_id, file, "phase"});
      }
      for (const auto& g : grays) {
        const std::string id = section_id(s.sample_id, records.size());
        const fs::path file = dir / (id + ".png");
        write_image(prepare_gray_plane(g, spec), file);
        records.push_back({id, s.sample_id, file, "gray"});
      }
      if (!phases.empty()) vf[static_cast<std::size_t>(si)] = vf_sum / static_cast<double>(phases.size());
    } catch (const std::exception& e) {
#pragma omp critical(m2p_preprocess_failure)
      if (!failure) {
        failure = std::make_exception_ptr(
            Error("sample '" + samples[static_cast<std::size_t>(si)].sample_id + "': " + e.what()));
      }
    }
  }
  if (failure) std::rethrow_exception(failure);

  st.sections_index = dir / "index.csv";
  std::ofstream index(st.sections_index);
  index << "record_id,sample_id,path,kind\n";
  std::size_t phase_count = 0;
  std::size_t gray_count = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const auto& r : per_sample[i]) {
      index << csv::join({r.record_id, r.sample_id, r.path.filename().string(), r.kind}) << '\n';
      (r.kind == "phase" ? phase_count : gray_count)++;
    }
    if (!per_sample[i].empty() && per_sample[i].front().kind == "phase") {
      st.volume_fraction[samples[i].sample_id] = vf[i];
    }
  }
  if (!index) throw Error("cannot write " + st.sections_index.string());

  Json j;
  j["manifest"] = rel(st, manifest);
  j["backend"] = std::string(to_string(backend));
  j["patch"] = spec.patch_size;
  j["target"] = spec.target_size ? Json(*spec.target_size) : Json(nullptr);
  j["section_mode"] = mode_text;
  if (mode == SectionMode::Index) j["section_index"] = indices;
  j["segment"] = seg_mode;
  j["segment_params"] = {{"h", seg.h},
                         {"template", seg.template_window},
                         {"search", seg.search_window},
                         {"block", seg.block_size},
                         {"offset", seg.offset},
                         {"denoise", seg.denoise},
                         {"normalize_polarity", seg.normalize_polarity}};
  j["phase_maps"] = phase_count;
  j["gray_planes"] = gray_count;
  j["index"] = rel(st, st.sections_index);
  return j;
}

std::vector<SectionRecord> read_index(const fs::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows.front() != csv::Row{"record_id", "sample_id", "path", "kind"}) {
    throw Error("malformed section index " + path.string());
  }
  std::vector<SectionRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw Error("malformed section index row " + std::to_string(i));
    const fs::path p = rows[i][2];
    out.push_back({rows[i][0], rows[i][1], p.is_absolute() ? p : path.parent_path() / p, rows[i][3]});
  }
  return out;
}

Json stage_twopoint(State& st) {
  const fs::path index = need_input(st, "twopoint.sections", st.sections_index, "section index");
  const auto records = read_index(index);
  if (records.empty()) throw Error("section index is empty");

  const std::string kind_text = st.cfg.get("twopoint.kind", "auto");
  CorrelationKind kind;
  if (kind_text == "auto") {
    const auto phase = st.cfg.get_sizes("twopoint.phases", {1});
    if (phase.size() != 1 || phase[0] > 1) throw Error("twopoint.phases for auto needs one phase in {0,1}");
    kind = CorrelationKind::autocorrelation(static_cast<std::uint8_t>(phase[0]));
  } else if (kind_text == "cross") {
    const auto phases = st.cfg.get_sizes("twopoint.phases", {0, 1});
    if (phases.size() != 2 || phases[0] > 1 || phases[1] > 1 || phases[0] == phases[1]) {
      throw Error("twopoint.phases for cross needs two distinct phases in {0,1}");
    }
    kind = CorrelationKind::cross(static_cast<std::uint8_t>(phases[0]), static_cast<std::uint8_t>(phases[1]));
  } else {
    throw Error("twopoint.kind must be auto or cross");
  }
  const Boundary boundary = parse_boundary(st.cfg.get("twopoint.boundary", "periodic"));
  const std::size_t crop = st.cfg.get_size("twopoint.crop", 0);

  std::vector<PhaseMap> maps(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].kind != "phase") {
      throw Error("record '" + records[i].record_id + "' is not a phase map; enable segmentation");
    }
    maps[i] = to_phase(read_image(records[i].path));
  }
  auto corr = two_point_batch(maps, kind, boundary);
  FeatureSet set(twopoint_extractor_id(kind, boundary));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (crop > 0) corr[i] = center_crop_map(corr[i], crop);
    set.add({records[i].record_id, set.extractor_id(), vectorize(corr[i])});
  }
  st.features = output_path(st, "twopoint", "twopoint.mpfv");
  write_features(set, st.features);
  log::info("twopoint: " + std::to_string(set.size()) + " maps, dim " + std::to_string(set.dim()));

  Json j;
  j["sections"] = rel(st, index);
  j["kind"] = kind_text;
  j["phases"] = {kind.phase_a, kind.phase_b};
  j["boundary"] = std::string(to_string(boundary));
  j["crop"] = crop;
  j["extractor_id"] = set.extractor_id();
  j["records"] = set.size();
  j["dim"] = set.dim();
  j["output"] = rel(st, st.features);
  return j;
}

Json stage_aggregate(State& st) {
  const fs::path input = need_input(st, "aggregate.input", st.features, "features");
  const Aggregation method = parse_aggregation(st.cfg.get("aggregate.method", "concat"));
  const FeatureSet out = aggregate_sections(read_features(input), method);
  st.features = output_path(st, "aggregate", "features.mpfv");
  write_features(out, st.features);
  Json j;
  j["input"] = rel(st, input);
  j["method"] = std::string(to_string(method));
  j["samples"] = out.size();
  j["dim"] = out.dim();
  j["output"] = rel(st, st.features);
  return j;
}

std::unordered_map<std::string, CompositionVector> load_compositions(const State& st, fs::path& source) {
  std::unordered_map<std::string, CompositionVector> out;
  source = st.cfg.get_path("augment.composition");
  if (source.empty()) {
    source = manifest_path(st);
    for (const auto& s : load_manifest(source)) {
      if (!s.composition) throw Error("manifest has no composition columns");
      out[s.sample_id] = *s.composition;
    }
    return out;
  }
  std::vector<std::string> comments;
  const auto rows = csv::read_file(source, &comments);
  if (rows.empty() || rows.front().empty() || rows.front()[0] != "sample_id") {
    throw Error("composition file needs a sample_id header");
  }
  std::string convention = "unspecified";
  for (const auto& c : comments) {
    const auto pos = c.find("composition_units=");
    if (pos != std::string::npos) convention = c.substr(pos + 18);
  }
  const auto& header = rows.front();
  if (header.size() - 1 != kCompositionArity) {
    throw Error("composition arity " + std::to_string(header.size() - 1) + " != " + std::to_string(kCompositionArity));
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) throw Error("composition row " + std::to_string(r) + ": wrong field count");
    CompositionVector c{std::vector<std::string>(header.begin() + 1, header.end()), {}, convention};
    for (std::size_t k = 1; k < rows[r].size(); ++k) {
      const auto v = csv::parse_double(rows[r][k]);
      if (!v) throw Error("composition row " + std::to_string(r) + ": non-numeric value");
      c.values.push_back(*v);
    }
    if (!out.emplace(rows[r][0], std::move(c)).second) throw Error("duplicate sample_id '" + rows[r][0] + "'");
  }
  return out;
}

Json stage_augment(State& st) {
  const fs::path input = need_input(st, "augment.input", st.features, "features");
  const FeatureSet in = read_features(input);
  fs::path source;
  const auto comps = load_compositions(st, source);
  FeatureSet out(in.extractor_id() + "+composition");
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto it = comps.find(in.id(i));
    if (it == comps.end()) throw Error("no composition for sample '" + in.id(i) + "'");
    auto v = append_composition(in.vector(i), it->second);
    v.extractor_id = out.extractor_id();
    out.add(std::move(v));
  }
  st.features = output_path(st, "augment", "augmented.mpfv");
  write_features(out, st.features);
  Json j;
  j["input"] = rel(st, input);
  j["composition"] = rel(st, source);
  j["convention"] = comps.empty() ? "unspecified" : comps.begin()->second.convention;
  j["dim"] = out.dim();
  j["output"] = rel(st, st.features);
  return j;
}

Json stage_pca(State& st) {
  const fs::path input = need_input(st, "pca.input", st.features, "features");
  const FeatureSet set = read_features(input);
  const std::size_t limit = max_feasible_k(set.size(), set.dim());
  const std::size_t k = std::min(st.cfg.get_size("pca.components", std::min<std::size_t>(limit, 60)), limit);
  const PcaModel pca = fit_pca(set, k);
  const fs::path scree_path = output_path(st, "pca", "scree.csv");
  const auto entries = scree(pca, std::min<std::size_t>(k, st.cfg.get_size("pca.scree_count", k)));
  write_scree_csv(entries, scree_path.string());
  const FeatureSet scores = transform(pca, set);
  const fs::path scores_path = st.out / "pca_scores.mpfv";
  write_features(scores, scores_path);

  Json j;
  j["input"] = rel(st, input);
  j["components"] = k;
  j["pc1_ratio"] = pca.explained_variance_ratio(0);
  j["cumulative_ratio"] = entries.back().cumulative;
  bool have_vf = !st.volume_fraction.empty();
  for (std::size_t i = 0; have_vf && i < scores.size(); ++i) have_vf = st.volume_fraction.count(scores.id(i)) != 0;
  if (have_vf) {
    try {
      j["pc1_vf_pearson"] = pc_volume_fraction_correlation(scores, st.volume_fraction);
    } catch (const Error& e) {
      log::warn(std::string("pca: correlation with volume fraction skipped: ") + e.what());
    }
  }
  j["scree"] = rel(st, scree_path);
  j["scores"] = rel(st, scores_path);
  return j;
}

Json stage_train(State& st) {
  const fs::path input = need_input(st, "model.input", st.features, "features");
  const FeatureSet set = read_features(input);
  const Eigen::VectorXd y = targets_for(set, load_targets(st));
  const ModelRecipe recipe = recipe_from(st.cfg);
  const std::size_t n_train = set.size() - set.size() / 10;
  const std::size_t limit = max_feasible_k(n_train - n_train * 20 / 100, set.dim());
  auto grid = st.cfg.get_sizes("model.pc_grid", default_pc_grid(limit));
  const HoldoutReport rep = run_holdout(set, y, recipe, grid, st.seed);

  st.parity = output_path(st, "train", "parity.csv");
  write_parity_csv(rep.parity, st.parity);
  const fs::path model_path = st.out / "model.txt";
  save_model(rep.model.regressor, model_path);

  Json j;
  j["input"] = rel(st, input);
  j["extractor_id"] = set.extractor_id();
  j["model"] = recipe_json(recipe);
  j["split"] = {{"test_percent", rep.plan.test_percent},
                {"train_parts", rep.plan.train_parts},
                {"val_parts", rep.plan.val_parts},
                {"train", rep.plan.rows(Subset::Train).size()},
                {"validation", rep.plan.rows(Subset::Validation).size()},
                {"test", rep.plan.rows(Subset::Test).size()}};
  j["pc_grid"] = grid;
  Json entries = Json::array();
  for (const auto& e : rep.grid.entries) {
    Json ej{{"k", e.k}, {"mape", e.mape}};
    if (recipe.regressor.type == ModelType::Svr) ej["c"] = e.c;
    entries.push_back(ej);
  }
  j["grid"] = entries;
  j["best_k"] = rep.grid.best_k;
  if (recipe.regressor.type == ModelType::Svr) j["best_c"] = rep.grid.best_c;
  j["validation_mape"] = rep.validation_mape;
  j["test_mape"] = rep.test_mape;
  j["parity"] = rel(st, st.parity);
  j["model_file"] = rel(st, model_path);
  return j;
}

Json stage_cv(State& st) {
  const fs::path input = need_input(st, "model.input", st.features, "features");
  const FeatureSet set = read_features(input);
  const Eigen::VectorXd y = targets_for(set, load_targets(st));
  CvConfig cfg;
  cfg.recipe = recipe_from(st.cfg);
  cfg.folds = st.cfg.get_size("cv.folds", cfg.folds);
  cfg.inner_folds = st.cfg.get_size("cv.inner_folds", cfg.inner_folds);
  cfg.pc_grid = st.cfg.get_sizes("model.pc_grid");
  cfg.seed = st.seed;
  const CvReport rep = nested_cv(set, y, cfg);
  const fs::path path = output_path(st, "cv", "cv_report.json");
  std::ofstream(path) << rep.to_json() << '\n';
  st.fold_mape.clear();
  for (const auto& f : rep.fold_results) st.fold_mape.push_back(f.mape);

  Json j;
  j["input"] = rel(st, input);
  j["model"] = recipe_json(cfg.recipe);
  j["folds"] = cfg.folds;
  j["inner_folds"] = cfg.inner_folds;
  j["pc_grid"] = cfg.pc_grid.empty() ? Json("default") : Json(cfg.pc_grid);
  j["report"] = Json::parse(rep.to_json());
  j["output"] = rel(st, path);
  return j;
}

Json stage_plot(State& st) {
  Json j;
  const fs::path parity = st.cfg.get_path("plot.parity").empty() ? st.parity : st.cfg.get_path("plot.parity");
  if (parity.empty() && st.fold_mape.empty()) throw Error("nothing to plot (no parity data or CV folds)");
  if (!parity.empty()) {
    const fs::path svg = output_path(st, "plot", "parity.svg");
    plot::render_parity_svg(parity, svg);
    j["parity"] = rel(st, svg);
  }
  if (!st.fold_mape.empty()) {
    const fs::path svg = st.out / "cv_folds.svg";
    std::ofstream(svg) << plot::fold_error_svg(st.fold_mape);
    j["folds"] = rel(st, svg);
  }
  return j;
}

}  // namespace

RunResult run(const Config& config) {
  if (config.stages().empty()) throw Error("config: no stages declared");
  State st{config, {}, config.seed(), {}, {}, {}, {}, {}, {}, Json::object()};
  st.out = config.get_path("out_dir");
  if (st.out.empty()) st.out = "m2p_out";
  fs::create_directories(st.out);
  st.manifest = config.get_path("input.manifest");

  st.report["seed"] = st.seed;
  st.report["stages"] = Json::array();
  RunResult result{st.out, {}, {}};
  for (const auto& name : config.stages()) {
    Json entry;
    entry["stage"] = name;
    try {
      Json params;
      if (name == "synth") {
        params = stage_synth(st);
      } else if (name == "preprocess") {
        params = stage_preprocess(st);
      } else if (name == "twopoint") {
        params = stage_twopoint(st);
      } else if (name == "aggregate") {
        params = stage_aggregate(st);
      } else if (name == "augment") {
        params = stage_augment(st);
      } else if (name == "pca") {
        params = stage_pca(st);
      } else if (name == "train") {
        params = stage_train(st);
      } else if (name == "cv") {
        params = stage_cv(st);
      } else if (name == "plot") {
        params = stage_plot(st);
      } else if (name == "report") {
        const fs::path path = output_path(st, "report", "report.json");
        st.report["stages"].push_back({{"stage", name}, {"output", rel(st, path)}});
        std::ofstream out(path);
        out << st.report.dump(2) << '\n';
        if (!out) throw Error("cannot write " + path.string());
        result.report = path;
        result.stages.push_back(name);
        continue;
      } else {
        throw Error("unknown stage");
      }
      for (auto& [k, v] : params.items()) entry[k] = v;
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    st.report["stages"].push_back(entry);
    result.stages.push_back(name);
  }
  return result;
}

}  // namespace m2p::pipeline
