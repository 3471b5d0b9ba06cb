#include "m2p/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "m2p/csv.hpp"
#include "m2p/error.hpp"

namespace m2p {

namespace fs = std::filesystem;

Unit parse_unit(std::string_view text) {
  if (text == "GPa") return Unit::GPa;
  if (text == "kgf_mm2") return Unit::KgfPerMm2;
  if (text == "dimensionless") return Unit::Dimensionless;
  throw Error("unknown target unit '" + std::string(text) + "'");
}

std::string_view to_string(Unit unit) {
  switch (unit) {
    case Unit::GPa:
      return "GPa";
    case Unit::KgfPerMm2:
      return "kgf_mm2";
    case Unit::Dimensionless:
      return "dimensionless";
  }
  return "dimensionless";
}

double convert_hardness(double value, Unit from, Unit to) {
  if (!std::isfinite(value)) throw Error("convert_hardness: non-finite value");
  if (from == to) return value;
  constexpr double kGpaToKgf = 1000.0 / kStandardGravity;
  if (from == Unit::GPa && to == Unit::KgfPerMm2) return value * kGpaToKgf;
  if (from == Unit::KgfPerMm2 && to == Unit::GPa) return value / kGpaToKgf;
  throw Error("convert_hardness: unsupported unit pair " + std::string(to_string(from)) + " -> " +
              std::string(to_string(to)));
}

void normalize_hardness(std::vector<SampleManifest>& samples) {
  for (auto& s : samples) {
    if (s.target_unit == Unit::GPa) {
      s.target_value = convert_hardness(s.target_value, Unit::GPa, Unit::KgfPerMm2);
      s.target_unit = Unit::KgfPerMm2;
    }
  }
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<SampleManifest> load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw Error("manifest: missing file " + path.string());
  std::vector<std::string> comments;
  const auto rows = csv::read_file(path, &comments);
  if (rows.empty()) throw Error("manifest: no header in " + path.string());

  std::string convention = "unspecified";
  for (const auto& c : comments) {
    const auto pos = c.find("composition_units=");
    if (pos != std::string::npos) convention = c.substr(pos + 18);
  }

  const auto& header = rows.front();
  if (header.empty() || header[0] != "sample_id") {
    throw Error("manifest: header must start with sample_id");
  }
  static const std::regex image_col("image_[1-3]");
  std::size_t col = 1;
  std::size_t image_cols = 0;
  while (col < header.size() && std::regex_match(header[col], image_col)) {
    ++image_cols;
    ++col;
  }
  if (image_cols == 0 || image_cols > 3) throw Error("manifest: expected 1..3 image columns");
  if (col + 1 >= header.size() || header[col] != "target" || header[col + 1] != "target_unit") {
    throw Error("manifest: expected target,target_unit after image columns");
  }
  const std::size_t target_col = col;
  const std::size_t first_element = col + 2;
  const std::size_t element_count = header.size() - first_element;
  if (element_count != 0 && element_count != kCompositionArity) {
    throw Error("manifest: composition arity " + std::to_string(element_count) + " != " +
                std::to_string(kCompositionArity));
  }
  const std::vector<std::string> elements(header.begin() + static_cast<std::ptrdiff_t>(first_element),
                                          header.end());

  const fs::path base = path.parent_path();
  std::vector<SampleManifest> out;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "manifest row " + std::to_string(r);
    if (row.size() != header.size()) {
      if (element_count == kCompositionArity || row.size() < first_element) {
        throw Error(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                    std::to_string(row.size()));
      }
      throw Error(where + ": composition arity " + std::to_string(row.size() - first_element) +
                  " != " + std::to_string(kCompositionArity));
    }
    SampleManifest s;
    s.sample_id = row[0];
    if (s.sample_id.empty()) throw Error(where + ": empty sample_id");
    if (!seen.insert(s.sample_id).second) {
      throw Error(where + ": duplicate sample_id '" + s.sample_id + "'");
    }
    for (std::size_t i = 0; i < image_cols; ++i) {
      const auto& field = row[1 + i];
      if (field.empty()) {
        if (i == 0) throw Error(where + ": image_1 is required");
        continue;
      }
      fs::path p(field);
      if (p.is_relative()) p = base / p;
      if (!fs::exists(p)) throw Error(where + ": missing image file " + p.string());
      s.image_paths.push_back(p);
    }
    const auto target = csv::parse_double(row[target_col]);
    if (!target) throw Error(where + ": non-numeric target '" + row[target_col] + "'");
    if (!std::isfinite(*target)) throw Error(where + ": non-finite target");
    s.target_value = *target;
    s.target_unit = parse_unit(row[target_col + 1]);
    if (element_count == kCompositionArity) {
      CompositionVector comp;
      comp.element_names = elements;
      comp.convention = convention;
      for (std::size_t e = 0; e < element_count; ++e) {
        const auto v = csv::parse_double(row[first_element + e]);
        if (!v || !std::isfinite(*v) || *v < 0.0) {
          throw Error(where + ": invalid composition value for " + elements[e]);
        }
        comp.values.push_back(*v);
      }
      s.composition = std::move(comp);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(const std::vector<SampleManifest>& samples, const fs::path& path) {
  std::size_t image_cols = 1;
  for (const auto& s : samples) image_cols = std::max(image_cols, s.image_paths.size());
  if (image_cols > 3) throw Error("manifest: at most 3 images per sample");
  const CompositionVector* comp = nullptr;
  for (const auto& s : samples) {
    if (s.composition) {
      comp = &*s.composition;
      break;
    }
  }
  std::ofstream out(path);
  if (!out) throw Error("manifest: cannot write " + path.string());
  if (comp) out << "# composition_units=" << comp->convention << '\n';
  csv::Row header{"sample_id"};
  for (std::size_t i = 0; i < image_cols; ++i) header.push_back("image_" + std::to_string(i + 1));
  header.push_back("target");
  header.push_back("target_unit");
  if (comp) header.insert(header.end(), comp->element_names.begin(), comp->element_names.end());
  out << csv::join(header) << '\n';
  const fs::path base = path.parent_path();
  for (const auto& s : samples) {
    csv::Row row{s.sample_id};
    for (std::size_t i = 0; i < image_cols; ++i) {
      if (i < s.image_paths.size()) {
        const auto& p = s.image_paths[i];
        row.push_back(p.is_absolute() ? fs::relative(p, fs::absolute(base)).generic_string()
                                      : p.generic_string());
      } else {
        row.emplace_back();
      }
    }
    row.push_back(csv::format_double(s.target_value));
    row.emplace_back(to_string(s.target_unit));
    if (comp) {
      if (!s.composition || s.composition->values.size() != comp->element_names.size()) {
        throw Error("manifest: sample '" + s.sample_id + "' lacks a composition");
      }
      for (double v : s.composition->values) row.push_back(csv::format_double(v));
    }
    out << csv::join(row) << '\n';
  }
  if (!out) throw Error("manifest: I/O failure writing " + path.string());
}

// ---------------------------------------------------------------------------
// Volumes

double Volume3D::volume_fraction() const {
  if (voxels.empty()) return 0.0;
  const auto ones = std::count(voxels.begin(), voxels.end(), std::uint8_t{1});
  return static_cast<double>(ones) / static_cast<double>(voxels.size());
}

void check_volume(const Volume3D& v) {
  if (v.nx < 1 || v.ny < 1 || v.nz < 1) throw Error("volume: degenerate dims");
  if (v.voxels.size() != v.nx * v.ny * v.nz) throw Error("volume: size mismatch");
  for (auto label : v.voxels) {
    if (label > 1) throw Error("volume: label outside {0,1}");
  }
}

fs::path volume_sidecar(const fs::path& payload) {
  fs::path meta = payload;
  meta.replace_extension(".meta");
  return meta;
}

Volume3D load_volume(const fs::path& payload) {
  const fs::path meta = volume_sidecar(payload);
  std::ifstream side(meta);
  if (!side) throw Error("volume: missing sidecar " + meta.string());
  Volume3D v;
  std::string line;
  while (std::getline(side, line)) {
    for (char& c : line) {
      if (c == '=' || c == ':') c = ' ';
    }
    std::istringstream fields(line);
    std::string key;
    long long value = 0;
    if (!(fields >> key) || key.front() == '#') continue;
    if (!(fields >> value) || value < 1) throw Error("volume: bad sidecar field '" + key + "'");
    if (key == "nx") v.nx = static_cast<std::size_t>(value);
    if (key == "ny") v.ny = static_cast<std::size_t>(value);
    if (key == "nz") v.nz = static_cast<std::size_t>(value);
  }
  if (v.nx == 0 || v.ny == 0 || v.nz == 0) throw Error("volume: sidecar must declare nx, ny, nz");

  std::ifstream in(payload, std::ios::binary);
  if (!in) throw Error("volume: missing payload " + payload.string());
  v.voxels.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (v.voxels.size() != v.nx * v.ny * v.nz) {
    throw Error("volume: size mismatch, declared " + std::to_string(v.nx * v.ny * v.nz) +
                " voxels, payload has " + std::to_string(v.voxels.size()));
  }
  check_volume(v);
  return v;
}

void save_volume(const Volume3D& v, const fs::path& payload) {
  check_volume(v);
  {
    std::ofstream side(volume_sidecar(payload));
    side << "nx = " << v.nx << "\nny = " << v.ny << "\nnz = " << v.nz << '\n';
    if (!side) throw Error("volume: I/O failure writing sidecar");
  }
  std::ofstream out(payload, std::ios::binary);
  out.write(reinterpret_cast<const char*>(v.voxels.data()),
            static_cast<std::streamsize>(v.voxels.size()));
  if (!out) throw Error("volume: I/O failure writing " + payload.string());
}

// ---------------------------------------------------------------------------
// Feature files

namespace {

class ByteWriter {
 public:
  void u16(std::uint16_t v) {
    bytes_.push_back(static_cast<std::uint8_t>(v));
    bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error("mpfv: string longer than 65535 bytes");
    }
    u16(static_cast<std::uint16_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::size_t len = u16();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error("mpfv: truncated record");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool is_csv(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv";
}

FeatureSet read_features_csv(const fs::path& path) {
  std::vector<std::string> comments;
  const auto rows = csv::read_file(path, &comments);
  FeatureSet set;
  for (const auto& c : comments) {
    const auto pos = c.find("extractor_id=");
    if (pos != std::string::npos) set.set_extractor_id(c.substr(pos + 13));
  }
  if (rows.empty() || rows.front().empty() || rows.front()[0] != "sample_id") {
    throw Error("feature csv: header must start with sample_id");
  }
  const std::size_t dim = rows.front().size() - 1;
  if (dim == 0) throw Error("feature csv: no feature columns");
  std::vector<double> values(dim);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != dim + 1) throw Error("feature csv: truncated record at row " + std::to_string(r));
    for (std::size_t j = 0; j < dim; ++j) {
      const auto v = csv::parse_double(rows[r][j + 1]);
      if (!v) throw Error("feature csv: non-numeric value at row " + std::to_string(r));
      values[j] = *v;
    }
    set.add(rows[r][0], values);
  }
  return set;
}

void write_features_csv(const FeatureSet& set, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("feature csv: cannot write " + path.string());
  out << "# extractor_id=" << set.extractor_id() << '\n';
  csv::Row header{"sample_id"};
  for (std::size_t j = 0; j < set.dim(); ++j) header.push_back("f" + std::to_string(j));
  out << csv::join(header) << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    csv::Row row{set.id(i)};
    for (double v : set.row(i)) row.push_back(csv::format_double(v));
    out << csv::join(row) << '\n';
  }
  if (!out) throw Error("feature csv: I/O failure writing " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_mpfv(const FeatureSet& set) {
  if (set.size() > std::numeric_limits<std::uint32_t>::max() ||
      set.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("mpfv: set too large");
  }
  ByteWriter w;
  w.raw("MPFV");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(set.dim()));
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.str(set.extractor_id());
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.str(set.id(i));
    for (double v : set.row(i)) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) throw Error("mpfv: value of '" + set.id(i) + "' overflows f32");
      w.f32(f);
    }
  }
  return w.take();
}

FeatureSet decode_mpfv(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || bytes[0] != 'M' || bytes[1] != 'P' || bytes[2] != 'F' || bytes[3] != 'V') {
    throw Error("mpfv: bad magic");
  }
  ByteReader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != 1) throw Error("mpfv: unsupported version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  const std::uint32_t count = r.u32();
  FeatureSet set(r.str());
  if (dim == 0 && count > 0) throw Error("mpfv: zero dim");
  std::vector<double> values(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string id = r.str();
    for (std::uint32_t j = 0; j < dim; ++j) {
      const float f = r.f32();
      if (!std::isfinite(f)) throw Error("mpfv: NaN/Inf value in record '" + id + "'");
      values[j] = f;
    }
    if (set.find(id)) throw Error("mpfv: duplicate id '" + id + "'");
    set.add(id, values);
  }
  if (r.remaining() != 0) {
    throw Error("mpfv: " + std::to_string(r.remaining()) + " trailing bytes after declared count");
  }
  return set;
}

FeatureSet read_features(const fs::path& path) {
  if (is_csv(path)) return read_features_csv(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("mpfv: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_mpfv(bytes);
}

void write_features(const FeatureSet& set, const fs::path& path) {
  if (is_csv(path)) return write_features_csv(set, path);
  const auto bytes = encode_mpfv(set);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("mpfv: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("mpfv: I/O failure writing " + path.string());
}

}  // namespace m2p
