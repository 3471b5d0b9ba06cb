#include "m2p/csv.hpp"

#include <charconv>
#include <fstream>

#include "m2p/error.hpp"

namespace m2p::csv {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Row split_line(std::string_view line) {
  Row fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      if (trim(current).empty()) current.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? current : std::string(trim(current)));
      current.clear();
      was_quoted = false;
    } else if (!was_quoted || (c != ' ' && c != '\t' && c != '\r')) {
      current.push_back(c);
    }
  }
  if (quoted) throw Error("csv: unterminated quote in line: " + std::string(line));
  fields.push_back(was_quoted ? current : std::string(trim(current)));
  return fields;
}

std::vector<Row> read_file(const std::filesystem::path& path, std::vector<std::string>* comments) {
  std::ifstream in(path);
  if (!in) throw Error("csv: cannot open " + path.string());
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      if (comments) comments->push_back(line);
      continue;
    }
    rows.push_back(split_line(line));
  }
  return rows;
}

std::string join(const Row& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out.push_back('"');
      for (char c : f) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    } else {
      out += f;
    }
  }
  return out;
}

std::optional<double> parse_double(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("csv: cannot format number");
  return std::string(buf, ptr);
}

}  // namespace m2p::csv
