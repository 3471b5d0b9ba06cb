#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace m2p::csv {

using Row = std::vector<std::string>;

// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
// Surrounding whitespace of unquoted fields is trimmed.
Row split_line(std::string_view line);

// Reads all non-empty lines; lines starting with '#' are skipped unless
// `comments` is non-null, in which case they are collected there.
std::vector<Row> read_file(const std::filesystem::path& path,
                           std::vector<std::string>* comments = nullptr);

std::string join(const Row& fields);

// Strict numeric parsing: the whole field must be consumed.
std::optional<double> parse_double(std::string_view field);

// Shortest representation that round-trips to the same double.
std::string format_double(double value);

}  // namespace m2p::csv
