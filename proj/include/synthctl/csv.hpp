#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace synthctl::csv {

/// One parsed record plus the 1-based line number it started on.
struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Parses comma-delimited text with RFC 4180 quoting. The first record is
/// returned like any other; callers decide whether it is a header.
std::vector<Record> parse(std::string_view text);

std::vector<Record> read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal representation that round-trips to the same double.
std::string format_number(double value);

/// Strict parse: the whole field must be consumed and the result finite.
bool parse_number(std::string_view text, double& out);

}  // namespace synthctl::csv
