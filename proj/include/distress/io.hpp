#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace distress::io {

/// Splits one delimited line. Double quotes group fields containing the
/// delimiter; a doubled quote inside a quoted field is a literal quote.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

/// Reads the next logical line, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line);

std::string_view trim(std::string_view text) noexcept;

/// Strict decimal parse of the whole (trimmed) field; nullopt otherwise.
std::optional<double> parse_double(std::string_view text) noexcept;
std::optional<long long> parse_integer(std::string_view text) noexcept;

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Quotes a field when it contains the delimiter, a quote, or a newline.
std::string quote_field(std::string_view field, char delimiter);

/// Writes `contents` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace distress::io
