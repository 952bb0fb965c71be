#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fibril {

/// Shortest decimal that parses back to the identical double.
std::string format_double(double value);

/// Strict full-field parse; throws ParseError(where, ...) on junk.
double parse_double(std::string_view text, const std::string& where);

std::vector<std::string_view> split_csv_line(std::string_view line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace fibril
