#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kalm {

bool is_valid_utf8(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
/// Splits on '\t'; at most `max_fields` fields, the last one keeps any remaining tabs.
std::vector<std::string> split_tabs(std::string_view s, std::size_t max_fields = 0);

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

}  // namespace kalm
