#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cvemap::detail {

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

void append_line(const std::filesystem::path& path, std::string_view line);

/// Splits on '\n', strips a trailing '\r' and skips blank lines.
std::vector<std::string_view> split_lines(std::string_view text);

std::string_view trim(std::string_view text);

std::string to_lower_ascii(std::string_view text);

}  // namespace cvemap::detail
