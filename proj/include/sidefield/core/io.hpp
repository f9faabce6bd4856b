#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sidefield::io {

/// Writes via a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

std::string base64_encode(std::string_view bytes);

}  // namespace sidefield::io
