#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace stoplight::io {

/// Scientific notation with 17 significant digits; round-trips every double.
std::string fmt(double value);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

/// Writes `content` and returns its SHA-256 digest.
std::string write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace stoplight::io
