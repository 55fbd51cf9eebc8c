#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace capgen {

/// Writes to a uniquely named sibling temporary file, then renames it over
/// `path`. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Whole file as bytes; throws ConfigError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace capgen
