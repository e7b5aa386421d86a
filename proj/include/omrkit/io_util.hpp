#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace omrkit {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace omrkit
