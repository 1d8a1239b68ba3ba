#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace gridmrf {

// Writes via a sibling temp file followed by rename, so readers never observe
// a partially written result.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Fixed-format double for CSV cells: round-trippable, locale-independent.
std::string format_double(double v);

}  // namespace gridmrf
