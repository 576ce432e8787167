#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nadir::text {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

std::vector<std::string> split(std::string_view line, char sep);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a; stable across platforms, used for config hashes.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace nadir::text
