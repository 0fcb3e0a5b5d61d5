#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pbnn {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

double parse_double(std::string_view text);

std::vector<std::string_view> split_csv_line(std::string_view line);

std::string read_text(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames, so readers never see a partial file.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

/// 16 hex digits.
std::string hex64(std::uint64_t v);

/// Header JSON on the first line, then `values` as raw little-endian float64.
void write_binary_block(const std::filesystem::path& path, const std::string& header_json,
                        std::span<const double> values);

struct BinaryBlock {
  std::string header_json;
  std::vector<double> values;
};

BinaryBlock read_binary_block(const std::filesystem::path& path);

}  // namespace pbnn
