#include "pbnn/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pbnn/errors.hpp"

namespace pbnn {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return s;
}

namespace {

void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

double read_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_binary_block(const std::filesystem::path& path, const std::string& header_json,
                        std::span<const double> values) {
  if (header_json.find('\n') != std::string::npos) {
    throw ArgumentError("binary block header must be single-line JSON");
  }
  std::string out;
  out.reserve(header_json.size() + 1 + values.size() * 8);
  out += header_json;
  out.push_back('\n');
  for (double v : values) append_le(out, v);
  write_text_atomic(path, out);
}

BinaryBlock read_binary_block(const std::filesystem::path& path) {
  const std::string raw = read_text(path);
  const std::size_t nl = raw.find('\n');
  if (nl == std::string::npos) throw IoError(path.string() + ": missing header line");
  BinaryBlock block;
  block.header_json = raw.substr(0, nl);
  const std::size_t payload = raw.size() - nl - 1;
  if (payload % 8 != 0) throw IoError(path.string() + ": truncated float64 payload");
  block.values.resize(payload / 8);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data() + nl + 1);
  for (std::size_t i = 0; i < block.values.size(); ++i) block.values[i] = read_le(p + 8 * i);
  return block;
}

}  // namespace pbnn
