#include "romf/io.hpp"

#include <bit>
#include <fstream>
#include <limits>
#include <sstream>

#include "romf/error.hpp"

namespace romf::io {

namespace {

constexpr char kMagic[4] = {'R', 'O', 'M', 'F'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode_matrix(const nn::Tensor2& m) {
  constexpr auto limit = std::numeric_limits<std::uint32_t>::max();
  if (m.rows() > limit || m.cols() > limit) throw IoError("matrix too large for ROMF format");
  std::string out(kMagic, 4);
  out.reserve(16 + 8 * m.size());
  put_u32(out, kMatrixVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_f64(out, v);
  return out;
}

nn::Tensor2 decode_matrix(std::string_view bytes, std::size_t& offset) {
  if (bytes.size() < offset + 16 || bytes.substr(offset, 4) != std::string_view(kMagic, 4)) {
    throw IoError("not a ROMF matrix (bad magic)");
  }
  const auto version = get_le(bytes, offset + 4, 4);
  if (version != kMatrixVersion) {
    throw IoError("unsupported ROMF version " + std::to_string(version));
  }
  const auto rows = static_cast<std::size_t>(get_le(bytes, offset + 8, 4));
  const auto cols = static_cast<std::size_t>(get_le(bytes, offset + 12, 4));
  offset += 16;
  if (bytes.size() < offset + 8 * rows * cols) throw IoError("truncated ROMF matrix");
  nn::Tensor2 m(rows, cols);
  for (double& v : m.data()) {
    v = std::bit_cast<double>(get_le(bytes, offset, 8));
    offset += 8;
  }
  return m;
}

void write_matrix(const std::filesystem::path& path, const nn::Tensor2& m) {
  write_file_atomic(path, encode_matrix(m));
}

nn::Tensor2 read_matrix(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t offset = 0;
  nn::Tensor2 m = decode_matrix(bytes, offset);
  if (offset != bytes.size()) throw IoError(path.string() + ": trailing bytes after matrix");
  return m;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw MissingArtifactError("missing file: " + path.string());
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_exists(const std::filesystem::path& path, std::string_view what) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifactError("missing " + std::string(what) + ": " + path.string());
  }
}

}  // namespace romf::io
