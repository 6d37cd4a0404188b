#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "romf/nn/tensor.hpp"

namespace romf::io {

inline constexpr std::uint32_t kMatrixVersion = 1;

/// "ROMF" magic, u32 version, u32 rows, u32 cols, then rows*cols
/// little-endian f64 in row-major order.
std::string encode_matrix(const nn::Tensor2& m);
/// Decodes one matrix starting at `offset`; advances `offset` past it.
nn::Tensor2 decode_matrix(std::string_view bytes, std::size_t& offset);

void write_matrix(const std::filesystem::path& path, const nn::Tensor2& m);
nn::Tensor2 read_matrix(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Throws MissingArtifactError naming `what` when `path` does not exist.
void require_exists(const std::filesystem::path& path, std::string_view what);

}  // namespace romf::io
