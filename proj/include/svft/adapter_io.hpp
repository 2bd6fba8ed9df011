#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svft/adapter.hpp"

namespace svft::io {

inline constexpr std::uint16_t kAdapterFormatVersion = 1;

/// On-disk adapter, all integers little-endian, floats IEEE-754 binary64:
///
///   "SVFT"  u16 version  u8 adapter_kind(0)  u8 flags(bit0 = truncated base)
///   u32 d1  u32 d2  u32 effective_rank
///   u8 pattern_kind, kind parameters
///       Banded: u32 band   Random: u32 total, u64 seed   TopK: u32 k
///   u32 count, count × (u32 row, u32 col)
///   count × f64 values
///   u64 base_checksum
struct AdapterFile {
  std::uint16_t version = kAdapterFormatVersion;
  std::uint32_t d1 = 0;
  std::uint32_t d2 = 0;
  std::uint32_t effective_rank = 0;
  bool truncate_base = false;
  PatternParams pattern_params;
  std::vector<Coord> indices;
  std::vector<double> values;
  std::uint64_t base_checksum = 0;
};

/// 64-bit FNV-1a over u32 rows, u32 cols, then every entry as f64, row-major.
std::uint64_t base_checksum(const Matrix& w0);

std::vector<std::uint8_t> encode(const AdapterFile& file);
/// Throws FormatError (truncated, bad magic, trailing bytes, inconsistent
/// counts) or UnsupportedVersionError.
AdapterFile decode(std::span<const std::uint8_t> bytes);

AdapterFile to_file(const SvftAdapter& adapter, const Matrix& w0);
/// Throws ChecksumError unless `w0` is the base the file was saved against.
SvftAdapter from_file(const AdapterFile& file, const Matrix& w0);

void save_adapter(const std::string& path, const SvftAdapter& adapter, const Matrix& w0);
SvftAdapter load_adapter(const std::string& path, const Matrix& w0);
AdapterFile read_adapter_file(const std::string& path);

}  // namespace svft::io
