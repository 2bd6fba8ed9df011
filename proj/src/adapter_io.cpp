#include "svft/adapter_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "svft/errors.hpp"

namespace svft::io {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'V', 'F', 'T'};
constexpr std::uint8_t kAdapterKindSvft = 0;
constexpr std::uint8_t kFlagTruncateBase = 0x1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1, "u8")); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2, "u16")); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
  std::uint64_t u64() { return get(8, "u64"); }
  double f64() { return std::bit_cast<double>(get(8, "f64")); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t get(std::size_t bytes, const char* what) {
    if (remaining() < bytes) {
      std::ostringstream msg;
      msg << "adapter file truncated: needed " << bytes << " bytes for " << what << " at offset " << pos_;
      throw FormatError(msg.str());
    }
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(in_[pos_ + b]) << (8 * b);
    pos_ += bytes;
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t base_checksum(const Matrix& w0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) {
      h ^= static_cast<std::uint8_t>(v >> (8 * b));
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint32_t>(w0.rows()), 4);
  mix(static_cast<std::uint32_t>(w0.cols()), 4);
  for (double v : w0.data()) mix(std::bit_cast<std::uint64_t>(v), 8);
  return h;
}

std::vector<std::uint8_t> encode(const AdapterFile& f) {
  if (f.values.size() != f.indices.size()) throw ValueError("adapter file: values and indices differ in length");
  Writer w;
  for (std::uint8_t c : kMagic) w.u8(c);
  w.u16(f.version);
  w.u8(kAdapterKindSvft);
  w.u8(f.truncate_base ? kFlagTruncateBase : 0);
  w.u32(f.d1);
  w.u32(f.d2);
  w.u32(f.effective_rank);
  w.u8(static_cast<std::uint8_t>(f.pattern_params.kind));
  switch (f.pattern_params.kind) {
    case PatternKind::Banded: w.u32(f.pattern_params.band); break;
    case PatternKind::Random:
      w.u32(f.pattern_params.count);
      w.u64(f.pattern_params.seed);
      break;
    case PatternKind::TopK: w.u32(f.pattern_params.count); break;
    case PatternKind::Plain:
    case PatternKind::Custom: break;
  }
  w.u32(static_cast<std::uint32_t>(f.indices.size()));
  for (const Coord c : f.indices) {
    w.u32(c.row);
    w.u32(c.col);
  }
  for (double v : f.values) w.f64(v);
  w.u64(f.base_checksum);
  return w.take();
}

AdapterFile decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (std::uint8_t c : kMagic)
    if (r.u8() != c) throw FormatError("not an adapter file (bad magic)");
  AdapterFile f;
  f.version = r.u16();
  if (f.version > kAdapterFormatVersion || f.version == 0)
    throw UnsupportedVersionError("adapter file version " + std::to_string(f.version) +
                                  " is not supported (this build reads version " +
                                  std::to_string(kAdapterFormatVersion) + ")");
  if (const auto kind = r.u8(); kind != kAdapterKindSvft)
    throw FormatError("unknown adapter kind " + std::to_string(kind));
  const std::uint8_t flags = r.u8();
  if (flags & ~kFlagTruncateBase) throw FormatError("unknown adapter flags");
  f.truncate_base = flags & kFlagTruncateBase;
  f.d1 = r.u32();
  f.d2 = r.u32();
  f.effective_rank = r.u32();
  const std::uint8_t pk = r.u8();
  if (pk > static_cast<std::uint8_t>(PatternKind::Custom)) throw FormatError("unknown pattern kind");
  f.pattern_params.kind = static_cast<PatternKind>(pk);
  switch (f.pattern_params.kind) {
    case PatternKind::Banded: f.pattern_params.band = r.u32(); break;
    case PatternKind::Random:
      f.pattern_params.count = r.u32();
      f.pattern_params.seed = r.u64();
      break;
    case PatternKind::TopK: f.pattern_params.count = r.u32(); break;
    case PatternKind::Plain:
    case PatternKind::Custom: break;
  }
  const std::uint32_t count = r.u32();
  // Each coefficient needs 16 bytes of indices and 8 of value, plus the checksum.
  if (static_cast<std::uint64_t>(count) * 16 + 8 > r.remaining())
    throw FormatError("adapter file truncated: declares " + std::to_string(count) + " coefficients");
  f.indices.resize(count);
  for (auto& c : f.indices) {
    c.row = r.u32();
    c.col = r.u32();
  }
  f.values.resize(count);
  for (double& v : f.values) v = r.f64();
  f.base_checksum = r.u64();
  if (r.remaining() != 0) throw FormatError("adapter file has trailing bytes");
  return f;
}

AdapterFile to_file(const SvftAdapter& a, const Matrix& w0) {
  if (w0.rows() != a.d1() || w0.cols() != a.d2()) throw ShapeError("base does not match the adapter");
  AdapterFile f;
  f.d1 = static_cast<std::uint32_t>(a.d1());
  f.d2 = static_cast<std::uint32_t>(a.d2());
  f.effective_rank = static_cast<std::uint32_t>(a.effective_rank());
  f.truncate_base = a.truncates_base();
  f.pattern_params = a.pattern().params();
  f.indices = a.pattern().indices();
  f.values.assign(a.values().begin(), a.values().end());
  f.base_checksum = base_checksum(w0);
  return f;
}

SvftAdapter from_file(const AdapterFile& f, const Matrix& w0) {
  if (w0.rows() != f.d1 || w0.cols() != f.d2)
    throw ChecksumError("adapter was saved for a " + std::to_string(f.d1) + "x" + std::to_string(f.d2) +
                        " base, got " + std::to_string(w0.rows()) + "x" + std::to_string(w0.cols()));
  if (base_checksum(w0) != f.base_checksum)
    throw ChecksumError("base checksum mismatch: adapter was saved against a different base matrix");
  try {
    SparsityPattern pattern(f.d1, f.d2, f.indices, f.pattern_params);
    if (pattern.indices() != f.indices) throw FormatError("adapter indices are not row-major sorted");
    return SvftAdapter(std::make_shared<const SvdFactors>(svd(w0)), std::move(pattern), f.values,
                       f.effective_rank, f.truncate_base);
  } catch (const FormatError&) {
    throw;
  } catch (const ValueError& e) {
    throw FormatError(std::string("inconsistent adapter file: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent adapter file: ") + e.what());
  }
}

AdapterFile read_adapter_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open adapter file '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

void save_adapter(const std::string& path, const SvftAdapter& adapter, const Matrix& w0) {
  const auto bytes = encode(to_file(adapter, w0));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

SvftAdapter load_adapter(const std::string& path, const Matrix& w0) {
  return from_file(read_adapter_file(path), w0);
}

}  // namespace svft::io
