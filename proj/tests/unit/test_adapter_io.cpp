#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "svft/adapter_io.hpp"
#include "svft/errors.hpp"
#include "svft/rng.hpp"

using namespace svft;

namespace {

SvftAdapter sample(const Matrix& w0, const std::string& pattern, Rng& rng) {
  const auto f = std::make_shared<const SvdFactors>(svd(w0));
  SvftAdapter a = SvftAdapter::init(f, make_pattern(pattern, w0.rows(), w0.cols(), f.get()));
  for (double& v : a.values()) v = rng.normal();
  return a;
}

// FNV-1a 64 written out byte by byte so the check does not share code with the library.
std::uint64_t fnv(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint32_t r = static_cast<std::uint32_t>(m.rows()), c = static_cast<std::uint32_t>(m.cols());
  feed(&r, 4);
  feed(&c, 4);
  for (double v : m.data()) feed(&v, 8);
  return h;
}

}  // namespace

TEST_CASE("base checksum is FNV-1a over the little-endian layout") {
  Rng rng(1);
  const Matrix w = Matrix::random_normal(3, 2, rng);
  CHECK(io::base_checksum(w) == fnv(w));
  Matrix w2 = w;
  w2(0, 0) = std::nextafter(w2(0, 0), 10.0);
  CHECK(io::base_checksum(w2) != io::base_checksum(w));
}

TEST_CASE("encode/decode round-trips every pattern kind bit-exactly") {
  Rng rng(2);
  const Matrix w0 = Matrix::random_normal(6, 6, rng);
  for (const std::string p : {"plain", "banded:2", "random:14:3", "topk:9"}) {
    const SvftAdapter a = sample(w0, p, rng);
    const auto bytes = io::encode(io::to_file(a, w0));
    const SvftAdapter b = io::from_file(io::decode(bytes), w0);
    CHECK(b.pattern() == a.pattern());
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end()));
    CHECK(io::encode(io::to_file(b, w0)) == bytes);
  }
  const SvftAdapter t = truncate(sample(w0, "banded:1", rng), 3, true);
  const SvftAdapter back = io::from_file(io::decode(io::encode(io::to_file(t, w0))), w0);
  CHECK(back.truncates_base());
  CHECK(back.effective_rank() == 3);
  CHECK(back.pattern() == t.pattern());
}

TEST_CASE("header layout") {
  Rng rng(3);
  const Matrix w0 = Matrix::random_normal(4, 3, rng);
  const auto bytes = io::encode(io::to_file(sample(w0, "plain", rng), w0));
  REQUIRE(bytes.size() > 12);
  CHECK(std::memcmp(bytes.data(), "SVFT", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 4);   // d1, low byte first
  CHECK(bytes[12] == 3);  // d2
}

TEST_CASE("decode rejects damaged files") {
  Rng rng(4);
  const Matrix w0 = Matrix::random_normal(4, 4, rng);
  const auto good = io::encode(io::to_file(sample(w0, "banded:1", rng), w0));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::decode(bad_magic), FormatError);

  auto version = good;
  version[4] = 9;
  CHECK_THROWS_AS(io::decode(version), UnsupportedVersionError);

  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, good.size() - 1}) {
    const std::vector<std::uint8_t> part(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(io::decode(part), FormatError);
  }
  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(io::decode(trailing), FormatError);
}

TEST_CASE("loading against the wrong base fails with a checksum error") {
  Rng rng(5);
  const Matrix w0 = Matrix::random_normal(4, 4, rng);
  const auto file = io::to_file(sample(w0, "plain", rng), w0);
  Matrix other = w0;
  other(2, 3) += 1e-12;
  CHECK_THROWS_AS(io::from_file(file, other), ChecksumError);
  CHECK_THROWS_AS(io::from_file(file, Matrix::random_normal(4, 5, rng)), FormatError);
}

TEST_CASE("files on disk") {
  Rng rng(6);
  const Matrix w0 = Matrix::random_normal(5, 5, rng);
  const SvftAdapter a = sample(w0, "random:9:1", rng);
  const auto path = std::filesystem::temp_directory_path() / "svft_unit_adapter.bin";
  io::save_adapter(path.string(), a, w0);
  const SvftAdapter b = io::load_adapter(path.string(), w0);
  CHECK(b.pattern() == a.pattern());
  CHECK(io::read_adapter_file(path.string()).indices == a.pattern().indices());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(io::load_adapter(path.string(), w0), IoError);
}
