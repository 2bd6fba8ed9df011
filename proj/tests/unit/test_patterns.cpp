#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "svft/errors.hpp"
#include "svft/patterns.hpp"
#include "svft/rng.hpp"

using namespace svft;

namespace {

std::vector<Coord> diag(std::size_t n) {
  std::vector<Coord> d;
  for (std::uint32_t i = 0; i < n; ++i) d.push_back({i, i});
  return d;
}

std::vector<Coord> read_golden(const std::string& name) {
  std::ifstream in(std::string(SVFT_GOLDEN_DIR) + "/" + name);
  REQUIRE(in.good());
  std::vector<Coord> out;
  std::uint32_t i, j;
  while (in >> i >> j) out.push_back({i, j});
  return out;
}

}  // namespace

TEST_CASE("plain pattern") {
  CHECK(plain(3, 3).indices() == diag(3));
  CHECK(plain(4, 3).size() == 3);
  CHECK(plain(1, 5).indices() == diag(1));
  CHECK(pattern_cardinality(plain(8, 8)) == 8);
}

TEST_CASE("banded patterns and brute-force membership") {
  CHECK(banded(4, 4, 0).indices() == plain(4, 4).indices());
  CHECK(banded(6, 6, 2).size() == 24);
  CHECK(banded(6, 6, 2).size() == 6 * 2 + (6 - 2) * 3);

  const SparsityPattern b = banded(4, 4, 1);
  CHECK(b.size() == 10);
  std::vector<Coord> scan;
  for (std::uint32_t i = 0; i < 4; ++i)
    for (std::uint32_t j = 0; j < 4; ++j)
      if (oracle::in_band(i, j, 1)) scan.push_back({i, j});
  CHECK(b.indices() == scan);
  CHECK(banded_count(2048, 16) == 67312);
}

TEST_CASE("banded cardinality identity for all D <= 64") {
  for (std::size_t dim = 1; dim <= 64; ++dim)
    for (std::size_t d = 0; d < dim; ++d) {
      std::size_t brute = 0;
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) brute += oracle::in_band(i, j, d);
      REQUIRE(banded(dim, dim, d).size() == brute);
      REQUIRE(banded_count(dim, d) == brute);
    }
}

TEST_CASE("plain is inside banded which nests in d") {
  for (std::size_t d = 0; d < 5; ++d) {
    CHECK(banded(7, 5, d).includes(plain(7, 5)));
    CHECK(banded(7, 5, d + 1).includes(banded(7, 5, d)));
  }
  CHECK_FALSE(plain(4, 4).includes(banded(4, 4, 1)));
}

TEST_CASE("random pattern: trivial totals, golden snapshot, determinism") {
  CHECK(random_pattern(3, 3, 3, 12345).indices() == diag(3));
  CHECK(random_pattern(2, 2, 4, 1).size() == 4);
  CHECK(random_pattern(6, 6, 20, 5).size() == 20);

  const SparsityPattern r = random_pattern(4, 4, 8, 0);
  CHECK(r.size() == 8);
  CHECK(r.includes(plain(4, 4)));
  CHECK(r.indices() == read_golden("random_4x4_8_seed0.txt"));
  CHECK(random_pattern(4, 4, 8, 0) == r);
  CHECK(random_pattern(9, 7, 30, 3) == random_pattern(9, 7, 30, 3));

  CHECK_THROWS_AS(random_pattern(3, 3, 2, 0), BudgetError);
  CHECK_THROWS_AS(random_pattern(3, 3, 10, 0), BudgetError);
  CHECK(random_total_for_band(6, 6, 2) == 24);
}

TEST_CASE("random pattern off-diagonal draws are spread out") {
  // Every off-diagonal cell of a 4x4 should be hit across many seeds.
  std::map<std::pair<int, int>, int> hits;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const SparsityPattern p = random_pattern(4, 4, 6, s);
    for (const Coord& c : p.indices())
      if (c.row != c.col) ++hits[{int(c.row), int(c.col)}];
  }
  CHECK(hits.size() == 12);
  for (const auto& [pos, n] : hits) CHECK(n > 30);
}

TEST_CASE("top-k on an SPD matrix picks the diagonal") {
  Rng rng(1);
  const Matrix g = Matrix::random_normal(5, 5, rng);
  const Matrix spd = matmul_tn(g, g) + Matrix::identity(5);
  const SvdFactors f = svd(spd);
  CHECK(top_k(f, 5).indices() == diag(5));
  CHECK(top_k(f, 25).size() == 25);
}

TEST_CASE("top-k equals the argsort oracle on the full score table") {
  Rng rng(3);
  const SvdFactors f = svd(Matrix::random_normal(5, 5, rng));
  oracle::Dense scores(5, std::vector<double>(5));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < 5; ++p) s += f.u(p, i) * f.v(p, j);
      scores[i][j] = std::abs(s);
    }
  std::vector<Coord> expect;
  for (auto [i, j] : oracle::top_k_positions(scores, 7)) expect.push_back({std::uint32_t(i), std::uint32_t(j)});
  CHECK(top_k(f, 7).indices() == expect);
}

TEST_CASE("top-k is independent of the sign convention") {
  Rng rng(13);
  const SvdFactors f = svd(Matrix::random_normal(6, 6, rng));
  SvdFactors flipped = f;
  for (std::size_t p = 0; p < 6; ++p) {
    flipped.u(p, 2) = -flipped.u(p, 2);
    flipped.v(p, 2) = -flipped.v(p, 2);
  }
  CHECK(top_k(f, 9).indices() == top_k(flipped, 9).indices());
}

TEST_CASE("top-k rejects non-square and bad k") {
  Rng rng(2);
  const SvdFactors f = svd(Matrix::random_normal(4, 3, rng));
  CHECK_THROWS_AS(top_k(f, 2), UnsupportedShapeError);
  const SvdFactors g = svd(Matrix::random_normal(3, 3, rng));
  CHECK_THROWS(top_k(g, 0));
  CHECK_THROWS(top_k(g, 10));
}

TEST_CASE("pattern construction validates indices") {
  CHECK_THROWS_AS(SparsityPattern(2, 2, {}), ValueError);
  CHECK_THROWS_AS(SparsityPattern(2, 2, {{2, 0}}), ValueError);
  CHECK_THROWS_AS(SparsityPattern(2, 2, {{0, 1}, {0, 1}}), ValueError);
  const SparsityPattern p(3, 3, {{2, 1}, {0, 2}});
  CHECK(p.indices().front() == Coord{0, 2});
  CHECK(p.contains({2, 1}));
  CHECK_FALSE(p.contains({1, 1}));
}

TEST_CASE("make_pattern parses every kind") {
  Rng rng(4);
  const SvdFactors f = svd(Matrix::random_normal(5, 5, rng));
  CHECK(make_pattern("plain", 5, 5) == plain(5, 5));
  CHECK(make_pattern("banded:2", 5, 5) == banded(5, 5, 2));
  CHECK(make_pattern("random:9:4", 5, 5) == random_pattern(5, 5, 9, 4));
  CHECK(make_pattern("topk:6", 5, 5, &f) == top_k(f, 6));
  CHECK_THROWS_AS(make_pattern("topk:6", 5, 5), ValueError);
  CHECK_THROWS_AS(make_pattern("hexagonal", 5, 5), ValueError);
  CHECK_THROWS_AS(make_pattern("banded:x", 5, 5), ValueError);
}
