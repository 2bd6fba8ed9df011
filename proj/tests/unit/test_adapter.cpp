#include <cmath>
#include <memory>

#include "doctest.h"
#include "oracles.hpp"
#include "svft/adapter.hpp"
#include "svft/errors.hpp"
#include "svft/rng.hpp"

using namespace svft;

namespace {

SvftAdapter random_adapter(std::size_t d1, std::size_t d2, const SparsityPattern& p, Rng& rng, Matrix* w0_out = nullptr) {
  const Matrix w0 = Matrix::random_normal(d1, d2, rng);
  SvftAdapter a = SvftAdapter::init(w0, p);
  for (double& v : a.values()) v = rng.normal();
  if (w0_out) *w0_out = w0;
  return a;
}

std::vector<oracle::Term> terms_of(const SvftAdapter& a, bool with_sigma) {
  std::vector<oracle::Term> t;
  if (with_sigma)
    for (std::size_t i = 0; i < a.factors().s.size(); ++i) t.push_back({i, i, a.factors().s[i]});
  for (std::size_t k = 0; k < a.pattern().size(); ++k) {
    const Coord c = a.pattern().indices()[k];
    t.push_back({c.row, c.col, a.values()[k]});
  }
  return t;
}

double rel_err(const Matrix& a, const Matrix& b) { return frobenius_norm(a - b) / std::max(frobenius_norm(b), 1e-300); }

}  // namespace

TEST_CASE("init gives the pretrained map exactly") {
  const SvftAdapter a = SvftAdapter::init(Matrix::identity(3), plain(3, 3));
  CHECK(a.factors().s == std::vector<double>{1, 1, 1});
  CHECK(std::vector<double>(a.values().begin(), a.values().end()) == std::vector<double>{0, 0, 0});

  Rng rng(2);
  const Matrix w0 = Matrix::random_normal(4, 4, rng);
  const SvftAdapter b = SvftAdapter::init(w0, banded(4, 4, 1));
  CHECK(b.num_trainable() == 10);
  for (double v : b.values()) CHECK(v == 0.0);
  const Matrix x = Matrix::random_normal(4, 3, rng);
  CHECK(rel_err(forward(b, x), matmul(w0, x)) <= 1e-10);
  CHECK_THROWS_AS(SvftAdapter::init(w0, plain(3, 4)), ShapeError);
}

TEST_CASE("forward: diagonal arithmetic") {
  SvftAdapter a = SvftAdapter::init(Matrix::identity(2), plain(2, 2));
  a.values()[0] = 1.0;
  const Matrix h = forward(a, Matrix{{1}, {1}});
  CHECK(h(0, 0) == doctest::Approx(2));
  CHECK(h(1, 0) == doctest::Approx(1));
  CHECK_THROWS_AS(forward(a, Matrix(3, 1)), ShapeError);
}

TEST_CASE("dense forward equals the rank-one sum over 50 seeds") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t d1 = 1 + rng.below(16), d2 = 1 + rng.below(16);
    const std::size_t lo = std::min(d1, d2);
    const SparsityPattern p = random_pattern(d1, d2, lo + rng.below(d1 * d2 - lo + 1), seed);
    const SvftAdapter a = random_adapter(d1, d2, p, rng);
    std::vector<double> x(d2);
    for (double& v : x) v = rng.normal();
    const Matrix h = forward(a, Matrix::column(x));
    const auto expect = oracle::rank_one_sum(a.factors().u, a.factors().v, terms_of(a, true), x);
    double scale = 0, worst = 0;
    for (std::size_t i = 0; i < d1; ++i) {
      scale = std::max(scale, std::abs(expect[i]));
      worst = std::max(worst, std::abs(h(i, 0) - expect[i]));
    }
    REQUIRE(worst <= 1e-12 * std::max(scale, 1.0));
  }
}

TEST_CASE("delta_w is the sum of rank-one terms") {
  Rng rng(5);
  SvftAdapter a = SvftAdapter::init(Matrix::random_normal(5, 4, rng), banded(5, 4, 1));
  CHECK(max_abs(delta_w(a)) == 0.0);
  for (std::size_t k = 0; k < a.pattern().size(); ++k)
    if (a.pattern().indices()[k] == Coord{0, 1}) a.values()[k] = 2.5;
  const Matrix dw = delta_w(a);
  const auto u0 = a.factors().u.col(0), v1 = a.factors().v.col(1);
  double worst = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) worst = std::max(worst, std::abs(dw(i, j) - 2.5 * u0[i] * v1[j]));
  CHECK(worst <= 1e-14);
  CHECK(numerical_rank(dw, 1e-9) == 1);
}

TEST_CASE("rank of the update is bounded by the number of coefficients") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(100 + seed);
    const std::size_t d = 3 + rng.below(8);
    const SparsityPattern p = random_pattern(d, d, d + rng.below(d), seed);
    SvftAdapter a = random_adapter(d, d, p, rng);
    // Keep only k of the values nonzero.
    const std::size_t k = 1 + rng.below(p.size());
    for (std::size_t t = k; t < p.size(); ++t) a.values()[t] = 0.0;
    REQUIRE(numerical_rank(delta_w(a), 1e-9) <= std::min(k, d));
  }
  Rng rng(7);
  SvftAdapter diag = SvftAdapter::init(Matrix::random_normal(6, 6, rng), plain(6, 6));
  for (std::size_t i = 0; i < 6; ++i) diag.values()[i] = 1.0 + static_cast<double>(i);
  CHECK(numerical_rank(delta_w(diag), 1e-9) == 6);
}

TEST_CASE("fuse matches forward and cancels the spectrum") {
  Rng rng(8);
  Matrix w0(1, 1);
  const SvftAdapter a = random_adapter(6, 5, random_pattern(6, 5, 12, 1), rng, &w0);
  const Matrix fused = fuse(a);
  for (int t = 0; t < 100; ++t) {
    const Matrix x = Matrix::random_normal(5, 1, rng);
    REQUIRE(frobenius_norm(matmul(fused, x) - forward(a, x)) <= 1e-10 * frobenius_norm(x) * std::max(1.0, frobenius_norm(fused)));
  }

  SvftAdapter zero = SvftAdapter::init(w0, plain(6, 5));
  CHECK(rel_err(fuse(zero), w0) <= 1e-12);
  for (std::size_t i = 0; i < 5; ++i) zero.values()[i] = -zero.factors().s[i];
  CHECK(frobenius_norm(fuse(zero)) <= 1e-9 * frobenius_norm(w0));
}

TEST_CASE("grad_values against orthonormality and projection") {
  Rng rng(10);
  SvftAdapter a = SvftAdapter::init(Matrix::random_normal(4, 4, rng), banded(4, 4, 1));
  for (double g : grad_values(a, Matrix::zeros(4, 4))) CHECK(g == 0.0);

  // upstream = u_1 v_2^T: only coefficient (1,2) sees it.
  Matrix up(4, 4);
  const auto u1 = a.factors().u.col(1), v2 = a.factors().v.col(2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) up(i, j) = u1[i] * v2[j];
  const auto g = grad_values(a, up);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Coord c = a.pattern().indices()[k];
    CHECK(g[k] == doctest::Approx((c == Coord{1, 2}) ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
  }
  CHECK_THROWS_AS(grad_values(a, Matrix(3, 4)), ShapeError);
}

TEST_CASE("grad_values against central differences of a squared error") {
  Rng rng(11);
  Matrix w0(1, 1);
  SvftAdapter a = random_adapter(5, 4, random_pattern(5, 4, 9, 2), rng, &w0);
  const Matrix x = Matrix::random_normal(4, 12, rng), y = Matrix::random_normal(5, 12, rng);
  auto loss = [&](const SvftAdapter& ad) {
    const Matrix r = forward(ad, x) - y;
    return 0.5 * frobenius_norm(r) * frobenius_norm(r);
  };
  const Matrix upstream = matmul_nt(forward(a, x) - y, x);
  const auto g = grad_values(a, upstream);
  const double h = 1e-6;
  for (std::size_t k = 0; k < g.size(); ++k) {
    SvftAdapter up = a, dn = a;
    up.values()[k] += h;
    dn.values()[k] -= h;
    const double fd = (loss(up) - loss(dn)) / (2 * h);
    CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max({std::abs(fd), std::abs(g[k]), 1e-3}));
  }
}

TEST_CASE("solve_expressivity examples") {
  const Matrix m = solve_expressivity(Matrix::identity(2), Matrix{{0, 1}, {1, 0}});
  CHECK(max_abs(m - Matrix{{-1, 1}, {1, -1}}) <= 1e-14);

  Rng rng(9);
  const Matrix w0 = Matrix::random_normal(6, 4, rng), target = Matrix::random_normal(6, 4, rng);
  CHECK(max_abs(solve_expressivity(w0, w0)) <= 1e-12);
  const SvdFactors f = svd(w0);
  const Matrix mm = solve_expressivity(f, w0, target);
  CHECK(rel_err(w0 + matmul_nt(matmul(f.u, mm), f.v), target) <= 1e-10);
}

TEST_CASE("expressivity holds for random pairs") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(200 + seed);
    const std::size_t d1 = 1 + rng.below(10), d2 = 1 + rng.below(10);
    const Matrix w0 = Matrix::random_normal(d1, d2, rng), p = Matrix::random_normal(d1, d2, rng);
    const SvdFactors f = svd(w0);
    const Matrix mm = solve_expressivity(f, w0, p);
    REQUIRE(rel_err(w0 + matmul_nt(matmul(f.u, mm), f.v), p) <= 1e-9);
  }
}

TEST_CASE("plain structure is preserved") {
  const Matrix w0{{3, 0}, {0, 1}};
  const std::vector<double> z{0, 0};
  CHECK(verify_plain_structure(w0, z).success);
  const std::vector<double> shift{0.5, 0.25};
  const StructureReport r = verify_plain_structure(w0, shift);
  CHECK(r.success);
  CHECK(r.observed_singular_values[0] == doctest::Approx(3.5));
  CHECK(r.observed_singular_values[1] == doctest::Approx(1.25));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(300 + seed);
    const Matrix w = Matrix::random_normal(5, 5, rng);
    std::vector<double> dv(5);
    for (double& v : dv) v = 0.01 * rng.normal();
    const StructureReport rep = verify_plain_structure(w, dv);
    REQUIRE(rep.success);
    CHECK(rep.min_alignment >= 1 - 1e-8);
  }
}

TEST_CASE("structure check refuses degenerate spectra") {
  const std::vector<double> z{0, 0, 0};
  CHECK_THROWS_AS(verify_plain_structure(Matrix::identity(3), z), SpectrumDegeneracyError);
  const std::vector<double> merge{0, -1, 0};  // 3,2,1 -> 3,1,1
  CHECK_THROWS_AS(verify_plain_structure(Matrix{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}}, merge), SpectrumDegeneracyError);
  const std::vector<double> wrong_len{0.1};
  CHECK_THROWS(verify_plain_structure(Matrix{{3, 0}, {0, 1}}, wrong_len));
}

TEST_CASE("an off-diagonal coefficient rotates singular vectors") {
  const Matrix w0{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}};
  const SvdFactors f = svd(w0);
  Matrix m(3, 3);
  m(0, 1) = 0.5;
  const StructureReport r = alignment_report(w0, f, m);
  CHECK(r.min_alignment < 1 - 1e-3);
}

TEST_CASE("truncate") {
  Rng rng(12);
  const Matrix w0 = Matrix::random_normal(5, 5, rng);
  SvftAdapter a = SvftAdapter::init(w0, banded(5, 5, 1));
  for (double& v : a.values()) v = rng.normal();

  const SvftAdapter same = truncate(a, 5);
  CHECK(same.pattern() == a.pattern());
  CHECK(rel_err(fuse(same), fuse(a)) <= 1e-14);

  const SvftAdapter one = truncate(SvftAdapter::init(w0, plain(5, 5)), 1);
  CHECK(one.num_trainable() == 1);
  CHECK(one.effective_rank() == 1);
  // The frozen base is still exact.
  CHECK(rel_err(fuse(one), w0) <= 1e-12);

  const SvftAdapter t3 = truncate(a, 3);
  for (const Coord& c : t3.pattern().indices()) CHECK((c.row < 3 && c.col < 3));
  CHECK(t3.num_trainable() == 7);

  const SvftAdapter destructive = truncate(a, 3, true);
  CHECK(destructive.truncates_base());
  CHECK(destructive.base_rank() == 3);
  CHECK(numerical_rank(fuse(destructive), 1e-9) <= 3);

  CHECK_THROWS_AS(truncate(a, 0), ValueError);
  CHECK_THROWS_AS(truncate(a, 6), ValueError);
  SvftAdapter offdiag = SvftAdapter::init(w0, SparsityPattern(5, 5, {{3, 4}}));
  CHECK_THROWS_AS(truncate(offdiag, 2), BudgetError);
}

TEST_CASE("rank-restricted expressivity leaves a residual") {
  Rng rng(14);
  const Matrix w0 = Matrix::random_normal(6, 6, rng), target = Matrix::random_normal(6, 6, rng);
  const SvdFactors f = svd(w0);
  const Matrix full = solve_expressivity(f, w0, target);
  CHECK(rel_err(w0 + matmul_nt(matmul(f.u, full), f.v), target) <= 1e-9);
  const Matrix part = solve_expressivity(f, w0, target, 3);
  CHECK(rel_err(w0 + matmul_nt(matmul(f.u, part), f.v), target) > 1e-3);
}
