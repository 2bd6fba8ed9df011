#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "svft/errors.hpp"
#include "svft/linalg.hpp"
#include "svft/rng.hpp"

using namespace svft;

namespace {

double orth_error(const Matrix& q) { return frobenius_norm(matmul_tn(q, q) - Matrix::identity(q.cols())); }

void require_factor_invariants(const Matrix& w, const SvdFactors& f) {
  REQUIRE(f.u.rows() == w.rows());
  REQUIRE(f.u.cols() == w.rows());
  REQUIRE(f.v.rows() == w.cols());
  REQUIRE(f.v.cols() == w.cols());
  REQUIRE(f.s.size() == std::min(w.rows(), w.cols()));
  CHECK(orth_error(f.u) <= 1e-10 * static_cast<double>(w.rows()));
  CHECK(orth_error(f.v) <= 1e-10 * static_cast<double>(w.cols()));
  for (std::size_t i = 0; i < f.s.size(); ++i) {
    CHECK(f.s[i] >= 0.0);
    if (i > 0) CHECK(f.s[i] <= f.s[i - 1]);
  }
  CHECK(frobenius_norm(f.reconstruct() - w) <= 1e-10 * std::max(frobenius_norm(w), 1e-300));
  for (std::size_t j = 0; j < f.u.cols(); ++j) CHECK_FALSE(largest_entry_negative(f.u.col(j)));
}

}  // namespace

TEST_CASE("Matrix construction validates shape and finiteness") {
  CHECK_THROWS_AS(Matrix(0, 3), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Matrix(1, 2, {1, NAN}), ValueError);
  CHECK_THROWS_AS(Matrix(1, 1, {INFINITY}), ValueError);
  const Matrix m{{1, 2}, {3, 4}};
  CHECK(m(1, 0) == 3);
  CHECK(m.transpose()(0, 1) == 3);
}

TEST_CASE("matmul: identity and forced cases") {
  const Matrix a{{1, 2}, {3, 4}};
  CHECK(matmul(Matrix::identity(2), a) == a);
  CHECK(matmul(Matrix{{1, 0}, {0, 0}}, Matrix{{0, 1}, {1, 0}}) == Matrix{{0, 1}, {0, 0}});
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST_CASE("matmul variants agree with the triple-loop oracle") {
  Rng rng(1);
  const Matrix a = Matrix::random_normal(3, 4, rng);
  const Matrix b = Matrix::random_normal(4, 2, rng);
  const auto expect = oracle::triple_loop(oracle::to_dense(a), oracle::to_dense(b));
  CHECK(oracle::max_diff(matmul(a, b), expect) < 1e-14);
  CHECK(oracle::max_diff(matmul_tn(a.transpose(), b), expect) < 1e-14);
  CHECK(oracle::max_diff(matmul_nt(a, b.transpose()), expect) < 1e-14);
}

TEST_CASE("svd of the identity and of a signed diagonal") {
  const SvdFactors f = svd(Matrix::identity(3));
  CHECK(f.u == Matrix::identity(3));
  CHECK(f.v == Matrix::identity(3));
  CHECK(f.s == std::vector<double>{1, 1, 1});

  const Matrix d{{3, 0}, {0, -2}};
  const SvdFactors g = svd(d);
  CHECK(g.s[0] == doctest::Approx(3).epsilon(1e-15));
  CHECK(g.s[1] == doctest::Approx(2).epsilon(1e-15));
  // u columns are +e0, +e1 under the convention; v_1 absorbs the minus sign.
  CHECK(g.u == Matrix::identity(2));
  CHECK(g.v(0, 0) == doctest::Approx(1));
  CHECK(g.v(1, 1) == doctest::Approx(-1));
  require_factor_invariants(d, g);
}

TEST_CASE("svd of a random 5x3 matches the eigen-oracle on W^T W") {
  Rng rng(7);
  const Matrix w = Matrix::random_normal(5, 3, rng);
  const SvdFactors f = svd(w);
  require_factor_invariants(w, f);
  const auto wd = oracle::to_dense(w);
  const auto ev = oracle::symmetric_eigenvalues(oracle::triple_loop(oracle::transpose(wd), wd));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(f.s[i] - std::sqrt(std::max(ev[i], 0.0))) <= 1e-8);
}

TEST_CASE("svd property sweep over shapes up to 32x32") {
  Rng rng(42);
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = 1 + rng.below(32), n = 1 + rng.below(32);
    const Matrix w = Matrix::random_normal(m, n, rng);
    const SvdFactors f = svd(w);
    require_factor_invariants(w, f);
    const SvdFactors again = svd(f.reconstruct());
    for (std::size_t i = 0; i < f.s.size(); ++i) CHECK(std::abs(again.s[i] - f.s[i]) <= 1e-10 * std::max(1.0, f.s[0]));
  }
}

TEST_CASE("svd handles rank deficiency, zeros and repeated values") {
  Rng rng(9);
  const Matrix low = matmul(Matrix::random_normal(7, 2, rng), Matrix::random_normal(2, 5, rng));
  require_factor_invariants(low, svd(low));
  require_factor_invariants(Matrix::zeros(4, 3), svd(Matrix::zeros(4, 3)));
  const Matrix wide = Matrix::random_normal(2, 6, rng);
  require_factor_invariants(wide, svd(wide));
  const Matrix scaled = 2.5 * Matrix::identity(4);
  const SvdFactors f = svd(scaled);
  require_factor_invariants(scaled, f);
  for (double s : f.s) CHECK(s == doctest::Approx(2.5));
  require_factor_invariants(Matrix{{5}}, svd(Matrix{{5}}));
  require_factor_invariants(Matrix{{-5}}, svd(Matrix{{-5}}));
}

TEST_CASE("svd is deterministic and reports non-convergence") {
  Rng rng(4);
  const Matrix w = Matrix::random_normal(6, 6, rng);
  const SvdFactors a = svd(w), b = svd(w);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  CHECK(a.s == b.s);
  SvdOptions stingy;
  stingy.max_sweeps = 1;
  CHECK_THROWS_AS(svd(Matrix::random_normal(12, 12, rng), stingy), ConvergenceError);
}

TEST_CASE("numerical_rank examples and elimination oracle") {
  CHECK(numerical_rank(Matrix::zeros(3, 3), 1e-9) == 0);
  const Matrix uvt = matmul(Matrix{{1}, {2}, {3}}, Matrix{{4, -1, 0.5}});
  CHECK(numerical_rank(uvt, 1e-9) == 1);
  CHECK_THROWS_AS(numerical_rank(uvt, 0.0), ValueError);

  Rng rng(6);
  const SvdFactors f = svd(Matrix::random_normal(6, 6, rng));
  Matrix m(6, 6);
  for (int k = 0; k < 4; ++k) m(rng.below(6), rng.below(6)) = 1.0 + rng.uniform();
  const Matrix dw = matmul_nt(matmul(f.u, m), f.v);
  const std::size_t r = numerical_rank(dw, 1e-9);
  CHECK(r <= 4);
  CHECK(r == oracle::elimination_rank(oracle::to_dense(dw), 1e-9));
}

TEST_CASE("numerical_rank is invariant under rotations") {
  Rng rng(8);
  const Matrix w = matmul(Matrix::random_normal(6, 3, rng), Matrix::random_normal(3, 5, rng));
  const Matrix q1 = qr(Matrix::random_normal(6, 6, rng)).first;
  const Matrix q2 = qr(Matrix::random_normal(5, 5, rng)).first;
  CHECK(numerical_rank(w, 1e-9) == 3);
  CHECK(numerical_rank(matmul(matmul(q1, w), q2), 1e-9) == 3);
}

TEST_CASE("qr examples") {
  const auto [q, r] = qr(Matrix::identity(2));
  CHECK(q == Matrix::identity(2));
  CHECK(r == Matrix::identity(2));
  const auto [q1, r1] = qr(Matrix{{0}, {2}});
  CHECK(q1(0, 0) == doctest::Approx(0));
  CHECK(q1(1, 0) == doctest::Approx(1));
  CHECK(r1(0, 0) == doctest::Approx(2));

  Rng rng(3);
  const Matrix w = Matrix::random_normal(4, 4, rng);
  const auto [q2, r2] = qr(w);
  CHECK(frobenius_norm(matmul_tn(q2, q2) - Matrix::identity(4)) <= 1e-10);
  CHECK(frobenius_norm(matmul(q2, r2) - w) <= 1e-10 * frobenius_norm(w));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r2(i, i) >= 0.0);
    for (std::size_t j = 0; j < i; ++j) CHECK(r2(i, j) == 0.0);
  }
}

TEST_CASE("matrix text format round-trips exactly and rejects garbage") {
  Rng rng(2);
  const Matrix m = Matrix::random_normal(3, 4, rng);
  std::stringstream io;
  write_matrix(io, m);
  CHECK(read_matrix(io) == m);

  std::istringstream short_body("2 2\n1 2\n3\n");
  CHECK_THROWS_AS(read_matrix(short_body), FormatError);
  std::istringstream bad_header("x y\n");
  CHECK_THROWS_AS(read_matrix(bad_header), FormatError);
  std::istringstream trailing("1 1\n1 2\n");
  CHECK_THROWS_AS(read_matrix(trailing), FormatError);
  CHECK_THROWS_AS(load_matrix("/nonexistent/dir/w.txt"), IoError);
}
