#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace svft {

class Rng;

/// Dense row-major matrix of doubles. Always at least 1x1.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Row-wise literal, e.g. Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::size_t rows, std::size_t cols, std::span<const double> diag);
  /// i.i.d. normal entries scaled by `scale`.
  static Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0);
  /// Column vector.
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double> col(std::size_t j) const;
  void set_col(std::size_t j, std::span<const double> values);

  Matrix transpose() const;
  /// Leading `r` columns.
  Matrix left_cols(std::size_t r) const;

  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// Standard product; throws ShapeError unless a.cols() == b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Frozen factors of W = U·diag(S)·Vᵀ. U is d1×d1, V is d2×d2, S has
/// min(d1, d2) nonincreasing nonnegative entries.
///
/// Sign convention: in every column of U the entry of largest magnitude is
/// nonnegative (first such row wins ties). For k < min(d1, d2) the sign of
/// v_k follows u_k so that the product is preserved; the remaining null-space
/// columns of U or V carry the same rule on their own.
struct SvdFactors {
  Matrix u;
  std::vector<double> s;
  Matrix v;

  std::size_t d1() const noexcept { return u.rows(); }
  std::size_t d2() const noexcept { return v.rows(); }
  std::size_t rank_capacity() const noexcept { return s.size(); }

  /// U·diag(S)·Vᵀ, optionally using only the leading `r` triplets.
  Matrix reconstruct() const;
  Matrix reconstruct(std::size_t r) const;
};

struct SvdOptions {
  int max_sweeps = 60;
  double tolerance = 1e-12;
};

/// Full SVD by one-sided (Hestenes) Jacobi. Deterministic for a given input.
/// Throws ValueError on non-finite input and ConvergenceError when the sweep
/// limit is exhausted.
SvdFactors svd(const Matrix& w, const SvdOptions& options = {});

/// Number of singular values strictly greater than tol·max(S).
std::size_t numerical_rank(const Matrix& w, double tol);

/// Thin Householder QR: Q is m×k with orthonormal columns, R is k×n upper
/// triangular with nonnegative diagonal, k = min(m, n).
std::pair<Matrix, Matrix> qr(const Matrix& w);

/// Applies the sign convention to a single column (used by svd and by the
/// fault-injection hooks of the verify suites).
bool largest_entry_negative(std::span<const double> column);

/// Text fixture format: "rows cols" on the first line, then one line per row.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

}  // namespace svft
