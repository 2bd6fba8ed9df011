#include "svft/linalg.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "svft/errors.hpp"
#include "svft/rng.hpp"

namespace svft {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be at least 1x1");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  check_dims(rows, cols);
  data_.assign(rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_dims(rows, cols);
  if (data_.size() != rows * cols) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!all_finite()) throw ValueError("matrix entries must be finite");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  check_dims(rows_, cols_);
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  if (!all_finite()) throw ValueError("matrix entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::size_t rows, std::size_t cols, std::span<const double> diag) {
  Matrix m(rows, cols);
  const std::size_t k = std::min({rows, cols, diag.size()});
  for (std::size_t i = 0; i < k; ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::random_normal(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (double& x : m.data_) x = scale * rng.normal();
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Matrix::col(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void Matrix::set_col(std::size_t j, std::span<const double> values) {
  if (values.size() != rows_) throw ShapeError("column length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::left_cols(std::size_t r) const {
  if (r == 0 || r > cols_) throw ShapeError("left_cols: r out of range");
  Matrix out(rows_, r);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < r; ++j) out(i, j) = (*this)(i, j);
  return out;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw ShapeError("add: " + shape_str(*this) + " vs " + shape_str(other));
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw ShapeError("subtract: " + shape_str(*this) + " vs " + shape_str(other));
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape_str(a) + " times " + shape_str(b));
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: " + shape_str(a) + "ᵀ times " + shape_str(b));
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + shape_str(a) + " times " + shape_str(b) + "ᵀ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) {
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : a) s += (x / scale) * (x / scale);
  return scale * std::sqrt(s);
}

double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------------------
// SVD

Matrix SvdFactors::reconstruct() const { return reconstruct(s.size()); }

Matrix SvdFactors::reconstruct(std::size_t r) const {
  if (r > s.size()) throw ShapeError("reconstruct: rank exceeds factor count");
  Matrix w(d1(), d2());
  for (std::size_t k = 0; k < r; ++k) {
    const double sk = s[k];
    if (sk == 0.0) continue;
    for (std::size_t i = 0; i < d1(); ++i) {
      const double uik = u(i, k) * sk;
      if (uik == 0.0) continue;
      auto wrow = w.row(i);
      for (std::size_t j = 0; j < d2(); ++j) wrow[j] += uik * v(j, k);
    }
  }
  return w;
}

bool largest_entry_negative(std::span<const double> column) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < column.size(); ++i)
    if (std::abs(column[i]) > std::abs(column[best])) best = i;
  return column[best] < 0.0;
}

namespace {

using Columns = std::vector<std::vector<double>>;

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// Two passes of modified Gram-Schmidt against `basis`; returns residual norm
// and normalizes `x` in place when it is nonzero.
double orthonormalize(std::vector<double>& x, const Columns& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) axpy(-dot(b, x), b, x);
  const double n = norm2(x);
  if (n > 0.0)
    for (double& xi : x) xi /= n;
  return n;
}

// Appends unit vectors to `basis` until it holds `target` orthonormal
// columns of length `dim`, each time taking the standard basis vector with
// the largest component outside the current span.
void complete_basis(Columns& basis, std::size_t dim, std::size_t target) {
  while (basis.size() < target) {
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t k = 0; k < dim; ++k) {
      std::vector<double> e(dim, 0.0);
      e[k] = 1.0;
      std::vector<double> trial = e;
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis) axpy(-dot(b, trial), b, trial);
      const double n = norm2(trial);
      if (n > best_norm + 1e-12) {
        best_norm = n;
        best = std::move(trial);
      }
    }
    orthonormalize(best, basis);
    basis.push_back(std::move(best));
  }
}

// Hestenes one-sided Jacobi on the columns of a tall (m >= n) matrix.
SvdFactors svd_tall(const Matrix& w, const SvdOptions& options) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  Columns a(n, std::vector<double>(m));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) a[j][i] = w(i, j);
  Columns v(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

  // Columns this small are pure rounding noise relative to ‖W‖ and are left
  // out of the rotations.
  const double negligible = 1e-2 * DBL_EPSILON * frobenius_norm(w);

  bool converged = false;
  double worst = 0.0;
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    bool rotated = false;
    worst = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(a[p], a[p]);
        const double beta = dot(a[q], a[q]);
        if (std::sqrt(alpha) <= negligible || std::sqrt(beta) <= negligible) continue;
        const double gamma = dot(a[p], a[q]);
        const double off = std::abs(gamma) / std::sqrt(alpha * beta);
        worst = std::max(worst, off);
        if (off <= options.tolerance) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a[p][i];
          const double aq = a[q][i];
          a[p][i] = c * ap - s * aq;
          a[q][i] = s * ap + c * aq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v[p][i];
          const double vq = v[q][i];
          v[p][i] = c * vp - s * vq;
          v[q][i] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "svd: no convergence after " << options.max_sweeps
        << " sweeps, max relative off-diagonal " << worst;
    throw ConvergenceError(msg.str(), worst);
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(a[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdFactors out{Matrix(m, m), std::vector<double>(n), Matrix(n, n)};
  Columns ucols;
  ucols.reserve(m);
  const double null_level = (sigma.empty() ? 0.0 : sigma[order[0]]) * DBL_EPSILON *
                            static_cast<double>(std::max(m, n));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.s[k] = sigma[j];
    out.v.set_col(k, v[j]);
    std::vector<double> cand = a[j];
    bool usable = sigma[j] > null_level && sigma[j] > 0.0;
    if (usable) {
      for (double& x : cand) x /= sigma[j];
      usable = orthonormalize(cand, ucols) > 0.5;
    }
    if (usable) {
      ucols.push_back(std::move(cand));
    } else {
      complete_basis(ucols, m, ucols.size() + 1);
    }
  }
  complete_basis(ucols, m, m);
  for (std::size_t k = 0; k < m; ++k) out.u.set_col(k, ucols[k]);
  return out;
}

void negate_col(Matrix& m, std::size_t j) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = -m(i, j);
}

void apply_sign_convention(SvdFactors& f) {
  const std::size_t k = f.s.size();
  for (std::size_t j = 0; j < f.u.cols(); ++j) {
    if (largest_entry_negative(f.u.col(j))) {
      negate_col(f.u, j);
      if (j < k) negate_col(f.v, j);
    }
  }
  for (std::size_t j = k; j < f.v.cols(); ++j)
    if (largest_entry_negative(f.v.col(j))) negate_col(f.v, j);
}

}  // namespace

SvdFactors svd(const Matrix& w, const SvdOptions& options) {
  if (!w.all_finite()) throw ValueError("svd: input has non-finite entries");
  SvdFactors f = [&] {
    if (w.rows() >= w.cols()) return svd_tall(w, options);
    SvdFactors t = svd_tall(w.transpose(), options);
    return SvdFactors{std::move(t.v), std::move(t.s), std::move(t.u)};
  }();
  apply_sign_convention(f);
  return f;
}

std::size_t numerical_rank(const Matrix& w, double tol) {
  if (!(tol > 0.0)) throw ValueError("numerical_rank: tol must be positive");
  const SvdFactors f = svd(w);
  if (f.s.empty() || f.s[0] == 0.0) return 0;
  const double cut = tol * f.s[0];
  return static_cast<std::size_t>(
      std::count_if(f.s.begin(), f.s.end(), [cut](double x) { return x > cut; }));
}

std::pair<Matrix, Matrix> qr(const Matrix& w) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const std::size_t k = std::min(m, n);
  Matrix r = w;
  Columns reflectors;
  reflectors.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> x(m - j);
    for (std::size_t i = j; i < m; ++i) x[i - j] = r(i, j);
    const double nx = norm2(x);
    if (nx == 0.0) {
      reflectors.emplace_back();
      continue;
    }
    const double alpha = -std::copysign(nx, x[0]);
    x[0] -= alpha;
    const double nv = norm2(x);
    if (nv == 0.0) {
      reflectors.emplace_back();
      continue;
    }
    for (double& xi : x) xi /= nv;
    for (std::size_t c = j; c < n; ++c) {
      double s = 0.0;
      for (std::size_t i = j; i < m; ++i) s += x[i - j] * r(i, c);
      for (std::size_t i = j; i < m; ++i) r(i, c) -= 2.0 * s * x[i - j];
    }
    reflectors.push_back(std::move(x));
  }

  Matrix q(m, k);
  for (std::size_t c = 0; c < k; ++c) q(c, c) = 1.0;
  for (std::size_t jj = k; jj-- > 0;) {
    const auto& x = reflectors[jj];
    if (x.empty()) continue;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t i = jj; i < m; ++i) s += x[i - jj] * q(i, c);
      for (std::size_t i = jj; i < m; ++i) q(i, c) -= 2.0 * s * x[i - jj];
    }
  }

  Matrix rk(k, n);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t c = i; c < n; ++c) rk(i, c) = r(i, c);
  for (std::size_t i = 0; i < k; ++i) {
    if (rk(i, i) < 0.0) {
      for (std::size_t c = 0; c < n; ++c) rk(i, c) = -rk(i, c);
      negate_col(q, i);
    }
  }
  return {std::move(q), std::move(rk)};
}

// ---------------------------------------------------------------------------
// Text fixtures

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << m(i, j);
    }
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in) {
  long long rows = 0;
  long long cols = 0;
  if (!(in >> rows >> cols)) throw FormatError("matrix text: missing 'rows cols' header");
  if (rows < 1 || cols < 1) throw FormatError("matrix text: dimensions must be positive");
  std::vector<double> data(static_cast<std::size_t>(rows * cols));
  for (double& x : data) {
    std::string token;
    if (!(in >> token)) throw FormatError("matrix text: fewer entries than rows*cols");
    try {
      std::size_t used = 0;
      x = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw FormatError("matrix text: bad number '" + token + "'");
    }
    if (!std::isfinite(x)) throw FormatError("matrix text: non-finite entry");
  }
  std::string extra;
  if (in >> extra) throw FormatError("matrix text: trailing data after entries");
  return Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), std::move(data));
}

void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_matrix(out, m);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_matrix(in);
}

}  // namespace svft
