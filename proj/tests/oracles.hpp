#pragma once

// Reference computations for the tests. Each one works on plain nested
// vectors and takes a different route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "svft/linalg.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const svft::Matrix& m) {
  Dense d(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline Dense triple_loop(const Dense& a, const Dense& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.front().size();
  Dense c(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i][j] += a[i][p] * b[p][j];
  return c;
}

inline Dense transpose(const Dense& a) {
  Dense t(a.front().size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline double max_diff(const svft::Matrix& m, const Dense& d) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) worst = std::max(worst, std::abs(m(i, j) - d[i][j]));
  return worst;
}

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations,
/// sorted in decreasing order.
inline std::vector<double> symmetric_eigenvalues(Dense a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a[i][j] * a[i][j];
        if (i != j) off += a[i][j] * a[i][j];
      }
    if (off <= 1e-30 * std::max(total, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

/// Rank by Gaussian elimination with complete pivoting; pivots at or below
/// tol·(largest initial entry) count as zero.
inline std::size_t elimination_rank(Dense a, double tol) {
  const std::size_t rows = a.size(), cols = a.front().size();
  double scale = 0.0;
  for (const auto& r : a)
    for (double v : r) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0;
  std::size_t rank = 0;
  std::vector<bool> used_col(cols, false);
  for (std::size_t step = 0; step < std::min(rows, cols); ++step) {
    double best = 0.0;
    std::size_t pr = 0, pc = 0;
    for (std::size_t i = rank; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        if (!used_col[j] && std::abs(a[i][j]) > best) {
          best = std::abs(a[i][j]);
          pr = i;
          pc = j;
        }
    if (best <= tol * scale) break;
    std::swap(a[rank], a[pr]);
    used_col[pc] = true;
    for (std::size_t i = rank + 1; i < rows; ++i) {
      const double f = a[i][pc] / a[rank][pc];
      for (std::size_t j = 0; j < cols; ++j) a[i][j] -= f * a[rank][j];
    }
    ++rank;
  }
  return rank;
}

inline bool in_band(std::size_t i, std::size_t j, std::size_t d) { return (i > j ? i - j : j - i) <= d; }

/// Positions of the k largest entries of a table, ties in row-major order.
inline std::vector<std::pair<std::size_t, std::size_t>> top_k_positions(const Dense& scores, std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores[i].size(); ++j) all.emplace_back(i, j);
  std::stable_sort(all.begin(), all.end(), [&](const auto& x, const auto& y) {
    return scores[x.first][x.second] > scores[y.first][y.second];
  });
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

/// sum_t coeff_t · col_i(U) · (col_j(V)ᵀ x) over the given terms.
struct Term {
  std::size_t i, j;
  double coeff;
};

inline std::vector<double> rank_one_sum(const svft::Matrix& u, const svft::Matrix& v, const std::vector<Term>& terms,
                                        const std::vector<double>& x) {
  std::vector<double> h(u.rows(), 0.0);
  for (const Term& t : terms) {
    double vx = 0.0;
    for (std::size_t p = 0; p < v.rows(); ++p) vx += v(p, t.j) * x[p];
    for (std::size_t q = 0; q < u.rows(); ++q) h[q] += t.coeff * u(q, t.i) * vx;
  }
  return h;
}

}  // namespace oracle
