#include "svft/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "svft/errors.hpp"

namespace svft {

SvftAdapter::SvftAdapter(std::shared_ptr<const SvdFactors> factors, SparsityPattern pattern,
                         std::vector<double> values, std::size_t effective_rank,
                         bool truncate_base)
    : factors_(std::move(factors)),
      pattern_(std::move(pattern)),
      values_(std::move(values)),
      effective_rank_(effective_rank),
      truncate_base_(truncate_base) {
  if (!factors_) throw ValueError("adapter needs factors");
  if (factors_->d1() != pattern_.d1() || factors_->d2() != pattern_.d2())
    throw ShapeError("pattern dimensions do not match the base factors");
  if (values_.size() != pattern_.size())
    throw ShapeError("value count " + std::to_string(values_.size()) +
                     " does not match pattern size " + std::to_string(pattern_.size()));
  const std::size_t full = factors_->rank_capacity();
  if (effective_rank_ < 1 || effective_rank_ > full)
    throw ValueError("effective rank must lie in [1, min(d1, d2)]");
  if (effective_rank_ < full) {
    for (const Coord c : pattern_.indices())
      if (c.row >= effective_rank_ || c.col >= effective_rank_)
        throw ValueError("pattern index outside the truncated block");
  }
  for (double x : values_)
    if (!std::isfinite(x)) throw ValueError("adapter values must be finite");
}

SvftAdapter SvftAdapter::init(const Matrix& w0, SparsityPattern pattern) {
  return init(std::make_shared<const SvdFactors>(svd(w0)), std::move(pattern));
}

SvftAdapter SvftAdapter::init(std::shared_ptr<const SvdFactors> factors, SparsityPattern pattern) {
  const std::size_t n = pattern.size();
  const std::size_t r = factors->rank_capacity();
  return SvftAdapter(std::move(factors), std::move(pattern), std::vector<double>(n, 0.0), r);
}

Matrix forward(const SvftAdapter& a, const Matrix& x) {
  if (x.rows() != a.d2())
    throw ShapeError("forward: input has " + std::to_string(x.rows()) + " rows, adapter expects " +
                     std::to_string(a.d2()));
  const SvdFactors& f = a.factors();
  const Matrix y = matmul_tn(f.v, x);  // Vᵀx, d2×n
  Matrix z(a.d1(), x.cols());          // (Σ + M) Vᵀx
  for (std::size_t i = 0; i < a.base_rank(); ++i) {
    auto zi = z.row(i);
    auto yi = y.row(i);
    for (std::size_t c = 0; c < x.cols(); ++c) zi[c] = f.s[i] * yi[c];
  }
  const auto& idx = a.pattern().indices();
  const auto vals = a.values();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (vals[k] == 0.0) continue;
    auto zi = z.row(idx[k].row);
    auto yj = y.row(idx[k].col);
    for (std::size_t c = 0; c < x.cols(); ++c) zi[c] += vals[k] * yj[c];
  }
  return matmul(f.u, z);
}

Matrix delta_w(const SvftAdapter& a) {
  const SvdFactors& f = a.factors();
  Matrix m(a.d1(), a.d2());
  const auto& idx = a.pattern().indices();
  const auto vals = a.values();
  for (std::size_t k = 0; k < idx.size(); ++k) m(idx[k].row, idx[k].col) = vals[k];
  return matmul_nt(matmul(f.u, m), f.v);
}

Matrix fuse(const SvftAdapter& a) {
  return a.factors().reconstruct(a.base_rank()) + delta_w(a);
}

std::vector<double> grad_values(const SvftAdapter& a, const Matrix& upstream) {
  if (upstream.rows() != a.d1() || upstream.cols() != a.d2())
    throw ShapeError("grad_values: upstream must be d1 x d2");
  const SvdFactors& f = a.factors();
  const Matrix gv = matmul(upstream, f.v);  // columns are upstream·v_j
  const auto& idx = a.pattern().indices();
  std::vector<double> g(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.d1(); ++r) s += f.u(r, idx[k].row) * gv(r, idx[k].col);
    g[k] = s;
  }
  return g;
}

Matrix solve_expressivity(const Matrix& w0, const Matrix& target) {
  return solve_expressivity(svd(w0), w0, target);
}

Matrix solve_expressivity(const SvdFactors& factors, const Matrix& w0, const Matrix& target,
                          std::optional<std::size_t> rank) {
  if (w0.rows() != target.rows() || w0.cols() != target.cols())
    throw ShapeError("solve_expressivity: base and target shapes differ");
  if (factors.d1() != w0.rows() || factors.d2() != w0.cols())
    throw ShapeError("solve_expressivity: factors do not match the base");
  Matrix m = matmul(matmul_tn(factors.u, target - w0), factors.v);
  if (rank) {
    const std::size_t r = *rank;
    if (r < 1 || r > factors.rank_capacity())
      throw ValueError("solve_expressivity: rank out of range");
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        if (i >= r || j >= r) m(i, j) = 0.0;
  }
  return m;
}

SvftAdapter truncate(const SvftAdapter& a, std::size_t r, bool truncate_base) {
  const std::size_t full = a.factors().rank_capacity();
  if (r < 1 || r > full)
    throw ValueError("truncate: r must lie in [1, " + std::to_string(full) + "]");
  if (r > a.effective_rank())
    throw ValueError("truncate: cannot raise the effective rank of an already truncated adapter");
  std::vector<Coord> kept;
  std::vector<double> vals;
  const auto& idx = a.pattern().indices();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k].row < r && idx[k].col < r) {
      kept.push_back(idx[k]);
      vals.push_back(a.values()[k]);
    }
  }
  if (kept.empty()) throw BudgetError("truncate: no trainable coefficient survives rank " +
                                      std::to_string(r));
  SparsityPattern p(a.d1(), a.d2(), std::move(kept), a.pattern().params());
  return SvftAdapter(a.shared_factors(), std::move(p), std::move(vals), r,
                     (truncate_base || a.truncates_base()) && r < full);
}

// ---------------------------------------------------------------------------
// Structure checks

StructureReport alignment_report(const Matrix& w0, const SvdFactors& factors, const Matrix& m) {
  if (m.rows() != w0.rows() || m.cols() != w0.cols())
    throw ShapeError("alignment_report: M must match W0");
  const std::size_t n = factors.rank_capacity();
  const Matrix perturbed = w0 + matmul_nt(matmul(factors.u, m), factors.v);
  const SvdFactors after = svd(perturbed);

  StructureReport rep;
  rep.expected_singular_values.resize(n);
  for (std::size_t i = 0; i < n; ++i) rep.expected_singular_values[i] = std::abs(factors.s[i] + m(i, i));
  rep.observed_singular_values = after.s;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& e = rep.expected_singular_values;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return e[x] > e[y]; });
  std::vector<std::size_t> slot(n);
  for (std::size_t pos = 0; pos < n; ++pos) slot[order[pos]] = pos;

  const double scale = std::max(after.s.empty() ? 0.0 : after.s[0], 1e-300);
  rep.left_alignment.resize(n);
  rep.right_alignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = slot[i];
    rep.left_alignment[i] = std::abs(dot(factors.u.col(i), after.u.col(j)));
    rep.right_alignment[i] = std::abs(dot(factors.v.col(i), after.v.col(j)));
    rep.min_alignment = std::min({rep.min_alignment, rep.left_alignment[i], rep.right_alignment[i]});
    rep.max_singular_value_error =
        std::max(rep.max_singular_value_error, std::abs(after.s[j] - e[i]) / scale);
  }
  rep.success = rep.min_alignment >= 1.0 - kStructureTolerance &&
                rep.max_singular_value_error <= kStructureTolerance;
  return rep;
}

namespace {

void require_separated(std::vector<double> values, double scale, const char* what) {
  std::sort(values.begin(), values.end(), std::greater<>());
  const double gap = 1e-6 * scale;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= gap) {
      throw SpectrumDegeneracyError(std::string(what) + ": singular value too close to zero");
    }
    if (i > 0 && values[i - 1] - values[i] <= gap) {
      std::ostringstream msg;
      msg << what << ": singular values " << values[i - 1] << " and " << values[i]
          << " are not separated by more than " << gap;
      throw SpectrumDegeneracyError(msg.str());
    }
  }
}

}  // namespace

StructureReport verify_plain_structure(const Matrix& w0, std::span<const double> diag_values) {
  return verify_plain_structure(w0, svd(w0), diag_values);
}

StructureReport verify_plain_structure(const Matrix& w0, const SvdFactors& factors,
                                       std::span<const double> diag_values) {
  const std::size_t n = factors.rank_capacity();
  if (diag_values.size() != n)
    throw ShapeError("verify_plain_structure: need min(d1, d2) diagonal values");
  const double smax = factors.s.empty() ? 0.0 : factors.s[0];
  require_separated(factors.s, smax, "base spectrum");
  std::vector<double> shifted(n);
  for (std::size_t i = 0; i < n; ++i) shifted[i] = std::abs(factors.s[i] + diag_values[i]);
  require_separated(shifted, *std::max_element(shifted.begin(), shifted.end()), "shifted spectrum");
  return alignment_report(w0, factors, Matrix::diagonal(w0.rows(), w0.cols(), diag_values));
}

}  // namespace svft
