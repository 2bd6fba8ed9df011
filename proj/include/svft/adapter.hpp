#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "svft/linalg.hpp"
#include "svft/patterns.hpp"

namespace svft {

/// Sparse singular-vector adapter: h = U (Σ + M) Vᵀ x with U, Σ, V frozen
/// and only the entries of M listed in `pattern` trainable.
///
/// `values[k]` is the coefficient at `pattern.indices()[k]`. An adapter with
/// effective rank r < min(d1, d2) only carries indices inside the leading
/// r×r block. By default the frozen base stays exact; with `truncate_base`
/// the base itself is replaced by its rank-r approximation U_r Σ_r V_rᵀ.
class SvftAdapter {
 public:
  SvftAdapter(std::shared_ptr<const SvdFactors> factors, SparsityPattern pattern,
              std::vector<double> values, std::size_t effective_rank, bool truncate_base = false);

  /// Factors W0 once; all values start at zero so the adapted map equals W0.
  static SvftAdapter init(const Matrix& w0, SparsityPattern pattern);
  static SvftAdapter init(std::shared_ptr<const SvdFactors> factors, SparsityPattern pattern);

  const SvdFactors& factors() const noexcept { return *factors_; }
  const std::shared_ptr<const SvdFactors>& shared_factors() const noexcept { return factors_; }
  const SparsityPattern& pattern() const noexcept { return pattern_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::size_t effective_rank() const noexcept { return effective_rank_; }
  bool truncates_base() const noexcept { return truncate_base_; }

  std::size_t d1() const noexcept { return pattern_.d1(); }
  std::size_t d2() const noexcept { return pattern_.d2(); }
  std::size_t num_trainable() const noexcept { return values_.size(); }

  /// Number of leading singular triplets that make up the frozen base.
  std::size_t base_rank() const noexcept {
    return truncate_base_ ? effective_rank_ : factors_->rank_capacity();
  }

 private:
  std::shared_ptr<const SvdFactors> factors_;
  SparsityPattern pattern_;
  std::vector<double> values_;
  std::size_t effective_rank_;
  bool truncate_base_;
};

/// U (Σ + M) Vᵀ x for a d2×n block of inputs.
Matrix forward(const SvftAdapter& a, const Matrix& x);

/// U M Vᵀ, materialized.
Matrix delta_w(const SvftAdapter& a);

/// The frozen base plus the update as a single dense matrix.
Matrix fuse(const SvftAdapter& a);

/// Gradient of the loss w.r.t. the trainable coefficients given
/// upstream = ∂L/∂(fused weight): g_k = u_iᵀ · upstream · v_j for (i, j) = indices[k].
std::vector<double> grad_values(const SvftAdapter& a, const Matrix& upstream);

/// Dense M with W0 + U M Vᵀ = target. When `rank` is set, M is restricted to
/// the leading rank×rank block (the best approximation in that subspace).
Matrix solve_expressivity(const Matrix& w0, const Matrix& target);
Matrix solve_expressivity(const SvdFactors& factors, const Matrix& w0, const Matrix& target,
                          std::optional<std::size_t> rank = std::nullopt);

/// Reduces the adapter to its leading r singular directions, dropping
/// coefficients with i >= r or j >= r. Throws ValueError for r outside
/// [1, min(d1, d2)] and BudgetError if no coefficient survives.
SvftAdapter truncate(const SvftAdapter& a, std::size_t r, bool truncate_base = false);

/// Column-by-column comparison of the singular vectors of W0 and of
/// W0 + U M Vᵀ. Column i of W0 is matched with the column of the perturbed
/// matrix whose singular value ranks where |σ_i + M_ii| ranks.
struct StructureReport {
  std::vector<double> left_alignment;    // |u_iᵀ u'_i|
  std::vector<double> right_alignment;   // |v_iᵀ v'_i|
  std::vector<double> expected_singular_values;
  std::vector<double> observed_singular_values;
  double min_alignment = 1.0;
  double max_singular_value_error = 0.0;  // relative to max observed σ
  bool success = false;
};

inline constexpr double kStructureTolerance = 1e-8;

StructureReport alignment_report(const Matrix& w0, const SvdFactors& factors, const Matrix& m);

/// Recomputes the SVD of W0 + U diag(values) Vᵀ and checks that the singular
/// vectors are those of W0 up to sign. Requires a separated spectrum in both
/// W0 and Σ + diag(values); throws SpectrumDegeneracyError otherwise.
StructureReport verify_plain_structure(const Matrix& w0, std::span<const double> diag_values);
StructureReport verify_plain_structure(const Matrix& w0, const SvdFactors& factors,
                                       std::span<const double> diag_values);

}  // namespace svft
