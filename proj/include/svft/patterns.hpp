#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "svft/linalg.hpp"

namespace svft {

/// Position (row, col) of a trainable coefficient in M.
struct Coord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  auto operator<=>(const Coord&) const = default;
};

enum class PatternKind : std::uint8_t {
  Plain = 0,
  Banded = 1,
  Random = 2,
  TopK = 3,
  Custom = 4,
};

std::string to_string(PatternKind kind);

/// Construction parameters; only the fields meaningful for `kind` are set.
struct PatternParams {
  PatternKind kind = PatternKind::Plain;
  std::uint32_t band = 0;    // Banded
  std::uint32_t count = 0;   // Random total, TopK k
  std::uint64_t seed = 0;    // Random
  friend bool operator==(const PatternParams&, const PatternParams&) = default;
};

/// The fixed index set of trainable entries of M. Indices are row-major
/// sorted, duplicate-free, in bounds and never empty.
class SparsityPattern {
 public:
  /// Validates and sorts `indices`; throws ValueError on empty or
  /// out-of-bounds input, duplicates are rejected rather than merged.
  SparsityPattern(std::size_t d1, std::size_t d2, std::vector<Coord> indices,
                  PatternParams params = {PatternKind::Custom});

  std::size_t d1() const noexcept { return d1_; }
  std::size_t d2() const noexcept { return d2_; }
  std::size_t size() const noexcept { return indices_.size(); }
  const std::vector<Coord>& indices() const noexcept { return indices_; }
  const PatternParams& params() const noexcept { return params_; }
  PatternKind kind() const noexcept { return params_.kind; }

  bool contains(Coord c) const;
  /// True when every index of `other` is also in this pattern.
  bool includes(const SparsityPattern& other) const;

  friend bool operator==(const SparsityPattern&, const SparsityPattern&) = default;

 private:
  std::size_t d1_;
  std::size_t d2_;
  std::vector<Coord> indices_;
  PatternParams params_;
};

/// Diagonal of M: min(d1, d2) coefficients.
SparsityPattern plain(std::size_t d1, std::size_t d2);

/// {(i, j) : |i - j| <= band}, clipped to the matrix.
SparsityPattern banded(std::size_t d1, std::size_t d2, std::size_t band);

/// The full diagonal plus `total - min(d1, d2)` distinct off-diagonal positions
/// drawn uniformly without replacement (partial Fisher-Yates over the
/// row-major list of off-diagonal positions, driven by Rng(seed)).
/// Throws BudgetError unless min(d1, d2) <= total <= d1*d2.
SparsityPattern random_pattern(std::size_t d1, std::size_t d2, std::size_t total,
                               std::uint64_t seed);

/// Coefficient total of banded(d1, d2, band); lets Random runs match a band's budget.
std::size_t random_total_for_band(std::size_t d1, std::size_t d2, std::size_t band);

/// The k positions with the largest |u_iᵀ v_j|, ties broken in row-major order.
/// Square weights only (UnsupportedShapeError otherwise).
SparsityPattern top_k(const SvdFactors& factors, std::size_t k);

/// Score table |u_iᵀ v_j| used by top_k.
Matrix alignment_scores(const SvdFactors& factors);

inline std::size_t pattern_cardinality(const SparsityPattern& p) { return p.size(); }

/// Closed form for a square banded pattern: D(2d+1) - d(d+1), valid for d < D.
std::size_t banded_count(std::size_t dim, std::size_t band);

/// Parses "plain", "banded:<d>", "random:<total>:<seed>", "topk:<k>".
/// Top-k requires factors; pass nullptr for the other kinds.
SparsityPattern make_pattern(const std::string& spec, std::size_t d1, std::size_t d2,
                             const SvdFactors* factors = nullptr);

}  // namespace svft
