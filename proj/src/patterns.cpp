#include "svft/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "svft/errors.hpp"
#include "svft/rng.hpp"

namespace svft {

std::string to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::Plain: return "plain";
    case PatternKind::Banded: return "banded";
    case PatternKind::Random: return "random";
    case PatternKind::TopK: return "topk";
    case PatternKind::Custom: return "custom";
  }
  return "unknown";
}

SparsityPattern::SparsityPattern(std::size_t d1, std::size_t d2, std::vector<Coord> indices,
                                 PatternParams params)
    : d1_(d1), d2_(d2), indices_(std::move(indices)), params_(params) {
  if (d1_ == 0 || d2_ == 0) throw ShapeError("pattern dimensions must be positive");
  if (indices_.empty()) throw ValueError("pattern must hold at least one index");
  std::sort(indices_.begin(), indices_.end());
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    const Coord c = indices_[k];
    if (c.row >= d1_ || c.col >= d2_) {
      std::ostringstream msg;
      msg << "pattern index (" << c.row << ", " << c.col << ") outside " << d1_ << "x" << d2_;
      throw ValueError(msg.str());
    }
    if (k > 0 && indices_[k - 1] == c) throw ValueError("pattern has duplicate indices");
  }
}

bool SparsityPattern::contains(Coord c) const {
  return std::binary_search(indices_.begin(), indices_.end(), c);
}

bool SparsityPattern::includes(const SparsityPattern& other) const {
  return std::includes(indices_.begin(), indices_.end(), other.indices_.begin(),
                       other.indices_.end());
}

SparsityPattern plain(std::size_t d1, std::size_t d2) {
  const std::size_t n = std::min(d1, d2);
  std::vector<Coord> idx;
  idx.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    idx.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)});
  return SparsityPattern(d1, d2, std::move(idx), {PatternKind::Plain});
}

SparsityPattern banded(std::size_t d1, std::size_t d2, std::size_t band) {
  std::vector<Coord> idx;
  for (std::size_t i = 0; i < d1; ++i) {
    const std::size_t lo = i > band ? i - band : 0;
    const std::size_t hi = std::min(d2 - 1, i + band);
    for (std::size_t j = lo; j <= hi && lo < d2; ++j)
      idx.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  }
  PatternParams params{PatternKind::Banded};
  params.band = static_cast<std::uint32_t>(band);
  return SparsityPattern(d1, d2, std::move(idx), params);
}

SparsityPattern random_pattern(std::size_t d1, std::size_t d2, std::size_t total,
                               std::uint64_t seed) {
  const std::size_t diag = std::min(d1, d2);
  if (total < diag || total > d1 * d2) {
    std::ostringstream msg;
    msg << "random pattern budget " << total << " outside [" << diag << ", " << d1 * d2 << "]";
    throw BudgetError(msg.str());
  }
  std::vector<Coord> off;
  off.reserve(d1 * d2 - diag);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j)
      if (i != j) off.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});

  const std::size_t extra = total - diag;
  Rng rng(seed);
  for (std::size_t k = 0; k < extra; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(off.size() - k));
    std::swap(off[k], off[pick]);
  }
  std::vector<Coord> idx(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(extra));
  for (std::size_t i = 0; i < diag; ++i)
    idx.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)});
  PatternParams params{PatternKind::Random};
  params.count = static_cast<std::uint32_t>(total);
  params.seed = seed;
  return SparsityPattern(d1, d2, std::move(idx), params);
}

std::size_t random_total_for_band(std::size_t d1, std::size_t d2, std::size_t band) {
  return banded(d1, d2, band).size();
}

Matrix alignment_scores(const SvdFactors& factors) {
  if (factors.d1() != factors.d2())
    throw UnsupportedShapeError("top-k alignment needs square weights (left and right "
                                "singular vectors of equal length)");
  Matrix scores = matmul_tn(factors.u, factors.v);
  for (double& x : scores.data()) x = std::abs(x);
  return scores;
}

SparsityPattern top_k(const SvdFactors& factors, std::size_t k) {
  const Matrix scores = alignment_scores(factors);
  const std::size_t n = factors.d1();
  if (k < 1 || k > n * n) throw BudgetError("top-k: k must lie in [1, d1*d2]");
  std::vector<std::size_t> order(n * n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto flat = scores.data();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return flat[a] > flat[b]; });
  std::vector<Coord> idx;
  idx.reserve(k);
  for (std::size_t t = 0; t < k; ++t)
    idx.push_back({static_cast<std::uint32_t>(order[t] / n), static_cast<std::uint32_t>(order[t] % n)});
  PatternParams params{PatternKind::TopK};
  params.count = static_cast<std::uint32_t>(k);
  return SparsityPattern(n, n, std::move(idx), params);
}

std::size_t banded_count(std::size_t dim, std::size_t band) {
  if (band >= dim) throw BudgetError("banded_count: band must be smaller than the dimension");
  return dim * (2 * band + 1) - band * (band + 1);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValueError("bad " + what + " '" + s + "'");
  }
}

}  // namespace

SparsityPattern make_pattern(const std::string& spec, std::size_t d1, std::size_t d2,
                             const SvdFactors* factors) {
  const auto parts = split(spec, ':');
  if (parts.empty()) throw ValueError("empty pattern spec");
  const std::string& kind = parts[0];
  if (kind == "plain" && parts.size() == 1) return plain(d1, d2);
  if (kind == "banded" && parts.size() == 2)
    return banded(d1, d2, parse_u64(parts[1], "band width"));
  if (kind == "random" && parts.size() == 3)
    return random_pattern(d1, d2, parse_u64(parts[1], "random total"),
                          parse_u64(parts[2], "seed"));
  if (kind == "topk" && parts.size() == 2) {
    if (factors == nullptr) throw ValueError("top-k pattern needs the base factors");
    return top_k(*factors, parse_u64(parts[1], "k"));
  }
  throw ValueError("unknown pattern spec '" + spec +
                   "' (expected plain, banded:<d>, random:<total>:<seed>, topk:<k>)");
}

}  // namespace svft
