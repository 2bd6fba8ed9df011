#include "svft/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "svft/adapter.hpp"
#include "svft/adapter_io.hpp"
#include "svft/baselines.hpp"
#include "svft/errors.hpp"
#include "svft/linalg.hpp"
#include "svft/patterns.hpp"
#include "svft/rng.hpp"
#include "svft/train.hpp"

namespace svft::verify {

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"svd",       "patterns", "fusion",   "expressivity",
                                                 "structure", "rank",     "gradient", "baselines",
                                                 "count",     "persistence"};
  return names;
}

Fault parse_fault(const std::string& name) {
  if (name == "none") return Fault::None;
  if (name == "sign-convention") return Fault::SignConvention;
  throw ValueError("unknown fault '" + name + "' (expected none or sign-convention)");
}

namespace {

// Accumulates the worst value seen for a named check and turns it into one
// table row, so each property is one line no matter how many instances ran.
class Check {
 public:
  Check(std::string name, double limit) : name_(std::move(name)), limit_(limit) {}

  void observe(double value) {
    if (!std::isfinite(value)) finite_ = false;
    worst_ = std::max(worst_, value);
    ++count_;
  }
  // For "must reach at least" checks.
  void observe_min(double value) {
    if (!std::isfinite(value)) finite_ = false;
    lowest_ = std::min(lowest_, value);
    ++count_;
  }
  CheckResult upper_bound() const {
    std::ostringstream d;
    d << count_ << " cases, worst " << std::setprecision(3) << worst_ << " (limit " << limit_ << ")";
    return {name_, finite_ && worst_ <= limit_, d.str()};
  }
  CheckResult lower_bound() const {
    std::ostringstream d;
    d << count_ << " cases, lowest " << std::setprecision(3) << lowest_ << " (needs > " << limit_ << ")";
    return {name_, finite_ && lowest_ > limit_, d.str()};
  }

 private:
  std::string name_;
  double limit_;
  double worst_ = 0.0;
  double lowest_ = INFINITY;
  std::size_t count_ = 0;
  bool finite_ = true;
};

CheckResult exact(const std::string& name, std::size_t cases, std::size_t violations, const std::string& first) {
  std::ostringstream d;
  d << cases << " cases, " << violations << " violations";
  if (violations) d << "; first: " << first;
  return {name, violations == 0, d.str()};
}

double rel(const Matrix& a, const Matrix& b) {
  const double scale = std::max(frobenius_norm(b), 1e-300);
  return frobenius_norm(a - b) / scale;
}

Matrix orthogonal(std::size_t n, Rng& rng) { return qr(Matrix::random_normal(n, n, rng)).first; }

double orthonormality_error(const Matrix& q) {
  return max_abs(matmul_tn(q, q) - Matrix::identity(q.cols()));
}

std::size_t dim_in(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// W = Q1 diag(s) Q2ᵀ with gaps of at least 0.75 between consecutive singular values.
Matrix separated_matrix(std::size_t m, std::size_t n, Rng& rng) {
  const std::size_t r = std::min(m, n);
  std::vector<double> s(r);
  for (std::size_t i = 0; i < r; ++i) s[i] = static_cast<double>(r - i) + 0.25 * rng.uniform();
  return matmul_nt(matmul(orthogonal(m, rng), Matrix::diagonal(m, n, s)), orthogonal(n, rng));
}

SvftAdapter random_adapter(const Matrix& w0, const SparsityPattern& p, Rng& rng) {
  auto a = SvftAdapter::init(w0, p);
  for (double& v : a.values()) v = rng.normal();
  return a;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> suite_svd(const VerifyOptions& opt) {
  Rng rng(mix_seed(opt.seed, 101));
  Check recon("reconstruction <= 1e-10 |W|_F", 1e-10);
  Check ortho("orthonormality <= 1e-10 dim", 1e-10);
  Check idem("singular values idempotent <= 1e-10", 1e-10);
  std::size_t ordered_bad = 0, sign_bad = 0, cases = 0;
  for (int t = 0; t < 60; ++t) {
    const std::size_t m = dim_in(rng, 1, 16), n = dim_in(rng, 1, 16);
    Matrix w = Matrix::random_normal(m, n, rng);
    if (t % 5 == 4 && std::min(m, n) > 1) {  // rank deficient
      const std::size_t k = dim_in(rng, 1, std::min(m, n) - 1);
      w = matmul(Matrix::random_normal(m, k, rng), Matrix::random_normal(k, n, rng));
    }
    const SvdFactors f = svd(w);
    ++cases;
    recon.observe(frobenius_norm(f.reconstruct() - w) / std::max(frobenius_norm(w), 1e-300));
    ortho.observe(orthonormality_error(f.u) / static_cast<double>(m));
    ortho.observe(orthonormality_error(f.v) / static_cast<double>(n));
    for (std::size_t i = 0; i < f.s.size(); ++i)
      if (f.s[i] < 0 || (i > 0 && f.s[i] > f.s[i - 1])) ++ordered_bad;
    for (std::size_t j = 0; j < f.u.cols(); ++j)
      if (largest_entry_negative(f.u.col(j))) ++sign_bad;
    const SvdFactors again = svd(f.reconstruct());
    for (std::size_t i = 0; i < f.s.size(); ++i)
      idem.observe(std::abs(again.s[i] - f.s[i]) / std::max(1.0, f.s[0]));
  }

  std::size_t rank_bad = 0;
  std::string first;
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = dim_in(rng, 2, 12), n = dim_in(rng, 2, 12);
    const std::size_t k = dim_in(rng, 1, std::min(m, n));
    const Matrix w = matmul(Matrix::random_normal(m, k, rng), Matrix::random_normal(k, n, rng));
    const Matrix rotated = matmul(matmul(orthogonal(m, rng), w), orthogonal(n, rng));
    const std::size_t r0 = numerical_rank(w, 1e-9), r1 = numerical_rank(rotated, 1e-9);
    if (r0 != r1 || r0 != k) {
      if (!rank_bad) first = std::to_string(m) + "x" + std::to_string(n) + " rank " + std::to_string(k);
      ++rank_bad;
    }
  }

  Check qr_check("QR reconstruction and orthonormality <= 1e-12", 1e-12);
  std::size_t qr_sign_bad = 0;
  for (int t = 0; t < 20; ++t) {
    const Matrix w = Matrix::random_normal(dim_in(rng, 1, 12), dim_in(rng, 1, 12), rng);
    const auto [q, r] = qr(w);
    qr_check.observe(rel(matmul(q, r), w));
    qr_check.observe(orthonormality_error(q));
    for (std::size_t i = 0; i < r.rows(); ++i)
      if (r(i, i) < 0) ++qr_sign_bad;
  }

  return {recon.upper_bound(),
          ortho.upper_bound(),
          exact("singular values sorted and nonnegative", cases, ordered_bad, "unsorted spectrum"),
          exact("sign convention on U columns", cases, sign_bad, "negative leading entry"),
          idem.upper_bound(),
          exact("numerical rank invariant under rotations", 30, rank_bad, first),
          qr_check.upper_bound(),
          exact("QR diagonal nonnegative", 20, qr_sign_bad, "negative R_ii")};
}

std::vector<CheckResult> suite_patterns(const VerifyOptions& opt) {
  std::size_t ident_bad = 0, ident_cases = 0;
  std::string first;
  for (std::size_t dim = 1; dim <= 64; ++dim) {
    for (std::size_t d = 0; d < dim; ++d) {
      std::size_t brute = 0;
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) brute += (i > j ? i - j : j - i) <= d;
      ++ident_cases;
      if (banded(dim, dim, d).size() != brute || banded_count(dim, d) != brute) {
        if (!ident_bad) first = "D=" + std::to_string(dim) + " d=" + std::to_string(d);
        ++ident_bad;
      }
    }
  }

  Rng rng(mix_seed(opt.seed, 102));
  std::size_t nest_bad = 0, nest_cases = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = dim_in(rng, 1, 12), n = dim_in(rng, 1, 12);
    SparsityPattern prev = plain(m, n);
    for (std::size_t d = 0; d < std::max(m, n); ++d) {
      const SparsityPattern cur = banded(m, n, d);
      ++nest_cases;
      if (!cur.includes(prev)) ++nest_bad;
      prev = cur;
    }
  }

  std::size_t det_bad = 0, anchor_bad = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = dim_in(rng, 1, 12), n = dim_in(rng, 1, 12);
    const std::size_t total = dim_in(rng, std::min(m, n), m * n);
    const std::uint64_t seed = rng.next_u64();
    const auto a = random_pattern(m, n, total, seed);
    const auto b = random_pattern(m, n, total, seed);
    if (a.indices() != b.indices()) ++det_bad;
    if (a.size() != total || !a.includes(plain(m, n))) ++anchor_bad;
  }

  std::size_t topk_bad = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = dim_in(rng, 2, 10);
    const SvdFactors f = svd(Matrix::random_normal(n, n, rng));
    SvdFactors flipped = f;
    for (std::size_t j = 0; j < n; ++j) {
      if (rng.below(2)) {
        auto u = flipped.u.col(j);
        auto v = flipped.v.col(j);
        for (double& x : u) x = -x;
        for (double& x : v) x = -x;
        flipped.u.set_col(j, u);
        flipped.v.set_col(j, v);
      }
    }
    const std::size_t k = dim_in(rng, 1, n * n);
    if (top_k(f, k).indices() != top_k(flipped, k).indices()) ++topk_bad;
  }

  return {exact("banded cardinality identity, D <= 64", ident_cases, ident_bad, first),
          exact("plain within banded(d) within banded(d+1)", nest_cases, nest_bad, "nesting broken"),
          exact("random pattern deterministic", 40, det_bad, "index lists differ"),
          exact("random pattern anchors the diagonal", 40, anchor_bad, "diagonal missing"),
          exact("top-k independent of singular vector signs", 20, topk_bad, "selection changed")};
}

std::vector<CheckResult> suite_fusion(const VerifyOptions& opt) {
  Rng rng(mix_seed(opt.seed, 103));
  Check eq("dense forward equals rank-one sum <= 1e-12", 1e-12);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = dim_in(rng, 1, 16), n = dim_in(rng, 1, 16);
    const Matrix w0 = Matrix::random_normal(m, n, rng);
    const auto pattern = random_pattern(m, n, dim_in(rng, std::min(m, n), m * n), rng.next_u64());
    const auto a = random_adapter(w0, pattern, rng);
    const Matrix x = Matrix::random_normal(n, 3, rng);
    const SvdFactors& f = a.factors();
    Matrix sum(m, 3);
    const auto add_rank_one = [&](std::size_t i, std::size_t j, double coeff) {
      for (std::size_t c = 0; c < 3; ++c) {
        double vx = 0.0;
        for (std::size_t p = 0; p < n; ++p) vx += f.v(p, j) * x(p, c);
        for (std::size_t q = 0; q < m; ++q) sum(q, c) += coeff * f.u(q, i) * vx;
      }
    };
    for (std::size_t i = 0; i < f.s.size(); ++i) add_rank_one(i, i, f.s[i]);
    for (std::size_t k = 0; k < pattern.size(); ++k)
      add_rank_one(pattern.indices()[k].row, pattern.indices()[k].col, a.values()[k]);
    eq.observe(rel(forward(a, x), sum));
  }

  Check fused("fused forward equals adapter forward <= 1e-10", 1e-10);
  Check zero("zero adapter fuses back to W0 <= 1e-10", 1e-10);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = dim_in(rng, 2, 12);
    const std::size_t m = t % 2 ? n : dim_in(rng, 2, 12);
    const Matrix w0 = Matrix::random_normal(m, n, rng);
    auto factors = std::make_shared<const SvdFactors>(svd(w0));
    std::vector<SparsityPattern> patterns = {plain(m, n), banded(m, n, 1),
                                             random_pattern(m, n, std::min(m * n, std::min(m, n) + 3), rng.next_u64())};
    if (m == n) patterns.push_back(top_k(*factors, n + 2));
    for (const auto& p : patterns) {
      auto a = SvftAdapter::init(factors, p);
      zero.observe(rel(fuse(a), w0));
      for (double& v : a.values()) v = rng.normal();
      std::vector<SvftAdapter> variants = {a};
      const std::size_t r = std::max<std::size_t>(1, (3 * std::min(m, n)) / 4);
      if (r < std::min(m, n)) {
        variants.push_back(truncate(a, r, false));
        variants.push_back(truncate(a, r, true));
      }
      for (const auto& v : variants) {
        const Matrix fw = fuse(v);
        for (int probe = 0; probe < 10; ++probe) {
          const Matrix x = Matrix::random_normal(n, 1, rng);
          fused.observe(rel(matmul(fw, x), forward(v, x)));
        }
      }
    }
  }
  return {eq.upper_bound(), fused.upper_bound(), zero.upper_bound()};
}

std::vector<CheckResult> suite_expressivity(const VerifyOptions& opt) {
  Rng rng(mix_seed(opt.seed, 104));
  Check full("W0 + U M V^T reproduces target <= 1e-9", 1e-9);
  Check truncated("rank-restricted solve leaves a residual", 1e-6);
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = dim_in(rng, 1, 12), n = dim_in(rng, 1, 12);
    const Matrix w0 = Matrix::random_normal(m, n, rng);
    const Matrix target = Matrix::random_normal(m, n, rng);
    const SvdFactors f = svd(w0);
    const Matrix mm = solve_expressivity(f, w0, target);
    full.observe(rel(w0 + matmul_nt(matmul(f.u, mm), f.v), target));
    if (std::min(m, n) > 1) {
      const Matrix mr = solve_expressivity(f, w0, target, std::min(m, n) - 1);
      truncated.observe_min(rel(w0 + matmul_nt(matmul(f.u, mr), f.v), target));
    }
  }
  return {full.upper_bound(), truncated.lower_bound()};
}

std::vector<CheckResult> suite_structure(const VerifyOptions& opt) {
  Rng rng(mix_seed(opt.seed, 105));
  Check diag("diagonal M keeps singular vectors (1 - alignment)", kStructureTolerance);
  Check svals("diagonal M shifts singular values", kStructureTolerance);
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = dim_in(rng, 2, 7), n = t % 3 ? m : dim_in(rng, 2, 7);
    const Matrix w0 = separated_matrix(m, n, rng);
    SvdFactors f = svd(w0);
    if (opt.fault == Fault::SignConvention) {
      auto u0 = f.u.col(0);
      for (double& x : u0) x = -x;
      f.u.set_col(0, u0);
    }
    std::vector<double> values(f.rank_capacity());
    for (double& v : values) v = 0.4 * rng.uniform() - 0.2;
    const StructureReport rep = verify_plain_structure(w0, f, values);
    diag.observe(1.0 - rep.min_alignment);
    svals.observe(rep.max_singular_value_error);
  }

  const Matrix small{{3, 0}, {0, 1}};
  const std::vector<double> shift{0.5, 0.25};
  const StructureReport simple = verify_plain_structure(small, shift);
  const bool simple_ok = simple.success && std::abs(simple.observed_singular_values[0] - 3.5) < 1e-12 &&
                         std::abs(simple.observed_singular_values[1] - 1.25) < 1e-12;

  // A single off-diagonal coefficient couples two directions and rotates them.
  Check counter("off-diagonal M rotates a singular vector (1 - alignment)", 1e-3);
  for (int t = 0; t < 5; ++t) {
    const std::size_t n = dim_in(rng, 3, 6);
    const Matrix w0 = separated_matrix(n, n, rng);
    Matrix mm(n, n);
    mm(0, 1) = 0.5;
    counter.observe_min(1.0 - alignment_report(w0, svd(w0), mm).min_alignment);
  }

  bool degenerate_rejected = false;
  try {
    verify_plain_structure(Matrix::identity(3), std::vector<double>{0.1, 0.2, 0.3});
  } catch (const SpectrumDegeneracyError&) {
    degenerate_rejected = true;
  }

  return {diag.upper_bound(), svals.upper_bound(),
          {"diag(3,1) shifted by (0.5, 0.25)", simple_ok, simple_ok ? "S' = (3.5, 1.25)" : "mismatch"},
          counter.lower_bound(),
          {"repeated spectrum rejected", degenerate_rejected,
           degenerate_rejected ? "SpectrumDegeneracyError" : "accepted a degenerate spectrum"}};
}

std::vector<CheckResult> suite_rank(const VerifyOptions& opt) {
  Rng rng(mix_seed(opt.seed, 107));
  std::size_t cases = 0, bad = 0, eq_cases = 0, eq_bad = 0;
  std::string first, eq_first;
  const auto bound = [&](const SvftAdapter& a, const std::string& label) {
    const std::size_t k = a.num_trainable();
    const std::size_t r = numerical_rank(delta_w(a), 1e-9);
    ++cases;
    if (r > std::min(k, std::min(a.d1(), a.d2()))) {
      if (!bad) first = label + ": rank " + std::to_string(r) + " with k=" + std::to_string(k);
      ++bad;
    }
  };
  for (int t = 0; t < 60; ++t) {
    const std::size_t m = dim_in(rng, 1, 12), n = dim_in(rng, 1, 12);
    const Matrix w0 = Matrix::random_normal(m, n, rng);
    auto factors = std::make_shared<const SvdFactors>(svd(w0));
    const auto label = std::to_string(m) + "x" + std::to_string(n);
    std::vector<SparsityPattern> ps;
    ps.push_back(plain(m, n));
    for (std::size_t d = 1; d < std::max(m, n); ++d) {
      const auto b = banded(m, n, d);
      if (b.size() > 20) break;
      ps.push_back(b);
    }
    const std::size_t lo = std::min(m, n), hi = std::min<std::size_t>(20, m * n);
    if (lo <= hi) ps.push_back(random_pattern(m, n, dim_in(rng, lo, hi), rng.next_u64()));
    if (m == n) ps.push_back(top_k(*factors, dim_in(rng, 1, std::min<std::size_t>(20, m * n))));
    for (const auto& p : ps) {
      auto a = SvftAdapter::init(factors, p);
      for (double& v : a.values()) v = rng.normal();
      bound(a, label + " " + to_string(p.kind()));
    }

    // Diagonal support with distinct values reaches the bound.
    std::vector<Coord> diag;
    for (std::uint32_t i = 0; i < lo; ++i)
      if (rng.below(2) || diag.empty()) diag.push_back({i, i});
    auto a = SvftAdapter::init(factors, SparsityPattern(m, n, diag));
    for (std::size_t k = 0; k < a.num_trainable(); ++k) a.values()[k] = 1.0 + static_cast<double>(k);
    bound(a, label + " diagonal");
    ++eq_cases;
    if (numerical_rank(delta_w(a), 1e-9) != diag.size()) {
      if (!eq_bad) eq_first = label;
      ++eq_bad;
    }
  }
  return {exact("rank(U M V^T) <= min(k, min(d1, d2))", cases, bad, first),
          exact("diagonal support attains rank k", eq_cases, eq_bad, eq_first)};
}

std::vector<CheckResult> suite_gradient(const VerifyOptions& opt) {
  struct Case {
    std::string method;
    double limit;
    bool square_only;
  };
  const std::vector<Case> cases = {{"svft-p", 1e-5, false}, {"svft-b:1", 1e-5, false},
                                   {"svft-r:14:3", 1e-5, false}, {"svft-t:8", 1e-5, true},
                                   {"lora:2", 1e-5, false},  {"vera:3", 1e-5, false},
                                   {"dora:2", 1e-4, false}};
  std::vector<CheckResult> out;
  for (const auto& c : cases) {
    Check chk("finite differences " + c.method, c.limit);
    const auto method = train::parse_method(c.method);
    for (int t = 0; t < 4; ++t) {
      train::TaskSpec spec;
      spec.d1 = 6;
      spec.d2 = (c.square_only || t % 2 == 0) ? 6 : 5;
      spec.samples = 48;
      spec.eval_samples = 8;
      spec.noise_sigma = 0.01;
      spec.mlp_head = t == 3;
      spec.seed = mix_seed(opt.seed, 200 + static_cast<std::uint64_t>(t));
      const auto task = train::make_task(spec);
      chk.observe(train::finite_diff_check(method, task, 1e-6, spec.seed));
    }
    out.push_back(chk.upper_bound());
  }
  return out;
}

std::vector<CheckResult> suite_baselines(const VerifyOptions& opt) {
  using namespace baselines;
  Rng rng(mix_seed(opt.seed, 108));
  Check ident("identity at init (LoRA, VeRA, DoRA) <= 1e-12", 1e-12);
  std::size_t rank_bad = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = dim_in(rng, 2, 12), n = dim_in(rng, 2, 12);
    const std::size_t r = dim_in(rng, 1, std::min(m, n));
    const Matrix w0 = Matrix::random_normal(m, n, rng);
    const Matrix x = Matrix::random_normal(n, 4, rng);
    const Matrix ref = matmul(w0, x);
    const std::uint64_t seed = rng.next_u64();
    ident.observe(rel(lora_forward(w0, LoraAdapter::init(m, n, r, seed), x), ref));
    ident.observe(rel(vera_forward(w0, VeraAdapter::init(m, n, r, seed), x), ref));
    ident.observe(rel(dora_forward(w0, DoraAdapter::init(w0, r, seed), x), ref));

    LoraAdapter lora = LoraAdapter::init(m, n, r, seed);
    lora.b = Matrix::random_normal(m, r, rng);
    if (numerical_rank(lora_delta(lora), 1e-9) > r) ++rank_bad;
  }

  Check witness("VeRA span residual on an unreachable target", 1e-3);
  Check svft_reach("SVFT reaches the same target <= 1e-9", 1e-9);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = dim_in(rng, 4, 12);
    const std::size_t r = dim_in(rng, 1, n - 1);
    const auto vera = VeraAdapter::init(n, n, r, rng.next_u64());
    const Matrix target = vera_unreachable_target(vera, rng.next_u64());
    witness.observe_min(vera_span_residual(vera, target));
    const Matrix w0 = Matrix::random_normal(n, n, rng);
    const SvdFactors f = svd(w0);
    const Matrix goal = w0 + target;
    svft_reach.observe(rel(w0 + matmul_nt(matmul(f.u, solve_expressivity(f, w0, goal)), f.v), goal));
  }
  return {ident.upper_bound(), exact("rank(BA) <= r", 20, rank_bad, "LoRA update above rank r"),
          witness.lower_bound(), svft_reach.upper_bound()};
}

std::vector<CheckResult> suite_count(const VerifyOptions&) {
  using namespace baselines;
  std::size_t cases = 0, bad = 0;
  std::string first;
  const auto expect = [&](CountMethod method, std::size_t layers, std::size_t dim, std::size_t rk,
                          std::size_t enumerated) {
    ++cases;
    if (param_count(method, layers, dim, rk) != enumerated) {
      if (!bad)
        first = to_string(method) + " L=" + std::to_string(layers) + " D=" + std::to_string(dim) +
                " r/k=" + std::to_string(rk);
      ++bad;
    }
  };
  for (const std::size_t layers : {1, 2, 4}) {
    for (std::size_t dim = 4; dim <= 64; ++dim) {
      const Matrix w0 = Matrix::identity(dim);
      std::size_t p_total = 0;
      for (std::size_t l = 0; l < layers; ++l) p_total += plain(dim, dim).size();
      expect(CountMethod::SvftPlain, layers, dim, 0, p_total);
      for (std::size_t k = 0; k <= std::min<std::size_t>(8, dim - 1); ++k) {
        std::size_t b_total = 0;
        for (std::size_t l = 0; l < layers; ++l) b_total += banded(dim, dim, k).size();
        expect(CountMethod::SvftBanded, layers, dim, k, b_total);
        ++cases;
        if (dim * (2 * k + 1) - k * (k + 1) != dim * k + (dim - k) * (k + 1)) ++bad;
      }
      for (std::size_t r = 1; r <= 8; ++r) {
        std::size_t lo = 0, vo = 0, doo = 0;
        for (std::size_t l = 0; l < layers; ++l) {
          lo += LoraAdapter::init(dim, dim, r, l).num_trainable();
          vo += VeraAdapter::init(dim, dim, r, l).num_trainable();
          doo += DoraAdapter::init(w0, r, l).num_trainable();
        }
        expect(CountMethod::LoRA, layers, dim, r, lo);
        expect(CountMethod::VeRA, layers, dim, r, vo);
        expect(CountMethod::DoRA, layers, dim, r, doo);
      }
    }
  }
  const bool table_values = param_count(CountMethod::SvftPlain, 1, 2048) == 2048 &&
                            param_count(CountMethod::LoRA, 1, 2048, 1) == 4096 &&
                            param_count(CountMethod::SvftBanded, 1, 6, 2) == 24 &&
                            param_count(CountMethod::SvftBanded, 1, 2048, 16) == 67312;
  return {exact("accountant equals enumerated trainable scalars", cases, bad, first),
          {"reference counts (2048, 4096, 24, 67312)", table_values, table_values ? "match" : "mismatch"}};
}

std::vector<CheckResult> suite_persistence(const VerifyOptions& opt) {
  Rng rng(mix_seed(opt.seed, 109));
  std::size_t bad = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = dim_in(rng, 1, 10), n = dim_in(rng, 1, 10);
    const Matrix w0 = Matrix::random_normal(m, n, rng);
    const auto p = random_pattern(m, n, dim_in(rng, std::min(m, n), m * n), rng.next_u64());
    const auto a = random_adapter(w0, p, rng);
    const auto bytes = io::encode(io::to_file(a, w0));
    const auto back = io::from_file(io::decode(bytes), w0);
    const bool same = back.pattern() == a.pattern() &&
                      std::equal(a.values().begin(), a.values().end(), back.values().begin(),
                                 back.values().end(),
                                 [](double x, double y) { return std::bit_cast<std::uint64_t>(x) ==
                                                                 std::bit_cast<std::uint64_t>(y); }) &&
                      io::encode(io::to_file(back, w0)) == bytes;
    if (!same) ++bad;
  }

  const Matrix w0 = Matrix::random_normal(4, 4, rng);
  const auto bytes = io::encode(io::to_file(random_adapter(w0, banded(4, 4, 1), rng), w0));
  const auto raises = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception&) {
      return std::current_exception();
    }
    return std::exception_ptr{};
  };
  const auto is = [](std::exception_ptr e, auto* tag) {
    using T = std::remove_pointer_t<decltype(tag)>;
    if (!e) return false;
    try {
      std::rethrow_exception(e);
    } catch (const T&) {
      return true;
    } catch (...) {
      return false;
    }
  };
  Matrix other = w0;
  other(0, 0) += 1e-9;
  const bool checksum = is(raises([&] { io::from_file(io::decode(bytes), other); }), (ChecksumError*)nullptr);
  bool truncation = true;
  for (std::size_t cut = 0; cut < bytes.size(); ++cut)
    truncation &= is(raises([&] { io::decode(std::span(bytes.data(), cut)); }), (FormatError*)nullptr);
  auto future = bytes;
  future[4] = static_cast<std::uint8_t>(io::kAdapterFormatVersion + 1);
  const bool version = is(raises([&] { io::decode(future); }), (UnsupportedVersionError*)nullptr);

  return {exact("save/load round trip bit-exact", 20, bad, "round trip changed the adapter"),
          {"different base raises checksum error", checksum, checksum ? "ChecksumError" : "accepted"},
          {"every truncation raises format error", truncation, truncation ? "FormatError" : "accepted"},
          {"newer version raises unsupported-version error", version,
           version ? "UnsupportedVersionError" : "accepted"}};
}

using SuiteFn = std::function<std::vector<CheckResult>(const VerifyOptions&)>;

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> r = {
      {"svd", suite_svd},           {"patterns", suite_patterns},   {"fusion", suite_fusion},
      {"expressivity", suite_expressivity}, {"structure", suite_structure}, {"rank", suite_rank},
      {"gradient", suite_gradient}, {"baselines", suite_baselines}, {"count", suite_count},
      {"persistence", suite_persistence}};
  return r;
}

}  // namespace

std::vector<SuiteResult> run_suites(const VerifyOptions& options) {
  for (const auto& s : options.suites)
    if (std::find(suite_names().begin(), suite_names().end(), s) == suite_names().end())
      throw ValueError("unknown suite '" + s + "'");
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : registry()) {
    if (!options.suites.empty() &&
        std::find(options.suites.begin(), options.suites.end(), name) == options.suites.end())
      continue;
    SuiteResult res{name, {}};
    try {
      res.checks = fn(options);
    } catch (const std::exception& e) {
      res.checks.push_back({"suite raised", false, e.what()});
    }
    out.push_back(std::move(res));
  }
  return out;
}

std::string format_table(const std::vector<SuiteResult>& results) {
  std::ostringstream out;
  std::size_t width = 0;
  for (const auto& s : results)
    for (const auto& c : s.checks) width = std::max(width, c.name.size());
  for (const auto& s : results) {
    out << '[' << s.name << "] " << (s.passed() ? "PASS" : "FAIL") << '\n';
    for (const auto& c : s.checks)
      out << "  " << (c.passed ? "pass " : "FAIL ") << std::left << std::setw(static_cast<int>(width)) << c.name
          << "  " << c.detail << '\n';
  }
  return out.str();
}

}  // namespace svft::verify
