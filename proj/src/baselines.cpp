#include "svft/baselines.hpp"

#include <cmath>

#include "svft/errors.hpp"
#include "svft/rng.hpp"

namespace svft::baselines {

namespace {

void require_rank(std::size_t r) {
  if (r < 1) throw ValueError("adapter rank must be at least 1");
}

void require_upstream(const Matrix& g, std::size_t d1, std::size_t d2) {
  if (g.rows() != d1 || g.cols() != d2) throw ShapeError("upstream gradient must be d1 x d2");
}

}  // namespace

// ---------------------------------------------------------------------------
// LoRA

LoraAdapter LoraAdapter::init(std::size_t d1, std::size_t d2, std::size_t r, std::uint64_t seed) {
  require_rank(r);
  Rng rng(seed);
  return LoraAdapter{Matrix::random_normal(r, d2, rng, 1.0 / std::sqrt(static_cast<double>(r))),
                     Matrix(d1, r)};
}

Matrix lora_delta(const LoraAdapter& ad) { return matmul(ad.b, ad.a); }

Matrix lora_forward(const Matrix& w0, const LoraAdapter& ad, const Matrix& x) {
  if (ad.b.rows() != w0.rows() || ad.a.cols() != w0.cols())
    throw ShapeError("LoRA factors do not match the base");
  return matmul(w0, x) + matmul(ad.b, matmul(ad.a, x));
}

LoraGrad lora_grad(const LoraAdapter& ad, const Matrix& upstream) {
  require_upstream(upstream, ad.b.rows(), ad.a.cols());
  return LoraGrad{matmul_tn(ad.b, upstream), matmul_nt(upstream, ad.a)};
}

// ---------------------------------------------------------------------------
// VeRA

VeraAdapter VeraAdapter::init(std::size_t d1, std::size_t d2, std::size_t r, std::uint64_t seed,
                              double d_init) {
  require_rank(r);
  Rng rng(seed);
  VeraAdapter ad{Matrix::random_normal(r, d2, rng, 1.0 / std::sqrt(static_cast<double>(d2))),
                 Matrix::random_normal(d1, r, rng, 1.0 / std::sqrt(static_cast<double>(r))),
                 std::vector<double>(r, d_init), std::vector<double>(d1, 0.0), seed};
  return ad;
}

Matrix vera_delta(const VeraAdapter& ad) {
  Matrix scaled = ad.b_hat;  // diag(λ_b) B̂ diag(λ_d)
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (std::size_t k = 0; k < scaled.cols(); ++k) scaled(i, k) *= ad.lambda_b[i] * ad.lambda_d[k];
  return matmul(scaled, ad.a_hat);
}

Matrix vera_forward(const Matrix& w0, const VeraAdapter& ad, const Matrix& x) {
  if (ad.b_hat.rows() != w0.rows() || ad.a_hat.cols() != w0.cols())
    throw ShapeError("VeRA factors do not match the base");
  Matrix ax = matmul(ad.a_hat, x);
  for (std::size_t k = 0; k < ax.rows(); ++k)
    for (double& v : ax.row(k)) v *= ad.lambda_d[k];
  Matrix bax = matmul(ad.b_hat, ax);
  for (std::size_t i = 0; i < bax.rows(); ++i)
    for (double& v : bax.row(i)) v *= ad.lambda_b[i];
  return matmul(w0, x) + bax;
}

VeraGrad vera_grad(const VeraAdapter& ad, const Matrix& upstream) {
  const std::size_t d1 = ad.b_hat.rows();
  const std::size_t r = ad.rank();
  require_upstream(upstream, d1, ad.a_hat.cols());
  // ΔW_ij = λb_i Σ_k B̂_ik λd_k Â_kj; with T = G Âᵀ (d1×r):
  //   ∂/∂λb_i = Σ_k B̂_ik λd_k T_ik,  ∂/∂λd_k = Σ_i λb_i B̂_ik T_ik.
  const Matrix t = matmul_nt(upstream, ad.a_hat);
  VeraGrad g{std::vector<double>(r, 0.0), std::vector<double>(d1, 0.0)};
  for (std::size_t i = 0; i < d1; ++i) {
    for (std::size_t k = 0; k < r; ++k) {
      const double bt = ad.b_hat(i, k) * t(i, k);
      g.lambda_b[i] += ad.lambda_d[k] * bt;
      g.lambda_d[k] += ad.lambda_b[i] * bt;
    }
  }
  return g;
}

double vera_span_residual(const VeraAdapter& ad, const Matrix& target_delta) {
  const std::size_t d1 = ad.b_hat.rows();
  const std::size_t d2 = ad.a_hat.cols();
  const std::size_t r = ad.rank();
  require_upstream(target_delta, d1, d2);
  // Column (i, k) of the basis is vec(E_ii B̂ e_k e_kᵀ Â): row i of it is B̂_ik Â_k.
  Matrix basis(d1 * d2, d1 * r);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t j = 0; j < d2; ++j) basis(i * d2 + j, i * r + k) = ad.b_hat(i, k) * ad.a_hat(k, j);
  const auto [q, rr] = qr(basis);
  // Drop directions the basis does not actually span.
  const double scale = max_abs(rr);
  std::vector<double> resid(target_delta.data().begin(), target_delta.data().end());
  for (std::size_t c = 0; c < q.cols(); ++c) {
    if (std::abs(rr(c, c)) <= 1e-12 * scale) continue;
    double s = 0.0;
    for (std::size_t t = 0; t < q.rows(); ++t) s += q(t, c) * resid[t];
    for (std::size_t t = 0; t < q.rows(); ++t) resid[t] -= s * q(t, c);
  }
  return norm2(resid);
}

Matrix vera_unreachable_target(const VeraAdapter& ad, std::uint64_t seed) {
  const std::size_t d1 = ad.b_hat.rows();
  const std::size_t d2 = ad.a_hat.cols();
  if (ad.rank() >= d2) throw ValueError("VeRA with r >= d2 spans every row direction");
  Rng rng(seed);
  Matrix p = Matrix::random_normal(d1, d2, rng);
  const auto [q, rr] = qr(ad.a_hat.transpose());  // columns span rowspace(Â)
  for (std::size_t i = 0; i < d1; ++i) {
    auto row = p.row(i);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < q.cols(); ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d2; ++j) s += q(j, c) * row[j];
        for (std::size_t j = 0; j < d2; ++j) row[j] -= s * q(j, c);
      }
    }
  }
  p *= 1.0 / frobenius_norm(p);
  return p;
}

// ---------------------------------------------------------------------------
// DoRA

std::vector<double> column_norms(const Matrix& w) {
  std::vector<double> n(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) n[j] = norm2(w.col(j));
  return n;
}

DoraAdapter DoraAdapter::init(const Matrix& w0, std::size_t r, std::uint64_t seed) {
  return DoraAdapter{column_norms(w0), LoraAdapter::init(w0.rows(), w0.cols(), r, seed)};
}

namespace {

std::vector<double> checked_norms(const Matrix& directed) {
  auto n = column_norms(directed);
  for (std::size_t j = 0; j < n.size(); ++j)
    if (n[j] <= kMinColumnNorm)
      throw ValueError("DoRA: column " + std::to_string(j) + " of W0 + BA has (near) zero norm");
  return n;
}

}  // namespace

Matrix dora_weight(const Matrix& w0, const DoraAdapter& ad) {
  if (ad.magnitude.size() != w0.cols()) throw ShapeError("DoRA magnitude must have d2 entries");
  Matrix w = w0 + lora_delta(ad.lora);
  const auto n = checked_norms(w);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) *= ad.magnitude[j] / n[j];
  return w;
}

Matrix dora_forward(const Matrix& w0, const DoraAdapter& ad, const Matrix& x) {
  return matmul(dora_weight(w0, ad), x);
}

DoraGrad dora_grad(const Matrix& w0, const DoraAdapter& ad, const Matrix& upstream) {
  require_upstream(upstream, w0.rows(), w0.cols());
  const Matrix w = w0 + lora_delta(ad.lora);
  const auto n = checked_norms(w);
  // W'_:j = m_j w_j / n_j.
  //   ∂L/∂m_j = g_jᵀ w_j / n_j
  //   ∂L/∂w_j = (m_j / n_j) (g_j − (w_jᵀ g_j / n_j²) w_j)
  std::vector<double> gm(w.cols());
  Matrix gw(w.rows(), w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double wg = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) wg += w(i, j) * upstream(i, j);
    gm[j] = wg / n[j];
    const double scale = ad.magnitude[j] / n[j];
    const double proj = wg / (n[j] * n[j]);
    for (std::size_t i = 0; i < w.rows(); ++i)
      gw(i, j) = scale * (upstream(i, j) - proj * w(i, j));
  }
  return {std::move(gm), lora_grad(ad.lora, gw)};
}

// ---------------------------------------------------------------------------
// Accounting

CountMethod parse_count_method(const std::string& name) {
  if (name == "lora") return CountMethod::LoRA;
  if (name == "dora") return CountMethod::DoRA;
  if (name == "vera") return CountMethod::VeRA;
  if (name == "svft-p") return CountMethod::SvftPlain;
  if (name == "svft-b") return CountMethod::SvftBanded;
  throw ValueError("unknown method '" + name + "' (lora, dora, vera, svft-p, svft-b)");
}

std::string to_string(CountMethod m) {
  switch (m) {
    case CountMethod::LoRA: return "lora";
    case CountMethod::DoRA: return "dora";
    case CountMethod::VeRA: return "vera";
    case CountMethod::SvftPlain: return "svft-p";
    case CountMethod::SvftBanded: return "svft-b";
  }
  return "unknown";
}

std::size_t param_count(CountMethod method, std::size_t layers, std::size_t dim,
                        std::size_t r_or_k) {
  if (layers < 1 || dim < 1) throw ValueError("param_count: layers and dimension must be >= 1");
  switch (method) {
    case CountMethod::LoRA:
      require_rank(r_or_k);
      return 2 * layers * dim * r_or_k;
    case CountMethod::DoRA:
      require_rank(r_or_k);
      return layers * dim * (2 * r_or_k + 1);
    case CountMethod::VeRA:
      require_rank(r_or_k);
      return layers * (dim + r_or_k);
    case CountMethod::SvftPlain:
      return layers * dim;
    case CountMethod::SvftBanded:
      if (r_or_k >= dim) throw BudgetError("SVFT-B: off-diagonal count must be below D");
      return layers * (dim * r_or_k + (dim - r_or_k) * (r_or_k + 1));
  }
  throw ValueError("param_count: unknown method");
}

}  // namespace svft::baselines
