#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "svft/linalg.hpp"

namespace svft::baselines {

/// ΔW = B A with A (r×d2) and B (d1×r) both trainable. B starts at zero.
struct LoraAdapter {
  Matrix a;
  Matrix b;

  std::size_t rank() const noexcept { return a.rows(); }
  std::size_t num_trainable() const noexcept { return a.size() + b.size(); }

  /// A ~ N(0, 1/r) from Rng(seed), B = 0.
  static LoraAdapter init(std::size_t d1, std::size_t d2, std::size_t r, std::uint64_t seed);
};

struct LoraGrad {
  Matrix a;
  Matrix b;
};

Matrix lora_delta(const LoraAdapter& ad);
Matrix lora_forward(const Matrix& w0, const LoraAdapter& ad, const Matrix& x);
/// ∂L/∂A = Bᵀ G, ∂L/∂B = G Aᵀ for G = ∂L/∂(W0 + BA).
LoraGrad lora_grad(const LoraAdapter& ad, const Matrix& upstream);

/// ΔW = diag(λ_b) B̂ diag(λ_d) Â with Â (r×d2) and B̂ (d1×r) frozen random
/// matrices regenerated from `seed`; only the two scaling vectors train.
struct VeraAdapter {
  Matrix a_hat;
  Matrix b_hat;
  std::vector<double> lambda_d;  // length r
  std::vector<double> lambda_b;  // length d1
  std::uint64_t seed = 0;

  std::size_t rank() const noexcept { return a_hat.rows(); }
  std::size_t num_trainable() const noexcept { return lambda_d.size() + lambda_b.size(); }

  /// Â ~ N(0, 1/d2), B̂ ~ N(0, 1/r), λ_d = d_init, λ_b = 0.
  static VeraAdapter init(std::size_t d1, std::size_t d2, std::size_t r, std::uint64_t seed,
                          double d_init = 0.1);
};

struct VeraGrad {
  std::vector<double> lambda_d;
  std::vector<double> lambda_b;
};

Matrix vera_delta(const VeraAdapter& ad);
Matrix vera_forward(const Matrix& w0, const VeraAdapter& ad, const Matrix& x);
VeraGrad vera_grad(const VeraAdapter& ad, const Matrix& upstream);

/// Least-squares distance from `target_delta` to the linear span of every
/// update VeRA can produce with these frozen factors. The reachable set is a
/// subset of that span, so this is a lower bound on VeRA's irreducible error.
double vera_span_residual(const VeraAdapter& ad, const Matrix& target_delta);

/// A unit-Frobenius update whose rows are orthogonal to the row space of Â,
/// hence out of VeRA's reach. Drawn from Rng(seed).
Matrix vera_unreachable_target(const VeraAdapter& ad, std::uint64_t seed);

/// W' = m · (W0 + BA) / ‖W0 + BA‖_c, with column norms ‖·‖_c.
struct DoraAdapter {
  std::vector<double> magnitude;  // length d2
  LoraAdapter lora;

  std::size_t num_trainable() const noexcept { return magnitude.size() + lora.num_trainable(); }

  /// magnitude = ‖W0‖_c, LoRA part as LoraAdapter::init.
  static DoraAdapter init(const Matrix& w0, std::size_t r, std::uint64_t seed);
};

struct DoraGrad {
  std::vector<double> magnitude;
  LoraGrad lora;
};

inline constexpr double kMinColumnNorm = 1e-12;

/// Effective weight; throws ValueError when a column of W0 + BA has norm <= 1e-12.
Matrix dora_weight(const Matrix& w0, const DoraAdapter& ad);
Matrix dora_forward(const Matrix& w0, const DoraAdapter& ad, const Matrix& x);
/// Exact gradient, including the derivative of the column norms.
DoraGrad dora_grad(const Matrix& w0, const DoraAdapter& ad, const Matrix& upstream);

std::vector<double> column_norms(const Matrix& w);

/// Methods of the trainable-parameter table.
enum class CountMethod { LoRA, DoRA, VeRA, SvftPlain, SvftBanded };

CountMethod parse_count_method(const std::string& name);
std::string to_string(CountMethod m);

/// Trainable scalars for `layers` adapted D×D matrices:
///   LoRA 2·L·D·r, DoRA L·D·(2r+1), VeRA L·(D+r), SVFT-P L·D,
///   SVFT-B L·(D·k + (D−k)(k+1)).
/// r >= 1 for the low-rank methods, 0 <= k < D for banded.
std::size_t param_count(CountMethod method, std::size_t layers, std::size_t dim,
                        std::size_t r_or_k = 0);

}  // namespace svft::baselines
