#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svft/linalg.hpp"
#include "svft/patterns.hpp"

namespace svft::train {

// ---------------------------------------------------------------------------
// Tasks

enum class PerturbationKind { LowRank, SparseSpectrum, Dense };

struct Perturbation {
  PerturbationKind kind = PerturbationKind::SparseSpectrum;
  std::size_t amount = 0;  // rank for LowRank, planted coefficient count for SparseSpectrum
  std::size_t band = 1;    // SparseSpectrum: planted entries lie within this band of M
};

struct TaskSpec {
  std::size_t d1 = 16;
  std::size_t d2 = 16;
  Perturbation perturbation;
  double noise_sigma = 0.0;
  std::size_t samples = 1024;
  std::size_t eval_samples = 1024;
  double scale = 1.0;          // magnitude of the planted perturbation
  bool mlp_head = false;       // targets pass through a frozen tanh layer
  std::uint64_t seed = 0;
};

/// Teacher-student regression problem: targets = teacher · inputs + noise, and
/// a frozen pretrained base that sits a planted perturbation away from the
/// teacher. Inputs and targets are stored one sample per column.
struct Task {
  TaskSpec spec;
  Matrix teacher;
  Matrix pretrained;
  Matrix inputs;
  Matrix targets;
  Matrix eval_inputs;
  Matrix eval_targets;
  std::optional<Matrix> head;  // frozen output layer of the MLP variant
  /// Support of the planted M* (SparseSpectrum only).
  std::optional<SparsityPattern> planted_support;
};

/// Deterministic in `spec.seed`.
///   SparseSpectrum(k): teacher = W_pre + U M* Vᵀ, M* has k entries drawn
///     from banded(d1, d2, band), magnitudes scale·(0.5 + U[0,1)) with random
///     signs; k = 0 leaves teacher == pretrained.
///   LowRank(r): teacher = W_pre + B A, rescaled to ‖BA‖_F = scale·√r.
///   Dense: teacher = W_pre + G, rescaled to ‖G‖_F = scale·√min(d1, d2).
Task make_task(const TaskSpec& spec);

/// Same task with the pretrained base replaced.
Task with_pretrained(const Task& task, Matrix pretrained);

// ---------------------------------------------------------------------------
// Methods

enum class MethodKind { SvftPlain, SvftBanded, SvftRandom, SvftTopK, LoRA, VeRA, DoRA, FullFT };

struct MethodSpec {
  MethodKind kind = MethodKind::SvftPlain;
  std::size_t param = 0;       // band d, random total, top-k k, or rank r
  std::uint64_t seed = 0;      // random pattern / VeRA factors
  std::size_t rank = 0;        // SVFT effective rank, 0 = untruncated
  bool truncate_base = false;  // also replace the base by its rank-r approximation

  /// "svft-p", "svft-b", ..., "lora", "full".
  std::string family() const;
  /// Human readable parameter string, e.g. "d=2", "r=4", "d=1,rank=12".
  std::string variant() const;
  /// Round-trips through parse_method.
  std::string to_string() const;
};

/// Parses "svft-p", "svft-b:<d>", "svft-r:<total>[:<seed>]", "svft-t:<k>",
/// "lora:<r>", "vera:<r>[:<seed>]", "dora:<r>", "full"; an optional
/// "@<rank>" suffix truncates an svft-p/svft-b adapter.
MethodSpec parse_method(const std::string& text);

/// Trainable-scalar accountant for a d1×d2 weight; agrees with the
/// parameter-count table when d1 == d2.
std::size_t trainable_count(const MethodSpec& method, std::size_t d1, std::size_t d2);

/// Uniform view of every adapter as "parameters -> effective weight".
class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual Matrix weight() const = 0;
  virtual std::size_t size() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> p) = 0;
  /// Chain rule from ∂L/∂weight to ∂L/∂parameters.
  virtual std::vector<double> gradient(const Matrix& upstream) const = 0;
};

/// `factors` may be null, in which case the base is factored on demand.
std::unique_ptr<Trainable> make_trainable(const MethodSpec& method, const Matrix& base,
                                          std::shared_ptr<const SvdFactors> factors,
                                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Objectives

/// Mean squared error L(W) = 1/(2N) Σ_n ‖f(W x_n) − y_n‖², with f the
/// identity or a frozen head H·tanh(·).
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const Matrix& w) const = 0;
  virtual Matrix gradient(const Matrix& w) const = 0;
};

std::unique_ptr<Objective> make_objective(const Matrix& inputs, const Matrix& targets,
                                          const std::optional<Matrix>& head);

// ---------------------------------------------------------------------------
// Optimization

struct OptimizerConfig {
  enum class Kind { SGD, Adam };
  Kind kind = Kind::SGD;
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  MethodSpec method;
  OptimizerConfig optimizer;
  std::size_t epochs = 100;
  std::size_t batch = 0;  // 0 = full batch
  std::uint64_t seed = 0;
};

struct RunReport {
  TrainConfig config;
  std::uint64_t task_seed = 0;
  std::size_t trainable_params = 0;
  double initial_loss = 0.0;  // held-out loss before training
  std::vector<double> loss_curve;  // training loss after each epoch
  double final_loss = 0.0;    // held-out loss after training
  double reference_loss = 0.0;  // held-out loss of the full fine-tuning optimum
  double recovery = 0.0;
  double wall_ms = 0.0;
};

/// A run aborts with DivergenceError if the training loss turns non-finite or
/// exceeds this multiple of its initial value.
inline constexpr double kDivergenceFactor = 1e6;

RunReport train_adapter(const Task& task, const TrainConfig& config);

/// Held-out loss of the least-squares optimum over all d1·d2 weights (for the
/// MLP variant, of the teacher itself).
double full_finetune_reference(const Task& task);

/// Largest per-coordinate relative error |a − f| / max(|a|, |f|, 1e-3·‖a‖∞)
/// between the analytic gradient and central differences of step `step`, at
/// a randomly perturbed parameter point (so no coordinate sits at a
/// degenerate initial value).
double finite_diff_check(const MethodSpec& method, const Task& task, double step = 1e-6,
                         std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepWarning {
  std::string family;
  std::size_t budget = 0;
  std::string message;
};

struct SweepOptions {
  TrainConfig base;                      // method field is replaced per run
  std::map<std::string, double> lr_by_family;
  std::size_t threads = 1;
};

struct SweepResult {
  std::vector<RunReport> reports;
  std::vector<SweepWarning> warnings;
};

/// Largest variant of `family` whose trainable count does not exceed `budget`;
/// nullopt when even the smallest variant is over budget.
std::optional<MethodSpec> resolve_budget(const std::string& family, std::size_t budget,
                                         std::size_t d1, std::size_t d2, std::uint64_t seed = 0);

/// One report per (family, budget) in input order; infeasible pairs become
/// warnings.
SweepResult budget_sweep(const Task& task, const std::vector<std::string>& families,
                         const std::vector<std::size_t>& budgets, const SweepOptions& options);

/// One report per variant, in input order.
SweepResult run_variants(const Task& task, const std::vector<MethodSpec>& variants,
                         const SweepOptions& options);

struct FrontierPoint {
  std::string family;
  std::string variant;
  std::size_t trainable_params = 0;
  double final_loss = 0.0;  // mean over the reports sharing this variant
};

/// Per family, the variants that beat every cheaper-or-equal variant, sorted
/// by trainable count.
std::vector<FrontierPoint> pareto_frontier(const std::vector<RunReport>& reports);

/// Best frontier loss of `family` among points with at most `budget`
/// parameters; nullopt if the family has no such point.
std::optional<double> frontier_loss_at(const std::vector<FrontierPoint>& frontier,
                                       const std::string& family, std::size_t budget);

// ---------------------------------------------------------------------------
// Pretrained-weight quality

struct QualityRow {
  std::string method;
  std::size_t checkpoint = 0;
  double distance = 0.0;  // ‖checkpoint − teacher‖_F
  std::size_t trainable_params = 0;
  double final_loss = 0.0;
};

struct QualityDelta {
  std::string method;
  double worst_loss = 0.0;
  double best_loss = 0.0;
  double delta_perf = 0.0;  // worst_loss − best_loss, positive when the better base helps
};

struct QualityTable {
  std::vector<QualityRow> rows;
  std::vector<QualityDelta> deltas;
};

/// Checkpoints at the given Frobenius distances from the teacher along one
/// fixed random direction, ordered as given.
std::vector<Matrix> make_checkpoints(const Task& task, const std::vector<double>& distances,
                                     std::uint64_t seed);

/// Fine-tunes every method from every checkpoint (ordered worst to best).
QualityTable weight_quality_study(const Task& task, const std::vector<Matrix>& checkpoints,
                                  const std::vector<MethodSpec>& methods,
                                  const SweepOptions& options);

// ---------------------------------------------------------------------------
// Reports

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

/// Columns: method, variant, trainable_params, final_loss, recovery, seed, wall_ms.
std::string sweep_csv(const std::vector<RunReport>& reports, bool include_wall_ms = true);
std::string frontier_summary(const std::vector<FrontierPoint>& frontier);
std::string quality_csv(const QualityTable& table);

}  // namespace svft::train
