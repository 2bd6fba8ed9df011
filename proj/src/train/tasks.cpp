#include <cmath>

#include "svft/errors.hpp"
#include "svft/rng.hpp"
#include "svft/train.hpp"

namespace svft::train {

namespace {

// Stream tags so each random component of a task is independent of the others.
enum : std::uint64_t { kBase = 1, kPlant = 2, kTrainData = 3, kEvalData = 4, kHead = 5 };

Matrix rescaled(Matrix m, double target_norm) {
  const double n = frobenius_norm(m);
  if (n > 0.0) m *= target_norm / n;
  return m;
}

Matrix apply_head(const std::optional<Matrix>& head, const Matrix& pre) {
  if (!head) return pre;
  Matrix act = pre;
  for (double& v : act.data()) v = std::tanh(v);
  return matmul(*head, act);
}

void add_noise(Matrix& m, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (double& v : m.data()) v += sigma * rng.normal();
}

}  // namespace

Task make_task(const TaskSpec& spec) {
  if (spec.d1 == 0 || spec.d2 == 0) throw ShapeError("task dimensions must be positive");
  if (spec.samples == 0 || spec.eval_samples == 0) throw ValueError("task needs samples");
  if (!(spec.noise_sigma >= 0.0)) throw ValueError("noise sigma must be nonnegative");

  Rng base_rng(mix_seed(spec.seed, kBase));
  Matrix pretrained = Matrix::random_normal(spec.d1, spec.d2, base_rng,
                                            1.0 / std::sqrt(static_cast<double>(spec.d2)));
  Matrix teacher = pretrained;
  std::optional<SparsityPattern> support;

  Rng plant(mix_seed(spec.seed, kPlant));
  const std::size_t amount = spec.perturbation.amount;
  switch (spec.perturbation.kind) {
    case PerturbationKind::SparseSpectrum: {
      if (amount == 0) break;
      const SparsityPattern band = banded(spec.d1, spec.d2, spec.perturbation.band);
      if (amount > band.size())
        throw BudgetError("cannot plant " + std::to_string(amount) + " coefficients in a band of " +
                          std::to_string(band.size()));
      std::vector<Coord> pool = band.indices();
      for (std::size_t k = 0; k < amount; ++k) {
        const std::size_t pick = k + static_cast<std::size_t>(plant.below(pool.size() - k));
        std::swap(pool[k], pool[pick]);
      }
      pool.resize(amount);
      support.emplace(spec.d1, spec.d2, pool);
      const SvdFactors f = svd(pretrained);
      Matrix m(spec.d1, spec.d2);
      for (const Coord c : support->indices()) {
        const double sign = plant.uniform() < 0.5 ? -1.0 : 1.0;
        m(c.row, c.col) = sign * spec.scale * (0.5 + plant.uniform());
      }
      teacher += matmul_nt(matmul(f.u, m), f.v);
      break;
    }
    case PerturbationKind::LowRank: {
      if (amount == 0) break;
      const Matrix b = Matrix::random_normal(spec.d1, amount, plant);
      const Matrix a = Matrix::random_normal(amount, spec.d2, plant);
      teacher += rescaled(matmul(b, a), spec.scale * std::sqrt(static_cast<double>(amount)));
      break;
    }
    case PerturbationKind::Dense: {
      const double target = spec.scale * std::sqrt(static_cast<double>(std::min(spec.d1, spec.d2)));
      teacher += rescaled(Matrix::random_normal(spec.d1, spec.d2, plant), target);
      break;
    }
  }

  std::optional<Matrix> head;
  if (spec.mlp_head) {
    Rng hr(mix_seed(spec.seed, kHead));
    head = Matrix::random_normal(spec.d1, spec.d1, hr, 1.0 / std::sqrt(static_cast<double>(spec.d1)));
  }

  Rng train_rng(mix_seed(spec.seed, kTrainData));
  Matrix inputs = Matrix::random_normal(spec.d2, spec.samples, train_rng);
  Matrix targets = apply_head(head, matmul(teacher, inputs));
  add_noise(targets, spec.noise_sigma, train_rng);

  Rng eval_rng(mix_seed(spec.seed, kEvalData));
  Matrix eval_inputs = Matrix::random_normal(spec.d2, spec.eval_samples, eval_rng);
  Matrix eval_targets = apply_head(head, matmul(teacher, eval_inputs));
  add_noise(eval_targets, spec.noise_sigma, eval_rng);

  return Task{spec,           std::move(teacher),    std::move(pretrained),
              std::move(inputs), std::move(targets), std::move(eval_inputs),
              std::move(eval_targets), std::move(head), std::move(support)};
}

Task with_pretrained(const Task& task, Matrix pretrained) {
  if (pretrained.rows() != task.pretrained.rows() || pretrained.cols() != task.pretrained.cols())
    throw ShapeError("replacement base has the wrong shape");
  Task t = task;
  t.pretrained = std::move(pretrained);
  return t;
}

std::vector<Matrix> make_checkpoints(const Task& task, const std::vector<double>& distances,
                                     std::uint64_t seed) {
  Rng rng(seed);
  const Matrix direction =
      rescaled(Matrix::random_normal(task.teacher.rows(), task.teacher.cols(), rng), 1.0);
  std::vector<Matrix> out;
  out.reserve(distances.size());
  for (double d : distances) {
    if (!(d >= 0.0)) throw ValueError("checkpoint distance must be nonnegative");
    out.push_back(task.teacher + d * direction);
  }
  return out;
}

}  // namespace svft::train
