#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "svft/errors.hpp"
#include "svft/rng.hpp"
#include "svft/train.hpp"

namespace svft::train {

namespace {

// Linear least squares through sufficient statistics, so a full-batch step
// costs O(d³) regardless of the sample count.
class LinearObjective final : public Objective {
 public:
  LinearObjective(const Matrix& x, const Matrix& y)
      : cxx_(matmul_nt(x, x)), cyx_(matmul_nt(y, x)), yy_(0.0) {
    const double inv_n = 1.0 / static_cast<double>(x.cols());
    cxx_ *= inv_n;
    cyx_ *= inv_n;
    for (double v : y.data()) yy_ += v * v;
    yy_ *= inv_n;
  }

  double value(const Matrix& w) const override {
    const Matrix wc = matmul(w, cxx_);
    double quad = 0.0;
    double cross = 0.0;
    const auto wd = w.data();
    const auto wcd = wc.data();
    const auto cd = cyx_.data();
    for (std::size_t k = 0; k < wd.size(); ++k) {
      quad += wcd[k] * wd[k];
      cross += cd[k] * wd[k];
    }
    return 0.5 * (quad - 2.0 * cross + yy_);
  }

  Matrix gradient(const Matrix& w) const override { return matmul(w, cxx_) - cyx_; }

 private:
  Matrix cxx_;
  Matrix cyx_;
  double yy_;
};

class HeadObjective final : public Objective {
 public:
  HeadObjective(Matrix x, Matrix y, Matrix head)
      : x_(std::move(x)), y_(std::move(y)), head_(std::move(head)) {}

  double value(const Matrix& w) const override {
    const Matrix r = residual(activations(w));
    double s = 0.0;
    for (double v : r.data()) s += v * v;
    return 0.5 * s / static_cast<double>(x_.cols());
  }

  Matrix gradient(const Matrix& w) const override {
    const Matrix act = activations(w);
    const Matrix r = residual(act);
    Matrix back = matmul_tn(head_, r);
    for (std::size_t k = 0; k < back.size(); ++k) {
      const double t = act.data()[k];
      back.data()[k] *= 1.0 - t * t;
    }
    Matrix g = matmul_nt(back, x_);
    g *= 1.0 / static_cast<double>(x_.cols());
    return g;
  }

 private:
  Matrix activations(const Matrix& w) const {
    Matrix a = matmul(w, x_);
    for (double& v : a.data()) v = std::tanh(v);
    return a;
  }
  Matrix residual(const Matrix& act) const { return matmul(head_, act) - y_; }

  Matrix x_;
  Matrix y_;
  Matrix head_;
};

// Plain residual evaluation, used for held-out losses.
double direct_loss(const Matrix& w, const Matrix& x, const Matrix& y,
                   const std::optional<Matrix>& head) {
  Matrix pred = matmul(w, x);
  if (head) {
    for (double& v : pred.data()) v = std::tanh(v);
    pred = matmul(*head, pred);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double r = pred.data()[k] - y.data()[k];
    s += r * r;
  }
  return 0.5 * s / static_cast<double>(x.cols());
}

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::size_t n) : cfg_(cfg) {
    if (!(cfg.lr > 0.0)) throw ValueError("learning rate must be positive");
    if (cfg.kind == OptimizerConfig::Kind::Adam) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
    }
  }

  void step(std::vector<double>& p, const std::vector<double>& g) {
    if (cfg_.kind == OptimizerConfig::Kind::SGD) {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg_.lr * g[k];
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < p.size(); ++k) {
      m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g[k];
      v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      p[k] -= cfg_.lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + cfg_.eps);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

Matrix select_columns(const Matrix& m, std::span<const std::size_t> cols) {
  Matrix out(m.rows(), cols.size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t c = 0; c < cols.size(); ++c) out(i, c) = m(i, cols[c]);
  return out;
}

}  // namespace

std::unique_ptr<Objective> make_objective(const Matrix& inputs, const Matrix& targets,
                                          const std::optional<Matrix>& head) {
  if (inputs.cols() != targets.cols()) throw ShapeError("inputs and targets differ in sample count");
  if (head) return std::make_unique<HeadObjective>(inputs, targets, *head);
  return std::make_unique<LinearObjective>(inputs, targets);
}

double full_finetune_reference(const Task& task) {
  if (task.head) return direct_loss(task.teacher, task.eval_inputs, task.eval_targets, task.head);
  // W* = (Y Xᵀ)(X Xᵀ)⁺
  const Matrix cxx = matmul_nt(task.inputs, task.inputs);
  const Matrix cyx = matmul_nt(task.targets, task.inputs);
  const SvdFactors f = svd(cxx);
  Matrix pinv(cxx.rows(), cxx.cols());
  const double cut = 1e-12 * (f.s.empty() ? 0.0 : f.s[0]);
  for (std::size_t k = 0; k < f.s.size(); ++k) {
    if (f.s[k] <= cut) continue;
    for (std::size_t i = 0; i < pinv.rows(); ++i)
      for (std::size_t j = 0; j < pinv.cols(); ++j) pinv(i, j) += f.v(i, k) * f.u(j, k) / f.s[k];
  }
  return direct_loss(matmul(cyx, pinv), task.eval_inputs, task.eval_targets, task.head);
}

RunReport train_adapter(const Task& task, const TrainConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const std::size_t d1 = task.pretrained.rows();
  const std::size_t d2 = task.pretrained.cols();
  auto model = make_trainable(config.method, task.pretrained, nullptr, config.seed);

  RunReport rep;
  rep.config = config;
  rep.task_seed = task.spec.seed;
  rep.trainable_params = trainable_count(config.method, d1, d2);
  if (rep.trainable_params != model->size())
    throw std::logic_error("accountant disagrees with the adapter for " + config.method.to_string());

  rep.initial_loss = direct_loss(model->weight(), task.eval_inputs, task.eval_targets, task.head);
  rep.reference_loss = full_finetune_reference(task);

  const std::size_t n = task.inputs.cols();
  const bool full_batch = config.batch == 0 || config.batch >= n;
  const auto objective = make_objective(task.inputs, task.targets, task.head);
  const auto train_loss = [&] { return direct_loss(model->weight(), task.inputs, task.targets, task.head); };
  const double start_train = train_loss();
  const double blowup = kDivergenceFactor * std::max(start_train, 1e-12);

  Optimizer opt(config.optimizer, model->size());
  std::vector<double> params = model->parameters();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle(mix_seed(config.seed, 0x5eed));
  std::size_t steps = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (full_batch) {
      const std::vector<double> g = model->gradient(objective->gradient(model->weight()));
      opt.step(params, g);
      model->set_parameters(params);
      ++steps;
    } else {
      for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[shuffle.below(k)]);
      for (std::size_t lo = 0; lo < n; lo += config.batch) {
        const std::size_t hi = std::min(n, lo + config.batch);
        const std::span<const std::size_t> cols(order.data() + lo, hi - lo);
        const auto batch_obj =
            make_objective(select_columns(task.inputs, cols), select_columns(task.targets, cols), task.head);
        const std::vector<double> g = model->gradient(batch_obj->gradient(model->weight()));
        opt.step(params, g);
        model->set_parameters(params);
        ++steps;
      }
    }
    const double loss = train_loss();
    if (!std::isfinite(loss) || loss > blowup)
      throw DivergenceError(config.method.to_string() + " diverged at step " + std::to_string(steps) +
                                " (training loss " + std::to_string(loss) + ")",
                            steps);
    rep.loss_curve.push_back(loss);
  }

  rep.final_loss = direct_loss(model->weight(), task.eval_inputs, task.eval_targets, task.head);
  const double gain = rep.initial_loss - rep.reference_loss;
  if (gain > 1e-15 * std::max(rep.initial_loss, 1.0)) {
    rep.recovery = std::clamp((rep.initial_loss - rep.final_loss) / gain, 0.0, 1.0);
  } else {
    rep.recovery = 1.0;  // nothing left to recover
  }
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

double finite_diff_check(const MethodSpec& method, const Task& task, double step, std::uint64_t seed) {
  if (!(step > 1e-8 && step < 1e-3)) throw ValueError("finite-difference step must lie in (1e-8, 1e-3)");
  auto model = make_trainable(method, task.pretrained, nullptr, seed);
  Rng rng(seed);
  std::vector<double> p = model->parameters();
  for (double& v : p) v += 0.1 * rng.normal();
  model->set_parameters(p);

  // Differences use the residual form of the loss; the expanded quadratic
  // form cancels badly once divided by 2h.
  const auto objective = make_objective(task.inputs, task.targets, task.head);
  const std::vector<double> analytic = model->gradient(objective->gradient(model->weight()));
  double amax = 0.0;
  for (double v : analytic) amax = std::max(amax, std::abs(v));
  const double floor = std::max(1e-3 * amax, 1e-300);

  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double keep = p[k];
    p[k] = keep + step;
    model->set_parameters(p);
    const double up = direct_loss(model->weight(), task.inputs, task.targets, task.head);
    p[k] = keep - step;
    model->set_parameters(p);
    const double down = direct_loss(model->weight(), task.inputs, task.targets, task.head);
    p[k] = keep;
    const double fd = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[k]), std::abs(fd), floor});
    worst = std::max(worst, std::abs(analytic[k] - fd) / denom);
  }
  model->set_parameters(p);
  return worst;
}

}  // namespace svft::train
