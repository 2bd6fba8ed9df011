#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <map>
#include <thread>
#include <variant>

#include "svft/errors.hpp"
#include "svft/train.hpp"

namespace svft::train {

namespace {

MethodKind method_kind(const std::string& family) {
  static const std::map<std::string, MethodKind> kinds = {
      {"svft-p", MethodKind::SvftPlain}, {"svft-b", MethodKind::SvftBanded},
      {"svft-r", MethodKind::SvftRandom}, {"svft-t", MethodKind::SvftTopK},
      {"lora", MethodKind::LoRA},         {"vera", MethodKind::VeRA},
      {"dora", MethodKind::DoRA},         {"full", MethodKind::FullFT}};
  const auto it = kinds.find(family);
  if (it == kinds.end()) throw ValueError("unknown method family '" + family + "'");
  return it->second;
}

std::size_t smallest_positive(std::size_t a) { return std::max<std::size_t>(a, 1); }

// Runs `configs` with up to `threads` workers; output order follows input order.
std::vector<std::variant<RunReport, std::string>> run_all(const Task& task,
                                                          const std::vector<TrainConfig>& configs,
                                                          std::size_t threads) {
  std::vector<std::variant<RunReport, std::string>> out(configs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) {
      try {
        out[k] = train_adapter(task, configs[k]);
      } catch (const Error& e) {
        out[k] = std::string(e.what());
      }
    }
  };
  const std::size_t n = std::min(smallest_positive(threads), std::max<std::size_t>(configs.size(), 1));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  return out;
}

TrainConfig config_for(const MethodSpec& m, const SweepOptions& options) {
  TrainConfig c = options.base;
  c.method = m;
  if (const auto it = options.lr_by_family.find(m.family()); it != options.lr_by_family.end())
    c.optimizer.lr = it->second;
  return c;
}

}  // namespace

std::optional<MethodSpec> resolve_budget(const std::string& family, std::size_t budget,
                                         std::size_t d1, std::size_t d2, std::uint64_t seed) {
  MethodSpec m;
  m.kind = method_kind(family);
  m.seed = seed;
  const std::size_t small = std::min(d1, d2);
  const auto fits = [&](std::size_t p) {
    m.param = p;
    return trainable_count(m, d1, d2) <= budget;
  };
  switch (m.kind) {
    case MethodKind::SvftPlain:
    case MethodKind::FullFT:
      if (trainable_count(m, d1, d2) > budget) return std::nullopt;
      return m;
    case MethodKind::SvftBanded: {
      if (!fits(0)) return std::nullopt;
      std::size_t d = 0;
      while (d + 1 < std::max(d1, d2) && fits(d + 1)) ++d;
      m.param = d;
      return m;
    }
    case MethodKind::SvftRandom:
      if (budget < small) return std::nullopt;
      m.param = std::min(budget, d1 * d2);
      return m;
    case MethodKind::SvftTopK:
      if (d1 != d2 || budget < 1) return std::nullopt;
      m.param = std::min(budget, d1 * d2);
      return m;
    case MethodKind::LoRA:
    case MethodKind::DoRA:
    case MethodKind::VeRA: {
      if (!fits(1)) return std::nullopt;
      std::size_t r = 1;
      while (r + 1 <= small && fits(r + 1)) ++r;
      m.param = r;
      return m;
    }
  }
  return std::nullopt;
}

SweepResult run_variants(const Task& task, const std::vector<MethodSpec>& variants,
                         const SweepOptions& options) {
  std::vector<TrainConfig> configs;
  configs.reserve(variants.size());
  for (const auto& v : variants) configs.push_back(config_for(v, options));
  SweepResult res;
  auto runs = run_all(task, configs, options.threads);
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (auto* r = std::get_if<RunReport>(&runs[k])) {
      res.reports.push_back(std::move(*r));
    } else {
      res.warnings.push_back({variants[k].family(), trainable_count(variants[k], task.pretrained.rows(),
                                                                    task.pretrained.cols()),
                              variants[k].to_string() + ": " + std::get<std::string>(runs[k])});
    }
  }
  return res;
}

SweepResult budget_sweep(const Task& task, const std::vector<std::string>& families,
                         const std::vector<std::size_t>& budgets, const SweepOptions& options) {
  const std::size_t d1 = task.pretrained.rows();
  const std::size_t d2 = task.pretrained.cols();
  struct Slot {
    std::string family;
    std::size_t budget;
    std::optional<std::size_t> job;
  };
  std::vector<Slot> slots;
  std::vector<MethodSpec> unique;
  std::map<std::string, std::size_t> index;
  for (const auto& fam : families) {
    for (std::size_t budget : budgets) {
      const auto m = resolve_budget(fam, budget, d1, d2, options.base.seed);
      if (!m) {
        slots.push_back({fam, budget, std::nullopt});
        continue;
      }
      auto [it, fresh] = index.try_emplace(m->to_string(), unique.size());
      if (fresh) unique.push_back(*m);
      slots.push_back({fam, budget, it->second});
    }
  }
  std::vector<TrainConfig> configs;
  for (const auto& m : unique) configs.push_back(config_for(m, options));
  auto runs = run_all(task, configs, options.threads);

  SweepResult res;
  for (const auto& s : slots) {
    if (!s.job) {
      res.warnings.push_back({s.family, s.budget,
                              "budget " + std::to_string(s.budget) + " is below the smallest " +
                                  s.family + " variant; skipped"});
      continue;
    }
    if (const auto* r = std::get_if<RunReport>(&runs[*s.job])) {
      res.reports.push_back(*r);
    } else {
      res.warnings.push_back({s.family, s.budget, std::get<std::string>(runs[*s.job])});
    }
  }
  return res;
}

std::vector<FrontierPoint> pareto_frontier(const std::vector<RunReport>& reports) {
  struct Acc {
    std::string family;
    std::string variant;
    std::size_t params = 0;
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& r : reports) {
    auto& a = groups[{r.config.method.family(), r.config.method.variant()}];
    a.family = r.config.method.family();
    a.variant = r.config.method.variant();
    a.params = r.trainable_params;
    a.sum += r.final_loss;
    ++a.n;
  }
  std::map<std::string, std::vector<FrontierPoint>> by_family;
  for (const auto& [key, a] : groups)
    by_family[a.family].push_back({a.family, a.variant, a.params, a.sum / static_cast<double>(a.n)});

  std::vector<FrontierPoint> out;
  for (auto& [fam, pts] : by_family) {
    std::sort(pts.begin(), pts.end(), [](const FrontierPoint& x, const FrontierPoint& y) {
      return x.trainable_params != y.trainable_params ? x.trainable_params < y.trainable_params
                                                      : x.final_loss < y.final_loss;
    });
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
      if (p.final_loss < best) {
        out.push_back(p);
        best = p.final_loss;
      }
    }
  }
  return out;
}

std::optional<double> frontier_loss_at(const std::vector<FrontierPoint>& frontier,
                                       const std::string& family, std::size_t budget) {
  std::optional<double> best;
  for (const auto& p : frontier)
    if (p.family == family && p.trainable_params <= budget)
      best = best ? std::min(*best, p.final_loss) : p.final_loss;
  return best;
}

QualityTable weight_quality_study(const Task& task, const std::vector<Matrix>& checkpoints,
                                  const std::vector<MethodSpec>& methods,
                                  const SweepOptions& options) {
  if (checkpoints.empty()) throw ValueError("weight-quality study needs at least one checkpoint");
  QualityTable table;
  std::vector<std::vector<double>> losses(methods.size(), std::vector<double>(checkpoints.size()));
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const Task t = with_pretrained(task, checkpoints[c]);
    const double dist = frobenius_norm(checkpoints[c] - task.teacher);
    std::vector<TrainConfig> configs;
    for (const auto& m : methods) configs.push_back(config_for(m, options));
    auto runs = run_all(t, configs, options.threads);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      if (const auto* msg = std::get_if<std::string>(&runs[k]))
        throw Error("weight-quality run " + methods[k].to_string() + " failed: " + *msg);
      const auto& r = std::get<RunReport>(runs[k]);
      losses[k][c] = r.final_loss;
      table.rows.push_back({methods[k].to_string(), c, dist, r.trainable_params, r.final_loss});
    }
  }
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const double worst = losses[k].front();
    const double best = losses[k].back();
    table.deltas.push_back({methods[k].to_string(), worst, best, worst - best});
  }
  return table;
}

}  // namespace svft::train
