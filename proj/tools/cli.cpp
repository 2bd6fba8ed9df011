#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "svft/adapter.hpp"
#include "svft/adapter_io.hpp"
#include "svft/baselines.hpp"
#include "svft/config.hpp"
#include "svft/errors.hpp"
#include "svft/patterns.hpp"
#include "svft/rng.hpp"
#include "svft/train.hpp"
#include "svft/verify.hpp"

namespace svft::cli {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  bool truncate_base = false;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

fs::path resolve(const std::string& out_dir, const std::string& name) {
  if (out_dir.empty() || fs::path(name).is_absolute()) return name;
  return fs::path(out_dir) / name;
}

void apply_globals(config::ExperimentConfig& cfg, const Globals& g) {
  if (g.seed) cfg.sweep.base.seed = *g.seed;
  if (g.threads) cfg.sweep.threads = *g.threads;
  if (g.truncate_base) {
    // Ablation mode: every rank-restricted SVFT variant also truncates its base.
    const auto mark = [](train::MethodSpec& m) {
      if (m.rank) m.truncate_base = true;
    };
    for (auto& m : cfg.variants) mark(m);
    for (auto& m : cfg.quality_methods) mark(m);
  }
}

int cmd_verify(const std::vector<std::string>& suites, const std::string& fault, const Globals& g,
               std::ostream& out) {
  verify::VerifyOptions opt;
  opt.seed = g.seed.value_or(0);
  opt.fault = verify::parse_fault(fault);
  opt.suites = suites;
  const auto results = verify::run_suites(opt);
  out << verify::format_table(results);
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.passed();
  out << (failed ? "FAILED: " + std::to_string(failed) + " of " : "all ") << results.size() << " suites"
      << (failed ? "" : " passed") << '\n';
  return failed ? kPropertyFailure : kOk;
}

int cmd_sweep(const std::string& path, const Globals& g, std::ostream& out, std::ostream& err) {
  auto cfg = config::load_experiment(path);
  apply_globals(cfg, g);
  if (cfg.families.empty() && cfg.variants.empty())
    throw ValueError("config has neither [sweep] methods nor variants");

  std::vector<train::RunReport> reports;
  std::size_t warnings = 0;
  for (const std::uint64_t seed : cfg.seeds) {
    auto spec = cfg.task;
    spec.seed = seed;
    const auto task = train::make_task(spec);
    train::SweepResult res;
    if (!cfg.families.empty()) res = train::budget_sweep(task, cfg.families, cfg.budgets, cfg.sweep);
    if (!cfg.variants.empty()) {
      auto more = train::run_variants(task, cfg.variants, cfg.sweep);
      res.reports.insert(res.reports.end(), more.reports.begin(), more.reports.end());
      res.warnings.insert(res.warnings.end(), more.warnings.begin(), more.warnings.end());
    }
    for (const auto& w : res.warnings) {
      err << "warning: seed " << seed << ": " << w.message << '\n';
      ++warnings;
    }
    reports.insert(reports.end(), res.reports.begin(), res.reports.end());
  }

  const auto csv_path = resolve(g.out, cfg.csv_path);
  write_text(csv_path, train::sweep_csv(reports));
  const std::string summary = train::frontier_summary(train::pareto_frontier(reports));
  if (!cfg.frontier_path.empty()) write_text(resolve(g.out, cfg.frontier_path), summary);
  if (!cfg.reports_path.empty()) {
    std::string lines;
    for (const auto& r : reports) {
      auto j = train::report_to_json(r);
      std::erase(j, '\n');
      lines += j + '\n';
    }
    write_text(resolve(g.out, cfg.reports_path), lines);
  }
  out << summary << "wrote " << reports.size() << " runs to " << csv_path.string();
  if (warnings) out << " (" << warnings << " warnings)";
  out << '\n';
  return kOk;
}

int cmd_weight_quality(const std::string& path, const Globals& g, std::ostream& out) {
  auto cfg = config::load_experiment(path);
  apply_globals(cfg, g);
  if (cfg.quality_distances.size() < 2) throw ValueError("[quality] distances needs at least two checkpoints");
  if (cfg.quality_methods.empty()) throw ValueError("[quality] methods is empty");
  std::string text;
  for (const std::uint64_t seed : cfg.seeds) {
    auto spec = cfg.task;
    spec.seed = seed;
    const auto task = train::make_task(spec);
    const auto checkpoints = train::make_checkpoints(task, cfg.quality_distances, cfg.quality_direction_seed);
    const auto table = train::weight_quality_study(task, checkpoints, cfg.quality_methods, cfg.sweep);
    text += "# seed " + std::to_string(seed) + "\n" + train::quality_csv(table) + "\n";
  }
  const auto dest = resolve(g.out, cfg.quality_path);
  write_text(dest, text);
  out << text << "wrote " << dest.string() << '\n';
  return kOk;
}

int cmd_save(const std::string& base_path, const std::string& pattern_spec, std::optional<std::size_t> rank,
             const std::string& values_path, bool random_values, const Globals& g, std::ostream& out) {
  if (g.out.empty()) throw ValueError("save needs --out <adapter file>");
  const Matrix w0 = load_matrix(base_path);
  auto factors = std::make_shared<const SvdFactors>(svd(w0));
  auto adapter = SvftAdapter::init(factors, make_pattern(pattern_spec, w0.rows(), w0.cols(), factors.get()));
  if (!values_path.empty()) {
    const Matrix v = load_matrix(values_path);
    if (v.size() != adapter.num_trainable())
      throw ValueError("values file has " + std::to_string(v.size()) + " entries, pattern has " +
                       std::to_string(adapter.num_trainable()));
    std::copy(v.data().begin(), v.data().end(), adapter.values().begin());
  } else if (random_values) {
    Rng rng(mix_seed(g.seed.value_or(0), 0x5a7e));
    for (double& x : adapter.values()) x = 0.1 * rng.normal();
  }
  if (rank) adapter = truncate(adapter, *rank, g.truncate_base);
  io::save_adapter(g.out, adapter, w0);
  out << "saved " << adapter.num_trainable() << " coefficients (" << to_string(adapter.pattern().kind())
      << ", rank " << adapter.effective_rank() << (adapter.truncates_base() ? ", truncated base" : "")
      << ") to " << g.out << '\n';
  return kOk;
}

int cmd_load(const std::string& base_path, const std::string& adapter_path, std::ostream& out) {
  const Matrix w0 = load_matrix(base_path);
  const auto a = io::load_adapter(adapter_path, w0);
  out << "adapter " << adapter_path << '\n'
      << "  shape           " << a.d1() << "x" << a.d2() << '\n'
      << "  pattern         " << to_string(a.pattern().kind()) << '\n'
      << "  coefficients    " << a.num_trainable() << '\n'
      << "  effective rank  " << a.effective_rank() << (a.truncates_base() ? " (truncated base)" : "") << '\n'
      << "  base checksum   ok (" << std::hex << std::setw(16) << std::setfill('0') << io::base_checksum(w0)
      << std::dec << std::setfill(' ') << ")\n"
      << "  |M|_F           " << std::setprecision(6) << norm2(a.values()) << '\n';
  return kOk;
}

int cmd_fuse(const std::string& base_path, const std::string& adapter_path, const Globals& g,
             std::ostream& out) {
  if (g.out.empty()) throw ValueError("fuse needs --out <matrix file>");
  const Matrix w0 = load_matrix(base_path);
  const auto a = io::load_adapter(adapter_path, w0);
  save_matrix(g.out, fuse(a));
  out << "fused " << a.d1() << "x" << a.d2() << " weight written to " << g.out << '\n';
  return kOk;
}

int cmd_count(const std::string& method, std::size_t layers, std::size_t dim, std::size_t r_or_k,
              std::ostream& out) {
  out << baselines::param_count(baselines::parse_count_method(method), layers, dim, r_or_k) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse singular-vector fine-tuning toolkit", "svft"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for suites, training and random values");
  app.add_option("--out", g.out, "Output file (save, fuse) or directory (sweep, weight-quality)");
  app.add_option("--threads", g.threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--truncate-base", g.truncate_base, "Also truncate the frozen base of rank-restricted SVFT");

  auto* verify_cmd = app.add_subcommand("verify", "Run the property suites");
  std::vector<std::string> suites;
  std::string fault = "none";
  verify_cmd->add_option("--suite", suites, "Only run these suites")->take_all()->expected(1);
  verify_cmd->add_option("--fault", fault, "Inject a known bug: none, sign-convention")->group("");

  auto* sweep_cmd = app.add_subcommand("sweep", "Budget sweep from a config file");
  std::string config_path;
  sweep_cmd->add_option("config", config_path, "Experiment config")->required();

  auto* quality_cmd = app.add_subcommand("weight-quality", "Fine-tune from checkpoints of varying quality");
  quality_cmd->add_option("config", config_path, "Experiment config")->required();

  auto* save_cmd = app.add_subcommand("save", "Build an adapter for a base matrix and write it to --out");
  std::string base_path, pattern_spec = "plain", values_path;
  std::optional<std::size_t> rank;
  bool random_values = false;
  save_cmd->add_option("--base", base_path, "Base matrix (text format)")->required();
  save_cmd->add_option("--pattern", pattern_spec, "plain | banded:d | random:total:seed | topk:k");
  save_cmd->add_option("--rank", rank, "Effective rank")->check(CLI::PositiveNumber);
  auto* vopt = save_cmd->add_option("--values", values_path, "Coefficient values (text matrix, row-major)");
  save_cmd->add_flag("--random-values", random_values, "Draw values from N(0, 0.01)")->excludes(vopt);

  auto* load_cmd = app.add_subcommand("load", "Check an adapter against its base and describe it");
  std::string adapter_path;
  load_cmd->add_option("--base", base_path, "Base matrix (text format)")->required();
  load_cmd->add_option("adapter", adapter_path, "Adapter file")->required();

  auto* fuse_cmd = app.add_subcommand("fuse", "Write base + adapter update as one dense matrix to --out");
  fuse_cmd->add_option("base", base_path, "Base matrix (text format)")->required();
  fuse_cmd->add_option("adapter", adapter_path, "Adapter file")->required();

  auto* count_cmd = app.add_subcommand("count", "Trainable parameters of a method");
  std::string method;
  std::size_t layers = 1, dim = 0, r_or_k = 0;
  count_cmd->add_option("method", method, "lora | dora | vera | svft-p | svft-b")->required();
  count_cmd->add_option("layers", layers, "Adapted layers")->required();
  count_cmd->add_option("dim", dim, "Model dimension D")->required();
  count_cmd->add_option("r_or_k", r_or_k, "LoRA/DoRA/VeRA rank or banded half-width");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (verify_cmd->parsed()) return cmd_verify(suites, fault, g, out);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, g, out, err);
    if (quality_cmd->parsed()) return cmd_weight_quality(config_path, g, out);
    if (save_cmd->parsed())
      return cmd_save(base_path, pattern_spec, rank, values_path, random_values, g, out);
    if (load_cmd->parsed()) return cmd_load(base_path, adapter_path, out);
    if (fuse_cmd->parsed()) return cmd_fuse(base_path, adapter_path, g, out);
    if (count_cmd->parsed()) return cmd_count(method, layers, dim, r_or_k, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoOrFormat;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kIoOrFormat;
  } catch (const ValueError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const BudgetError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UnsupportedShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kPropertyFailure;
  }
  return kUsage;
}

}  // namespace svft::cli
