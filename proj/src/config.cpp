#include "svft/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "svft/errors.hpp"

namespace svft::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

IniFile IniFile::parse(std::istream& in, const std::string& origin) {
  IniFile ini;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  ini.sections_[section];
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = [&] { return origin + ":" + std::to_string(lineno) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw ValueError(where() + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      ini.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValueError(where() + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValueError(where() + "empty key");
    auto& sec = ini.sections_[section];
    if (sec.count(key)) throw ValueError(where() + "duplicate key '" + key + "'");
    sec[key] = trim(line.substr(eq + 1));
  }
  return ini;
}

IniFile IniFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse(in, path);
}

bool IniFile::has(const std::string& section, const std::string& key) const { return get(section, key).has_value(); }

std::optional<std::string> IniFile::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string IniFile::get_or(const std::string& section, const std::string& key, const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

std::vector<std::string> IniFile::list(const std::string& section, const std::string& key) const {
  std::vector<std::string> out;
  const auto v = get(section, key);
  if (!v) return out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::map<std::string, std::string> IniFile::with_prefix(const std::string& section, const std::string& prefix) const {
  std::map<std::string, std::string> out;
  const auto s = sections_.find(section);
  if (s == sections_.end()) return out;
  for (const auto& [k, v] : s->second)
    if (k.rfind(prefix, 0) == 0) out[k.substr(prefix.size())] = v;
  return out;
}

std::vector<std::string> IniFile::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, body] : sections_) out.push_back(name);
  return out;
}

std::vector<std::string> IniFile::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto s = sections_.find(section);
  if (s == sections_.end()) return out;
  for (const auto& [k, v] : s->second) out.push_back(k);
  return out;
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValueError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ValueError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValueError("config key '" + key + "': expected true/false, got '" + v + "'");
}

void reject_unknown(const IniFile& ini, const std::string& section, const std::set<std::string>& allowed,
                    const std::string& prefix = "") {
  for (const auto& k : ini.keys(section)) {
    if (allowed.count(k)) continue;
    if (!prefix.empty() && k.rfind(prefix, 0) == 0) continue;
    throw ValueError("unknown config key '" + k + "' in [" + section + "]");
  }
}

}  // namespace

ExperimentConfig parse_experiment(const IniFile& ini) {
  ExperimentConfig cfg;
  static const std::set<std::string> known{"", "task", "train", "sweep", "quality", "output"};
  for (const auto& sec : ini.sections())
    if (!known.count(sec)) throw ValueError("unknown config section [" + sec + "]");
  reject_unknown(ini, "", {});
  reject_unknown(ini, "task",
                 {"d1", "d2", "perturbation", "amount", "band", "noise_sigma", "samples", "eval_samples", "scale",
                  "mlp_head"});
  reject_unknown(ini, "train", {"optimizer", "lr", "beta1", "beta2", "eps", "epochs", "batch", "seed", "threads"},
                 "lr.");
  reject_unknown(ini, "sweep", {"seeds", "methods", "budgets", "variants"});
  reject_unknown(ini, "quality", {"distances", "methods", "direction_seed"});
  reject_unknown(ini, "output", {"csv", "frontier", "reports", "quality"});

  auto& t = cfg.task;
  const auto num = [&](const std::string& sec, const std::string& key, auto& field) {
    if (const auto v = ini.get(sec, key)) {
      if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>)
        field = to_double(key, *v);
      else
        field = static_cast<std::decay_t<decltype(field)>>(to_u64(key, *v));
    }
  };
  num("task", "d1", t.d1);
  num("task", "d2", t.d2);
  num("task", "amount", t.perturbation.amount);
  num("task", "band", t.perturbation.band);
  num("task", "noise_sigma", t.noise_sigma);
  num("task", "samples", t.samples);
  num("task", "eval_samples", t.eval_samples);
  num("task", "scale", t.scale);
  if (const auto v = ini.get("task", "mlp_head")) t.mlp_head = to_bool("mlp_head", *v);
  const std::string pert = ini.get_or("task", "perturbation", "sparse_spectrum");
  if (pert == "sparse_spectrum")
    t.perturbation.kind = train::PerturbationKind::SparseSpectrum;
  else if (pert == "low_rank")
    t.perturbation.kind = train::PerturbationKind::LowRank;
  else if (pert == "dense")
    t.perturbation.kind = train::PerturbationKind::Dense;
  else
    throw ValueError("config key 'perturbation': expected sparse_spectrum, low_rank or dense");

  auto& base = cfg.sweep.base;
  const std::string opt = ini.get_or("train", "optimizer", "sgd");
  if (opt == "sgd")
    base.optimizer.kind = train::OptimizerConfig::Kind::SGD;
  else if (opt == "adam")
    base.optimizer.kind = train::OptimizerConfig::Kind::Adam;
  else
    throw ValueError("config key 'optimizer': expected sgd or adam");
  num("train", "lr", base.optimizer.lr);
  num("train", "beta1", base.optimizer.beta1);
  num("train", "beta2", base.optimizer.beta2);
  num("train", "eps", base.optimizer.eps);
  num("train", "epochs", base.epochs);
  num("train", "batch", base.batch);
  num("train", "seed", base.seed);
  num("train", "threads", cfg.sweep.threads);
  if (!(base.optimizer.lr > 0.0)) throw ValueError("config key 'lr' must be positive");
  if (base.epochs < 1) throw ValueError("config key 'epochs' must be at least 1");
  for (const auto& [fam, v] : ini.with_prefix("train", "lr.")) {
    const double lr = to_double("lr." + fam, v);
    if (!(lr > 0.0)) throw ValueError("config key 'lr." + fam + "' must be positive");
    cfg.sweep.lr_by_family[fam] = lr;
  }

  if (ini.has("sweep", "seeds")) {
    cfg.seeds.clear();
    for (const auto& s : ini.list("sweep", "seeds")) cfg.seeds.push_back(to_u64("seeds", s));
  }
  cfg.families = ini.list("sweep", "methods");
  for (const auto& b : ini.list("sweep", "budgets")) cfg.budgets.push_back(to_u64("budgets", b));
  for (const auto& v : ini.list("sweep", "variants")) cfg.variants.push_back(train::parse_method(v));
  if (!cfg.families.empty() && cfg.budgets.empty())
    throw ValueError("[sweep] methods needs a budgets list");

  for (const auto& d : ini.list("quality", "distances")) cfg.quality_distances.push_back(to_double("distances", d));
  for (const auto& m : ini.list("quality", "methods")) cfg.quality_methods.push_back(train::parse_method(m));
  num("quality", "direction_seed", cfg.quality_direction_seed);

  cfg.csv_path = ini.get_or("output", "csv", cfg.csv_path);
  cfg.frontier_path = ini.get_or("output", "frontier", "");
  cfg.reports_path = ini.get_or("output", "reports", "");
  cfg.quality_path = ini.get_or("output", "quality", cfg.quality_path);
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) { return parse_experiment(IniFile::load(path)); }

}  // namespace svft::config
