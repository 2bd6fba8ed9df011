#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svft/train.hpp"

namespace svft::config {

/// Flat "key = value" text with "[section]" headers. '#' starts a comment;
/// keys before the first header belong to section "". Lists are
/// comma-separated. Repeated keys are an error.
class IniFile {
 public:
  static IniFile parse(std::istream& in, const std::string& origin = "<input>");
  static IniFile load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;
  std::vector<std::string> list(const std::string& section, const std::string& key) const;
  /// Keys of `section` that start with `prefix`, prefix stripped.
  std::map<std::string, std::string> with_prefix(const std::string& section, const std::string& prefix) const;
  std::vector<std::string> keys(const std::string& section) const;
  std::vector<std::string> sections() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct ExperimentConfig {
  train::TaskSpec task;
  train::SweepOptions sweep;
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::string> families;
  std::vector<std::size_t> budgets;
  std::vector<train::MethodSpec> variants;

  std::vector<double> quality_distances;
  std::vector<train::MethodSpec> quality_methods;
  std::uint64_t quality_direction_seed = 99;

  std::string csv_path = "sweep.csv";
  std::string frontier_path;
  std::string reports_path;
  std::string quality_path = "quality.csv";
};

/// Unknown sections or keys are rejected so typos do not silently fall back
/// to defaults. Throws ValueError with the offending key.
ExperimentConfig parse_experiment(const IniFile& ini);
ExperimentConfig load_experiment(const std::string& path);

}  // namespace svft::config
