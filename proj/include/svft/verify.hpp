#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace svft::verify {

/// Deliberate bugs for mutation smoke tests of the suites themselves.
enum class Fault {
  None,
  /// Flip the sign of u_0 without touching v_0 in the factors used by the
  /// structure suite, as a broken sign convention would.
  SignConvention,
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  Fault fault = Fault::None;
  /// Suites to run; empty means all of them.
  std::vector<std::string> suites;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;
  bool passed() const;
};

/// Names in execution order: svd, patterns, fusion, expressivity, structure,
/// rank, gradient, baselines, count, persistence.
const std::vector<std::string>& suite_names();

/// Throws ValueError for an unknown suite name. Never throws for a failing
/// check; a check that raises is recorded as failed with the message.
std::vector<SuiteResult> run_suites(const VerifyOptions& options);

std::string format_table(const std::vector<SuiteResult>& results);

Fault parse_fault(const std::string& name);

}  // namespace svft::verify
