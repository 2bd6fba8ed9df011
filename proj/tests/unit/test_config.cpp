#include <sstream>

#include "doctest.h"
#include "svft/config.hpp"
#include "svft/errors.hpp"

using namespace svft;
using namespace svft::config;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_experiment(IniFile::parse(in));
}

}  // namespace

TEST_CASE("ini basics") {
  std::istringstream in("top = 1\n[a]\n  x = 2  # trailing\n\n# comment\ny = p, q ,r\n");
  const IniFile ini = IniFile::parse(in);
  CHECK(ini.get("", "top") == "1");
  CHECK(ini.get("a", "x") == "2");
  CHECK(ini.list("a", "y") == std::vector<std::string>{"p", "q", "r"});
  CHECK_FALSE(ini.has("a", "z"));
  CHECK(ini.get_or("a", "z", "d") == "d");

  std::istringstream dup("[a]\nx=1\nx=2\n");
  CHECK_THROWS_WITH_AS(IniFile::parse(dup, "f.ini"), doctest::Contains("f.ini:3"), ValueError);
  std::istringstream junk("[a]\nno equals sign\n");
  CHECK_THROWS_AS(IniFile::parse(junk), ValueError);
  CHECK_THROWS_AS(IniFile::load("/nonexistent/x.ini"), IoError);
}

TEST_CASE("experiment config") {
  const auto cfg = parse(R"(
[task]
d1 = 8
d2 = 6
perturbation = low_rank
amount = 2
noise_sigma = 0.5
[train]
optimizer = adam
lr = 0.01
epochs = 7
lr.lora = 0.2
[sweep]
seeds = 1, 2
methods = svft-b, lora
budgets = 10, 20
variants = full, svft-b:1@3!
[quality]
distances = 1, 0.1
methods = full
[output]
csv = out.csv
)");
  CHECK(cfg.task.d1 == 8);
  CHECK(cfg.task.d2 == 6);
  CHECK(cfg.task.perturbation.kind == train::PerturbationKind::LowRank);
  CHECK(cfg.task.noise_sigma == 0.5);
  CHECK(cfg.sweep.base.optimizer.kind == train::OptimizerConfig::Kind::Adam);
  CHECK(cfg.sweep.base.epochs == 7);
  CHECK(cfg.sweep.lr_by_family.at("lora") == 0.2);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(cfg.families == std::vector<std::string>{"svft-b", "lora"});
  CHECK(cfg.budgets == std::vector<std::size_t>{10, 20});
  REQUIRE(cfg.variants.size() == 2);
  CHECK(cfg.variants[1].rank == 3);
  CHECK(cfg.variants[1].truncate_base);
  CHECK(cfg.quality_distances == std::vector<double>{1, 0.1});
  CHECK(cfg.csv_path == "out.csv");
}

TEST_CASE("experiment config rejects mistakes") {
  CHECK_THROWS_WITH_AS(parse("[task]\nd3 = 4\n"), doctest::Contains("d3"), ValueError);
  CHECK_THROWS_AS(parse("[tasks]\nd1 = 4\n"), ValueError);
  CHECK_THROWS_AS(parse("[train]\nlr = 0\n"), ValueError);
  CHECK_THROWS_AS(parse("[train]\nlr = fast\n"), ValueError);
  CHECK_THROWS_AS(parse("[train]\nepochs = 0\n"), ValueError);
  CHECK_THROWS_AS(parse("[train]\noptimizer = lbfgs\n"), ValueError);
  CHECK_THROWS_AS(parse("[task]\nperturbation = cubic\n"), ValueError);
  CHECK_THROWS_AS(parse("[sweep]\nmethods = lora\n"), ValueError);
  CHECK_THROWS_AS(parse("[sweep]\nvariants = lora:x\n"), ValueError);
}
