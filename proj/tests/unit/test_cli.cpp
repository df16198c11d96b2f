#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qcl/cli/config.hpp"
#include "qcl/cli/driver.hpp"
#include "qcl/parallel.hpp"

using namespace qcl::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string config_path(const std::string& name) { return std::string(QCL_CONFIG_DIR) + "/" + name + ".yaml"; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Desk-sized settings so every subcommand finishes in seconds.
std::vector<std::string> small_overrides() {
  return {"operator.k=16",          "density.ly_k_coarse=8",   "density.decay_n_max=20",
          "spectrum.steps=100",     "theta.n_fibers=200",      "theta.batches=10",
          "montecarlo.batches=10",  "lambda.mc_samples=2000",  "variance.samples=1000",
          "variance.steps=300",     "clt.samples=2000",        "clt.n=[50, 200]",
          "clt.omega_seeds=2",      "ldp.samples=2000",        "ldp.n=[50, 100]",
          "lclt.samples=2000",      "lclt.n=200",              "aperiodicity.n=30"};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qcl_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

struct InvalidCase {
  std::string override_text;
  std::string field;
};

}  // namespace

TEST(Config, StandardParsesWithDefaults) {
  const auto c = load_config(config_path("standard"));
  EXPECT_EQ(c.maps.size(), 2u);
  EXPECT_EQ(c.k, 64);
  EXPECT_EQ(c.theta_max, 1.0);
  EXPECT_EQ(c.hash.size(), 16u);
}

TEST(Config, AllShippedConfigsParse) {
  for (const auto* name : {"standard", "volume_preserving", "coboundary", "lattice", "piecewise"})
    EXPECT_NO_THROW(load_config(config_path(name))) << name;
}

TEST(Config, HashIgnoresKeyOrder) {
  const std::string a = R"({"seed": 3, "maps": {"family": [{"kind": "anosov", "base": [[2,1],[1,1]]}]},
    "driving": {"distribution": [1.0]}, "observable": {"per_symbol": [{"terms": [{"frequency": [1,0], "cos": 1.0}]}]}})";
  const std::string b = R"({"observable": {"per_symbol": [{"terms": [{"cos": 1.0, "frequency": [1,0]}]}]},
    "driving": {"distribution": [1.0]}, "maps": {"family": [{"base": [[2,1],[1,1]], "kind": "anosov"}]}, "seed": 3})";
  EXPECT_EQ(parse_config(a).hash, parse_config(b).hash);
  EXPECT_NE(parse_config(a).hash, parse_config(a, {"seed=4"}).hash);
}

TEST(Config, OverridesApply) {
  const auto c = load_config(config_path("standard"), {"operator.k=32", "clt.n=[100, 1000]", "maps.family[1].shears[0].amplitude=0.02"});
  EXPECT_EQ(c.k, 32);
  EXPECT_EQ(c.clt_n, (std::vector<int>{100, 1000}));
  EXPECT_DOUBLE_EQ(c.maps[1].shears[0].amplitude, 0.02);
}

TEST(Config, InvalidCorpusIsRejectedWithFieldPaths) {
  const std::vector<InvalidCase> corpus{
      {"operator.k=-4", "operator.k"},
      {"operator.k=1", "operator.k"},
      {"driving.distribution=[0.6, 0.6]", "driving.distribution"},
      {"driving.distribution=[1.0]", "driving.distribution"},
      {"driving.distribution=[-0.5, 1.5]", "driving.distribution[0]"},
      {"theta.max=0", "theta.max"},
      {"theta.max=-1", "theta.max"},
      {"theta.points=20", "theta.points"},
      {"observable.per_symbol=[{terms: []}, {terms: []}]", "observable"},
      {"maps.family[0].base=[[1, 1], [0, 1]]", "maps.family[0].base"},
      {"maps.family[0].base=[[2, 0], [0, 2]]", "maps.family[0].base"},
      {"maps.family[1].shears[0].amplitude=0.5", "maps.family[1]"},
      {"maps.family[0].kind=elliptic", "maps.family[0].kind"},
      {"observable.per_symbol[0].terms[0].frequency=[1]", "observable.per_symbol[0].terms[0].frequency"},
      {"observable.centering=sideways", "observable.centering"},
      {"spectrum.r=13", "spectrum.r"},
      {"aperiodicity.t=[0, 1]", "aperiodicity.t[0]"},
      {"variance.steps=10", "variance.steps"},
      {"clt.samples=100001", "clt.samples"},
      {"operator.bogus=1", "operator.bogus"},
      {"seed=-3", "seed"},
      {"theta.fd_step=0.8", "theta.fd_step"},
  };
  ASSERT_GE(corpus.size(), 20u);
  for (const auto& c : corpus) {
    try {
      load_config(config_path("standard"), {c.override_text});
      ADD_FAILURE() << "accepted: " << c.override_text;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), c.field) << c.override_text << " -> " << e.what();
    }
  }
}

TEST(Config, SyntaxErrorsReportLines) {
  try {
    parse_config("seed: 1\nmaps: [unclosed\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GT(e.line(), 0);
  }
}

TEST(Config, UnknownKeysCarryLines) {
  const std::string text = slurp(config_path("standard")) + "\nmystery: 1\n";
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "mystery");
    EXPECT_GT(e.line(), 40);
  }
}

TEST(Driver, SubcommandNamesRoundTrip) {
  for (const auto& name : subcommand_names()) {
    const auto s = parse_subcommand(name);
    ASSERT_TRUE(s.has_value()) << name;
    EXPECT_EQ(subcommand_name(*s), name);
  }
  EXPECT_FALSE(parse_subcommand("bogus").has_value());
}

TEST(Driver, LambdaCsvHasExactZeroRow) {
  const auto c = load_config(config_path("standard"), small_overrides());
  const auto dir = fresh_dir("lambda");
  std::ostringstream log;
  const auto r = run(Subcommand::lambda, c, dir.string(), log);
  const std::string csv = slurp(dir / "lambda.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "theta,lambda,std_err,method");
  EXPECT_NE(csv.find("\n0,0,0,operator\n"), std::string::npos);
  EXPECT_EQ(r.files.back(), "manifest.json");
  const auto verdict = read_json(dir / "verdict.json");
  EXPECT_EQ(verdict["config_hash"], c.hash);
}

TEST(Driver, CltReportsAreDeterministicAcrossWorkerCounts) {
  const auto c = load_config(config_path("standard"), small_overrides());
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  std::ostringstream log;
  qcl::set_worker_count(1);
  run(Subcommand::verify_clt, c, a.string(), log);
  qcl::set_worker_count(2);
  run(Subcommand::verify_clt, c, b.string(), log);
  qcl::set_worker_count(0);
  for (const auto* f : {"clt.csv", "clt.json", "verdict.json", "config.resolved.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(read_json(a / "manifest.json")["files"], read_json(b / "manifest.json")["files"]);
}

TEST(Driver, ResolvedConfigReproducesTheRun) {
  const auto c = load_config(config_path("standard"), small_overrides());
  const auto a = fresh_dir("rt_a"), b = fresh_dir("rt_b");
  std::ostringstream log;
  run(Subcommand::rate, c, a.string(), log);
  const auto replay = load_config((a / "config.resolved.json").string());
  EXPECT_EQ(replay.hash, c.hash);
  run(Subcommand::rate, replay, b.string(), log);
  const auto fa = read_json(a / "manifest.json")["files"];
  const auto fb = read_json(b / "manifest.json")["files"];
  EXPECT_EQ(fa, fb);
  bool has_csv = false;
  for (const auto& f : fa) has_csv = has_csv || f["path"] == "rate.csv";
  EXPECT_TRUE(has_csv);
}

TEST(Driver, CoboundaryVariationIsRefusedAsDegenerate) {
  // The operator estimate of Sigma^2 for a coboundary decays like k^-2 and is above the gate at k = 16.
  auto overrides = small_overrides();
  overrides.insert(overrides.end(), {"operator.k=32", "density.ly_k_coarse=16"});
  const auto c = load_config(config_path("coboundary"), overrides);
  const auto dir = fresh_dir("cob");
  std::ostringstream log;
  const auto r = run(Subcommand::verify_clt, c, dir.string(), log);
  EXPECT_EQ(r.exit_code, kExitRefused);
  ASSERT_EQ(r.refusals.size(), 1u);
  EXPECT_EQ(r.refusals[0].reason, "degenerate_variance");
  EXPECT_EQ(read_json(dir / "clt.json")["refused"], "degenerate_variance");
}

TEST(Driver, LatticeObservableIsRefusedByAperiodicityGate) {
  const auto c = load_config(config_path("lattice"), small_overrides());
  const auto dir = fresh_dir("lattice");
  std::ostringstream log;
  const auto r = run(Subcommand::verify_lclt, c, dir.string(), log);
  EXPECT_EQ(r.exit_code, kExitRefused);
  ASSERT_EQ(r.refusals.size(), 1u);
  EXPECT_EQ(r.refusals[0].reason, "aperiodicity_failed");
  EXPECT_FALSE(r.refusals[0].failing_t.empty());
  EXPECT_TRUE(fs::exists(dir / "verdict.json"));
}

TEST(Binary, InvalidConfigExitsWithTwo) {
  const auto dir = fresh_dir("bin_invalid");
  const std::string cmd = std::string(QCL_BINARY) + " density --config " + config_path("standard") +
                          " --set operator.k=-1 --out " + dir.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kExitInvalidConfig);
}

TEST(Binary, SeedEnvironmentOverridesRootSeed) {
  const auto dir = fresh_dir("bin_seed");
  std::string cmd = "QCL_SEED=77 " + std::string(QCL_BINARY) + " density --config " + config_path("volume_preserving") +
                    " --set operator.k=16 --set density.ly_k_coarse=8 --out " + dir.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kExitOk);
  EXPECT_EQ(read_json(dir / "config.resolved.json")["seed"], 77);
}
