#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "alloy/error.hpp"
#include "alloy/experiment.hpp"

using namespace alloy;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json concentration_config() {
  return json::parse(R"({
    "schema_version": 1,
    "experiment": "concentration",
    "seed": 5,
    "model": {"dimension": 1, "lambda": 1.0, "single_site": [[[0], 1.0], [[1], 1.0]],
              "measure": {"kind": "uniform", "params": {"a": 0.0, "b": 1.0}}},
    "params": {"site": [0], "eps": [0.5, 1.0], "samples": 2000, "a_step": 0.01}
  })");
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("alloy_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

json read(const fs::path& p) { return json::parse(std::ifstream(p)); }

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config hash ignores key order and the output directory") {
  const auto a = exp::ExperimentConfig::from_json(concentration_config());
  const auto reordered = json::parse(R"({
    "params": {"a_step": 0.01, "samples": 2000, "eps": [0.5, 1.0], "site": [0]},
    "seed": 5,
    "model": {"measure": {"params": {"b": 1.0, "a": 0.0}, "kind": "uniform"},
              "single_site": [[[0], 1.0], [[1], 1.0]], "lambda": 1.0, "dimension": 1},
    "experiment": "concentration", "schema_version": 1, "output": "somewhere/else"
  })");
  const auto b = exp::ExperimentConfig::from_json(reordered);
  CHECK(a.hash() == b.hash());
  auto c = concentration_config();
  c["seed"] = 6;
  CHECK(exp::ExperimentConfig::from_json(c).hash() != a.hash());
  CHECK(exp::config_hash(json{{"a", 1}}).size() == 16);
}

TEST_CASE("unknown keys are rejected") {
  auto c = concentration_config();
  c["colour"] = "red";
  CHECK_THROWS_AS(exp::ExperimentConfig::from_json(c), ValidationError);
  c = concentration_config();
  c["params"]["bogus"] = 1;
  CHECK_THROWS_AS(exp::prepare(exp::ExperimentConfig::from_json(c)), ValidationError);
  c = concentration_config();
  c["experiment"] = "nope";
  CHECK_THROWS_AS(exp::prepare(exp::ExperimentConfig::from_json(c)), ValidationError);
  c = concentration_config();
  c["schema_version"] = 2;
  CHECK_THROWS_AS(exp::ExperimentConfig::from_json(c), ValidationError);
}

TEST_CASE("malformed measure exits 2 without artifacts") {
  const auto dir = scratch("malformed");
  auto c = concentration_config();
  c["model"]["measure"]["params"] = {{"a", 1.0}, {"b", 0.0}};
  write(dir / "bad.json", c);
  std::ostringstream log;
  CHECK(exp::run_command(dir / "bad.json", std::nullopt, dir / "out", log) == 2);
  CHECK_FALSE(fs::exists(dir / "out"));
  CHECK(log.str().find("validation error") != std::string::npos);
}

TEST_CASE("run writes deterministic artifacts") {
  const auto dir = scratch("run");
  write(dir / "c.json", concentration_config());
  std::ostringstream log;
  REQUIRE(exp::run_command(dir / "c.json", std::nullopt, dir / "a", log) == 0);
  REQUIRE(exp::run_command(dir / "c.json", std::nullopt, dir / "b", log) == 0);
  for (const char* f : {"results.json", "manifest.json", "config.json", "concentration.csv"})
    CHECK(fs::exists(dir / "a" / f));
  std::ifstream ra(dir / "a" / "results.json"), rb(dir / "b" / "results.json");
  std::stringstream sa, sb;
  sa << ra.rdbuf();
  sb << rb.rdbuf();
  CHECK(sa.str() == sb.str());
  const auto res = read(dir / "a" / "results.json");
  CHECK(res["config_hash"] == exp::ExperimentConfig::load(dir / "c.json").hash());
  CHECK(read(dir / "a" / "manifest.json").contains("runtime_seconds"));
  CHECK_FALSE(res.contains("runtime_seconds"));
}

TEST_CASE("seed override changes the results") {
  const auto dir = scratch("seed");
  write(dir / "c.json", concentration_config());
  std::ostringstream log;
  REQUIRE(exp::run_command(dir / "c.json", 99, dir / "a", log) == 0);
  CHECK(read(dir / "a" / "results.json")["seed"] == 99);
}

TEST_CASE("criterion evaluation on a failing run") {
  auto c = concentration_config();
  c["criterion"] = 1;
  const auto out = exp::execute(exp::ExperimentConfig::from_json(c));
  REQUIRE(out.acceptance.has_value());
  CHECK(out.acceptance->id == 1);
  CHECK_FALSE(out.acceptance->pass);  // too few samples
}

TEST_CASE("suite validates before running and checks determinism") {
  const auto dir = scratch("suite");
  write(dir / "c.json", concentration_config());
  write(dir / "suite.json", json{{"schema_version", 1},
                                  {"name", "mini"},
                                  {"workers", 1},
                                  {"members", {{{"id", "conc"}, {"config", "c.json"}}}}});
  std::ostringstream log;
  exp::SuiteOptions opt;
  opt.output = dir / "out";
  const auto rep = exp::run_suite(dir / "suite.json", opt, log);
  CHECK(rep.passed);
  REQUIRE(rep.criteria.size() == 1);
  CHECK(rep.criteria[0].id == 12);
  CHECK(rep.criteria[0].pass);
  CHECK(fs::exists(dir / "out" / "report.json"));

  const auto index = exp::emit_plot_data(dir / "out");
  CHECK(fs::exists(dir / "out" / "plot_data" / "index.json"));
  CHECK_FALSE(index["written"].empty());

  auto bad = concentration_config();
  bad["params"]["samples"] = -1;
  write(dir / "bad.json", bad);
  write(dir / "suite2.json", json{{"schema_version", 1},
                                   {"name", "mini"},
                                   {"members", {{{"id", "conc"}, {"config", "c.json"}}, {{"id", "bad"}, {"config", "bad.json"}}}}});
  opt.output = dir / "out2";
  CHECK_THROWS_AS(exp::run_suite(dir / "suite2.json", opt, log), ValidationError);
  CHECK_FALSE(fs::exists(dir / "out2" / "conc"));
}

TEST_CASE("kinds cover the experiment list") {
  const auto& k = exp::experiment_kinds();
  for (const char* name : {"concentration", "gaussian_conditioning", "fractional_moment", "wegner_count",
                           "minami_determinant", "poisson_statistics", "inverse_moment", "fm_decay_profile"})
    CHECK(std::find(k.begin(), k.end(), name) != k.end());
}

}
