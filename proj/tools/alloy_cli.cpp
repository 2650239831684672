#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "alloy/experiment.hpp"
#include "alloy/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Alloy-type Anderson model experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", alloy::exp::tool_version());
  int workers = 0;
  app.add_option("--workers", workers, "OpenMP workers (default: $ALLOY_WORKERS or all cores)");

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out, "Output directory");

  std::string manifest;
  std::optional<std::string> suite_out;
  auto* suite = app.add_subcommand("suite", "Run a suite manifest and its acceptance checks");
  suite->add_option("manifest", manifest, "Suite manifest (JSON)")->required()->check(CLI::ExistingFile);
  suite->add_option("--out", suite_out, "Output directory");

  std::string dir;
  auto* plot = app.add_subcommand("emit-plot-data", "Write plot series for completed runs");
  plot->add_option("dir", dir, "Results directory")->required()->check(CLI::ExistingDirectory);

  auto* kinds = app.add_subcommand("kinds", "List experiment kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (workers > 0) alloy::par::set_workers(workers);

  if (*run) {
    std::optional<std::filesystem::path> o;
    if (out) o = *out;
    return alloy::exp::run_command(config, seed, o, std::cerr);
  }
  if (*suite) {
    std::optional<std::filesystem::path> o;
    if (suite_out) o = *suite_out;
    return alloy::exp::suite_command(manifest, o, std::cout);
  }
  if (*plot) return alloy::exp::emit_plot_data_command(dir, std::cout);
  if (*kinds) {
    for (const auto& k : alloy::exp::experiment_kinds()) std::cout << k << "\n";
    return 0;
  }
  return 0;
}
