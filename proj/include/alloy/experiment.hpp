#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace alloy::exp {

inline constexpr int kSchemaVersion = 1;

std::string tool_version();

/// FNV-1a (64 bit) over the dump of a JSON value; object keys are dumped sorted.
std::string config_hash(const nlohmann::json& j);

struct ExperimentConfig {
  std::string experiment;
  nlohmann::json model = nlohmann::json::object();
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string output;
  std::optional<int> criterion;
  std::string description;

  /// Everything that determines the results (no output directory).
  nlohmann::json canonical() const;
  std::string hash() const { return config_hash(canonical()); }
  nlohmann::json to_json() const;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct CriterionResult {
  int id = 0;
  bool pass = false;
  std::string detail;
  nlohmann::json metrics = nlohmann::json::object();

  nlohmann::json to_json() const;
};

struct RunOutput {
  nlohmann::json results;                    // deterministic content of results.json
  std::map<std::string, std::string> csv;    // file name -> content
  std::optional<CriterionResult> acceptance;
  double runtime_seconds = 0.0;
};

/// Kinds accepted in the "experiment" field.
const std::vector<std::string>& experiment_kinds();

/// Validates the whole configuration and returns the bound computation.
/// Throws ValidationError before any sampling starts.
std::function<RunOutput()> prepare(const ExperimentConfig& config);

/// prepare() followed by the computation and the criterion check, if any.
RunOutput execute(const ExperimentConfig& config);

/// Writes results.json, config.json, CSV series, acceptance.json and finally manifest.json.
void write_artifacts(const ExperimentConfig& config, const RunOutput& out, const std::filesystem::path& dir,
                     const std::string& started_at, const std::string& finished_at);

/// Evaluates acceptance criterion `id` on the results of its experiment.
CriterionResult evaluate_criterion(int id, const nlohmann::json& results, double runtime_seconds);

std::string utc_timestamp();

/// CLI entry points; return the process exit code.
/// 0 success, 1 failed criterion or suite member, 2 validation error, 3 numerical failure.
int run_command(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                std::optional<std::filesystem::path> out, std::ostream& log);

struct SuiteMemberReport {
  std::string id;
  std::string experiment;
  std::filesystem::path output;
  std::string status;  // "ok", "validation_error", "numerical_error", "error", "incomplete"
  std::string error;
  std::optional<CriterionResult> acceptance;
  double runtime_seconds = 0.0;
  std::optional<bool> deterministic;
};

struct SuiteReport {
  std::string name;
  std::vector<SuiteMemberReport> members;
  std::vector<CriterionResult> criteria;  // one per criterion covered, sorted by id
  bool passed = true;

  nlohmann::json to_json() const;
  std::string table() const;
};

struct SuiteOptions {
  std::optional<std::filesystem::path> output;
  bool determinism_rerun = true;
};

/// Loads and validates every member before running any of them.
SuiteReport run_suite(const std::filesystem::path& manifest_path, const SuiteOptions& options, std::ostream& log);

int suite_command(const std::filesystem::path& manifest_path, std::optional<std::filesystem::path> out,
                  std::ostream& log);

/// Scans `dir` for completed runs and writes plot series under dir/plot_data.
/// Returns an index {"written": [...], "missing": [...]}.
nlohmann::json emit_plot_data(const std::filesystem::path& dir);

int emit_plot_data_command(const std::filesystem::path& dir, std::ostream& log);

}  // namespace alloy::exp
