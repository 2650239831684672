#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "alloy/error.hpp"
#include "alloy/experiment.hpp"

namespace alloy::exp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace

void write_artifacts(const ExperimentConfig& config, const RunOutput& out, const fs::path& dir,
                     const std::string& started_at, const std::string& finished_at) {
  fs::create_directories(dir);
  fs::remove(dir / "manifest.json");
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    files.push_back(name);
  };
  emit("results.json", out.results.dump(2) + "\n");
  emit("config.json", config.to_json().dump(2) + "\n");
  for (const auto& [name, content] : out.csv) emit(name, content);
  if (out.acceptance) {
    json a = out.acceptance->to_json();
    a["runtime_seconds"] = out.runtime_seconds;
    emit("acceptance.json", a.dump(2) + "\n");
  }
  json manifest{{"schema_version", kSchemaVersion},
                {"experiment", config.experiment},
                {"config_hash", config.hash()},
                {"seed", config.seed},
                {"tool_version", tool_version()},
                {"started_at", started_at},
                {"finished_at", finished_at},
                {"runtime_seconds", out.runtime_seconds},
                {"files", files}};
  // Written last and renamed into place: its presence marks a complete run.
  write_file(dir / "manifest.json.tmp", manifest.dump(2) + "\n");
  fs::rename(dir / "manifest.json.tmp", dir / "manifest.json");
}

int run_command(const fs::path& config_path, std::optional<std::uint64_t> seed, std::optional<fs::path> out,
                std::ostream& log) {
  try {
    auto cfg = ExperimentConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    fs::path dir = out ? *out : fs::path(cfg.output.empty() ? "results/" + cfg.experiment : cfg.output);
    if (out) cfg.output = out->string();
    const auto started = utc_timestamp();
    const auto result = execute(cfg);
    write_artifacts(cfg, result, dir, started, utc_timestamp());
    log << cfg.experiment << ": wrote " << dir.string() << " (config " << cfg.hash() << ", seed " << cfg.seed
        << ")\n";
    if (result.acceptance) {
      log << "criterion " << result.acceptance->id << ": " << (result.acceptance->pass ? "PASS" : "FAIL") << "  "
          << result.acceptance->detail << "\n";
      return result.acceptance->pass ? 0 : 1;
    }
    return 0;
  } catch (const ValidationError& e) {
    log << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << "\n";
    return 3;
  }
}

// ---------------------------------------------------------------------------

json SuiteReport::to_json() const {
  json members_j = json::array();
  for (const auto& m : members) {
    json j{{"id", m.id},
           {"experiment", m.experiment},
           {"output", m.output.string()},
           {"status", m.status},
           {"error", m.error},
           {"runtime_seconds", m.runtime_seconds},
           {"acceptance", m.acceptance ? m.acceptance->to_json() : json(nullptr)},
           {"deterministic", m.deterministic ? json(*m.deterministic) : json(nullptr)}};
    members_j.push_back(j);
  }
  json crit = json::array();
  for (const auto& c : criteria) crit.push_back(c.to_json());
  return {{"schema_version", kSchemaVersion}, {"name", name}, {"passed", passed}, {"members", members_j},
          {"criteria", crit}};
}

std::string SuiteReport::table() const {
  std::ostringstream os;
  os << "suite " << name << ": " << (passed ? "PASS" : "FAIL") << "\n";
  os << std::left << std::setw(10) << "criterion" << std::setw(6) << "pass"
     << "detail\n";
  for (const auto& c : criteria)
    os << std::left << std::setw(10) << c.id << std::setw(6) << (c.pass ? "yes" : "NO") << c.detail << "\n";
  os << "\n" << std::left << std::setw(32) << "member" << std::setw(18) << "status" << std::setw(10) << "seconds"
     << "error\n";
  for (const auto& m : members) {
    std::ostringstream secs;
    secs << std::fixed << std::setprecision(1) << m.runtime_seconds;
    os << std::left << std::setw(32) << m.id << std::setw(18) << m.status << std::setw(10) << secs.str() << m.error
       << "\n";
  }
  return os.str();
}

namespace {

struct MemberSpec {
  std::string id;
  ExperimentConfig config;
};

SuiteMemberReport run_member(const MemberSpec& spec, const fs::path& dir) {
  SuiteMemberReport r;
  r.id = spec.id;
  r.experiment = spec.config.experiment;
  r.output = dir;
  auto cfg = spec.config;
  cfg.output = dir.string();
  try {
    fs::remove_all(dir);
    const auto started = utc_timestamp();
    const auto out = execute(cfg);
    write_artifacts(cfg, out, dir, started, utc_timestamp());
    r.runtime_seconds = out.runtime_seconds;
    r.acceptance = out.acceptance;
    r.status = fs::exists(dir / "manifest.json") ? "ok" : "incomplete";
  } catch (const ValidationError& e) {
    r.status = "validation_error";
    r.error = e.what();
  } catch (const NumericalError& e) {
    r.status = "numerical_error";
    r.error = e.what();
  } catch (const std::exception& e) {
    r.status = "error";
    r.error = e.what();
  }
  return r;
}

// Every emitted file except the manifest and the timing-bearing acceptance record.
bool same_artifacts(const fs::path& a, const fs::path& b, std::string& why) {
  if (!fs::exists(a / "manifest.json") || !fs::exists(b / "manifest.json")) {
    why = "missing manifest";
    return false;
  }
  const auto files = read_json(a / "manifest.json")["files"].get<std::vector<std::string>>();
  for (const auto& f : files) {
    if (f == "acceptance.json" || f == "config.json") continue;
    if (read_file(a / f) != read_file(b / f)) {
      why = f + " differs";
      return false;
    }
  }
  return true;
}

}  // namespace

SuiteReport run_suite(const fs::path& manifest_path, const SuiteOptions& options, std::ostream& log) {
  const json m = read_json(manifest_path);
  require(m.is_object(), "suite manifest must be an object");
  for (const auto& [key, _] : m.items())
    require(key == "schema_version" || key == "name" || key == "output" || key == "workers" || key == "members" ||
                key == "determinism_rerun" || key == "description",
            "unknown key in suite manifest: " + key);
  if (m.contains("schema_version")) require(m["schema_version"] == kSchemaVersion, "unsupported suite schema_version");
  SuiteReport report;
  report.name = m.value("name", manifest_path.stem().string());
  const int workers = m.value("workers", 1);
  require(workers >= 1, "suite workers must be positive");
  const bool rerun = options.determinism_rerun && m.value("determinism_rerun", true);
  const fs::path base = manifest_path.parent_path();
  const fs::path out_dir = options.output ? *options.output : fs::path(m.value("output", "results/" + report.name));

  std::vector<MemberSpec> specs;
  std::set<std::string> ids;
  for (const auto& item : m.value("members", json::array())) {
    require(item.is_object() && item.contains("id") && item.contains("config"),
            "suite members need \"id\" and \"config\"");
    for (const auto& [key, _] : item.items())
      require(key == "id" || key == "config", "unknown key in suite member: " + key);
    const std::string id = item["id"];
    require(ids.insert(id).second, "duplicate suite member id: " + id);
    const fs::path cfg_path = base / item["config"].get<std::string>();
    try {
      auto cfg = ExperimentConfig::load(cfg_path);
      prepare(cfg);
      specs.push_back({id, cfg});
    } catch (const ValidationError& e) {
      throw ValidationError("suite member " + id + ": " + e.what());
    }
  }

  // Members run in batches of `workers`; each owns its output directory.
  auto run_all = [&](const fs::path& root, std::vector<SuiteMemberReport>& into) {
    into.resize(specs.size());
    for (std::size_t b = 0; b < specs.size(); b += static_cast<std::size_t>(workers)) {
      std::vector<std::future<SuiteMemberReport>> batch;
      const std::size_t e = std::min(specs.size(), b + static_cast<std::size_t>(workers));
      for (std::size_t i = b; i < e; ++i) {
        if (workers == 1) {
          into[i] = run_member(specs[i], root / specs[i].id);
        } else {
          batch.push_back(std::async(std::launch::async, run_member, std::cref(specs[i]), root / specs[i].id));
        }
      }
      for (std::size_t i = 0; i < batch.size(); ++i) into[b + i] = batch[i].get();
      for (std::size_t i = b; i < e; ++i)
        log << "  " << specs[i].id << ": " << into[i].status << " (" << std::fixed << std::setprecision(1)
            << into[i].runtime_seconds << " s)" << (into[i].error.empty() ? "" : " " + into[i].error) << "\n";
    }
  };

  log << "suite " << report.name << ": " << specs.size() << " members -> " << out_dir.string() << "\n";
  run_all(out_dir, report.members);

  std::map<int, CriterionResult> crit;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& mr = report.members[i];
    if (mr.status != "ok") report.passed = false;
    if (!specs[i].config.criterion) continue;
    const int id = *specs[i].config.criterion;
    CriterionResult c;
    if (mr.acceptance) {
      c = *mr.acceptance;
    } else {
      c.id = id;
      c.pass = false;
      c.detail = mr.id + " did not complete: " + mr.status + (mr.error.empty() ? "" : " " + mr.error);
    }
    c.metrics["member"] = mr.id;
    if (crit.count(id)) {
      crit[id].pass = crit[id].pass && c.pass;
      crit[id].detail += "; " + c.detail;
    } else {
      crit[id] = c;
    }
  }

  if (rerun && !specs.empty()) {
    log << "determinism re-run\n";
    std::vector<SuiteMemberReport> again;
    const fs::path rerun_dir = out_dir / ".rerun";
    run_all(rerun_dir, again);
    CriterionResult c;
    c.id = 12;
    c.pass = true;
    std::size_t compared = 0;
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      std::string why;
      const bool ok = report.members[i].status == "ok" && again[i].status == "ok" &&
                      same_artifacts(out_dir / specs[i].id, rerun_dir / specs[i].id, why);
      if (report.members[i].status != "ok" || again[i].status != "ok") why = "run did not complete";
      report.members[i].deterministic = ok;
      ++compared;
      if (!ok) bad.push_back(specs[i].id + " (" + why + ")");
    }
    c.pass = bad.empty();
    c.metrics["members_compared"] = compared;
    c.metrics["mismatches"] = bad;
    std::ostringstream d;
    d << compared << " members re-run with the same seed; ";
    if (bad.empty()) {
      d << "all results and series byte-identical";
    } else {
      d << bad.size() << " differ:";
      for (const auto& b : bad) d << " " << b;
    }
    c.detail = d.str();
    crit[12] = c;
  }
  for (auto& [id, c] : crit) {
    report.criteria.push_back(c);
    report.passed = report.passed && c.pass;
  }
  fs::create_directories(out_dir);
  write_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
  write_file(out_dir / "report.txt", report.table());
  return report;
}

int suite_command(const fs::path& manifest_path, std::optional<fs::path> out, std::ostream& log) {
  try {
    SuiteOptions opt;
    opt.output = out;
    const auto report = run_suite(manifest_path, opt, log);
    log << report.table();
    return report.passed ? 0 : 1;
  } catch (const ValidationError& e) {
    log << "validation error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------

json emit_plot_data(const fs::path& dir) {
  require(fs::is_directory(dir), dir.string() + " is not a directory");
  const fs::path plot = dir / "plot_data";
  json index{{"written", json::array()}, {"missing", json::array()}, {"incomplete", json::array()}};
  std::vector<fs::path> runs;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() != "results.json") continue;
    const auto p = e.path().parent_path();
    if (p.string().find(".rerun") != std::string::npos || p.string().find("plot_data") != std::string::npos) continue;
    runs.push_back(p);
  }
  std::sort(runs.begin(), runs.end());
  auto note_missing = [&](const fs::path& run, const std::string& series) {
    index["missing"].push_back({{"run", fs::relative(run, dir).string()}, {"series", series}});
  };
  for (const auto& run : runs) {
    const std::string rel = fs::relative(run, dir).string();
    if (!fs::exists(run / "manifest.json")) {
      index["incomplete"].push_back(rel);
      continue;
    }
    const json r = read_json(run / "results.json");
    const std::string op = r.value("operation", "");
    const json& s = r["summary"];
    std::string tag = rel;
    std::replace(tag.begin(), tag.end(), '/', '_');
    if (tag == ".") tag = op;
    fs::create_directories(plot);
    auto emit = [&](const std::string& series, const std::string& content) {
      const auto name = tag + "_" + series + ".csv";
      write_file(plot / name, content);
      index["written"].push_back({{"run", rel}, {"series", series}, {"file", "plot_data/" + name}});
    };
    std::ostringstream os;
    os << std::setprecision(17);
    if (op == "fm_decay_profile") {
      os << "distance,log_value\n";
      for (const auto& p : s.value("points", json::array()))
        if (p["value"].get<double>() > 0) os << p["distance"].get<int>() << "," << std::log(p["value"].get<double>()) << "\n";
      emit("decay_profile", os.str());
    } else if (op == "poisson_statistics") {
      if (!s.contains("gap_histogram")) {
        note_missing(run, "gap_histogram");
        continue;
      }
      os << "bin_left,bin_right,density,exp_reference\n";
      const auto& edges = s["gap_bin_edges"];
      for (std::size_t k = 0; k < s["gap_histogram"].size(); ++k)
        os << edges[k].get<double>() << "," << edges[k + 1].get<double>() << "," << s["gap_histogram"][k].get<double>()
           << "," << s["gap_reference"][k].get<double>() << "\n";
      emit("gap_histogram", os.str());
      if (fs::exists(run / "ids.csv")) {
        emit("ids_curve", read_file(run / "ids.csv"));
      } else {
        note_missing(run, "ids_curve");
      }
    } else if (op == "ids" || op == "ids_positivity") {
      if (fs::exists(run / "ids.csv")) {
        emit("ids_curve", read_file(run / "ids.csv"));
      } else {
        note_missing(run, "ids_curve");
      }
    } else if (op == "concentration") {
      emit("concentration", read_file(run / "concentration.csv"));
    } else if (op == "minami_determinant") {
      os << "log_lambda,log_value\n";
      for (const auto& row : s.value("rows", json::array()))
        if (row["value"].get<double>() > 0)
          os << std::log(row["lambda"].get<double>()) << "," << std::log(row["value"].get<double>()) << "\n";
      emit("minami_scaling", os.str());
    } else if (op == "wegner_count") {
      emit("wegner", read_file(run / "wegner.csv"));
    } else {
      note_missing(run, op + " (no plot series)");
    }
  }
  fs::create_directories(plot);
  write_file(plot / "index.json", index.dump(2) + "\n");
  return index;
}

int emit_plot_data_command(const fs::path& dir, std::ostream& log) {
  try {
    const auto index = emit_plot_data(dir);
    log << "wrote " << index["written"].size() << " series; " << index["missing"].size() << " missing, "
        << index["incomplete"].size() << " incomplete runs\n";
    for (const auto& m : index["missing"]) log << "  missing: " << m["run"].get<std::string>() << " " << m["series"].get<std::string>() << "\n";
    return 0;
  } catch (const ValidationError& e) {
    log << "validation error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace alloy::exp
