// Runs the acceptance suite and prints one line per criterion.
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "alloy/error.hpp"
#include "alloy/experiment.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  const fs::path manifest = argc > 1 ? fs::path(argv[1]) : fs::path(ALLOY_SOURCE_DIR) / "configs/acceptance/paper-checks.json";
  alloy::exp::SuiteOptions opt;
  opt.output = argc > 2 ? fs::path(argv[2]) : fs::current_path() / "acceptance-results";
  std::ostringstream log;
  alloy::exp::SuiteReport rep;
  try {
    rep = alloy::exp::run_suite(manifest, opt, log);
  } catch (const std::exception& e) {
    std::cout << log.str() << "suite error: " << e.what() << "\n";
    return 1;
  }
  std::cout << log.str() << "\n";
  std::map<int, const alloy::exp::CriterionResult*> by_id;
  for (const auto& c : rep.criteria) by_id[c.id] = &c;
  bool ok = true;
  for (int id = 1; id <= 12; ++id) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      std::cout << "criterion " << id << ": FAIL  not evaluated\n";
      ok = false;
      continue;
    }
    std::cout << "criterion " << id << ": " << (it->second->pass ? "PASS" : "FAIL") << "  " << it->second->detail
              << "\n";
    ok = ok && it->second->pass;
  }
  for (const auto& m : rep.members)
    if (m.status != "ok") {
      std::cout << "member " << m.id << ": " << m.status << "  " << m.error << "\n";
      ok = false;
    }
  return ok ? 0 : 1;
}
