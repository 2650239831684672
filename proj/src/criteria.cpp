#include <cmath>
#include <cstdio>
#include <sstream>

#include "alloy/error.hpp"
#include "alloy/experiment.hpp"

namespace alloy::exp {

using nlohmann::json;

namespace {

std::string num(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double d(const json& j, const char* key) {
  require(j.contains(key) && j[key].is_number(), std::string("results lack numeric field ") + key);
  return j[key].get<double>();
}

CriterionResult c1(const json& s, double runtime) {
  CriterionResult r{1, true, "", {}};
  std::ostringstream os;
  double worst = 0.0;
  const auto& eps = s["eps"];
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double e = eps[k].get<double>();
    const double target = e - e * e / 4.0;
    const double diff = std::abs(s["values"][k].get<double>() - target);
    worst = std::max(worst, diff);
    os << "S(" << num(e, 3) << ")=" << num(s["values"][k].get<double>(), 5) << " vs " << num(target, 5) << "; ";
  }
  const bool fast = runtime < 10.0;
  const bool enough = s["samples"].get<double>() >= 1e5 && d(s, "a_step") <= 0.005 + 1e-15;
  r.pass = worst <= 0.01 && fast && enough && eps.size() >= 3;
  os << "max |diff| " << num(worst, 3) << " (tol 0.01), runtime " << num(runtime, 3) << " s (limit 10)";
  r.detail = os.str();
  r.metrics = {{"max_abs_difference", worst}, {"runtime_seconds", runtime}};
  return r;
}

CriterionResult c2(const json& s) {
  CriterionResult r{2, true, "", {}};
  const double m = d(s, "certificate_m"), c = d(s, "certificate_c");
  const double a = d(s, "a"), eps = d(s, "eps"), dp = d(s, "delta_prime");
  const std::size_t accepted = s["accepted"].get<std::size_t>();
  const std::size_t fails = s["certificate_failures"].get<std::size_t>();
  const double est = d(s, "estimate");
  const bool window_ok = std::abs(a - (m - c * dp)) < 1e-12 && std::abs(eps - 2 * c * dp) < 1e-12;
  r.pass = s["certified"].get<bool>() && m == 2.0 && c == 2.0 && accepted >= 1000 && fails == 0 && est == 1.0 &&
           window_ok;
  std::ostringstream os;
  os << "m=" << num(m) << " c=" << num(c) << ", " << accepted << " accepted, " << fails
     << " certificate failures, estimate " << num(est, 17) << " on [" << num(a) << ", " << num(a + eps) << "]";
  r.detail = os.str();
  r.metrics = {{"accepted", accepted}, {"certificate_failures", fails}, {"estimate", est}};
  return r;
}

CriterionResult c3(const json& s) {
  CriterionResult r{3, true, "", {}};
  const double dm = d(s, "max_mean_difference"), dv = d(s, "max_variance_difference");
  std::ostringstream os;
  os << "closed form vs general: max |dmean| " << num(dm, 3) << ", max |dvar| " << num(dv, 3) << " over "
     << s["cases"].get<int>() << " cases";
  bool ok = dm <= 1e-10 && dv <= 1e-10;
  require(s.contains("monte_carlo"), "gaussian results lack the Monte Carlo block");
  const auto& mc = s["monte_carlo"];
  const double closed = d(mc, "closed_form_variance");
  os << "; MC variance vs " << num(closed, 6) << ":";
  double last = INFINITY, smallest_tau = INFINITY;
  for (const auto& row : mc["rows"]) {
    os << " tau=" << num(row["tau"].get<double>(), 3) << " -> " << num(row["variance"].get<double>(), 5) << " ("
       << num(100 * row["relative_error"].get<double>(), 3) << "%)";
    if (row["tau"].get<double>() < smallest_tau) {
      smallest_tau = row["tau"].get<double>();
      last = row["relative_error"].get<double>();
    }
  }
  ok = ok && mc["rows"].size() >= 3 && last <= 0.05;
  // Independent oracle for u(-1) = 1, l = m: variance = 2 sigma^2 / (l + 1) with sigma = 1.
  if (mc["u_minus1"].get<double>() == 1.0 && mc["l"] == mc["m"]) {
    const double oracle = 2.0 / (mc["l"].get<double>() + 1.0);
    ok = ok && std::abs(closed - oracle) < 1e-12;
    os << "; pinned-chain oracle " << num(oracle, 6);
  }
  r.pass = ok;
  r.detail = os.str();
  r.metrics = {{"max_mean_difference", dm}, {"max_variance_difference", dv}, {"final_relative_error", last}};
  return r;
}

CriterionResult c4(const json& s, double runtime) {
  CriterionResult r{4, true, "", {}};
  std::ostringstream os;
  bool ok = runtime < 300.0;
  for (const auto& row : s["rows"]) {
    const double v = row["value"], se = row["stderr"];
    const bool has_bound = row["bound"].is_number();
    const double b = has_bound ? row["bound"].get<double>() : NAN;
    const bool pass = has_bound && v <= b + 3 * se && row["n"].get<std::size_t>() >= 10000;
    ok = ok && pass;
    os << "lambda=" << num(row["lambda"].get<double>()) << ": " << num(v) << " +- " << num(se, 2) << " vs bound "
       << num(b) << "; ";
  }
  ok = ok && s["rows"].size() >= 2;
  os << "runtime " << num(runtime, 3) << " s";
  r.pass = ok;
  r.detail = os.str();
  return r;
}

CriterionResult c5(const json& s) {
  CriterionResult r{5, true, "", {}};
  const double mx = d(s, "max_residual");
  const auto n = s["draws"].get<std::size_t>();
  r.pass = mx <= 1e-8 && n >= 10000;
  r.detail = "max residual " + num(mx, 3) + " over " + std::to_string(n) + " draws (limit 1e-8)";
  r.metrics = {{"max_residual", mx}};
  return r;
}

CriterionResult c6(const json& s) {
  CriterionResult r{6, true, "", {}};
  std::ostringstream os;
  bool ok = true;
  double min_det = INFINITY;
  for (const auto& row : s["rows"]) {
    const double v = row["value"], se = row["stderr"];
    const double b = row["bound"].is_number() ? row["bound"].get<double>() : NAN;
    ok = ok && v <= b + 3 * se && row["n"].get<std::size_t>() >= 10000;
    min_det = std::min(min_det, row["min_determinant"].get<double>());
    os << "lambda=" << num(row["lambda"].get<double>()) << ": " << num(v) << " +- " << num(se, 2) << " (bound "
       << num(b) << "); ";
  }
  ok = ok && min_det >= -1e-10;
  const bool has_fit = s["scaling"].is_object();
  const double slope = has_fit ? s["scaling"]["slope"].get<double>() : NAN;
  ok = ok && has_fit && std::abs(slope + 2.0) <= 0.2 && s["rows"].size() >= 4;
  os << "min det " << num(min_det, 3) << ", slope " << num(slope) << " (target -2 +- 0.2)";
  r.pass = ok;
  r.detail = os.str();
  r.metrics = {{"slope", has_fit ? json(slope) : json(nullptr)}, {"min_determinant", min_det}};
  return r;
}

CriterionResult c7(const json& s) {
  CriterionResult r{7, true, "", {}};
  const double p = d(s, "p_two"), f = d(s, "factorial_half"), fse = d(s, "factorial_half_stderr");
  const double b = s["bound"].is_number() ? s["bound"].get<double>() : NAN;
  const bool counting = s["counting_inequality"].get<bool>();
  r.pass = counting && p <= f && f <= b + 3 * fse;
  std::ostringstream os;
  os << "P(Tr>=2)=" << num(p) << " <= E(Tr^2-Tr)/2=" << num(f) << " +- " << num(fse, 2) << " <= bound " << num(b)
     << "; per-draw counting inequality " << (counting ? "held" : "FAILED");
  r.detail = os.str();
  return r;
}

CriterionResult c8(const json& s) {
  CriterionResult r{8, true, "", {}};
  const auto& rows = s["rows"];
  std::ostringstream os;
  bool ok = rows.size() >= 3 && s["samples"].get<std::size_t>() >= 2000;
  double worst = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    os << "|I|=" << num(rows[k]["width"].get<double>()) << ": " << num(rows[k]["per_width"].get<double>()) << "; ";
    if (k > 0) {
      const double rel =
          std::abs(rows[k]["per_width"].get<double>() / rows[k - 1]["per_width"].get<double>() - 1.0);
      worst = std::max(worst, rel);
    }
  }
  ok = ok && worst <= 0.10;
  os << "largest change " << num(100 * worst, 3) << "% (limit 10%), implied C_W "
     << num(rows.back()["implied_cw"].get<double>(), 3);
  r.pass = ok;
  r.detail = os.str();
  r.metrics = {{"largest_relative_change", worst}};
  return r;
}

CriterionResult c9(const json& s) {
  CriterionResult r{9, true, "", {}};
  const double exact = 2.0 * std::sqrt(2.0);
  bool seen_eq = false, seen_strict = false, ok = true;
  std::ostringstream os;
  for (const auto& row : s["rows"]) {
    const double b = row["b"], in = row["integral"], bd = row["bound"];
    if (b == 0.5) {
      seen_eq = true;
      ok = ok && std::abs(in - exact) <= 1e-6 && std::abs(bd - exact) <= 1e-6;
      os << "b=0.5: integral " << num(in, 12) << ", bound " << num(bd, 12) << "; ";
    } else if (b == 2.0) {
      seen_strict = true;
      const double oracle = 2.0 * (std::sqrt(2.0) - 1.0);
      ok = ok && in < bd && std::abs(in - oracle) <= 1e-6;
      os << "b=2: integral " << num(in, 12) << " < bound " << num(bd, 12) << "; ";
    }
  }
  r.pass = ok && seen_eq && seen_strict;
  os << "2 sqrt 2 = " << num(exact, 12);
  r.detail = os.str();
  return r;
}

CriterionResult c10(const json& s, double runtime) {
  CriterionResult r{10, true, "", {}};
  const double vm = d(s, "variance_to_mean"), ks = d(s, "ks_statistic"), crit = d(s, "ks_critical_1pct");
  const bool control = s.contains("control") && s["control"]["rejected"].get<bool>();
  r.pass = vm >= 0.8 && vm <= 1.2 && ks < crit && control && runtime < 1800.0 &&
           s["realizations"].get<std::size_t>() >= 500;
  std::ostringstream os;
  os << "variance/mean " << num(vm) << " (0.8..1.2), KS " << num(ks) << " vs 1% critical " << num(crit)
     << ", rigid control " << (control ? "rejected" : "NOT rejected") << ", runtime " << num(runtime, 3) << " s";
  r.detail = os.str();
  r.metrics = {{"variance_to_mean", vm}, {"ks_statistic", ks}, {"ks_critical_1pct", crit}};
  return r;
}

CriterionResult c11(const json& s) {
  CriterionResult r{11, true, "", {}};
  const double rate = d(s, "rate"), r2 = d(s, "r2");
  r.pass = rate > 0.0 && r2 > 0.95 && s["fit"]["n"].get<int>() >= 3;
  r.detail = "fitted rate m = " + num(rate) + ", R^2 = " + num(r2, 5) + " over " +
             std::to_string(s["fit"]["n"].get<int>()) + " distances";
  r.metrics = {{"rate", rate}, {"r2", r2}};
  return r;
}

}  // namespace

CriterionResult evaluate_criterion(int id, const json& results, double runtime) {
  const json& s = results.at("summary");
  try {
    switch (id) {
      case 1: return c1(s, runtime);
      case 2: return c2(s);
      case 3: return c3(s);
      case 4: return c4(s, runtime);
      case 5: return c5(s);
      case 6: return c6(s);
      case 7: return c7(s);
      case 8: return c8(s);
      case 9: return c9(s);
      case 10: return c10(s, runtime);
      case 11: return c11(s);
      default: break;
    }
  } catch (const json::exception& e) {
    return {id, false, std::string("results do not match the criterion: ") + e.what(), {}};
  } catch (const ValidationError& e) {
    return {id, false, e.what(), {}};
  }
  throw ValidationError("no evaluator for criterion " + std::to_string(id));
}

}  // namespace alloy::exp
