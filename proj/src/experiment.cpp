#include "alloy/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "alloy/constants.hpp"
#include "alloy/error.hpp"
#include "alloy/parallel.hpp"
#include "alloy/regularity.hpp"
#include "alloy/rng.hpp"
#include "alloy/spectral.hpp"

#ifndef ALLOY_VERSION
#define ALLOY_VERSION "0.0.0"
#endif

namespace alloy::exp {

using nlohmann::json;

std::string tool_version() { return ALLOY_VERSION; }

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json ExperimentConfig::canonical() const {
  json j{{"schema_version", kSchemaVersion}, {"experiment", experiment}, {"params", params}, {"seed", seed}};
  if (!model.empty()) j["model"] = model;
  if (criterion) j["criterion"] = *criterion;
  return j;
}

json ExperimentConfig::to_json() const {
  json j = canonical();
  if (!output.empty()) j["output"] = output;
  if (!description.empty()) j["description"] = description;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  static const std::set<std::string> known{"schema_version", "experiment", "model",    "params",
                                           "seed",           "output",     "criterion", "description"};
  for (const auto& [key, _] : j.items()) require(known.count(key) > 0, "unknown key in config: " + key);
  ExperimentConfig c;
  if (j.contains("schema_version"))
    require(j["schema_version"] == kSchemaVersion, "unsupported schema_version (expected 1)");
  require(j.contains("experiment") && j["experiment"].is_string(), "config.experiment must be a string");
  c.experiment = j["experiment"];
  const auto& kinds = experiment_kinds();
  require(std::find(kinds.begin(), kinds.end(), c.experiment) != kinds.end(),
          "unknown experiment kind: " + c.experiment);
  if (j.contains("model")) {
    require(j["model"].is_object(), "config.model must be an object");
    c.model = j["model"];
  }
  if (j.contains("params")) {
    require(j["params"].is_object(), "config.params must be an object");
    c.params = j["params"];
  }
  require(j.contains("seed") && j["seed"].is_number_integer() &&
              (j["seed"].is_number_unsigned() || j["seed"].get<std::int64_t>() >= 0),
          "config.seed must be a nonnegative integer");
  c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output")) {
    require(j["output"].is_string(), "config.output must be a string");
    c.output = j["output"];
  }
  if (j.contains("criterion")) {
    require(j["criterion"].is_number_integer(), "config.criterion must be an integer");
    c.criterion = j["criterion"].get<int>();
    require(*c.criterion >= 1 && *c.criterion <= 11, "config.criterion must lie in 1..11");
  }
  if (j.contains("description")) {
    require(j["description"].is_string(), "config.description must be a string");
    c.description = j["description"];
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json CriterionResult::to_json() const {
  return {{"criterion", id}, {"pass", pass}, {"detail", detail}, {"metrics", metrics}};
}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{
      "constants",         "concentration",   "conditional_concentration", "gaussian_conditioning",
      "fractional_moment", "fm_decay_profile", "wegner_count",              "minami_determinant",
      "two_level_probability", "ids",          "ids_positivity",            "poisson_statistics",
      "fvc_probability",   "inverse_moment",  "reverse_holder",            "recursion_probe",
      "resolvent_identity"};
  return kinds;
}

namespace {

// Consumes keys of a params object; leftover keys are rejected by done().
class Params {
 public:
  explicit Params(json j) : j_(std::move(j)) {}

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return need<T>(key);
  }

  template <class T>
  T need(const std::string& key) {
    require(j_.contains(key), "params." + key + " is required");
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      const auto& x = j_.at(key);
      require(x.is_number_integer(), "params." + key + " must be an integer");
      if constexpr (std::is_unsigned_v<T>)
        require(x.is_number_unsigned() || x.get<std::int64_t>() >= 0, "params." + key + " must be nonnegative");
    }
    try {
      T v = j_.at(key).get<T>();
      j_.erase(key);
      return v;
    } catch (const json::exception& e) {
      throw ValidationError("params." + key + " has the wrong type: " + e.what());
    }
  }

  json raw(const std::string& key, json fallback = nullptr) {
    if (!j_.contains(key)) return fallback;
    json v = j_.at(key);
    j_.erase(key);
    return v;
  }

  void done() const {
    for (const auto& [key, _] : j_.items()) throw ValidationError("unknown key in params: " + key);
  }

 private:
  json j_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV with a header row; values printed with round-trip precision.
class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) {
    bool first = true;
    for (const auto& h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }
  Csv& row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      out_ << (first ? "" : ",") << fmt(v);
      first = false;
    }
    out_ << '\n';
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Context {
  ExperimentConfig cfg;
  std::string hash;
  std::optional<AlloyModel> model;

  const AlloyModel& m() const { return *model; }

  json record(const std::string& op, const Estimate& e, std::optional<double> bound = std::nullopt) const {
    return {{"operation", op},     {"config_hash", hash},       {"seed", cfg.seed},
            {"value", e.value},    {"stderr", e.stderr_},       {"n", e.n_samples},
            {"bound", bound ? finite_or_null(*bound) : json(nullptr)}, {"metadata", e.metadata}};
  }
};

AlloyModel with_lambda(const AlloyModel& m, double lambda) {
  AlloyModel out = m;
  out.lambda = lambda;
  return out;
}

// Enclosure with unbounded couplings cut at far quantiles.
std::pair<double, double> finite_enclosure(const AlloyModel& model) {
  auto [lo, hi] = spectral_enclosure(model);
  if (std::isfinite(lo) && std::isfinite(hi)) return {lo, hi};
  const double wlo = model.mu.quantile(1e-13), whi = model.mu.quantile(1.0 - 1e-13);
  double elo = 0.0, ehi = 0.0;
  for (const auto& e : model.u.entries()) {
    elo += e.value > 0 ? e.value * wlo : e.value * whi;
    ehi += e.value > 0 ? e.value * whi : e.value * wlo;
  }
  const double d2 = 2.0 * model.dimension();
  return {-d2 + model.lambda * elo, d2 + model.lambda * ehi};
}

// "band_center", "draw" or a number. A drawn energy is fixed for the whole experiment.
double resolve_energy(const json& spec, const AlloyModel& model, std::uint64_t seed) {
  if (spec.is_number()) return spec.get<double>();
  require(spec.is_string(), "energy must be a number, \"band_center\" or \"draw\"");
  const std::string s = spec;
  if (s == "band_center") return band_center(model);
  if (s == "draw") {
    const auto [lo, hi] = finite_enclosure(model);
    rng::Stream st(seed, 0, rng::Tag::Energy);
    return lo + (hi - lo) * st.uniform();
  }
  throw ValidationError("energy must be a number, \"band_center\" or \"draw\"; got \"" + s + "\"");
}

Site site_param(Params& p, const std::string& key, int d, Site fallback) {
  if (!p.has(key)) return fallback;
  Site s = p.need<Site>(key);
  require(static_cast<int>(s.size()) == d, "params." + key + " must have " + std::to_string(d) + " coordinates");
  return s;
}

std::vector<double> lambdas_param(Params& p, const AlloyModel& m) {
  auto ls = p.get<std::vector<double>>("lambdas", {m.lambda});
  require(!ls.empty(), "params.lambdas must not be empty");
  for (double l : ls) require(l >= 0.0 && std::isfinite(l), "params.lambdas entries must be finite and nonnegative");
  return ls;
}

std::size_t count_param(Params& p, const std::string& key, std::size_t fallback, std::size_t min = 1) {
  const auto n = p.get<std::size_t>(key, fallback);
  require(n >= min, "params." + key + " must be at least " + std::to_string(min));
  return n;
}

std::vector<double> grid(double lo, double hi, double step) {
  require(step > 0.0 && hi > lo, "energy grid needs lo < hi and step > 0");
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  require(n <= 5'000'000, "energy grid too large");
  std::vector<double> g;
  for (std::size_t k = 0; k <= n; ++k) g.push_back(lo + static_cast<double>(k) * step);
  return g;
}

std::vector<double> energy_grid(Params& p, const AlloyModel& model, double* step_out = nullptr) {
  const auto [elo, ehi] = finite_enclosure(model);
  const double step = p.get<double>("energy_step", 0.002);
  if (step_out) *step_out = step;
  const double lo = p.get<double>("energy_min", elo - 0.01);
  const double hi = p.get<double>("energy_max", ehi + 0.01);
  return grid(lo, hi, step);
}

ConditioningEvent event_param(const json& e, int d) {
  require(e.is_object(), "params.event must be an object");
  for (const auto& [key, _] : e.items())
    require(key == "kind" || key == "sites" || key == "lo" || key == "hi" || key == "values" || key == "tolerance",
            "unknown key in params.event: " + key);
  const std::string kind = e.value("kind", "none");
  if (kind == "none") return ConditioningEvent::none();
  try {
    auto sites = e.at("sites").get<std::vector<Site>>();
    for (const auto& s : sites) require(static_cast<int>(s.size()) == d, "event sites must match the dimension");
    if (kind == "band") return ConditioningEvent::band(sites, e.at("lo").get<double>(), e.at("hi").get<double>());
    if (kind == "pin")
      return ConditioningEvent::pin(sites, e.at("values").get<std::vector<double>>(), e.at("tolerance").get<double>());
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed params.event: ") + ex.what());
  }
  throw ValidationError("params.event.kind must be none, band or pin");
}

ConditionalSampler sampler_param(const std::string& s) {
  if (s == "rejection") return ConditionalSampler::Rejection;
  if (s == "blockwise") return ConditionalSampler::Blockwise;
  if (s == "sequential") return ConditionalSampler::Sequential;
  throw ValidationError("params.sampler must be rejection, blockwise or sequential");
}

json fit_json(const LinearFit& f) { return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"n", f.n}}; }

using Job = std::function<RunOutput()>;

RunOutput make_output(const Context& ctx, json summary, json records = json::array()) {
  RunOutput out;
  out.results = {{"schema_version", kSchemaVersion},
                 {"operation", ctx.cfg.experiment},
                 {"config_hash", ctx.hash},
                 {"seed", ctx.cfg.seed},
                 {"tool_version", tool_version()},
                 {"records", std::move(records)},
                 {"summary", std::move(summary)}};
  if (ctx.model) out.results["model"] = ctx.cfg.model;
  return out;
}

// ---------------------------------------------------------------------------

Job constants_job(Context ctx, Params p) {
  const double s = p.get<double>("s", 0.5);
  const int max_order = p.get<int>("max_order", 8);
  const int radius = p.get<int>("truncation_radius", 4096);
  p.done();
  return [=] {
    const auto k = derive_constants(ctx.m(), s, max_order, radius);
    json summary = k.to_json();
    summary["band_center"] = finite_or_null(band_center(ctx.m()));
    const auto [lo, hi] = spectral_enclosure(ctx.m());
    summary["enclosure"] = {finite_or_null(lo), finite_or_null(hi)};
    return make_output(ctx, summary);
  };
}

Job concentration_job(Context ctx, Params p) {
  const int d = ctx.m().dimension();
  const Site site = site_param(p, "site", d, Site(static_cast<std::size_t>(d), 0));
  const auto eps = p.need<std::vector<double>>("eps");
  const auto n = count_param(p, "samples", 100000, 1000);
  const double a_step = p.get<double>("a_step", 0.005);
  p.done();
  require(!eps.empty(), "params.eps must not be empty");
  for (double e : eps) require(e > 0.0 && a_step <= e / 10.0, "a_step must be at most eps/10 for every eps");
  return [=] {
    auto sorted = eps;
    std::sort(sorted.begin(), sorted.end());
    const auto curve = concentration_curve(ctx.m(), site, sorted, n, a_step, ctx.cfg.seed);
    const auto& u = ctx.m().u;
    const bool uniform_pair = u.dimension() == 1 && u.size() == 2 && u.at(Site{0}) == 1.0 && u.at(Site{1}) == 1.0 &&
                              ctx.m().mu.kind_name() == "uniform" && ctx.m().mu.support() == std::make_pair(0.0, 1.0);
    json exact = json::array();
    Csv csv({"eps", "value", "stderr", "exact"});
    for (std::size_t k = 0; k < curve.eps.size(); ++k) {
      const double ex = uniform_pair ? concentration_exact_uniform_sum(curve.eps[k]) : NAN;
      exact.push_back(finite_or_null(ex));
      csv.row({curve.eps[k], curve.values[k], curve.stderrs[k], ex});
    }
    json summary{{"site", site},    {"samples", n},           {"a_step", a_step}, {"eps", curve.eps},
                 {"values", curve.values}, {"stderrs", curve.stderrs}, {"exact", exact}};
    auto out = make_output(ctx, summary);
    out.csv["concentration.csv"] = csv.str();
    return out;
  };
}

Job conditional_job(Context ctx, Params p) {
  const int d = ctx.m().dimension();
  const Site site = site_param(p, "site", d, Site(static_cast<std::size_t>(d), 0));
  const double a = p.need<double>("a");
  const double eps = p.need<double>("eps");
  const auto event = event_param(p.raw("event", json{{"kind", "none"}}), d);
  ConditionalOptions opt;
  opt.sampler = sampler_param(p.get<std::string>("sampler", "rejection"));
  opt.certify = p.get<bool>("certify", false);
  opt.certificate_delta_prime = p.get<double>("delta_prime", 0.0);
  const auto n_target = count_param(p, "n_target", 1000);
  const auto max_draws = count_param(p, "max_draws", 10'000'000);
  p.done();
  require(eps > 0.0, "params.eps must be positive");
  if (opt.certify) require(opt.certificate_delta_prime > 0.0, "certify needs params.delta_prime > 0");
  return [=] {
    const auto r = conditional_concentration_mc(ctx.m(), site, a, eps, event, n_target, max_draws, ctx.cfg.seed, opt);
    json summary{{"site", site},
                 {"a", a},
                 {"eps", eps},
                 {"estimate", r.estimate},
                 {"stderr", r.stderr_},
                 {"acceptance_rate", r.acceptance_rate},
                 {"accepted", r.accepted},
                 {"draws", r.draws},
                 {"ess", r.ess},
                 {"certified", opt.certify},
                 {"certificate_failures", r.certificate_failures},
                 {"window_misses", r.window_misses},
                 {"eta_mean", r.eta_mean},
                 {"eta_variance", r.eta_variance},
                 {"sampler", r.sampler}};
    if (opt.certify) {
      const auto rep = theta1_certificate(ctx.m().u, opt.certificate_delta_prime, opt.certificate_delta_prime,
                                          [](int) { return 1.0; });
      summary["certificate_m"] = rep.m;
      summary["certificate_c"] = rep.c;
      summary["delta_prime"] = opt.certificate_delta_prime;
      summary["target_window"] = {rep.m - rep.c * opt.certificate_delta_prime, rep.m + rep.c * opt.certificate_delta_prime};
    }
    Estimate e;
    e.value = r.estimate;
    e.stderr_ = r.stderr_;
    e.n_samples = r.accepted;
    e.master_seed = ctx.cfg.seed;
    e.metadata = {{"sampler", r.sampler}, {"acceptance_rate", r.acceptance_rate}, {"ess", r.ess}};
    return make_output(ctx, summary, json::array({ctx.record("conditional_concentration_mc", e)}));
  };
}

Job gaussian_job(Context ctx, Params p) {
  const auto us = p.get<std::vector<double>>("u_minus1", {0.5, 1.0, 2.0});
  const double sigma = p.get<double>("sigma", 1.0);
  const int l_max = p.get<int>("l_max", 6), m_max = p.get<int>("m_max", 6);
  const int trials = p.get<int>("trials", 3);
  json mc = p.raw("mc");
  p.done();
  require(sigma > 0.0, "params.sigma must be positive");
  require(l_max >= 0 && m_max >= 0 && trials >= 1, "params.l_max, m_max must be >= 0 and trials >= 1");
  struct Mc {
    int l = 5, m = 5;
    double u = 1.0;
    std::vector<double> taus;
    std::size_t n_target = 200000, max_draws = 100'000'000;
  };
  std::optional<Mc> mcp;
  if (!mc.is_null()) {
    Params q(mc);
    Mc v;
    v.l = q.get<int>("l", 5);
    v.m = q.get<int>("m", 5);
    v.u = q.get<double>("u_minus1", 1.0);
    v.taus = q.need<std::vector<double>>("taus");
    v.n_target = count_param(q, "n_target", 200000);
    v.max_draws = count_param(q, "max_draws", 100'000'000);
    q.done();
    require(v.l >= 1 && v.m >= 1, "params.mc.l and params.mc.m must be positive");
    for (double t : v.taus) require(t > 0.0, "params.mc.taus must be positive");
    mcp = v;
  }
  return [=] {
    double max_mean = 0.0, max_var = 0.0;
    std::size_t cases = 0;
    for (double u : us)
      for (int l = 0; l <= l_max; ++l)
        for (int m = 0; m <= m_max; ++m)
          for (int t = 0; t < trials; ++t) {
            rng::Stream st(ctx.cfg.seed, cases, rng::Tag::Conditional);
            std::vector<double> vp(static_cast<std::size_t>(l)), vm(static_cast<std::size_t>(m));
            for (auto& v : vp) v = 4.0 * st.uniform() - 2.0;
            for (auto& v : vm) v = 4.0 * st.uniform() - 2.0;
            const auto c = gaussian_condition_alloy(u, sigma, l, m, vp, vm);
            const auto r = gaussian_condition_alloy_reference(u, sigma, l, m, vp, vm);
            max_mean = std::max(max_mean, std::abs(c.mean - r.mean));
            max_var = std::max(max_var, std::abs(c.variance - r.variance));
            ++cases;
          }
    json ids = json::array();
    for (int l = 1; l <= 6; ++l) {
      const auto a = al_identities(l, 1.0);
      ids.push_back({{"l", l}, {"det", a.det}, {"s_from_zero", a.s_recurrence}, {"s_from_one", a.s_literal},
                     {"inv_11", a.inv_11}, {"inv_11_closed", a.inv_11_closed}});
    }
    json summary{{"cases", cases},
                 {"max_mean_difference", max_mean},
                 {"max_variance_difference", max_var},
                 {"s_index",
                  {{"identities", ids},
                   {"resolution",
                    "s_l = det(A_l A_l^T) = sum_{i=0}^{l} u^{2i}; the sum must start at i = 0. Starting at i = 1 "
                    "disagrees with the determinant for every l (for u = 1 it gives l instead of l + 1)."}}}};
    Csv csv({"tau", "variance", "closed_form", "relative_error", "ess", "accepted"});
    if (mcp) {
      const auto closed = gaussian_condition_alloy(mcp->u, sigma, mcp->l, mcp->m, std::vector<double>(mcp->l, 0.0),
                                                   std::vector<double>(mcp->m, 0.0));
      AlloyModel model{SingleSitePotential::build(1, {{Site{0}, 1.0}, {Site{-1}, mcp->u}}),
                       CouplingMeasure::gaussian(0.0, sigma * sigma), 1.0};
      std::vector<Site> sites;
      for (int k = 1; k <= mcp->l; ++k) sites.push_back({k});
      for (int k = 1; k <= mcp->m; ++k) sites.push_back({-k});
      json rows = json::array();
      for (double tau : mcp->taus) {
        const auto ev = ConditioningEvent::pin(sites, std::vector<double>(sites.size(), 0.0), tau);
        ConditionalOptions opt;
        opt.sampler = ConditionalSampler::Sequential;
        const auto r = conditional_concentration_mc(model, Site{0}, -1.0, 2.0, ev, mcp->n_target, mcp->max_draws,
                                                    ctx.cfg.seed, opt);
        const double rel = std::abs(r.eta_variance - closed.variance) / closed.variance;
        rows.push_back({{"tau", tau}, {"variance", r.eta_variance}, {"mean", r.eta_mean}, {"relative_error", rel},
                        {"ess", r.ess}, {"accepted", r.accepted}});
        csv.row({tau, r.eta_variance, closed.variance, rel, r.ess, static_cast<double>(r.accepted)});
      }
      summary["monte_carlo"] = {{"l", mcp->l}, {"m", mcp->m}, {"u_minus1", mcp->u},
                                {"closed_form_variance", closed.variance}, {"rows", rows}};
      // Pin bands bias the variance by O(tau^2): one Richardson step on the two smallest tau.
      if (rows.size() >= 2) {
        std::vector<std::pair<double, double>> tv;
        for (const auto& r : rows) tv.emplace_back(r["tau"].get<double>(), r["variance"].get<double>());
        std::sort(tv.begin(), tv.end());
        const auto [t1, v1] = tv[0];
        const auto [t2, v2] = tv[1];
        if (t2 > t1) {
          const double ex = v1 + (v1 - v2) * t1 * t1 / (t2 * t2 - t1 * t1);
          summary["monte_carlo"]["extrapolated_variance"] = ex;
          summary["monte_carlo"]["extrapolated_relative_error"] = std::abs(ex - closed.variance) / closed.variance;
        }
      }
    }
    auto out = make_output(ctx, summary);
    if (mcp) out.csv["gaussian_mc.csv"] = csv.str();
    return out;
  };
}

Job fractional_moment_job(Context ctx, Params p) {
  const int d = ctx.m().dimension();
  const int L = p.get<int>("L", 8);
  require(L >= 0, "params.L must be nonnegative");
  const Site x = site_param(p, "x", d, Site(static_cast<std::size_t>(d), 0));
  const Site y = site_param(p, "y", d, x);
  const double s = p.get<double>("s", 0.5);
  const json energy = p.raw("energy", "band_center");
  const double eta = p.get<double>("eta", 0.01);
  const auto n = count_param(p, "samples", 10000, 2);
  const auto lambdas = lambdas_param(p, ctx.m());
  p.done();
  require(s > 0.0 && s < 1.0, "params.s must lie in (0,1)");
  resolve_energy(energy, ctx.m(), ctx.cfg.seed);
  return [=] {
    const auto V = FiniteVolume::box(d, L);
    json rows = json::array(), records = json::array();
    Csv csv({"lambda", "energy", "value", "stderr", "bound"});
    for (double lambda : lambdas) {
      const auto model = with_lambda(ctx.m(), lambda);
      const double E = resolve_energy(energy, model, ctx.cfg.seed);
      const auto est = fractional_moment(model, V, cplx(E, eta), x, y, s, n, ctx.cfg.seed);
      const json b = est.metadata.value("bound", json(nullptr));
      const double bound = b.is_number() ? b.get<double>() : NAN;
      rows.push_back({{"lambda", lambda},     {"energy", E},          {"value", est.value},
                      {"stderr", est.stderr_}, {"bound", b},           {"n", est.n_samples},
                      {"redraws", est.metadata["redraws"]},
                      {"bound_coefficient", est.metadata.value("bound_coefficient", json(nullptr))}});
      records.push_back(ctx.record("fractional_moment", est, bound));
      csv.row({lambda, E, est.value, est.stderr_, bound});
    }
    auto out = make_output(ctx, {{"L", L}, {"x", x}, {"y", y}, {"s", s}, {"eta", eta}, {"rows", rows}}, records);
    out.csv["fractional_moment.csv"] = csv.str();
    return out;
  };
}

Job decay_job(Context ctx, Params p) {
  const int d = ctx.m().dimension();
  const int L = p.get<int>("L", 12);
  const Site x = site_param(p, "x", d, Site(static_cast<std::size_t>(d), 0));
  std::vector<Site> offsets;
  if (p.has("offsets")) {
    offsets = p.need<std::vector<Site>>("offsets");
  } else {
    const int max_offset = p.get<int>("max_offset", L);
    require(max_offset >= 1, "params.max_offset must be positive");
    for (int k = 0; k <= max_offset; ++k) {
      Site o(static_cast<std::size_t>(d), 0);
      o[0] = k;
      offsets.push_back(o);
    }
  }
  const double s = p.get<double>("s", 0.1);
  const json energy = p.raw("energy", "band_center");
  const double eta = p.get<double>("eta", 0.01);
  const auto n = count_param(p, "samples", 2000, 2);
  p.done();
  require(L >= 0, "params.L must be nonnegative");
  const auto V = FiniteVolume::box(d, L);
  for (const auto& o : offsets) {
    require(static_cast<int>(o.size()) == d, "offsets must match the dimension");
    require(V.contains(x + o), "offset " + to_string(o) + " leaves the volume");
  }
  require(V.contains(x), "params.x is outside the volume");
  resolve_energy(energy, ctx.m(), ctx.cfg.seed);
  return [=] {
    const double E = resolve_energy(energy, ctx.m(), ctx.cfg.seed);
    const auto prof = fm_decay_profile(ctx.m(), V, cplx(E, eta), x, offsets, s, n, ctx.cfg.seed);
    json points = json::array(), records = json::array();
    Csv csv({"distance", "value", "stderr", "log_value", "used_in_fit"});
    for (const auto& pt : prof.points) {
      points.push_back({{"y", pt.y}, {"distance", pt.distance}, {"value", pt.estimate.value},
                        {"stderr", pt.estimate.stderr_}, {"used_in_fit", pt.used_in_fit}});
      records.push_back(ctx.record("fractional_moment", pt.estimate));
      csv.row({static_cast<double>(pt.distance), pt.estimate.value, pt.estimate.stderr_,
               pt.estimate.value > 0 ? std::log(pt.estimate.value) : NAN, pt.used_in_fit ? 1.0 : 0.0});
    }
    json summary{{"L", L},
                 {"x", x},
                 {"s", s},
                 {"energy", E},
                 {"eta", eta},
                 {"points", points},
                 {"fit", fit_json(prof.fit)},
                 {"rate", prof.rate},
                 {"prefactor", prof.prefactor},
                 {"r2", prof.fit.r2},
                 {"dropped_distances", prof.dropped_distances}};
    auto out = make_output(ctx, summary, records);
    out.csv["decay_profile.csv"] = csv.str();
    return out;
  };
}

Job wegner_job(Context ctx, Params p) {
  const int L = p.get<int>("L", 16);
  const json center = p.raw("center", "band_center");
  const auto widths = p.need<std::vector<double>>("widths");
  const auto n = count_param(p, "samples", 2000, 2);
  const bool averaging = p.get<bool>("spectral_averaging", true);
  p.done();
  require(L >= 0, "params.L must be nonnegative");
  require(!widths.empty(), "params.widths must not be empty");
  for (double w : widths) require(w > 0.0, "params.widths must be positive");
  resolve_energy(center, ctx.m(), ctx.cfg.seed);
  return [=] {
    const double c = resolve_energy(center, ctx.m(), ctx.cfg.seed);
    json rows = json::array(), records = json::array();
    Csv csv({"width", "count", "count_stderr", "averaged", "averaged_stderr", "per_width", "per_width_stderr"});
    for (double w : widths) {
      const auto r = wegner_count(ctx.m(), L, c - w / 2, c + w / 2, n, ctx.cfg.seed, averaging);
      const Estimate& best = r.averaged ? *r.averaged : r.crude;
      rows.push_back({{"width", w},
                      {"lo", c - w / 2},
                      {"hi", c + w / 2},
                      {"count", r.crude.value},
                      {"count_stderr", r.crude.stderr_},
                      {"averaged", r.averaged ? json(r.averaged->value) : json(nullptr)},
                      {"averaged_stderr", r.averaged ? json(r.averaged->stderr_) : json(nullptr)},
                      {"per_width", best.value / w},
                      {"per_width_stderr", best.stderr_ / w},
                      {"reference_product", r.reference_product},
                      {"implied_cw", r.implied_cw},
                      {"N", r.N}});
      auto rec = ctx.record("wegner_count", r.crude);
      rec["metadata"]["reference_product"] = r.reference_product;
      rec["metadata"]["implied_cw"] = r.implied_cw;
      records.push_back(rec);
      if (r.averaged) records.push_back(ctx.record("wegner_count_averaged", *r.averaged));
      csv.row({w, r.crude.value, r.crude.stderr_, r.averaged ? r.averaged->value : NAN,
               r.averaged ? r.averaged->stderr_ : NAN, best.value / w, best.stderr_ / w});
    }
    auto out = make_output(ctx, {{"L", L}, {"center", c}, {"samples", n}, {"rows", rows}}, records);
    out.csv["wegner.csv"] = csv.str();
    return out;
  };
}

Job minami_job(Context ctx, Params p) {
  const int d = ctx.m().dimension();
  const int L = p.get<int>("L", 10);
  const Site x = site_param(p, "x", d, Site(static_cast<std::size_t>(d), 0));
  Site ydef = x;
  ydef[0] += 1;
  const Site y = site_param(p, "y", d, ydef);
  const json energy = p.raw("energy", "band_center");
  const double eta = p.get<double>("eta", 0.05);
  const auto n = count_param(p, "samples", 10000, 2);
  const auto lambdas = lambdas_param(p, ctx.m());
  const bool rb = p.get<bool>("rao_blackwell", true);
  p.done();
  require(eta > 0.0, "params.eta must be positive");
  for (double l : lambdas) require(l > 0.0, "params.lambdas must be positive");
  resolve_energy(energy, ctx.m(), ctx.cfg.seed);
  return [=] {
    const auto V = FiniteVolume::box(d, L);
    json rows = json::array(), records = json::array();
    Csv csv({"lambda", "crude", "crude_stderr", "averaged", "averaged_stderr", "bound"});
    std::vector<double> lx, ly;
    for (double lambda : lambdas) {
      const auto model = with_lambda(ctx.m(), lambda);
      const double E = resolve_energy(energy, model, ctx.cfg.seed);
      const auto r = minami_determinant(model, V, cplx(E, eta), x, y, n, ctx.cfg.seed, rb);
      const Estimate& best = r.averaged ? *r.averaged : r.crude;
      rows.push_back({{"lambda", lambda},
                      {"energy", E},
                      {"crude", r.crude.value},
                      {"crude_stderr", r.crude.stderr_},
                      {"averaged", r.averaged ? json(r.averaged->value) : json(nullptr)},
                      {"averaged_stderr", r.averaged ? json(r.averaged->stderr_) : json(nullptr)},
                      {"value", best.value},
                      {"stderr", best.stderr_},
                      {"bound", finite_or_null(r.bound)},
                      {"c_min", finite_or_null(r.c_min)},
                      {"min_determinant", r.min_determinant},
                      {"n", n}});
      records.push_back(ctx.record("minami_determinant", r.crude, r.bound));
      if (r.averaged) records.push_back(ctx.record("minami_determinant_averaged", *r.averaged, r.bound));
      csv.row({lambda, r.crude.value, r.crude.stderr_, r.averaged ? r.averaged->value : NAN,
               r.averaged ? r.averaged->stderr_ : NAN, r.bound});
      if (best.value > 0) {
        lx.push_back(std::log(lambda));
        ly.push_back(std::log(best.value));
      }
    }
    json summary{{"L", L}, {"x", x}, {"y", y}, {"eta", eta}, {"rows", rows}, {"scaling", nullptr}};
    if (lx.size() >= 2) summary["scaling"] = fit_json(least_squares(lx, ly));
    auto out = make_output(ctx, summary, records);
    out.csv["minami.csv"] = csv.str();
    return out;
  };
}

Job two_level_job(Context ctx, Params p) {
  const int L = p.get<int>("L", 8);
  const json center = p.raw("center", "band_center");
  const double width = p.need<double>("width");
  const auto n = count_param(p, "samples", 10000, 2);
  p.done();
  require(width > 0.0, "params.width must be positive");
  resolve_energy(center, ctx.m(), ctx.cfg.seed);
  return [=] {
    const double c = resolve_energy(center, ctx.m(), ctx.cfg.seed);
    const auto V = FiniteVolume::box(ctx.m().dimension(), L);
    const auto r = two_level_probability(ctx.m(), V, c - width / 2, c + width / 2, n, ctx.cfg.seed);
    json summary{{"L", L},
                 {"lo", c - width / 2},
                 {"hi", c + width / 2},
                 {"p_two", r.p_two.value},
                 {"p_two_stderr", r.p_two.stderr_},
                 {"factorial_half", r.factorial_half.value},
                 {"factorial_half_stderr", r.factorial_half.stderr_},
                 {"bound", finite_or_null(r.bound)},
                 {"counting_inequality", r.counting_inequality},
                 {"n", n}};
    return make_output(ctx, summary,
                       json::array({ctx.record("two_level_probability", r.p_two, r.bound),
                                    ctx.record("factorial_moment_half", r.factorial_half, r.bound)}));
  };
}

Csv ids_csv(const IdsTable& t) {
  Csv csv({"energy", "ids"});
  for (std::size_t k = 0; k < t.energies.size(); ++k) csv.row({t.energies[k], t.values[k]});
  return csv;
}

Job ids_job(Context ctx, Params p) {
  const int L = p.get<int>("L", 100);
  const auto n = count_param(p, "samples", 100);
  const auto energies = energy_grid(p, ctx.m());
  p.done();
  return [=] {
    const auto t = ids_estimate(ctx.m(), L, energies, n, ctx.cfg.seed);
    json summary{{"L", L}, {"realizations", n}, {"volume_size", t.volume_size}, {"energies", t.energies},
                 {"values", t.values}};
    auto out = make_output(ctx, summary);
    out.csv["ids.csv"] = ids_csv(t).str();
    return out;
  };
}

Job positivity_job(Context ctx, Params p) {
  const int L = p.get<int>("L", 200);
  const auto n = count_param(p, "samples", 200);
  const auto energies = energy_grid(p, ctx.m());
  const json e0 = p.raw("E0", "band_center");
  const double kappa = p.get<double>("kappa", 0.0);
  const auto windows = p.get<std::vector<std::pair<double, double>>>("windows", {{0.0, 1.0}, {-1.0, 1.0}});
  const auto eps = p.need<std::vector<double>>("eps");
  p.done();
  resolve_energy(e0, ctx.m(), ctx.cfg.seed);
  return [=] {
    const double E0 = resolve_energy(e0, ctx.m(), ctx.cfg.seed);
    const auto t = ids_estimate(ctx.m(), L, energies, n, ctx.cfg.seed);
    const auto probe = ids_positivity_probe(t, E0, kappa, windows, eps);
    json rows = json::array(), slopes = json::array();
    Csv csv({"a", "b", "eps", "increment", "best_c", "fails"});
    for (const auto& r : probe.rows) {
      rows.push_back({{"a", r.a}, {"b", r.b}, {"eps", r.eps}, {"increment", r.increment}, {"best_c", r.best_c},
                      {"fails", r.fails}});
      csv.row({r.a, r.b, r.eps, r.increment, r.best_c, r.fails ? 1.0 : 0.0});
    }
    for (const auto& [w, f] : probe.slopes) slopes.push_back({{"a", w.first}, {"b", w.second}, {"fit", fit_json(f)}});
    auto out = make_output(ctx, {{"E0", E0}, {"kappa", kappa}, {"rows", rows}, {"slopes", slopes},
                                 {"passed", probe.passed}});
    out.csv["positivity.csv"] = csv.str();
    out.csv["ids.csv"] = ids_csv(t).str();
    return out;
  };
}

json poisson_json(const PoissonReport& r) {
  return {{"realizations", r.realizations},
          {"window", r.window},
          {"count_mean", r.count_mean},
          {"count_variance", r.count_variance},
          {"variance_to_mean", r.variance_to_mean},
          {"ks_statistic", r.gaps.statistic},
          {"ks_p_value", r.gaps.p_value},
          {"ks_critical_1pct", r.gaps.critical_1pct},
          {"gaps", r.gaps.n},
          {"chi_square", r.counts.statistic},
          {"chi_square_dof", r.counts.dof},
          {"chi_square_p_value", finite_or_null(r.counts.p_value)},
          {"empty_window_fraction", r.empty_window_fraction},
          {"warnings", r.warnings},
          {"ks_pass", r.ks_pass},
          {"variance_pass", r.variance_pass}};
}

Job poisson_job(Context ctx, Params p) {
  const int L = p.get<int>("L", 250);
  const int ids_L = p.get<int>("ids_L", 4 * L);
  const auto ids_n = count_param(p, "ids_realizations", 1000);
  const auto n = count_param(p, "realizations", 500, 200);
  const json e0 = p.raw("E0", "band_center");
  const double W = p.get<double>("W", 5.0);
  const double bin = p.get<double>("bin_width", 0.25);
  const bool control = p.get<bool>("control", true);
  const double half_width = p.get<double>("ids_half_width", 0.0);
  require(half_width >= 0.0, "params.ids_half_width must be nonnegative");
  require(half_width == 0.0 || (!p.has("energy_min") && !p.has("energy_max")),
          "params.ids_half_width excludes energy_min and energy_max");
  double step = 0.0;
  const auto energies = energy_grid(p, ctx.m(), &step);
  p.done();
  require(ctx.m().dimension() >= 1 && L >= 1, "params.L must be positive");
  require(ids_L >= 4 * L, "params.ids_L must be at least 4 L");
  require(W >= 0.5 && bin > 0.0, "params.W must be >= 1/2 and bin_width > 0");
  resolve_energy(e0, ctx.m(), ctx.cfg.seed);
  return [=] {
    const double E0 = resolve_energy(e0, ctx.m(), ctx.cfg.seed);
    // A local table around E0 suffices: eigenvalues outside it rescale far beyond the window.
    const auto grid_used = half_width > 0.0 ? grid(E0 - half_width, E0 + half_width, step) : energies;
    const auto ids = ids_estimate(ctx.m(), ids_L, grid_used, ids_n, rng::mix(ctx.cfg.seed, 1));
    const auto V = FiniteVolume::box(ctx.m().dimension(), L);
    const OperatorSampler ops(ctx.m(), V);
    const std::uint64_t stat_seed = rng::mix(ctx.cfg.seed, 2);
    const double lo = ids.energies.front(), hi = ids.energies.back();
    struct Draw {
      RescaledSpectrum xi;
      std::size_t dropped = 0;
    };
    const auto draws = par::map(n, [&](std::size_t i) {
      const auto H = ops.sample(stat_seed, i);
      Draw d;
      std::vector<double> ev;
      if (V.is_chain() || V.size() <= kDenseLimit) {
        ev = eigenvalues(H);
        const auto keep = std::remove_if(ev.begin(), ev.end(), [&](double e) { return e < lo || e > hi; });
        ev.erase(keep, ev.end());
      } else {
        ev = eigenvalues_in(H, lo, std::nextafter(hi, INFINITY));
      }
      d.dropped = V.size() - ev.size();
      d.xi = rescale_eigenvalues(ev, ids, E0, V.size());
      return d;
    });
    std::vector<RescaledSpectrum> spectra;
    std::size_t dropped = 0;
    for (const auto& d : draws) {
      spectra.push_back(d.xi);
      dropped += d.dropped;
    }
    const auto rep = poisson_statistics(spectra, W, bin);
    json summary = poisson_json(rep);
    summary["L"] = L;
    summary["ids_L"] = ids_L;
    summary["ids_realizations"] = ids_n;
    summary["E0"] = E0;
    summary["dropped_outside_ids_grid"] = dropped;
    summary["ids_range"] = {ids.energies.front(), ids.energies.back()};
    summary["gap_bin_edges"] = rep.gap_bin_edges;
    summary["gap_histogram"] = rep.gap_histogram;
    summary["gap_reference"] = rep.gap_reference;
    Csv gaps({"bin_left", "bin_right", "density", "exp_reference"});
    for (std::size_t k = 0; k < rep.gap_histogram.size(); ++k)
      gaps.row({rep.gap_bin_edges[k], rep.gap_bin_edges[k + 1], rep.gap_histogram[k], rep.gap_reference[k]});
    Csv counts({"count", "observed", "expected"});
    for (std::size_t k = 0; k < rep.counts.observed.size(); ++k)
      counts.row({static_cast<double>(k), rep.counts.observed[k], rep.counts.expected[k]});
    if (control) {
      const auto rigid = poisson_statistics(rigid_lattice_spectra(n, W), W, bin);
      json c = poisson_json(rigid);
      c["rejected"] = !(rigid.ks_pass && rigid.variance_pass);
      summary["control"] = c;
    }
    auto out = make_output(ctx, summary);
    out.csv["gap_histogram.csv"] = gaps.str();
    out.csv["count_histogram.csv"] = counts.str();
    out.csv["ids.csv"] = ids_csv(ids).str();
    return out;
  };
}

Job fvc_job(Context ctx, Params p) {
  const int L = p.get<int>("L", 10);
  const json energy = p.raw("energy", "draw");
  const double theta = p.need<double>("theta_exp");
  const auto n = count_param(p, "samples", 1000, 2);
  p.done();
  require(L >= 0, "params.L must be nonnegative");
  require(theta > 3.0 * ctx.m().dimension() - 1.0, "params.theta_exp must exceed 3d - 1");
  resolve_energy(energy, ctx.m(), ctx.cfg.seed);
  return [=] {
    const double E = resolve_energy(energy, ctx.m(), ctx.cfg.seed);
    const auto est = fvc_probability(ctx.m(), L, E, theta, n, ctx.cfg.seed);
    return make_output(ctx,
                       {{"L", L}, {"energy", E}, {"theta_exp", theta}, {"value", est.value},
                        {"stderr", est.stderr_}, {"redraws", est.metadata["redraws"]}},
                       json::array({ctx.record("fvc_probability", est)}));
  };
}

Job inverse_moment_job(Context ctx, Params p) {
  const double s = p.get<double>("s", 0.5);
  const auto bs = p.need<std::vector<double>>("b");
  const double alpha = p.get<double>("alpha", 1.0);
  const double c1 = p.need<double>("c1");
  p.done();
  const auto& mu = ctx.m().mu;
  const auto holder = holder_parameters(mu, alpha, c1, {1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0});
  require(holder.passed, "(alpha, C1) = (" + fmt(alpha) + ", " + fmt(c1) + ") fails the Holder check; ratio " +
                             fmt(holder.max_ratio) + " at t = " + fmt(holder.witness_t) +
                             ", eps = " + fmt(holder.witness_eps));
  require(s > 0.0 && s < alpha, "params.s must lie in (0, alpha)");
  return [=] {
    json rows = json::array();
    Csv csv({"b", "integral", "bound", "margin", "quadrature_error"});
    for (double b : bs) {
      const auto r = inverse_moment_check(mu, s, b, alpha, c1);
      rows.push_back({{"b", b}, {"integral", r.integral}, {"bound", r.bound}, {"margin", r.margin},
                      {"quadrature_error", r.error}});
      csv.row({b, r.integral, r.bound, r.margin, r.error});
    }
    auto out = make_output(ctx, {{"s", s}, {"alpha", alpha}, {"c1", c1}, {"holder_max_ratio", holder.max_ratio},
                                 {"rows", rows}});
    out.csv["inverse_moment.csv"] = csv.str();
    return out;
  };
}

Job reverse_holder_job(Context ctx, Params p) {
  const double s = p.need<double>("s");
  const int depth = p.get<int>("depth", 15);
  const auto q1 = p.get<std::vector<double>>("q1", {});
  const auto q2 = p.get<std::vector<double>>("q2", {});
  const auto pairs = p.get<std::size_t>("pairs", 0);
  const int degree = p.get<int>("degree", 2);
  p.done();
  require(s > 0.0, "params.s must be positive");
  require(pairs > 0 || (!q1.empty() && !q2.empty()), "give params.q1 and params.q2, or params.pairs for a batch");
  require(degree >= 0, "params.degree must be nonnegative");
  return [=] {
    const auto& mu = ctx.m().mu;
    json summary{{"s", s}, {"depth", depth}};
    if (!q1.empty()) summary["single"] = {{"q1", q1}, {"q2", q2}, {"ratio", reverse_holder_ratio(q1, q2, mu, s, depth)}};
    Csv csv({"index", "ratio"});
    if (pairs > 0) {
      struct Row {
        double ratio = NAN;
        std::string error;
        std::vector<double> a, b;
      };
      const auto rows = par::map(pairs, [&](std::size_t i) {
        rng::Stream st(ctx.cfg.seed, i, rng::Tag::Polynomial);
        Row r;
        for (int k = 0; k <= degree; ++k) r.a.push_back(2.0 * st.uniform() - 1.0);
        for (int k = 0; k <= degree; ++k) r.b.push_back(2.0 * st.uniform() - 1.0);
        try {
          r.ratio = reverse_holder_ratio(r.a, r.b, mu, s, depth);
        } catch (const NumericalError& e) {
          r.error = e.what();
        }
        return r;
      });
      double mx = 0.0;
      std::size_t failures = 0, arg = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        csv.row({static_cast<double>(i), rows[i].ratio});
        if (!rows[i].error.empty()) {
          ++failures;
        } else if (rows[i].ratio > mx) {
          mx = rows[i].ratio;
          arg = i;
        }
      }
      summary["batch"] = {{"pairs", pairs},       {"degree", degree},           {"max_ratio", mx},
                          {"failures", failures}, {"witness_q1", rows[arg].a}, {"witness_q2", rows[arg].b}};
    }
    auto out = make_output(ctx, summary);
    if (pairs > 0) out.csv["reverse_holder.csv"] = csv.str();
    return out;
  };
}

Job recursion_job(Context ctx, Params p) {
  const int d = ctx.m().dimension();
  const int L = p.get<int>("L", 8);
  const Site x = site_param(p, "x", d, Site(static_cast<std::size_t>(d), 0));
  Site ydef = x;
  ydef[0] += 2;
  const Site y = site_param(p, "y", d, ydef);
  const json energy = p.raw("energy", "draw");
  const double s = p.get<double>("s", 0.2);
  const auto lambdas = lambdas_param(p, ctx.m());
  const auto n = count_param(p, "samples", 2000, 2);
  p.done();
  resolve_energy(energy, ctx.m(), ctx.cfg.seed);
  return [=] {
    const double E = resolve_energy(energy, ctx.m(), ctx.cfg.seed);
    const auto V = FiniteVolume::box(d, L);
    const auto r = recursion_probe(ctx.m(), V, E, x, y, s, lambdas, n, ctx.cfg.seed);
    json rows = json::array(), records = json::array();
    Csv csv({"lambda", "lhs", "lhs_stderr", "rhs_sum", "rhs_stderr", "implied_c", "skipped"});
    for (const auto& row : r.rows) {
      rows.push_back({{"lambda", row.lambda},
                      {"lhs", row.lhs.value},
                      {"lhs_stderr", row.lhs.stderr_},
                      {"rhs_sum", row.rhs_sum.value},
                      {"rhs_stderr", row.rhs_sum.stderr_},
                      {"implied_c", row.implied_c},
                      {"skipped", row.skipped},
                      {"max_residual", row.max_residual}});
      records.push_back(ctx.record("recursion_lhs", row.lhs));
      records.push_back(ctx.record("recursion_rhs_sum", row.rhs_sum));
      csv.row({row.lambda, row.lhs.value, row.lhs.stderr_, row.rhs_sum.value, row.rhs_sum.stderr_, row.implied_c,
               row.skipped ? 1.0 : 0.0});
    }
    auto out = make_output(ctx,
                           {{"L", L}, {"x", x}, {"y", y}, {"energy", E}, {"s", s}, {"rows", rows}, {"max_c", r.max_c},
                            {"min_c", r.min_c}, {"redraws", r.redraws}},
                           records);
    out.csv["recursion.csv"] = csv.str();
    return out;
  };
}

Job identity_job(Context ctx, Params p) {
  const int L = p.get<int>("L", 8);
  const auto n = count_param(p, "draws", 10000);
  p.done();
  require(L >= 1, "params.L must be at least 1 so that x != y exists");
  return [=] {
    const auto V = FiniteVolume::box(ctx.m().dimension(), L);
    const OperatorSampler ops(ctx.m(), V);
    const auto [elo, ehi] = finite_enclosure(ctx.m());
    const auto& pts = V.points();
    const auto res = par::map(n, [&](std::size_t i) {
      for (int t = 0;; ++t) {
        const std::uint64_t stream = static_cast<std::uint64_t>(i) + (static_cast<std::uint64_t>(t) << 40);
        try {
          const auto H = ops.sample(ctx.cfg.seed, stream);
          rng::Stream st(ctx.cfg.seed, stream, rng::Tag::Energy);
          const double E = elo + (ehi - elo) * st.uniform();
          const auto a = static_cast<std::size_t>(st.uniform() * static_cast<double>(pts.size()));
          auto b = static_cast<std::size_t>(st.uniform() * static_cast<double>(pts.size() - 1));
          if (b >= a) ++b;
          require_off_spectrum(H, E);
          return std::make_pair(resolvent_identity_residual(H, E, pts[a], pts[b]), t);
        } catch (const NumericalError&) {
          if (t >= 15) throw;
        }
      }
    });
    double mx = 0.0, mean = 0.0;
    int redraws = 0;
    for (const auto& [r, t] : res) {
      mx = std::max(mx, r);
      mean += r;
      redraws += t;
    }
    mean /= static_cast<double>(n);
    return make_output(ctx, {{"L", L}, {"draws", n}, {"max_residual", mx}, {"mean_residual", mean},
                             {"redraws", redraws}});
  };
}

}  // namespace

std::function<RunOutput()> prepare(const ExperimentConfig& config) {
  Context ctx;
  ctx.cfg = config;
  ctx.hash = config.hash();
  const bool needs_model = config.experiment != "gaussian_conditioning";
  if (needs_model) {
    require(!config.model.empty(), "config.model is required for " + config.experiment);
    ctx.model = AlloyModel::from_json(config.model);
  } else if (!config.model.empty()) {
    ctx.model = AlloyModel::from_json(config.model);
  }
  Params p(config.params);
  const auto& k = config.experiment;
  try {
    if (k == "constants") return constants_job(ctx, p);
    if (k == "concentration") return concentration_job(ctx, p);
    if (k == "conditional_concentration") return conditional_job(ctx, p);
    if (k == "gaussian_conditioning") return gaussian_job(ctx, p);
    if (k == "fractional_moment") return fractional_moment_job(ctx, p);
    if (k == "fm_decay_profile") return decay_job(ctx, p);
    if (k == "wegner_count") return wegner_job(ctx, p);
    if (k == "minami_determinant") return minami_job(ctx, p);
    if (k == "two_level_probability") return two_level_job(ctx, p);
    if (k == "ids") return ids_job(ctx, p);
    if (k == "ids_positivity") return positivity_job(ctx, p);
    if (k == "poisson_statistics") return poisson_job(ctx, p);
    if (k == "fvc_probability") return fvc_job(ctx, p);
    if (k == "inverse_moment") return inverse_moment_job(ctx, p);
    if (k == "reverse_holder") return reverse_holder_job(ctx, p);
    if (k == "recursion_probe") return recursion_job(ctx, p);
    if (k == "resolvent_identity") return identity_job(ctx, p);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed params: ") + e.what());
  }
  throw ValidationError("unknown experiment kind: " + k);
}

RunOutput execute(const ExperimentConfig& config) {
  auto job = prepare(config);
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out = job();
  out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (config.criterion) out.acceptance = evaluate_criterion(*config.criterion, out.results, out.runtime_seconds);
  return out;
}

}  // namespace alloy::exp
