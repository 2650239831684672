#include "alloy/constants.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <mutex>

#include <fftw3.h>

#include "alloy/error.hpp"

namespace alloy {

namespace {

std::mutex fftw_planner_mutex;

double falling_factorial(double x, int r) {
  double p = 1.0;
  for (int i = 0; i < r; ++i) p *= x - i;
  return p;
}

// Visits every multi-index I in N^d with |I|_1 = n.
void for_each_multi_index(int d, int n, const std::function<bool(const std::vector<int>&)>& visit) {
  std::vector<int> I(static_cast<std::size_t>(d), 0);
  std::function<bool(int, int)> rec = [&](int pos, int left) {
    if (pos == d - 1) {
      I[pos] = left;
      return visit(I);
    }
    for (int v = left; v >= 0; --v) {
      I[pos] = v;
      if (!rec(pos + 1, left - v)) return false;
    }
    return true;
  };
  rec(0, n);
}

int next_pow2(long n) {
  int m = 1;
  while (m < n) m *= 2;
  return m;
}

// Samples u^(2 pi j / M) on the M^d grid in row-major order.
std::vector<std::complex<double>> symbol_grid(const SingleSitePotential& u, int M) {
  const int d = u.dimension();
  long total = 1;
  for (int i = 0; i < d; ++i) total *= M;
  std::vector<std::complex<double>> out(static_cast<std::size_t>(total));
  // Per-dimension phase tables e^{i k_c theta_j}.
  std::vector<std::vector<std::complex<double>>> phase(u.size());
  for (std::size_t e = 0; e < u.size(); ++e) {
    phase[e].resize(static_cast<std::size_t>(d) * M);
    for (int c = 0; c < d; ++c)
      for (int j = 0; j < M; ++j) {
        const long kj = (static_cast<long>(u.entries()[e].site[c]) * j) % M;
        phase[e][static_cast<std::size_t>(c) * M + j] = std::polar(1.0, 2.0 * M_PI * static_cast<double>(kj) / M);
      }
  }
  std::vector<int> j(static_cast<std::size_t>(d), 0);
  for (long n = 0; n < total; ++n) {
    std::complex<double> s = 0.0;
    for (std::size_t e = 0; e < u.size(); ++e) {
      std::complex<double> p = u.entries()[e].value;
      for (int c = 0; c < d; ++c) p *= phase[e][static_cast<std::size_t>(c) * M + j[c]];
      s += p;
    }
    out[static_cast<std::size_t>(n)] = s;
    for (int c = d - 1; c >= 0; --c) {
      if (++j[c] < M) break;
      j[c] = 0;
    }
  }
  return out;
}

double inverse_kernel_l1(const SingleSitePotential& u, int M, double& min_symbol) {
  auto g = symbol_grid(u, M);
  min_symbol = std::numeric_limits<double>::infinity();
  for (auto& v : g) {
    min_symbol = std::min(min_symbol, std::abs(v));
    v = 1.0 / v;
  }
  if (!(min_symbol > 1e-10 * u.l1_norm()))
    throw NumericalError("Wiener condition violated: Fourier symbol of u vanishes on the torus (min |u^| = " +
                         std::to_string(min_symbol) + ")");
  const int d = u.dimension();
  std::vector<int> dims(static_cast<std::size_t>(d), M);
  auto* buf = reinterpret_cast<fftw_complex*>(g.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex);
    plan = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex);
    fftw_destroy_plan(plan);
  }
  double norm = 0.0;
  for (const auto& v : g) norm += std::abs(v);
  return norm / static_cast<double>(g.size());
}

}  // namespace

double AprioriConstants::bound(double lambda) const {
  require(lambda > 0, "lambda must be positive");
  return bound_coefficient / std::pow(lambda, s);
}

double apriori_coefficient(double u_bar, double s, double rho_d1, double C) {
  return 8.0 / std::pow(u_bar, s) * std::pow(s, -s) / (1.0 - s) * std::pow(rho_d1, s) * std::pow(C, s);
}

AprioriConstants apriori_constants(const SingleSitePotential& u, double s, const DensityNorms& norms, Metric metric) {
  require(s > 0.0 && s < 1.0, "s must lie in (0,1)");
  require(u.u_bar() > 0.0, "a-priori bound needs u_bar > 0");
  require(std::isfinite(norms.d1), "a-priori bound needs a density with finite ||rho'||_1");
  const int diam = u.diameter(metric);
  require(diam > 0, "constant c undefined for Anderson case (diam Theta = 0)");
  AprioriConstants k;
  k.s = s;
  k.c = std::log1p(u.u_bar() / (2.0 * u.l1_norm())) / diam;
  k.C = std::pow((std::exp(k.c) + 1.0) / std::expm1(k.c), u.dimension());
  k.bound_coefficient = apriori_coefficient(u.u_bar(), s, norms.d1, k.C);
  return k;
}

WegnerOrder wegner_order(const SingleSitePotential& u, int max_order) {
  require(max_order >= 0, "max_order must be nonnegative");
  const int d = u.dimension();
  for (int n = 0; n <= max_order; ++n) {
    WegnerOrder found;
    bool hit = false;
    for_each_multi_index(d, n, [&](const std::vector<int>& I) {
      double value = 0.0, scale = 0.0;
      for (const auto& e : u.entries()) {
        double term = e.value;
        for (int c = 0; c < d; ++c) term *= falling_factorial(-e.site[c], I[c]);
        value += term;
        scale += std::abs(term);
      }
      if (std::abs(value) > 1e-12 * scale) {
        found = {n, I, value};
        hit = true;
        return false;
      }
      return true;
    });
    if (hit) return found;
  }
  throw NumericalError("wegner order not found <= max_order = " + std::to_string(max_order));
}

double symbol_min_modulus(const SingleSitePotential& u, int grid) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& v : symbol_grid(u, grid)) m = std::min(m, std::abs(v));
  return m;
}

CuNorm cu_norm(const SingleSitePotential& u, int truncation_radius) {
  require(truncation_radius >= 1, "truncation_radius must be positive");
  const int d = u.dimension();
  int extent = 0;
  for (const auto& e : u.entries())
    for (int c : e.site) extent = std::max(extent, std::abs(c));
  int M = std::max(16, next_pow2(2L * extent + 1));
  const int M_max = std::max(2 * M, next_pow2(2L * truncation_radius + 1));
  const long budget = 1L << 24;

  CuNorm out;
  double prev = inverse_kernel_l1(u, M, out.min_symbol);
  while (true) {
    const int next = 2 * M;
    long total = 1;
    for (int i = 0; i < d; ++i) total *= next;
    if (next > M_max || total > budget)
      throw NumericalError("C_u did not converge up to grid " + std::to_string(M) +
                           "; last iterates " + std::to_string(prev) + ", " + std::to_string(out.value));
    double ms = 0.0;
    const double cur = inverse_kernel_l1(u, next, ms);
    out.min_symbol = std::min(out.min_symbol, ms);
    out.previous = prev;
    out.value = cur;
    out.grid = next;
    M = next;
    if (std::abs(cur - prev) <= 1e-6 * std::abs(cur)) return out;
    prev = cur;
  }
}

double c_min(double cu, const DensityNorms& norms) {
  return cu * cu / 4.0 * std::max(norms.d1 * norms.d1, norms.d2);
}

DensityNorms density_norms(const CouplingMeasure& mu) {
  require(mu.has_density(), "no density: " + mu.kind_name() + " measure has atoms");
  return mu.norms();
}

nlohmann::json DerivedConstants::to_json() const {
  auto opt = [](const auto& v) -> nlohmann::json {
    if (v) return *v;
    return nullptr;
  };
  nlohmann::json j;
  j["u_bar"] = u_bar;
  j["c"] = opt(c);
  j["C"] = opt(C);
  j["apriori_coefficient"] = opt(apriori_coefficient);
  j["N"] = opt(N);
  j["C_u"] = opt(C_u);
  j["C_Min"] = opt(C_Min);
  j["alpha"] = opt(alpha);
  j["C1"] = opt(C1);
  if (rho_norms) {
    auto num = [](double v) -> nlohmann::json {
      if (std::isfinite(v)) return v;
      return "inf";
    };
    j["rho_norms"] = {{"d1", num(rho_norms->d1)}, {"d2", num(rho_norms->d2)},
                      {"var", num(rho_norms->var)}, {"error", rho_norms->error}};
  } else {
    j["rho_norms"] = nullptr;
  }
  j["notes"] = notes;
  return j;
}

DerivedConstants derive_constants(const AlloyModel& model, double s, int max_order, int truncation_radius) {
  DerivedConstants out;
  const auto& u = model.u;
  out.u_bar = u.u_bar();
  if (model.mu.has_density()) {
    out.rho_norms = model.mu.norms();
    const double sup = model.mu.sup_density();
    if (std::isfinite(sup)) {
      out.alpha = 1.0;
      out.C1 = 2.0 * sup;
    }
  } else {
    out.notes.push_back("rho norms, alpha, C1: measure has atoms");
  }
  try {
    const auto k = apriori_constants(u, s, out.rho_norms.value_or(DensityNorms{INFINITY, INFINITY, INFINITY, 0.0}), Metric::L1);
    out.c = k.c;
    out.C = k.C;
    out.apriori_coefficient = k.bound_coefficient;
  } catch (const std::exception& e) {
    out.notes.push_back(std::string("c, C: ") + e.what());
  }
  try {
    out.N = wegner_order(u, max_order).N;
  } catch (const std::exception& e) {
    out.notes.push_back(std::string("N: ") + e.what());
  }
  try {
    out.C_u = cu_norm(u, truncation_radius).value;
    if (out.rho_norms) out.C_Min = c_min(*out.C_u, *out.rho_norms);
  } catch (const std::exception& e) {
    out.notes.push_back(std::string("C_u: ") + e.what());
  }
  return out;
}

}  // namespace alloy
