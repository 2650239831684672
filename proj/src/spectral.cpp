#include "alloy/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "alloy/constants.hpp"
#include "alloy/error.hpp"
#include "alloy/parallel.hpp"

namespace alloy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxRedraws = 16;

// Runs f(stream) and redraws with a fresh stream index when the draw hits a
// singular resolvent. Returns the value and the number of redraws.
template <class F>
auto with_redraw(std::size_t i, F&& f) {
  for (int t = 0;; ++t) {
    const std::uint64_t stream = static_cast<std::uint64_t>(i) + (static_cast<std::uint64_t>(t) << 40);
    try {
      return std::make_pair(f(stream), t);
    } catch (const NumericalError&) {
      if (t + 1 >= kMaxRedraws) throw;
    }
  }
}

std::size_t site_index(const FiniteVolume& v, const Site& x, const char* name) {
  const auto i = v.index_of(x);
  require(i.has_value(), std::string(name) + " = " + to_string(x) + " is outside the volume");
  return *i;
}

double c_min_or_nan(const AlloyModel& model) {
  if (!model.mu.has_density()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return c_min(cu_norm(model.u, 4096).value, model.mu.norms());
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// Integration range for a density: its support, or quantiles far in the tails.
std::pair<double, double> density_range(const CouplingMeasure& mu) {
  auto [lo, hi] = mu.support();
  if (!std::isfinite(lo)) lo = mu.quantile(1e-15);
  if (!std::isfinite(hi)) hi = mu.quantile(1.0 - 1e-15);
  return {lo, hi};
}

// int_lo^hi f(w) dw for f with a Lorentzian-like peak of width h at c.
// Fixed Gauss rules on pieces that grow geometrically away from the peak; the
// core c +- 16h is integrated in t with w = c + h tan(t). A fixed rule keeps
// the result smooth in c and h, so it can be nested.
template <class F>
double peak_integrate(F&& f, double lo, double hi, double c, double h) {
  using G = boost::math::quadrature::gauss<double, 20>;
  if (!(hi > lo)) return 0.0;
  double total = 0.0;
  const double a = std::clamp(c - 16.0 * h, lo, hi), b = std::clamp(c + 16.0 * h, lo, hi);
  if (b > a) {
    auto g = [&](double t) {
      const double q = std::cos(t);
      return f(c + h * std::tan(t)) * h / (q * q);
    };
    total += G::integrate(g, std::atan((a - c) / h), std::atan((b - c) / h));
  }
  for (double w = 16.0 * h, e = a; e > lo; w *= 4.0) {
    const double n = std::max(c - 4.0 * w, lo);
    total += G::integrate(f, n, e);
    e = n;
  }
  for (double w = 16.0 * h, e = b; e < hi; w *= 4.0) {
    const double n = std::min(c + 4.0 * w, hi);
    total += G::integrate(f, e, n);
    e = n;
  }
  return total;
}

}  // namespace

std::pair<double, double> spectral_enclosure(const AlloyModel& model) {
  const auto [wlo, whi] = model.mu.support();
  double lo = 0.0, hi = 0.0;
  for (const auto& e : model.u.entries()) {
    lo += e.value > 0 ? e.value * wlo : e.value * whi;
    hi += e.value > 0 ? e.value * whi : e.value * wlo;
  }
  const double d2 = 2.0 * model.dimension();
  if (model.lambda == 0.0) return {-d2, d2};
  return {-d2 + model.lambda * lo, d2 + model.lambda * hi};
}

double band_center(const AlloyModel& model) {
  const auto [lo, hi] = spectral_enclosure(model);
  if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
  return model.lambda * model.u.u_bar() * model.mu.mean();
}

OperatorSampler::OperatorSampler(const AlloyModel& model, FiniteVolume volume)
    : model_(model), sampler_(model.u, model.mu, std::move(volume)) {}

FiniteVolumeOperator OperatorSampler::sample(std::uint64_t seed, std::uint64_t stream) const {
  return sample(seed, stream, model_.lambda);
}

FiniteVolumeOperator OperatorSampler::sample(std::uint64_t seed, std::uint64_t stream, double lambda) const {
  return assemble(sampler_.sample(seed, stream), lambda);
}

Estimate fractional_moment(const AlloyModel& model, const FiniteVolume& volume, cplx z, const Site& x, const Site& y,
                           double s, std::size_t n, std::uint64_t seed) {
  require(s > 0.0 && s < 1.0, "s must lie in (0,1)");
  require(n >= 2, "need at least two samples");
  const std::size_t ix = site_index(volume, x, "x"), iy = site_index(volume, y, "y");
  const OperatorSampler ops(model, volume);
  const auto draws = par::map(n, [&](std::size_t i) {
    return with_redraw(i, [&](std::uint64_t stream) {
      const auto H = ops.sample(seed, stream);
      if (z.imag() == 0.0) require_off_spectrum(H, z.real());
      return std::pow(std::abs(Resolvent(H, z).column(iy)[static_cast<Eigen::Index>(ix)]), s);
    });
  });
  std::vector<double> xs;
  int redraws = 0;
  for (const auto& [v, t] : draws) {
    xs.push_back(v);
    redraws += t;
  }
  auto est = estimate_mean(xs, seed);
  est.metadata["redraws"] = redraws;
  est.metadata["s"] = s;
  try {
    const auto k = apriori_constants(model.u, s, model.mu.norms(), Metric::L1);
    est.metadata["bound_coefficient"] = k.bound_coefficient;
    est.metadata["bound"] = k.bound(model.lambda);
  } catch (const std::exception& e) {
    est.metadata["bound"] = nullptr;
    est.metadata["bound_note"] = e.what();
  }
  return est;
}

DecayProfile fm_decay_profile(const AlloyModel& model, const FiniteVolume& volume, cplx z, const Site& x,
                              const std::vector<Site>& offsets, double s, std::size_t n, std::uint64_t seed) {
  require(s > 0.0 && s < 1.0, "s must lie in (0,1)");
  require(!offsets.empty(), "decay profile needs offsets");
  const std::size_t ix = site_index(volume, x, "x");
  std::vector<std::size_t> rows;
  for (const auto& off : offsets) rows.push_back(site_index(volume, x + off, "x + offset"));
  const OperatorSampler ops(model, volume);
  const auto draws = par::map(n, [&](std::size_t i) {
    return with_redraw(i, [&](std::uint64_t stream) {
      const auto H = ops.sample(seed, stream);
      if (z.imag() == 0.0) require_off_spectrum(H, z.real());
      const auto w = Resolvent(H, z).column(ix);
      std::vector<double> vals;
      for (auto r : rows) vals.push_back(std::pow(std::abs(w[static_cast<Eigen::Index>(r)]), s));
      return vals;
    });
  });
  DecayProfile prof;
  std::vector<double> fx, fy;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    std::vector<double> xs;
    for (const auto& d : draws) xs.push_back(d.first[k]);
    DecayPoint p;
    p.y = x + offsets[k];
    p.distance = l1_distance(p.y, x);
    p.estimate = estimate_mean(xs, seed);
    p.used_in_fit = p.estimate.value > 0.0 && p.estimate.value > 2.0 * p.estimate.stderr_;
    if (p.used_in_fit) {
      fx.push_back(p.distance);
      fy.push_back(std::log(p.estimate.value));
    } else {
      prof.dropped_distances.push_back(p.distance);
    }
    prof.points.push_back(std::move(p));
  }
  if (fx.size() >= 2 && *std::max_element(fx.begin(), fx.end()) > *std::min_element(fx.begin(), fx.end())) {
    prof.fit = least_squares(fx, fy);
    prof.rate = -prof.fit.slope;
    prof.prefactor = std::exp(prof.fit.intercept);
  }
  return prof;
}

WegnerResult wegner_count(const AlloyModel& model, int L, double lo, double hi, std::size_t n, std::uint64_t seed,
                          bool spectral_averaging) {
  require(hi > lo, "interval must have positive length");
  require(n >= 2, "need at least two samples");
  const auto volume = FiniteVolume::box(model.dimension(), L);
  const OperatorSampler ops(model, volume);
  const bool averaged = spectral_averaging && model.u.is_delta() && volume.is_chain() && model.mu.has_density() &&
                        model.lambda > 0.0;
  const double lambda = model.lambda;
  const auto& mu = model.mu;
  struct Row {
    double count = 0.0;
    double avg = 0.0;
  };
  const auto rows = par::map(n, [&](std::size_t i) {
    const auto H = ops.sample(seed, i);
    Row r;
    r.count = static_cast<double>(H.count_below(hi) - H.count_below(lo));
    if (averaged) {
      const auto& a = H.diagonal();
      const std::size_t m = a.size();
      std::vector<double> left(m), right(m);
      auto f = [&](double E) {
        left[0] = 0.0;
        for (std::size_t k = 1; k < m; ++k) left[k] = 1.0 / (a[k - 1] - E - left[k - 1]);
        right[m - 1] = 0.0;
        for (std::size_t k = m - 1; k-- > 0;) right[k] = 1.0 / (a[k + 1] - E - right[k + 1]);
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          const double v = E + left[k] + right[k];
          if (std::isfinite(v)) s += mu.density(v / lambda);
        }
        return s / lambda;
      };
      r.avg = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-10);
    }
    return r;
  });
  std::vector<double> counts, avgs;
  for (const auto& r : rows) {
    counts.push_back(r.count);
    avgs.push_back(r.avg);
  }
  WegnerResult out;
  out.crude = estimate_mean(counts, seed);
  out.crude.metadata["estimator"] = "eigenvalue count";
  if (averaged) {
    out.averaged = estimate_mean(avgs, seed);
    out.averaged->metadata["estimator"] = "spectral averaging over each coupling";
  }
  try {
    out.N = wegner_order(model.u, 8).N;
  } catch (const NumericalError&) {
    out.N = 0;
  }
  if (mu.has_density() && lambda > 0.0) {
    const double side = 2.0 * L + 1.0;
    out.reference_product =
        mu.norms().var * (hi - lo) * std::pow(side, 2 * model.dimension() + out.N) / lambda;
    const double best = out.averaged ? out.averaged->value : out.crude.value;
    out.implied_cw = best / out.reference_product;
  }
  return out;
}

MinamiResult minami_determinant(const AlloyModel& model, const FiniteVolume& volume, cplx z, const Site& x,
                                const Site& y, std::size_t n, std::uint64_t seed, bool rao_blackwell) {
  require(z.imag() > 0.0, "Minami determinant needs Im z > 0");
  require(x != y, "Minami determinant needs x != y");
  require(n >= 2, "need at least two samples");
  const std::size_t ix = site_index(volume, x, "x"), iy = site_index(volume, y, "y");
  const OperatorSampler ops(model, volume);
  const bool averaged = rao_blackwell && model.u.is_delta() && model.mu.has_density() && model.lambda > 0.0;
  const double lambda = model.lambda;
  const auto& mu = model.mu;
  const auto [wlo, whi] = density_range(mu);

  struct Row {
    double det = 0.0;
    double avg = 0.0;
  };
  const auto rows = par::map(n, [&](std::size_t i) {
    const auto H = ops.sample(seed, i);
    Row r;
    {
      const Resolvent R(H, z);
      const auto cx = R.column(ix), cy = R.column(iy);
      const double gxx = cx[static_cast<Eigen::Index>(ix)].imag(), gyy = cy[static_cast<Eigen::Index>(iy)].imag();
      const double gxy = cy[static_cast<Eigen::Index>(ix)].imag(), gyx = cx[static_cast<Eigen::Index>(iy)].imag();
      r.det = gxx * gyy - gxy * gyx;
      if (r.det < -1e-10)
        throw NumericalError("negative Minami determinant " + std::to_string(r.det) + " on draw " + std::to_string(i));
    }
    if (averaged) {
      auto diag = H.diagonal();
      diag[ix] = 0.0;
      diag[iy] = 0.0;
      const FiniteVolumeOperator H0(H.volume_ptr(), std::move(diag), lambda);
      const Resolvent R0(H0, z);
      const auto cx = R0.column(ix), cy = R0.column(iy);
      Eigen::Matrix2cd G0;
      G0 << cx[static_cast<Eigen::Index>(ix)], cy[static_cast<Eigen::Index>(ix)], cx[static_cast<Eigen::Index>(iy)],
          cy[static_cast<Eigen::Index>(iy)];
      const Eigen::Matrix2cd M = G0.inverse();
      const cplx Mxx = M(0, 0), Myy = M(1, 1), C = 0.5 * (M(0, 1) + M(1, 0));
      // With t = 1/(lambda w_x - p), p = C^2/B - M_xx and kappa = C/B the determinant is
      // Im(1/B) Im t - (Im kappa)^2 |t|^2, a Lorentzian in w_x.
      auto outer = [&](double wy) {
        const double py = mu.density(wy);
        if (py == 0.0) return 0.0;
        const cplx B = Myy + lambda * wy;
        const cplx p = C * C / B - Mxx;
        const double k = (1.0 / B).imag() * p.imag() - std::pow((C / B).imag(), 2);
        const double h = std::abs(p.imag()) / lambda;
        if (!(h > 0.0)) throw NumericalError("degenerate conditional resolvent on draw " + std::to_string(i));
        const double c = p.real() / lambda;
        const double v = peak_integrate(
            [&](double w) { return mu.density(w) / ((w - c) * (w - c) + h * h); }, wlo, whi, c, h);
        return py * k * v / (lambda * lambda);
      };
      const double yc = -Myy.real() / lambda, yh = std::max(std::abs(Myy.imag()) / lambda, 1e-12);
      const cplx schur = Myy - C * C / Mxx;
      const double sc = -schur.real() / lambda, sh = std::max(std::abs(schur.imag()) / lambda, 1e-12);
      // Split between the two peaks so each piece carries one.
      const double mid = std::clamp(0.5 * (yc + sc), wlo, whi);
      const double lo_c = yc < sc ? yc : sc, lo_h = yc < sc ? yh : sh;
      const double hi_c = yc < sc ? sc : yc, hi_h = yc < sc ? sh : yh;
      r.avg = peak_integrate(outer, wlo, mid, lo_c, lo_h) + peak_integrate(outer, mid, whi, hi_c, hi_h);
    }
    return r;
  });
  MinamiResult out;
  std::vector<double> dets, avgs;
  out.min_determinant = kInf;
  for (const auto& r : rows) {
    dets.push_back(r.det);
    avgs.push_back(r.avg);
    out.min_determinant = std::min(out.min_determinant, r.det);
  }
  out.crude = estimate_mean(dets, seed);
  out.crude.metadata["estimator"] = "determinant per draw";
  if (averaged) {
    out.averaged = estimate_mean(avgs, seed);
    out.averaged->metadata["estimator"] = "conditional expectation over the two couplings";
  }
  out.c_min = c_min_or_nan(model);
  out.bound = std::pow(M_PI / lambda, 2) * out.c_min;
  return out;
}

TwoLevelResult two_level_probability(const AlloyModel& model, const FiniteVolume& volume, double lo, double hi,
                                     std::size_t n, std::uint64_t seed) {
  require(hi > lo, "interval must have positive length");
  require(n >= 2, "need at least two samples");
  const OperatorSampler ops(model, volume);
  const auto counts = par::map(n, [&](std::size_t i) {
    const auto H = ops.sample(seed, i);
    return H.count_below(hi) - H.count_below(lo);
  });
  TwoLevelResult out;
  std::vector<double> p, f;
  for (auto k : counts) {
    const double ind = k >= 2 ? 1.0 : 0.0;
    const double half = 0.5 * static_cast<double>(k) * (static_cast<double>(k) - 1.0);
    if (ind > half) out.counting_inequality = false;
    p.push_back(ind);
    f.push_back(half);
  }
  out.p_two = estimate_mean(p, seed);
  out.factorial_half = estimate_mean(f, seed);
  const double cm = c_min_or_nan(model);
  const double len = hi - lo, vol = static_cast<double>(volume.size());
  out.bound = 0.5 * std::pow(M_PI / model.lambda, 2) * cm * len * len * vol * vol;
  return out;
}

double IdsTable::at(double E) const {
  require(!energies.empty(), "empty IDS table");
  require(E >= energies.front() && E <= energies.back(),
          "energy " + std::to_string(E) + " outside the IDS grid [" + std::to_string(energies.front()) + ", " +
              std::to_string(energies.back()) + "]");
  auto it = std::upper_bound(energies.begin(), energies.end(), E);
  if (it == energies.end()) return values.back();
  const auto k = static_cast<std::size_t>(it - energies.begin());
  if (k == 0) return values.front();
  const double t = (E - energies[k - 1]) / (energies[k] - energies[k - 1]);
  return values[k - 1] + t * (values[k] - values[k - 1]);
}

IdsTable ids_estimate(const AlloyModel& model, int L, const std::vector<double>& energies, std::size_t n,
                      std::uint64_t seed) {
  require(!energies.empty(), "empty energy grid");
  require(std::is_sorted(energies.begin(), energies.end()), "energy grid must be sorted");
  require(n >= 1, "need at least one realization");
  const auto volume = FiniteVolume::box(model.dimension(), L);
  const OperatorSampler ops(model, volume);
  // A chain count costs O(n) per energy against O(n^2) for all eigenvalues.
  const bool full = volume.is_chain() ? energies.size() > 2 * volume.size() : volume.size() <= kDenseLimit;
  IdsTable t;
  t.energies = energies;
  t.realizations = n;
  t.volume_size = volume.size();
  std::vector<std::uint64_t> total(energies.size(), 0);
  // Chunks bound the memory held by per-realization count vectors.
  constexpr std::size_t chunk = 256;
  for (std::size_t base = 0; base < n; base += chunk) {
    const auto counts = par::map(std::min(chunk, n - base), [&](std::size_t k) {
      const auto H = ops.sample(seed, base + k);
      std::vector<std::uint32_t> c(energies.size());
      if (full) {
        const auto ev = eigenvalues(H);
        std::size_t j = 0;
        for (std::size_t e = 0; e < energies.size(); ++e) {
          while (j < ev.size() && ev[j] <= energies[e]) ++j;
          c[e] = static_cast<std::uint32_t>(j);
        }
      } else {
        for (std::size_t e = 0; e < energies.size(); ++e) c[e] = static_cast<std::uint32_t>(H.count_below(energies[e]));
      }
      return c;
    });
    for (const auto& c : counts)
      for (std::size_t e = 0; e < c.size(); ++e) total[e] += c[e];
  }
  const double denom = static_cast<double>(n) * static_cast<double>(volume.size());
  for (auto v : total) t.values.push_back(static_cast<double>(v) / denom);
  return t;
}

PositivityProbe ids_positivity_probe(const IdsTable& ids, double E0, double kappa,
                                     const std::vector<std::pair<double, double>>& windows,
                                     const std::vector<double>& eps_grid) {
  require(ids.energies.size() >= 2, "IDS table too small");
  double spacing = 0.0;
  for (std::size_t k = 1; k < ids.energies.size(); ++k)
    spacing = std::max(spacing, ids.energies[k] - ids.energies[k - 1]);
  PositivityProbe probe;
  for (const auto& [a, b] : windows) {
    std::vector<double> lx, ly;
    for (double eps : eps_grid) {
      require(eps >= spacing, "eps " + std::to_string(eps) + " below the IDS grid resolution " + std::to_string(spacing));
      PositivityRow row{a, b, eps};
      row.increment = std::abs(ids.at(E0 + a * eps) - ids.at(E0 + b * eps));
      row.best_c = row.increment / std::pow(eps, 1.0 + kappa);
      row.fails = !(row.best_c > 1e-6);
      probe.passed = probe.passed && !row.fails;
      if (row.increment > 0) {
        lx.push_back(std::log(eps));
        ly.push_back(std::log(row.increment));
      }
      probe.rows.push_back(row);
    }
    if (lx.size() >= 2) probe.slopes.push_back({{a, b}, least_squares(lx, ly)});
  }
  return probe;
}

RescaledSpectrum rescale_eigenvalues(const std::vector<double>& evals, const IdsTable& ids, double E0,
                                     std::size_t volume_size) {
  RescaledSpectrum r;
  r.E0 = E0;
  r.volume_size = volume_size;
  const double n0 = ids.at(E0);
  const double vol = static_cast<double>(volume_size);
  for (double E : evals) r.xi.push_back(vol * (ids.at(E) - n0));
  return r;
}

PoissonReport poisson_statistics(const std::vector<RescaledSpectrum>& spectra, double W, double bin_width) {
  require(spectra.size() >= 200, "Poisson statistics need at least 200 realizations");
  require(W >= 0.5, "window half-width must be at least 1/2");
  require(bin_width > 0.0, "bin width must be positive");
  PoissonReport rep;
  rep.realizations = spectra.size();
  rep.window = W;
  const int windows = static_cast<int>(std::floor(2.0 * W));
  std::vector<std::size_t> counts;
  std::vector<double> gaps;
  std::size_t empty = 0;
  for (const auto& sp : spectra) {
    auto xi = sp.xi;
    std::sort(xi.begin(), xi.end());
    std::vector<std::size_t> c(static_cast<std::size_t>(windows), 0);
    bool any = false;
    for (std::size_t i = 0; i < xi.size(); ++i) {
      if (xi[i] < -W || xi[i] >= W) continue;
      any = true;
      const auto k = static_cast<long>(std::floor(xi[i] + W));
      if (k >= 0 && k < windows) ++c[static_cast<std::size_t>(k)];
      if (i + 1 < xi.size()) gaps.push_back(xi[i + 1] - xi[i]);
    }
    empty += !any;
    counts.insert(counts.end(), c.begin(), c.end());
  }
  rep.empty_window_fraction = static_cast<double>(empty) / static_cast<double>(spectra.size());
  if (rep.empty_window_fraction > 0.5) rep.warnings.push_back("window empty in more than half of the realizations");
  double m = 0.0;
  for (auto c : counts) m += static_cast<double>(c);
  m /= static_cast<double>(counts.size());
  double v = 0.0;
  for (auto c : counts) v += (static_cast<double>(c) - m) * (static_cast<double>(c) - m);
  v /= static_cast<double>(counts.size() - 1);
  rep.count_mean = m;
  rep.count_variance = v;
  rep.variance_to_mean = m > 0 ? v / m : 0.0;
  rep.variance_pass = rep.variance_to_mean >= 0.8 && rep.variance_to_mean <= 1.2;
  if (!gaps.empty()) {
    rep.gaps = ks_test(gaps, [](double x) { return x <= 0 ? 0.0 : -std::expm1(-x); });
    rep.ks_pass = rep.gaps.statistic < rep.gaps.critical_1pct;
  } else {
    rep.warnings.push_back("no gaps inside the window");
  }
  if (m > 0) rep.counts = chi_square_poisson(counts, m, 1);
  const int bins = std::max(1, static_cast<int>(std::ceil(6.0 / bin_width)));
  rep.gap_histogram.assign(static_cast<std::size_t>(bins), 0.0);
  for (int k = 0; k <= bins; ++k) rep.gap_bin_edges.push_back(k * bin_width);
  for (double g : gaps) {
    const auto k = static_cast<long>(std::floor(g / bin_width));
    if (k >= 0 && k < bins) rep.gap_histogram[static_cast<std::size_t>(k)] += 1.0;
  }
  for (int k = 0; k < bins; ++k) {
    if (!gaps.empty()) rep.gap_histogram[static_cast<std::size_t>(k)] /= static_cast<double>(gaps.size()) * bin_width;
    rep.gap_reference.push_back(std::exp(-(k + 0.5) * bin_width));
  }
  return rep;
}

std::vector<RescaledSpectrum> synthetic_poisson_spectra(std::size_t realizations, double W, std::uint64_t seed) {
  std::vector<RescaledSpectrum> out(realizations);
  for (std::size_t r = 0; r < realizations; ++r) {
    rng::Stream rs(seed, r, rng::Tag::Synthetic);
    double x = -W - 10.0;
    while (x < W + 10.0) {
      x += -std::log(rs.uniform());
      out[r].xi.push_back(x);
    }
  }
  return out;
}

std::vector<RescaledSpectrum> rigid_lattice_spectra(std::size_t realizations, double W) {
  RescaledSpectrum sp;
  for (int j = static_cast<int>(std::floor(-W)) - 2; j <= static_cast<int>(std::ceil(W)) + 2; ++j) sp.xi.push_back(j);
  return std::vector<RescaledSpectrum>(realizations, sp);
}

Estimate fvc_probability(const AlloyModel& model, int L, double E, double theta_exp, std::size_t n,
                         std::uint64_t seed) {
  require(theta_exp > 3.0 * model.dimension() - 1.0, "FVC exponent must exceed 3d - 1");
  require(n >= 2, "need at least two samples");
  const auto volume = FiniteVolume::box(model.dimension(), L);
  const OperatorSampler ops(model, volume);
  const double threshold = L > 0 ? std::pow(static_cast<double>(L), -theta_exp) : kInf;
  const auto& pts = volume.points();
  const auto draws = par::map(n, [&](std::size_t i) {
    return with_redraw(i, [&](std::uint64_t stream) {
      const auto H = ops.sample(seed, stream);
      require_off_spectrum(H, E);
      const Resolvent R(H, E);
      for (std::size_t y = 0; y < pts.size(); ++y) {
        bool any = false;
        for (std::size_t x = 0; x < pts.size() && !any; ++x) any = 2 * linf_distance(pts[x], pts[y]) >= L;
        if (!any) continue;
        const auto w = R.column(y);
        for (std::size_t x = 0; x < pts.size(); ++x)
          if (2 * linf_distance(pts[x], pts[y]) >= L && std::abs(w[static_cast<Eigen::Index>(x)]) > threshold)
            return 0.0;
      }
      return 1.0;
    });
  });
  std::vector<double> xs;
  int redraws = 0;
  for (const auto& [v, t] : draws) {
    xs.push_back(v);
    redraws += t;
  }
  auto est = estimate_mean(xs, seed);
  est.metadata["redraws"] = redraws;
  est.metadata["threshold"] = std::isfinite(threshold) ? nlohmann::json(threshold) : nlohmann::json("inf");
  return est;
}

InverseMomentResult inverse_moment_check(const CouplingMeasure& mu, double s, double b, double alpha, double c1) {
  require(alpha > 0.0 && s > 0.0 && s < alpha, "inverse moment needs 0 < s < alpha");
  require(c1 > 0.0, "C1 must be positive");
  InverseMomentResult r;
  r.bound = std::pow(c1, s / alpha) * alpha / (alpha - s);
  if (!mu.has_density()) {
    // Two atoms: low with mass 1-p, high with mass p.
    const auto [lo, hi] = mu.support();
    const double p_hi = mu.mass(hi, hi), p_lo = mu.mass(lo, lo);
    for (auto [x, p] : {std::pair{lo, p_lo}, std::pair{hi, p_hi}}) r.integral += p > 0 ? p * std::pow(std::abs(x - b), -s) : 0.0;
    r.margin = r.bound - r.integral;
    return r;
  }
  boost::math::quadrature::tanh_sinh<double> ts(15);
  auto piece = [&](double a0, double a1) {
    double err = 0.0, l1 = 0.0;
    std::size_t levels = 0;
    const double v = ts.integrate(
        [&](double x, double xc) {
          // xc is the distance to the nearer endpoint, which keeps |x-b| accurate near b.
          const double dist = (a1 == b && xc > 0) ? xc : (a0 == b && xc < 0) ? -xc : std::abs(x - b);
          (void)xc;
          return mu.density(x) * std::pow(dist, -s);
        },
        a0, a1, 1e-10, &err, &l1, &levels);
    if (!std::isfinite(v) || err > 1e-6 * std::max(1.0, std::abs(v)))
      throw NumericalError("inverse-moment quadrature did not converge (estimate " + std::to_string(v) + ", error " +
                           std::to_string(err) + ")");
    r.error += err;
    return v;
  };
  const auto [lo, hi] = mu.support();
  std::vector<double> cuts{lo};
  if (b > lo && b < hi) cuts.push_back(b);
  cuts.push_back(hi);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a0 = cuts[k], a1 = cuts[k + 1];
    if (std::isfinite(a0) && std::isfinite(a1)) {
      r.integral += piece(a0, a1);
    } else if (!std::isfinite(a0)) {
      r.integral += piece(a1 - 1.0, a1) + piece(-kInf, a1 - 1.0);
    } else {
      r.integral += piece(a0, a0 + 1.0) + piece(a0 + 1.0, kInf);
    }
  }
  r.margin = r.bound - r.integral;
  return r;
}

namespace {

std::vector<double> trim(std::vector<double> q) {
  while (!q.empty() && q.back() == 0.0) q.pop_back();
  return q;
}

double poly_eval(const std::vector<double>& q, double x) {
  double v = 0.0;
  for (std::size_t k = q.size(); k-- > 0;) v = v * x + q[k];
  return v;
}

// Real roots with multiplicities.
std::vector<std::pair<double, int>> real_roots(const std::vector<double>& q) {
  std::vector<std::pair<double, int>> out;
  const int deg = static_cast<int>(q.size()) - 1;
  if (deg < 1) return out;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -q[static_cast<std::size_t>(i)] / q.back();
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  std::vector<double> re;
  for (int i = 0; i < deg; ++i) {
    const auto z = es.eigenvalues()[i];
    if (std::abs(z.imag()) <= 1e-7 * std::max(1.0, std::abs(z))) re.push_back(z.real());
  }
  std::sort(re.begin(), re.end());
  for (double r : re) {
    if (!out.empty() && std::abs(out.back().first - r) <= 1e-6 * std::max(1.0, std::abs(r))) {
      ++out.back().second;
    } else {
      out.push_back({r, 1});
    }
  }
  return out;
}

}  // namespace

double reverse_holder_ratio(const std::vector<double>& q1_in, const std::vector<double>& q2_in,
                            const CouplingMeasure& mu, double s, int depth) {
  require(s > 0.0, "s must be positive");
  const auto q1 = trim(q1_in), q2 = trim(q2_in);
  require(!q2.empty(), "Q2 must not vanish identically");
  if (q1.empty()) throw NumericalError("Q1 vanishes identically; ratio 0/0");
  const auto r1 = real_roots(q1), r2 = real_roots(q2);
  auto mult = [](const std::vector<std::pair<double, int>>& rs, double x) {
    for (const auto& [r, m] : rs)
      if (std::abs(r - x) <= 1e-6 * std::max(1.0, std::abs(x))) return m;
    return 0;
  };
  auto f = [&](double x) { return std::abs(poly_eval(q1, x) / poly_eval(q2, x)); };

  if (!mu.has_density()) {
    const auto [lo, hi] = mu.support();
    double a = 0, b = 0;
    for (auto [x, p] : {std::pair{lo, mu.mass(lo, lo)}, std::pair{hi, mu.mass(hi, hi)}}) {
      if (p <= 0) continue;
      const double v = f(x);
      if (!std::isfinite(v)) throw NumericalError("nonintegrable: Q2 vanishes at an atom");
      a += p * std::pow(v, 2 * s);
      b += p * std::pow(v, s);
    }
    return std::sqrt(a) / b;
  }
  const auto [lo, hi] = density_range(mu);
  std::vector<double> cuts{lo, hi};
  for (const auto& [r, m] : r2) {
    if (r <= lo || r >= hi) continue;
    if (2.0 * s * (m - mult(r1, r)) >= 1.0)
      throw NumericalError("nonintegrable: |Q1/Q2|^{2s} has a non-integrable pole at " + std::to_string(r));
    cuts.push_back(r);
  }
  for (const auto& [r, m] : r1)
    if (r > lo && r < hi) cuts.push_back(r);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  boost::math::quadrature::tanh_sinh<double> ts(static_cast<std::size_t>(depth));
  auto integrate = [&](double p) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      double err = 0.0, l1 = 0.0;
      const double v = ts.integrate(
          [&](double x) {
            const double y = std::pow(f(x), p) * mu.density(x);
            return std::isfinite(y) ? y : 0.0;
          },
          cuts[k], cuts[k + 1], 1e-10, &err, &l1);
      if (!std::isfinite(v) || err > 1e-4 * std::max(1e-12, std::abs(v)))
        throw NumericalError("nonintegrable or unresolved: quadrature error " + std::to_string(err) + " on [" +
                             std::to_string(cuts[k]) + ", " + std::to_string(cuts[k + 1]) + "]");
      total += v;
    }
    return total;
  };
  const double a = integrate(2.0 * s), b = integrate(s);
  return std::sqrt(a) / b;
}

RecursionProbe recursion_probe(const AlloyModel& model, const FiniteVolume& volume, double E, const Site& x,
                               const Site& y, double s, const std::vector<double>& lambdas, std::size_t n,
                               std::uint64_t seed) {
  require(x != y, "recursion probe needs x != y");
  require(s > 0.0 && s < 1.0, "s must lie in (0,1)");
  require(model.u.at(Site(static_cast<std::size_t>(model.dimension()), 0)) != 0.0, "recursion probe needs 0 in Theta");
  require(!lambdas.empty(), "recursion probe needs lambda values");
  const std::size_t ix = site_index(volume, x, "x"), iy = site_index(volume, y, "y");
  const OperatorSampler ops(model, volume);
  const auto nb = volume.neighbours(iy);
  RecursionProbe probe;
  probe.min_c = kInf;
  for (double lambda : lambdas) {
    require(lambda > 0.0, "lambda must be positive");
    struct Row {
      double lhs = 0, rhs = 0, residual = 0;
    };
    const auto draws = par::map(n, [&](std::size_t i) {
      return with_redraw(i, [&](std::uint64_t stream) {
        const auto H = ops.sample(seed, stream, lambda);
        require_off_spectrum(H, E);
        const auto w = Resolvent(H, E).column(ix);
        Row r;
        cplx hop = 0.0;
        for (auto j : nb) {
          hop += w[j];
          r.rhs += std::pow(std::abs(w[j]), s);
        }
        const cplx g = w[static_cast<Eigen::Index>(iy)];
        r.lhs = std::pow(std::abs(g), s);
        r.residual = std::abs(hop - (H.diagonal()[iy] - E) * g) / (1.0 + std::abs(g));
        return r;
      });
    });
    std::vector<double> l, rr;
    RecursionRow row;
    row.lambda = lambda;
    for (const auto& [d, t] : draws) {
      l.push_back(d.lhs);
      rr.push_back(d.rhs);
      row.max_residual = std::max(row.max_residual, d.residual);
      probe.redraws += static_cast<std::size_t>(t);
    }
    row.lhs = estimate_mean(l, seed);
    row.rhs_sum = estimate_mean(rr, seed);
    row.skipped = !(row.rhs_sum.value > 2.0 * row.rhs_sum.stderr_);
    if (!row.skipped) {
      row.implied_c = row.lhs.value * std::pow(lambda, s) / row.rhs_sum.value;
      probe.max_c = std::max(probe.max_c, row.implied_c);
      probe.min_c = std::min(probe.min_c, row.implied_c);
    }
    probe.rows.push_back(row);
  }
  if (!std::isfinite(probe.min_c)) probe.min_c = 0.0;
  return probe;
}

}  // namespace alloy
