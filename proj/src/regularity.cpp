#include "alloy/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "alloy/error.hpp"
#include "alloy/parallel.hpp"

namespace alloy {

double concentration_exact_uniform_sum(double eps) {
  require(eps > 0.0, "eps must be positive");
  return eps <= 2.0 ? eps - eps * eps / 4.0 : 1.0;
}

std::vector<double> sample_eta(const AlloyModel& model, const Site& m, std::size_t n, std::uint64_t seed) {
  const FieldSampler sampler(model.u, model.mu, FiniteVolume::explicit_points(model.dimension(), {m}));
  auto out = par::map(n, [&](std::size_t i) {
    std::vector<double> omega(sampler.coupling_count());
    double eta = 0.0;
    sampler.draw_couplings(seed, i, omega);
    sampler.convolve(omega, std::span<double>(&eta, 1));
    return eta;
  });
  std::sort(out.begin(), out.end());
  return out;
}

ConcentrationEstimate concentration_from_samples(const std::vector<double>& sorted, double eps, double a_step) {
  require(eps > 0.0, "eps must be positive");
  require(a_step > 0.0 && a_step <= eps / 10.0 + 1e-15, "a_step must be positive and at most eps/10");
  require(!sorted.empty(), "no samples");
  ConcentrationEstimate est;
  est.eps = eps;
  est.a_step = a_step;
  est.samples = sorted.size();
  const double n = static_cast<double>(sorted.size());
  const long k0 = static_cast<long>(std::floor((sorted.front() - eps) / a_step)) - 1;
  const long k1 = static_cast<long>(std::ceil(sorted.back() / a_step)) + 1;
  std::size_t best = 0;
  for (long k = k0; k <= k1; ++k) {
    const double a = static_cast<double>(k) * a_step;
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), a);
    const auto hi = std::upper_bound(lo, sorted.end(), a + eps);
    const auto count = static_cast<std::size_t>(hi - lo);
    if (count > best) {
      best = count;
      est.argmax_a = a;
    }
  }
  est.value = static_cast<double>(best) / n;
  est.stderr_ = std::sqrt(est.value * (1.0 - est.value) / n);
  return est;
}

ConcentrationEstimate concentration_empirical(const AlloyModel& model, const Site& m, double eps, std::size_t n_samples,
                                              double a_step, std::uint64_t seed) {
  require(n_samples >= 1000, "concentration estimate needs at least 1000 samples");
  require(a_step <= eps / 10.0 + 1e-15, "a_step must be at most eps/10");
  return concentration_from_samples(sample_eta(model, m, n_samples, seed), eps, a_step);
}

ConcentrationCurve concentration_curve(const AlloyModel& model, const Site& m, const std::vector<double>& eps_grid,
                                       std::size_t n_samples, double a_step, std::uint64_t seed) {
  require(n_samples >= 1000, "concentration estimate needs at least 1000 samples");
  require(std::is_sorted(eps_grid.begin(), eps_grid.end()), "eps grid must be sorted");
  const auto samples = sample_eta(model, m, n_samples, seed);
  ConcentrationCurve curve;
  curve.mode = "empirical";
  curve.samples = n_samples;
  curve.a_step = a_step;
  for (double eps : eps_grid) {
    const auto est = concentration_from_samples(samples, eps, a_step);
    curve.eps.push_back(eps);
    curve.values.push_back(est.value);
    curve.stderrs.push_back(est.stderr_);
  }
  return curve;
}

ConditioningEvent ConditioningEvent::band(std::vector<Site> sites, double lo, double hi) {
  require(lo <= hi, "band interval is empty");
  require(!sites.empty(), "band event needs sites");
  ConditioningEvent e;
  e.kind = Kind::Band;
  e.sites = std::move(sites);
  e.lo = lo;
  e.hi = hi;
  return e;
}

ConditioningEvent ConditioningEvent::pin(std::vector<Site> sites, std::vector<double> values, double tolerance) {
  require(sites.size() == values.size(), "pin event needs one value per site");
  require(tolerance > 0.0, "pin tolerance must be positive");
  ConditioningEvent e;
  e.kind = Kind::Pin;
  e.sites = std::move(sites);
  e.values = std::move(values);
  e.tolerance = tolerance;
  return e;
}

std::pair<double, double> ConditioningEvent::window(std::size_t j) const {
  if (kind == Kind::Band) return {lo, hi};
  return {values[j] - tolerance, values[j] + tolerance};
}

namespace {

struct ConditionalSetup {
  FieldSampler sampler;
  std::vector<std::pair<double, double>> windows;  // per volume row 1..
};

ConditionalSetup make_setup(const AlloyModel& model, const Site& m, const ConditioningEvent& event) {
  std::vector<Site> pts{m};
  for (const auto& s : event.sites) {
    require(s != m, "conditioned sites must exclude the target site");
    pts.push_back(s);
  }
  std::vector<std::pair<double, double>> windows;
  for (std::size_t j = 0; j < event.sites.size(); ++j) windows.push_back(event.window(j));
  return {FieldSampler(model.u, model.mu, FiniteVolume::explicit_points(model.dimension(), pts)), std::move(windows)};
}

bool event_holds(const std::vector<std::pair<double, double>>& windows, std::span<const double> eta) {
  for (std::size_t j = 0; j < windows.size(); ++j)
    if (eta[j + 1] < windows[j].first || eta[j + 1] > windows[j].second) return false;
  return true;
}

std::function<double(int)> coupling_lookup(const FieldLayout& layout, const std::vector<double>& omega) {
  return [&layout, &omega](int i) {
    auto idx = layout.coupling_index(Site{i});
    if (!idx) throw ValidationError("certificate needs coupling " + std::to_string(i) + " outside the sampled set");
    return omega[*idx];
  };
}

struct Draw {
  bool accepted = false;
  bool in_window = false;
  bool certified = true;
  std::size_t attempts = 1;
  double weight = 1.0;
  double eta_m = 0.0;
  std::vector<std::size_t> block_attempts;
};

// Couplings touched by each conditioned row and the row's terms.
struct RowTerms {
  std::vector<std::uint32_t> couplings;
  std::vector<double> weights;
};

std::vector<RowTerms> row_terms(const FieldLayout& L) {
  std::vector<RowTerms> rows(L.row_start.size() - 1);
  for (std::size_t r = 0; r + 1 < L.row_start.size(); ++r)
    for (std::size_t t = L.row_start[r]; t < L.row_start[r + 1]; ++t) {
      rows[r].couplings.push_back(L.term_coupling[t]);
      rows[r].weights.push_back(L.term_weight[t]);
    }
  return rows;
}

void weighted_moments(ConditionalEstimate& out, const std::vector<std::pair<double, double>>& wx) {
  double sw = 0, s1 = 0;
  for (const auto& [w, x] : wx) {
    sw += w;
    s1 += w * x;
  }
  if (!(sw > 0)) return;
  out.eta_mean = s1 / sw;
  double s2 = 0;
  for (const auto& [w, x] : wx) s2 += w * (x - out.eta_mean) * (x - out.eta_mean);
  out.eta_variance = s2 / sw;
}

}  // namespace

ConditionalEstimate conditional_concentration_mc(const AlloyModel& model, const Site& m, double a, double eps,
                                                 const ConditioningEvent& event, std::size_t n_target,
                                                 std::size_t max_draws, std::uint64_t seed,
                                                 const ConditionalOptions& options) {
  require(eps > 0.0, "eps must be positive");
  require(n_target > 0, "n_target must be positive");
  require(max_draws >= n_target, "max_draws must be at least n_target");
  const auto setup = make_setup(model, m, event);
  const auto& sampler = setup.sampler;
  const auto& layout = sampler.layout();
  const std::size_t nc = sampler.coupling_count();
  const std::size_t nv = sampler.volume_size();
  const double wlo = a, whi = a + eps;

  auto finish_draw = [&](Draw& d, const std::vector<double>& omega, const std::vector<double>& eta) {
    d.eta_m = eta[0];
    d.in_window = eta[0] >= wlo && eta[0] <= whi;
    if (options.certify) {
      const auto rep = theta1_certificate(model.u, options.certificate_delta_prime, options.certificate_delta_prime,
                                          coupling_lookup(layout, omega));
      d.certified = rep.passed;
    }
  };

  ConditionalEstimate out;
  if (options.sampler == ConditionalSampler::Rejection) {
    out.sampler = "rejection";
    const std::size_t chunk = 1 << 14;
    std::size_t base = 0;
    double hits = 0;
    std::vector<std::pair<double, double>> wx;
    while (out.accepted < n_target) {
      if (base >= max_draws)
        throw NumericalError("conditional sampler accepted " + std::to_string(out.accepted) + " of " +
                             std::to_string(n_target) + " after " + std::to_string(base) +
                             " draws (acceptance rate " + std::to_string(static_cast<double>(out.accepted) / base) +
                             "); widen the band or use the blockwise sampler");
      const std::size_t count = std::min(chunk, max_draws - base);
      const auto draws = par::map(count, [&](std::size_t k) {
        std::vector<double> omega(nc), eta(nv);
        sampler.draw_couplings(seed, base + k, omega);
        sampler.convolve(omega, eta);
        Draw d;
        d.accepted = event_holds(setup.windows, eta);
        if (d.accepted) finish_draw(d, omega, eta);
        return d;
      });
      for (std::size_t k = 0; k < count && out.accepted < n_target; ++k) {
        ++out.draws;
        if (!draws[k].accepted) continue;
        ++out.accepted;
        wx.emplace_back(1.0, draws[k].eta_m);
        hits += draws[k].in_window;
        out.window_misses += !draws[k].in_window;
        out.certificate_failures += !draws[k].certified;
      }
      base += count;
    }
    const double n = static_cast<double>(out.accepted);
    out.estimate = hits / n;
    out.stderr_ = std::sqrt(out.estimate * (1.0 - out.estimate) / n);
    out.acceptance_rate = n / static_cast<double>(out.draws);
    out.ess = n;
    weighted_moments(out, wx);
    return out;
  }

  if (options.sampler == ConditionalSampler::Blockwise) {
    out.sampler = "blockwise";
    const auto rows = row_terms(layout);
    // Union-find over conditioned rows sharing a coupling.
    const std::size_t ne = nv - 1;
    std::vector<std::size_t> parent(ne);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    std::map<std::uint32_t, std::size_t> owner;
    for (std::size_t j = 0; j < ne; ++j)
      for (auto c : rows[j + 1].couplings) {
        auto [it, fresh] = owner.emplace(c, j);
        if (!fresh) parent[find(j)] = find(it->second);
      }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t j = 0; j < ne; ++j) groups[find(j)].push_back(j);
    struct Block {
      std::vector<std::size_t> rows;
      std::vector<std::uint32_t> couplings;
    };
    std::vector<Block> blocks;
    std::vector<char> in_block(nc, 0);
    for (auto& [_, members] : groups) {
      Block b;
      std::set<std::uint32_t> cs;
      for (auto j : members) {
        b.rows.push_back(j + 1);
        cs.insert(rows[j + 1].couplings.begin(), rows[j + 1].couplings.end());
      }
      b.couplings.assign(cs.begin(), cs.end());
      for (auto c : cs) in_block[c] = 1;
      blocks.push_back(std::move(b));
    }
    const std::size_t per_sample_cap = std::max<std::size_t>(1, max_draws / n_target);
    const std::uint64_t block_seed = rng::mix(seed, static_cast<std::uint64_t>(rng::Tag::Block));

    const auto draws = par::map(n_target, [&](std::size_t i) {
      std::vector<double> omega(nc);
      sampler.draw_couplings(seed, i, omega);
      Draw d;
      d.accepted = true;
      d.attempts = 0;
      d.block_attempts.assign(blocks.size(), 0);
      Site rel(layout.origin.size());
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        bool ok = false;
        for (std::size_t t = 0; t < per_sample_cap && !ok; ++t) {
          ++d.attempts;
          ++d.block_attempts[b];
          const std::uint64_t stream = rng::mix(rng::mix(i, b), t);
          for (auto c : blocks[b].couplings) {
            for (std::size_t q = 0; q < rel.size(); ++q) rel[q] = layout.coupling_sites[c][q] - layout.origin[q];
            omega[c] = sampler.measure().quantile(rng::site_uniform(block_seed, stream, rel));
          }
          ok = true;
          for (auto r : blocks[b].rows) {
            double s = 0.0;
            for (std::size_t q = 0; q < rows[r].couplings.size(); ++q) s += omega[rows[r].couplings[q]] * rows[r].weights[q];
            const auto& w = setup.windows[r - 1];
            if (s < w.first || s > w.second) {
              ok = false;
              break;
            }
          }
        }
        if (!ok) {
          d.accepted = false;
          return d;
        }
      }
      std::vector<double> eta(nv);
      sampler.convolve(omega, eta);
      if (!event_holds(setup.windows, eta)) throw NumericalError("blockwise sampler produced a sample outside the event");
      finish_draw(d, omega, eta);
      return d;
    });
    double hits = 0;
    std::vector<std::pair<double, double>> wx;
    std::vector<double> attempts_per_block(blocks.size(), 0.0);
    for (const auto& d : draws) {
      out.draws += d.attempts;
      for (std::size_t b = 0; b < blocks.size(); ++b) attempts_per_block[b] += static_cast<double>(d.block_attempts[b]);
      if (!d.accepted)
        throw NumericalError("blockwise sampler exhausted " + std::to_string(per_sample_cap) +
                             " attempts for one block (max_draws " + std::to_string(max_draws) + ")");
      ++out.accepted;
      wx.emplace_back(1.0, d.eta_m);
      hits += d.in_window;
      out.window_misses += !d.in_window;
      out.certificate_failures += !d.certified;
    }
    const double n = static_cast<double>(out.accepted);
    out.estimate = hits / n;
    out.stderr_ = std::sqrt(out.estimate * (1.0 - out.estimate) / n);
    // Event probability = product of block acceptance probabilities; the mean
    // attempt count per block estimates 1/p_b.
    out.acceptance_rate = 1.0;
    for (double t : attempts_per_block) out.acceptance_rate *= n / t;
    out.ess = n;
    weighted_moments(out, wx);
    return out;
  }

  out.sampler = "sequential";
  const auto rows = row_terms(layout);
  std::vector<std::size_t> order(nv - 1);
  std::iota(order.begin(), order.end(), 1);
  const auto& pts = layout.volume.points();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const int dx = l1_distance(pts[x], m), dy = l1_distance(pts[y], m);
    return dx != dy ? dx < dy : pts[x] < pts[y];
  });
  const auto& mu = sampler.measure();
  const auto draws = par::map(n_target, [&](std::size_t i) {
    rng::Stream rs(seed, i, rng::Tag::Conditional);
    std::vector<double> omega(nc, 0.0);
    std::vector<char> set(nc, 0);
    Draw d;
    d.accepted = true;
    for (auto r : order) {
      std::vector<std::size_t> fresh;
      double partial = 0.0;
      for (std::size_t q = 0; q < rows[r].couplings.size(); ++q) {
        const auto c = rows[r].couplings[q];
        if (set[c]) partial += omega[c] * rows[r].weights[q];
        else fresh.push_back(q);
      }
      const auto [lo, hi] = setup.windows[r - 1];
      if (fresh.empty()) {
        if (partial < lo || partial > hi) d.weight = 0.0;
        continue;
      }
      for (std::size_t f = 0; f + 1 < fresh.size(); ++f) {
        const auto q = fresh[f];
        const auto c = rows[r].couplings[q];
        omega[c] = mu.sample(rs);
        set[c] = 1;
        partial += omega[c] * rows[r].weights[q];
      }
      const auto q = fresh.back();
      const auto c = rows[r].couplings[q];
      const double w = rows[r].weights[q];
      double x0 = (lo - partial) / w, x1 = (hi - partial) / w;
      if (x0 > x1) std::swap(x0, x1);
      const double F0 = mu.cdf_left(x0), F1 = mu.cdf(x1);
      const double mass = F1 - F0;
      set[c] = 1;
      if (!(mass > 0.0)) {
        d.weight = 0.0;
        omega[c] = std::clamp(0.5 * (x0 + x1), mu.support().first, mu.support().second);
        continue;
      }
      d.weight *= mass;
      const double uu = std::clamp(F0 + rs.uniform() * mass, 1e-300, 1.0 - 1e-16);
      omega[c] = std::clamp(mu.quantile(uu), x0, x1);
    }
    for (std::size_t c = 0; c < nc; ++c)
      if (!set[c]) omega[c] = mu.sample(rs);
    std::vector<double> eta(nv);
    sampler.convolve(omega, eta);
    finish_draw(d, omega, eta);
    return d;
  });
  double sw = 0, sw2 = 0, swf = 0;
  std::vector<std::pair<double, double>> wx;
  for (const auto& d : draws) {
    wx.emplace_back(d.weight, d.eta_m);
    sw += d.weight;
    sw2 += d.weight * d.weight;
    swf += d.weight * d.in_window;
    out.certificate_failures += (d.weight > 0 && !d.certified);
    out.window_misses += (d.weight > 0 && !d.in_window);
    out.accepted += d.weight > 0;
  }
  out.draws = n_target;
  if (!(sw > 0.0)) throw NumericalError("sequential sampler: every importance weight vanished");
  out.estimate = swf / sw;
  double var = 0.0;
  for (const auto& d : draws) var += d.weight * d.weight * std::pow(d.in_window - out.estimate, 2);
  out.stderr_ = std::sqrt(var) / sw;
  out.ess = sw * sw / sw2;
  out.acceptance_rate = sw / static_cast<double>(n_target);
  weighted_moments(out, wx);
  return out;
}

CertificateReport theta1_certificate(const SingleSitePotential& u, double delta, double delta_prime,
                                     const std::function<double(int)>& coupling) {
  require(u.contiguous_from_zero(), "certificate needs d = 1 and Theta = {0,...,n-1}");
  require(delta_prime > 0.0 && delta >= delta_prime, "certificate needs delta >= delta' > 0");
  const int n = static_cast<int>(u.size());
  const double s_plus = u.s_plus();
  auto eta_at = [&](int k) {
    double s = 0.0;
    for (const auto& e : u.entries()) s += e.value * coupling(k - e.site[0]);
    return s;
  };
  const double tol = 1e-12;
  for (int k : {-1, n - 1}) {
    const double v = eta_at(k);
    require(v >= s_plus - delta_prime - tol && v <= s_plus + tol,
            "realization does not satisfy the conditioning event at site " + std::to_string(k));
  }
  CertificateReport rep;
  rep.s_plus = s_plus;
  const auto theta1 = *u.theta1();
  for (int k : theta1) rep.m += u.at(Site{k});
  rep.c = n * u.u_max() / u.u_min();
  const double r = delta_prime / u.u_min();
  const std::pair<double, double> high{1.0 - r, 1.0}, low{0.0, r};
  auto check = [&](const char* step, int site, std::pair<double, double> iv) {
    const double v = coupling(site);
    if (v < iv.first - tol || v > iv.second + tol) {
      rep.passed = false;
      rep.violations.push_back({step, site, v, iv.first, iv.second});
    }
  };
  for (const auto& e : u.entries()) {
    const int k = e.site[0];
    check("proof1", -1 - k, e.value > 0 ? high : low);
    check("proof2", n - 1 - k, e.value > 0 ? high : low);
  }
  for (int k = 0; k < n; ++k) {
    const bool in1 = std::binary_search(theta1.begin(), theta1.end(), k);
    check("proof3", -k, in1 ? high : low);
  }
  rep.eta0 = eta_at(0);
  const double half = rep.c * delta_prime;
  if (rep.eta0 < rep.m - half - tol || rep.eta0 > rep.m + half + tol) {
    rep.passed = false;
    rep.violations.push_back({"final", 0, rep.eta0, rep.m - half, rep.m + half});
  }
  return rep;
}

CertificateReport theta1_certificate(const SingleSitePotential& u, double delta, double delta_prime,
                                     const AlloyFieldRealization& field) {
  return theta1_certificate(u, delta, delta_prime, coupling_lookup(*field.layout, field.couplings));
}

GaussianConditional gaussian_condition_general(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                               const Eigen::VectorXd& a, const Eigen::MatrixXd& B,
                                               const Eigen::VectorXd& v) {
  const auto n = mean.size();
  require(cov.rows() == n && cov.cols() == n, "covariance shape mismatch");
  require(a.size() == n, "weight vector length mismatch");
  require(B.rows() == 0 || B.cols() == n, "constraint matrix shape mismatch");
  require(v.size() == B.rows(), "observed vector length mismatch");
  GaussianConditional g;
  g.formula = "schur-complement";
  const Eigen::VectorXd Sa = cov * a;
  g.mean = a.dot(mean);
  g.variance = a.dot(Sa);
  if (B.rows() == 0) return g;
  const Eigen::MatrixXd S = B * cov * B.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw NumericalError("singular constraint covariance: smallest eigenvalue " + std::to_string(lmin));
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  const Eigen::VectorXd cyw = B * Sa;  // cov(W, Y)
  g.mean += cyw.dot(llt.solve(v - B * mean));
  g.variance -= cyw.dot(llt.solve(cyw));
  return g;
}

double s_sequence(int l, double u) {
  require(l >= 0, "l must be nonnegative");
  if (l == 0) return 1.0;
  const double u2 = u * u;
  double prev = 1.0, cur = 1.0 + u2;
  for (int k = 2; k <= l; ++k) {
    const double next = (1.0 + u2) * cur - u2 * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

GaussianConditional gaussian_condition_alloy_reference(double u, double sigma, int l, int m,
                                                       const std::vector<double>& v_plus,
                                                       const std::vector<double>& v_minus) {
  require(l >= 0 && m >= 0, "l and m must be nonnegative");
  require(static_cast<int>(v_plus.size()) == l && static_cast<int>(v_minus.size()) == m,
          "v_plus must have l entries and v_minus m entries");
  // X = (omega_{-m}, ..., omega_{l+1}); omega_j sits at index j + m.
  const int n = l + m + 2;
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd cov = sigma * sigma * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  a[m] = 1.0;
  a[m + 1] = u;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(l + m, n);
  Eigen::VectorXd v(l + m);
  int row = 0;
  for (int k = -m; k <= -1; ++k, ++row) {
    B(row, k + m) = 1.0;
    B(row, k + 1 + m) = u;
    v[row] = v_minus[static_cast<std::size_t>(k + m)];
  }
  for (int k = 1; k <= l; ++k, ++row) {
    B(row, k + m) = 1.0;
    B(row, k + 1 + m) = u;
    v[row] = v_plus[static_cast<std::size_t>(k - 1)];
  }
  auto g = gaussian_condition_general(mean, cov, a, B, v);
  g.formula = "schur-complement on the explicit coupling vector";
  return g;
}

GaussianConditional gaussian_condition_alloy(double u, double sigma, int l, int m, const std::vector<double>& v_plus,
                                             const std::vector<double>& v_minus) {
  require(l >= 0 && m >= 0, "l and m must be nonnegative");
  require(sigma > 0.0, "sigma must be positive");
  require(static_cast<int>(v_plus.size()) == l && static_cast<int>(v_minus.size()) == m,
          "v_plus must have l entries and v_minus m entries");
  std::vector<double> D(static_cast<std::size_t>(std::max(l, m)) + 1);
  for (std::size_t k = 0; k < D.size(); ++k) D[k] = s_sequence(static_cast<int>(k), u);
  GaussianConditional g;
  g.formula = "closed form, s_l = sum_{i=0}^{l} u(-1)^{2i}";
  g.variance = sigma * sigma * (u * u - 1.0 + 1.0 / D[m] + 1.0 / D[l]);
  double acc = 0.0;
  // (T_m^{-1})(m,i) = (-u)^{m-i} D_{i-1} / D_m
  for (int i = 1; i <= m; ++i) acc += std::pow(-u, m - i) * D[i - 1] / D[m] * v_minus[i - 1];
  // (T_l^{-1})(1,i) = (-u)^{i-1} D_{l-i} / D_l
  for (int i = 1; i <= l; ++i) acc += std::pow(-u, i - 1) * D[l - i] / D[l] * v_plus[i - 1];
  g.mean = u * acc;
  const auto ref = gaussian_condition_alloy_reference(u, sigma, l, m, v_plus, v_minus);
  const double scale_v = 1.0 + std::abs(ref.variance), scale_m = 1.0 + std::abs(ref.mean);
  if (std::abs(ref.variance - g.variance) > 1e-8 * scale_v || std::abs(ref.mean - g.mean) > 1e-8 * scale_m)
    throw NumericalError("closed-form Gaussian conditional disagrees with the general formula (variance " +
                         std::to_string(g.variance) + " vs " + std::to_string(ref.variance) + ")");
  return g;
}

Eigen::MatrixXd al_product(int l, double u) {
  require(l >= 1, "l must be positive");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(l, l + 1);
  for (int i = 0; i < l; ++i) {
    A(i, i) = 1.0;
    A(i, i + 1) = u;
  }
  return A * A.transpose();
}

AlIdentities al_identities(int l, double u) {
  const Eigen::MatrixXd T = al_product(l, u);
  AlIdentities r;
  r.det = T.determinant();
  r.s_recurrence = s_sequence(l, u);
  for (int i = 1; i <= l; ++i) r.s_literal += std::pow(u, 2 * i);
  const Eigen::MatrixXd inv = T.llt().solve(Eigen::MatrixXd::Identity(l, l));
  r.inv_11 = inv(0, 0);
  r.inv_ll = inv(l - 1, l - 1);
  r.inv_11_closed = s_sequence(l - 1, u) / r.s_recurrence;
  return r;
}

}  // namespace alloy
