#include "alloy/statistics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "alloy/error.hpp"

namespace alloy {

nlohmann::json Estimate::to_json() const {
  return {{"value", value}, {"stderr", stderr_}, {"n", n_samples}, {"seed", master_seed}, {"metadata", metadata}};
}

Estimate estimate_mean(const std::vector<double>& xs, std::uint64_t seed) {
  require(!xs.empty(), "estimate needs at least one sample");
  Estimate e;
  e.n_samples = xs.size();
  e.master_seed = seed;
  double s = 0.0;
  for (double x : xs) s += x;
  e.value = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - e.value) * (x - e.value);
    v /= static_cast<double>(xs.size() - 1);
    e.stderr_ = std::sqrt(v / static_cast<double>(xs.size()));
  }
  return e;
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "fit inputs differ in length");
  require(x.size() >= 2, "fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0, "fit needs distinct abscissae");
  LinearFit f;
  f.n = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // Jacobi theta form converges fast for small x.
    const double t = -M_PI * M_PI / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k <= 9; k += 2) s += std::exp(t * k * k);
    return 1.0 - std::sqrt(2.0 * M_PI) / x * s;
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  require(!sample.empty(), "KS test needs samples");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  KsResult r;
  r.n = sample.size();
  r.statistic = d;
  // Stephens' finite-n correction of the asymptotic law.
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
  r.critical_1pct = 1.6276 / (sn + 0.12 + 0.11 / sn);
  return r;
}

ChiSquareResult chi_square_poisson(const std::vector<std::size_t>& counts, double mean, int estimated_parameters) {
  require(!counts.empty(), "chi-square needs counts");
  require(mean > 0.0, "Poisson mean must be positive");
  const double n = static_cast<double>(counts.size());
  std::size_t kmax = *std::max_element(counts.begin(), counts.end());
  std::vector<double> obs(kmax + 1, 0.0);
  for (auto c : counts) obs[c] += 1.0;
  boost::math::poisson_distribution<> pois(mean);
  std::vector<double> exp(kmax + 1);
  for (std::size_t k = 0; k <= kmax; ++k) exp[k] = n * boost::math::pdf(pois, static_cast<double>(k));
  exp[kmax] = kmax == 0 ? n : n * boost::math::cdf(boost::math::complement(pois, static_cast<double>(kmax - 1)));
  // Pool adjacent bins left to right until each expects >= 5.
  ChiSquareResult r;
  double po = 0, pe = 0;
  for (std::size_t k = 0; k <= kmax; ++k) {
    po += obs[k];
    pe += exp[k];
    if (pe >= 5.0) {
      r.observed.push_back(po);
      r.expected.push_back(pe);
      po = pe = 0;
    }
  }
  if (pe > 0 || po > 0) {
    if (r.expected.empty()) {
      r.observed.push_back(po);
      r.expected.push_back(pe);
    } else {
      r.observed.back() += po;
      r.expected.back() += pe;
    }
  }
  for (std::size_t i = 0; i < r.observed.size(); ++i)
    r.statistic += (r.observed[i] - r.expected[i]) * (r.observed[i] - r.expected[i]) / r.expected[i];
  r.dof = static_cast<int>(r.observed.size()) - 1 - estimated_parameters;
  if (r.dof >= 1) {
    boost::math::chi_squared_distribution<> chi(r.dof);
    r.p_value = boost::math::cdf(boost::math::complement(chi, r.statistic));
  } else {
    r.p_value = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace alloy
