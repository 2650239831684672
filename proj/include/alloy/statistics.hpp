#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

namespace alloy {

/// Sample mean with standard error; the reduction runs in index order.
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t master_seed = 0;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json to_json() const;
};

Estimate estimate_mean(const std::vector<double>& xs, std::uint64_t seed);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double critical_1pct = 0.0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::vector<double> observed, expected;  // pooled bins
};

/// Count histogram against Poisson(mean); bins pooled until expected >= 5.
/// `estimated_parameters` reduces the degrees of freedom.
ChiSquareResult chi_square_poisson(const std::vector<std::size_t>& counts, double mean, int estimated_parameters = 1);

}  // namespace alloy
