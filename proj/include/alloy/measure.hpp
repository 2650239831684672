#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alloy/rng.hpp"

namespace alloy {

/// L^1 norms of density derivatives and the total variation of the density.
/// Entries are +inf when the density lacks the corresponding regularity.
struct DensityNorms {
  double d1 = 0.0;     // ||rho'||_1
  double d2 = 0.0;     // ||rho''||_1
  double var = 0.0;    // ||rho||_Var
  double error = 0.0;  // estimated error (nonzero only for grid densities)
};

/// Law of the i.i.d. couplings omega_i.
class CouplingMeasure {
 public:
  enum class Kind { Uniform, Gaussian, Bernoulli, RaisedCosine, Custom };

  static CouplingMeasure uniform(double a, double b);
  static CouplingMeasure gaussian(double mean, double variance);
  /// P(omega = high) = p, P(omega = low) = 1 - p.
  static CouplingMeasure bernoulli(double p, double low, double high);
  /// Density (1 - cos(2 pi (x-a)/(b-a))) / (b-a) on [a,b]: a W^{2,1} bump.
  static CouplingMeasure raised_cosine(double a, double b);
  /// Piecewise-linear density through (x_i, rho_i) on a uniform grid,
  /// renormalised to unit mass.
  static CouplingMeasure custom(std::vector<double> grid, std::vector<double> density);

  Kind kind() const noexcept { return kind_; }
  std::string kind_name() const;

  /// Closed support [lower, upper]; may be infinite.
  std::pair<double, double> support() const;
  bool has_density() const noexcept { return kind_ != Kind::Bernoulli; }

  double density(double x) const;
  double cdf(double x) const;                        // mu((-inf, x])
  double cdf_left(double x) const;                   // mu((-inf, x))
  double mass(double lo, double hi) const;           // mu([lo, hi])
  double quantile(double u) const;                   // generalized inverse, u in (0,1)
  double sample(rng::Stream& stream) const { return quantile(stream.uniform()); }
  double mean() const;

  DensityNorms norms() const;
  double sup_density() const;

  /// Raw integral of a custom grid density before normalisation.
  double custom_raw_mass() const noexcept { return raw_mass_; }

  nlohmann::json to_json() const;
  static CouplingMeasure from_json(const nlohmann::json& j);

 private:
  CouplingMeasure() = default;

  Kind kind_ = Kind::Uniform;
  double p0_ = 0.0, p1_ = 1.0, p2_ = 0.0;  // kind-specific parameters
  std::vector<double> grid_, dens_, cum_;  // custom density table
  double raw_mass_ = 1.0;
};

/// Result of checking mu([t-eps, t+eps]) <= C1 eps^alpha on a grid.
struct HolderCheck {
  double alpha = 1.0;
  double c1 = 0.0;
  double max_ratio = 0.0;
  double witness_t = 0.0;
  double witness_eps = 0.0;
  bool passed = false;
};

HolderCheck holder_parameters(const CouplingMeasure& mu, double alpha, double c1,
                              const std::vector<double>& eps_grid, int t_points = 2001);

}  // namespace alloy
