#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alloy/measure.hpp"
#include "alloy/model.hpp"

namespace alloy {

struct AprioriConstants {
  double c = 0.0;
  double C = 0.0;
  double bound_coefficient = 0.0;
  double s = 0.5;

  /// sup_{x,y} E|G(z;x,y)|^s <= bound_coefficient / lambda^s
  double bound(double lambda) const;
};

/// Requires u_bar > 0, s in (0,1), finite ||rho'||_1 and diam Theta > 0.
AprioriConstants apriori_constants(const SingleSitePotential& u, double s, const DensityNorms& norms,
                                   Metric metric = Metric::L1);

/// (8 / u_bar^s) s^{-s} / (1-s) ||rho'||^s C^s for precomputed c, C.
double apriori_coefficient(double u_bar, double s, double rho_d1, double C);

struct WegnerOrder {
  int N = 0;
  std::vector<int> multi_index;  // I_0
  double c_u = 0.0;              // (D^{I_0} F)(1)
};

/// Smallest |I| with (D^I F)(1) != 0 for F(z) = sum_k u(-k) z^k.
WegnerOrder wegner_order(const SingleSitePotential& u, int max_order);

struct CuNorm {
  double value = 0.0;
  double previous = 0.0;
  int grid = 0;  // points per dimension of the final Fourier grid
  double min_symbol = 0.0;
};

/// min |u^(theta)| over an M^d grid of the torus.
double symbol_min_modulus(const SingleSitePotential& u, int grid);

/// ||A^{-1}||_1 for the convolution operator A(j,k) = u(j-k) on l^1(Z^d).
///
/// The inverse kernel is the Fourier series of 1/u^; its l^1 norm is
/// evaluated on FFT grids of doubling size until two successive values agree
/// to 1e-6 relative. truncation_radius bounds the largest grid (2R+1 points
/// per dimension, rounded up to a power of two).
CuNorm cu_norm(const SingleSitePotential& u, int truncation_radius);

/// C_u^2 / 4 max(||rho'||^2, ||rho''||)
double c_min(double cu, const DensityNorms& norms);

/// Same as mu.norms(); rejects measures without a density.
DensityNorms density_norms(const CouplingMeasure& mu);

/// Constants of a model; a field is empty when undefined, with the reason kept.
struct DerivedConstants {
  double u_bar = 0.0;
  std::optional<double> c, C, apriori_coefficient;
  std::optional<int> N;
  std::optional<double> C_u, C_Min;
  std::optional<double> alpha, C1;
  std::optional<DensityNorms> rho_norms;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

DerivedConstants derive_constants(const AlloyModel& model, double s, int max_order = 8, int truncation_radius = 4096);

}  // namespace alloy
