#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alloy/field.hpp"
#include "alloy/model.hpp"
#include "alloy/operator.hpp"
#include "alloy/statistics.hpp"

namespace alloy {

/// [-2d + lambda inf eta, 2d + lambda sup eta]; infinite for unbounded couplings.
std::pair<double, double> spectral_enclosure(const AlloyModel& model);

/// Midpoint of the enclosure; lambda * u_bar * E[omega] when it is unbounded.
double band_center(const AlloyModel& model);

/// Samples H_omega on a fixed volume.
class OperatorSampler {
 public:
  OperatorSampler(const AlloyModel& model, FiniteVolume volume);

  const AlloyModel& model() const noexcept { return model_; }
  const FieldSampler& fields() const noexcept { return sampler_; }
  const FiniteVolume& volume() const noexcept { return sampler_.layout().volume; }

  FiniteVolumeOperator sample(std::uint64_t seed, std::uint64_t stream) const;
  FiniteVolumeOperator sample(std::uint64_t seed, std::uint64_t stream, double lambda) const;

 private:
  AlloyModel model_;
  FieldSampler sampler_;
};

Estimate fractional_moment(const AlloyModel& model, const FiniteVolume& volume, cplx z, const Site& x, const Site& y,
                           double s, std::size_t n, std::uint64_t seed);

struct DecayPoint {
  Site y;
  int distance = 0;
  Estimate estimate;
  bool used_in_fit = false;
};

struct DecayProfile {
  std::vector<DecayPoint> points;
  LinearFit fit;  // ln E|G|^s against |x-y|_1
  double rate = 0.0;       // m = -slope
  double prefactor = 0.0;  // C = exp(intercept)
  std::vector<int> dropped_distances;
};

DecayProfile fm_decay_profile(const AlloyModel& model, const FiniteVolume& volume, cplx z, const Site& x,
                              const std::vector<Site>& offsets, double s, std::size_t n, std::uint64_t seed);

struct WegnerResult {
  Estimate crude;                    // mean eigenvalue count in I
  std::optional<Estimate> averaged;  // spectral averaging over each coupling (Anderson chains)
  double reference_product = 0.0;    // lambda^{-1} ||rho||_Var |I| (2L+1)^{2d+N}
  double implied_cw = 0.0;
  int N = 0;
};

WegnerResult wegner_count(const AlloyModel& model, int L, double lo, double hi, std::size_t n, std::uint64_t seed,
                          bool spectral_averaging = true);

struct MinamiResult {
  Estimate crude;
  std::optional<Estimate> averaged;  // conditional expectation over (omega_x, omega_y), Anderson only
  double bound = 0.0;                // (pi/lambda)^2 C_Min, NaN if undefined
  double c_min = 0.0;
  double min_determinant = 0.0;      // smallest per-draw determinant
};

MinamiResult minami_determinant(const AlloyModel& model, const FiniteVolume& volume, cplx z, const Site& x,
                                const Site& y, std::size_t n, std::uint64_t seed, bool rao_blackwell = true);

struct TwoLevelResult {
  Estimate p_two;           // P(Tr chi_I >= 2)
  Estimate factorial_half;  // E(Tr^2 - Tr)/2
  double bound = 0.0;       // (1/2)(pi/lambda)^2 C_Min |I|^2 |Lambda|^2
  bool counting_inequality = true;
};

TwoLevelResult two_level_probability(const AlloyModel& model, const FiniteVolume& volume, double lo, double hi,
                                     std::size_t n, std::uint64_t seed);

struct IdsTable {
  std::vector<double> energies;
  std::vector<double> values;
  std::size_t realizations = 0;
  std::size_t volume_size = 0;

  /// Linear interpolation; rejects energies outside the grid.
  double at(double E) const;
};

IdsTable ids_estimate(const AlloyModel& model, int L, const std::vector<double>& energies, std::size_t n,
                      std::uint64_t seed);

struct PositivityRow {
  double a = 0.0, b = 0.0, eps = 0.0;
  double increment = 0.0;
  double best_c = 0.0;  // increment / eps^{1+kappa}
  bool fails = false;
};

struct PositivityProbe {
  std::vector<PositivityRow> rows;
  std::vector<std::pair<std::pair<double, double>, LinearFit>> slopes;  // log increment vs log eps per window
  bool passed = true;
};

PositivityProbe ids_positivity_probe(const IdsTable& ids, double E0, double kappa,
                                     const std::vector<std::pair<double, double>>& windows,
                                     const std::vector<double>& eps_grid);

struct RescaledSpectrum {
  double E0 = 0.0;
  std::vector<double> xi;
  std::size_t volume_size = 0;
};

RescaledSpectrum rescale_eigenvalues(const std::vector<double>& evals, const IdsTable& ids, double E0,
                                     std::size_t volume_size);

struct PoissonReport {
  std::size_t realizations = 0;
  double window = 0.0;
  double count_mean = 0.0, count_variance = 0.0, variance_to_mean = 0.0;
  KsResult gaps;
  ChiSquareResult counts;
  std::vector<double> gap_bin_edges;
  std::vector<double> gap_histogram;  // normalized density
  std::vector<double> gap_reference;  // Exp(1) density at bin centres
  double empty_window_fraction = 0.0;
  std::vector<std::string> warnings;
  bool ks_pass = false;
  bool variance_pass = false;
};

PoissonReport poisson_statistics(const std::vector<RescaledSpectrum>& spectra, double W, double bin_width);

/// Calibration inputs: i.i.d. Exp(1) gaps, and the rigid lattice xi_j = j.
std::vector<RescaledSpectrum> synthetic_poisson_spectra(std::size_t realizations, double W, std::uint64_t seed);
std::vector<RescaledSpectrum> rigid_lattice_spectra(std::size_t realizations, double W);

Estimate fvc_probability(const AlloyModel& model, int L, double E, double theta_exp, std::size_t n,
                         std::uint64_t seed);

struct InverseMomentResult {
  double integral = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound - integral
  double error = 0.0;
};

InverseMomentResult inverse_moment_check(const CouplingMeasure& mu, double s, double b, double alpha, double c1);

/// (int |Q1/Q2|^{2s} dmu)^{1/2} / int |Q1/Q2|^s dmu; coefficients in ascending order.
double reverse_holder_ratio(const std::vector<double>& q1, const std::vector<double>& q2, const CouplingMeasure& mu,
                            double s, int depth = 15);

struct RecursionRow {
  double lambda = 0.0;
  Estimate lhs;
  Estimate rhs_sum;
  double implied_c = 0.0;
  bool skipped = false;
  double max_residual = 0.0;
};

struct RecursionProbe {
  std::vector<RecursionRow> rows;
  double max_c = 0.0, min_c = 0.0;
  std::size_t redraws = 0;
};

RecursionProbe recursion_probe(const AlloyModel& model, const FiniteVolume& volume, double E, const Site& x,
                               const Site& y, double s, const std::vector<double>& lambdas, std::size_t n,
                               std::uint64_t seed);

}  // namespace alloy
