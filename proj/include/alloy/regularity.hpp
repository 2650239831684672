#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "alloy/field.hpp"
#include "alloy/model.hpp"

namespace alloy {

/// S(eps) of omega_0 + omega_1 for i.i.d. uniform(0,1) couplings.
double concentration_exact_uniform_sum(double eps);

struct ConcentrationEstimate {
  double eps = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;  // binomial standard error at the argmax
  double argmax_a = 0.0;
  std::size_t samples = 0;
  double a_step = 0.0;
};

/// Sorted samples of eta_m for repeated concentration queries.
std::vector<double> sample_eta(const AlloyModel& model, const Site& m, std::size_t n, std::uint64_t seed);

/// max over the grid a = k a_step of the fraction of samples in [a, a+eps].
ConcentrationEstimate concentration_from_samples(const std::vector<double>& sorted, double eps, double a_step);

ConcentrationEstimate concentration_empirical(const AlloyModel& model, const Site& m, double eps, std::size_t n_samples,
                                              double a_step, std::uint64_t seed);

struct ConcentrationCurve {
  std::vector<double> eps, values, stderrs;
  std::string mode;  // "exact" or "empirical"
  std::size_t samples = 0;
  double a_step = 0.0;
};

ConcentrationCurve concentration_curve(const AlloyModel& model, const Site& m, const std::vector<double>& eps_grid,
                                       std::size_t n_samples, double a_step, std::uint64_t seed);

struct ConditioningEvent {
  enum class Kind { None, Band, Pin };
  Kind kind = Kind::None;
  std::vector<Site> sites;
  double lo = 0.0, hi = 0.0;   // band: eta_k in [lo, hi]
  std::vector<double> values;  // pin: |eta_k - v_k| <= tolerance
  double tolerance = 0.0;

  static ConditioningEvent none() { return {}; }
  static ConditioningEvent band(std::vector<Site> sites, double lo, double hi);
  static ConditioningEvent pin(std::vector<Site> sites, std::vector<double> values, double tolerance);

  /// Admissible window for eta at the j-th conditioned site.
  std::pair<double, double> window(std::size_t j) const;
};

enum class ConditionalSampler {
  Rejection,   // joint rejection on the whole event
  Blockwise,   // independent rejection per coupling-disjoint block (exact)
  Sequential,  // sequential importance sampling with truncated pivots
};

struct ConditionalEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double acceptance_rate = 0.0;  // event probability estimate
  std::size_t accepted = 0;
  std::size_t draws = 0;
  double ess = 0.0;
  std::size_t certificate_failures = 0;  // only with certify = true
  std::size_t window_misses = 0;
  double eta_mean = 0.0;      // (weighted) conditional mean of eta_m
  double eta_variance = 0.0;  // (weighted) conditional variance of eta_m
  std::string sampler;
};

struct ConditionalOptions {
  ConditionalSampler sampler = ConditionalSampler::Rejection;
  /// Run theta1_certificate(delta') on every accepted sample.
  bool certify = false;
  double certificate_delta_prime = 0.0;
};

/// P(eta_m in [a, a+eps] | event) by the chosen sampler.
ConditionalEstimate conditional_concentration_mc(const AlloyModel& model, const Site& m, double a, double eps,
                                                 const ConditioningEvent& event, std::size_t n_target,
                                                 std::size_t max_draws, std::uint64_t seed,
                                                 const ConditionalOptions& options = {});

struct CertificateViolation {
  std::string step;  // "proof1", "proof2", "proof3", "final"
  int coupling_site = 0;
  double value = 0.0;
  double lo = 0.0, hi = 0.0;
};

struct CertificateReport {
  bool passed = true;
  double m = 0.0, c = 0.0, s_plus = 0.0;
  double eta0 = 0.0;
  std::vector<CertificateViolation> violations;
};

/// Interval-arithmetic chain for d = 1, Theta = {0..n-1}, couplings in [0,1].
/// `coupling` maps a site index i to omega_i.
CertificateReport theta1_certificate(const SingleSitePotential& u, double delta, double delta_prime,
                                     const std::function<double(int)>& coupling);

CertificateReport theta1_certificate(const SingleSitePotential& u, double delta, double delta_prime,
                                     const AlloyFieldRealization& field);

struct GaussianConditional {
  double mean = 0.0;
  double variance = 0.0;
  std::string formula;
};

/// Law of a.X given B X = v for X ~ N(mean, cov).
GaussianConditional gaussian_condition_general(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                               const Eigen::VectorXd& a, const Eigen::MatrixXd& B,
                                               const Eigen::VectorXd& v);

/// s_l = det(A_l A_l^T) by the tridiagonal recurrence; s_0 = 1.
double s_sequence(int l, double u_minus1);

/// Law of eta_0 given (eta_k)_{k=1..l} = v_plus and (eta_{-m+k-1})_{k=1..m} = v_minus
/// for Theta = {-1,0}, u(0) = 1, omega ~ N(0, sigma^2).
GaussianConditional gaussian_condition_alloy(double u_minus1, double sigma, int l, int m,
                                             const std::vector<double>& v_plus, const std::vector<double>& v_minus);

/// Same conditioning assembled as an explicit general problem.
GaussianConditional gaussian_condition_alloy_reference(double u_minus1, double sigma, int l, int m,
                                                       const std::vector<double>& v_plus,
                                                       const std::vector<double>& v_minus);

struct AlIdentities {
  double det = 0.0;           // numeric det(A_l A_l^T)
  double s_recurrence = 0.0;  // sum_{i=0}^{l} u^{2i}
  double s_literal = 0.0;     // sum_{i=1}^{l} u^{2i}
  double inv_11 = 0.0, inv_ll = 0.0;
  double inv_11_closed = 0.0;  // s_{l-1} / s_l
};

AlIdentities al_identities(int l, double u_minus1);

/// A_l A_l^T: diagonal 1 + u^2, off-diagonal u.
Eigen::MatrixXd al_product(int l, double u_minus1);

}  // namespace alloy
