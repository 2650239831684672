#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "alloy/field.hpp"
#include "alloy/volume.hpp"

namespace alloy {

using cplx = std::complex<double>;

/// Dense symmetric storage is used up to this many sites.
inline constexpr std::size_t kDenseLimit = 4096;

/// H = -Delta_Lambda + diag(lambda eta) with Dirichlet truncation.
class FiniteVolumeOperator {
 public:
  FiniteVolumeOperator(std::shared_ptr<const FiniteVolume> volume, std::vector<double> diagonal, double lambda = 1.0);

  const FiniteVolume& volume() const noexcept { return *volume_; }
  std::shared_ptr<const FiniteVolume> volume_ptr() const noexcept { return volume_; }
  std::size_t size() const noexcept { return diag_.size(); }
  const std::vector<double>& diagonal() const noexcept { return diag_; }
  double lambda() const noexcept { return lambda_; }

  /// max row sum of |H|, an upper bound for the operator norm.
  double norm_bound() const;

  Eigen::MatrixXd dense() const;
  Eigen::SparseMatrix<double> sparse() const;

  /// Negative-eigenvalue count of H - E: #{eigenvalues < E}.
  std::size_t count_below(double E) const;

  void write_csv(std::ostream& os) const;  // row,col,value triplets

 private:
  std::shared_ptr<const FiniteVolume> volume_;
  std::vector<double> diag_;
  double lambda_ = 1.0;
};

FiniteVolumeOperator assemble(const AlloyFieldRealization& field, double lambda);

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // nondecreasing
  Eigen::MatrixXd eigenvectors;  // orthonormal columns
};

SpectralDecomposition eigen(const FiniteVolumeOperator& H);

/// All eigenvalues, nondecreasing. Chains use the tridiagonal QR path.
std::vector<double> eigenvalues(const FiniteVolumeOperator& H);

/// Eigenvalues in [lo, hi) by inertia counting and bisection to tol;
/// works for volumes of any size.
std::vector<double> eigenvalues_in(const FiniteVolumeOperator& H, double lo, double hi, double tol = 1e-11);

/// Factorization of H - z for repeated column solves.
class Resolvent {
 public:
  Resolvent(const FiniteVolumeOperator& H, cplx z);

  cplx z() const noexcept { return z_; }
  /// w = (H - z)^{-1} delta_y
  Eigen::VectorXcd column(std::size_t y) const;

 private:
  const FiniteVolumeOperator* H_;
  cplx z_;
  // Chain path: LU of the tridiagonal matrix without pivoting.
  std::vector<cplx> piv_, low_;
  bool chain_ = false;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<cplx>>> lu_;
};

/// G(z;x,y); zero when x or y is outside the volume.
cplx green(const FiniteVolumeOperator& H, cplx z, const Site& x, const Site& y);

/// G(z;x,y) for every site x of the volume.
Eigen::VectorXcd resolvent_column(const FiniteVolumeOperator& H, cplx z, const Site& y);

/// G(z;x,x) for every x; chains use the two-sided continued fraction.
Eigen::VectorXcd resolvent_diagonal(const FiniteVolumeOperator& H, cplx z);

/// |sum_e G(E;x,y+e) - (H_yy - E) G(E;x,y)| / (1 + |G(E;x,y)|), x != y.
double resolvent_identity_residual(const FiniteVolumeOperator& H, double E, const Site& x, const Site& y);

/// Throws NumericalError when some eigenvalue lies within 1e-12 ||H|| of E.
void require_off_spectrum(const FiniteVolumeOperator& H, double E);

void write_eigenvalues_csv(std::ostream& os, const std::vector<double>& eigenvalues);

}  // namespace alloy
