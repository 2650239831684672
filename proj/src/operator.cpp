#include "alloy/operator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "alloy/error.hpp"

namespace alloy {

FiniteVolumeOperator::FiniteVolumeOperator(std::shared_ptr<const FiniteVolume> volume, std::vector<double> diagonal,
                                           double lambda)
    : volume_(std::move(volume)), diag_(std::move(diagonal)), lambda_(lambda) {
  require(volume_ != nullptr, "operator needs a volume");
  require(diag_.size() == volume_->size(), "diagonal length differs from volume size");
}

FiniteVolumeOperator assemble(const AlloyFieldRealization& field, double lambda) {
  require(field.layout != nullptr, "field has no layout");
  std::vector<double> diag(field.eta.size());
  for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = lambda * field.eta[i];
  return FiniteVolumeOperator(std::shared_ptr<const FiniteVolume>(field.layout, &field.layout->volume), std::move(diag),
                              lambda);
}

double FiniteVolumeOperator::norm_bound() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    m = std::max(m, std::abs(diag_[i]) + static_cast<double>(volume_->neighbours(i).size()));
  return m;
}

Eigen::MatrixXd FiniteVolumeOperator::dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    M(i, i) = diag_[static_cast<std::size_t>(i)];
    for (auto j : volume_->neighbours(static_cast<std::size_t>(i))) M(i, j) = -1.0;
  }
  return M;
}

Eigen::SparseMatrix<double> FiniteVolumeOperator::sparse() const {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < size(); ++i) {
    t.emplace_back(i, i, diag_[i]);
    for (auto j : volume_->neighbours(i)) t.emplace_back(i, j, -1.0);
  }
  Eigen::SparseMatrix<double> M(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

std::size_t FiniteVolumeOperator::count_below(double E) const {
  const std::size_t n = size();
  if (volume_->is_chain()) {
    // Sturm sequence of the LDL^T pivots.
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      q = (diag_[i] - E) - (i ? 1.0 / q : 0.0);
      if (q == 0.0) q = tiny;
      if (q < 0.0) ++count;
    }
    return count;
  }
  Eigen::SparseMatrix<double> M = sparse();
  for (Eigen::Index i = 0; i < M.rows(); ++i) M.coeffRef(i, i) -= E;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(M);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("LDL^T factorization of H - E failed at E = " + std::to_string(E));
  const Eigen::VectorXd D = ldlt.vectorD();
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < D.size(); ++i)
    if (D[i] < 0.0) ++count;
  return count;
}

void FiniteVolumeOperator::write_csv(std::ostream& os) const {
  os << "row,col,value\n";
  os.precision(17);
  for (std::size_t i = 0; i < size(); ++i) {
    auto nb = volume_->neighbours(i);
    std::size_t k = 0;
    for (; k < nb.size() && nb[k] < i; ++k) os << i << ',' << nb[k] << ",-1\n";
    os << i << ',' << i << ',' << diag_[i] << '\n';
    for (; k < nb.size(); ++k) os << i << ',' << nb[k] << ",-1\n";
  }
}

namespace {

std::string condition_report(const FiniteVolumeOperator& H) {
  std::ostringstream os;
  os << "size " << H.size() << ", norm bound " << H.norm_bound();
  return os.str();
}

Eigen::VectorXd chain_diag(const FiniteVolumeOperator& H) {
  return Eigen::Map<const Eigen::VectorXd>(H.diagonal().data(), static_cast<Eigen::Index>(H.size()));
}

}  // namespace

SpectralDecomposition eigen(const FiniteVolumeOperator& H) {
  require(H.size() <= kDenseLimit, "full eigendecomposition limited to " + std::to_string(kDenseLimit) + " sites");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (H.volume().is_chain() && H.size() > 1) {
    Eigen::VectorXd sub = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(H.size()) - 1, -1.0);
    es.computeFromTridiagonal(chain_diag(H), sub, Eigen::ComputeEigenvectors);
  } else {
    es.compute(H.dense(), Eigen::ComputeEigenvectors);
  }
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge (" + condition_report(H) + ")");
  return {es.eigenvalues(), es.eigenvectors()};
}

std::vector<double> eigenvalues(const FiniteVolumeOperator& H) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (H.volume().is_chain()) {
    if (H.size() == 1) return {H.diagonal()[0]};
    Eigen::VectorXd sub = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(H.size()) - 1, -1.0);
    es.computeFromTridiagonal(chain_diag(H), sub, Eigen::EigenvaluesOnly);
  } else {
    require(H.size() <= kDenseLimit,
            "all eigenvalues of a volume above " + std::to_string(kDenseLimit) + " sites: use eigenvalues_in");
    es.compute(H.dense(), Eigen::EigenvaluesOnly);
  }
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge (" + condition_report(H) + ")");
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

std::vector<double> eigenvalues_in(const FiniteVolumeOperator& H, double lo, double hi, double tol) {
  require(lo < hi, "empty energy window");
  require(tol > 0, "bisection tolerance must be positive");
  std::vector<double> out;
  std::function<void(double, double, std::size_t, std::size_t)> split = [&](double a, double b, std::size_t ca,
                                                                            std::size_t cb) {
    if (cb == ca) return;
    if (b - a <= tol) {
      out.insert(out.end(), cb - ca, 0.5 * (a + b));
      return;
    }
    const double m = 0.5 * (a + b);
    const std::size_t cm = H.count_below(m);
    split(a, m, ca, cm);
    split(m, b, cm, cb);
  };
  split(lo, hi, H.count_below(lo), H.count_below(hi));
  return out;
}

Resolvent::Resolvent(const FiniteVolumeOperator& H, cplx z) : H_(&H), z_(z) {
  const std::size_t n = H.size();
  if (H.volume().is_chain()) {
    piv_.resize(n);
    low_.resize(n);
    const double scale = std::max(1.0, H.norm_bound());
    chain_ = true;
    for (std::size_t i = 0; i < n; ++i) {
      low_[i] = i ? -1.0 / piv_[i - 1] : 0.0;
      piv_[i] = (H.diagonal()[i] - z) + low_[i];
      if (std::abs(piv_[i]) < 1e-13 * scale) {
        chain_ = false;
        break;
      }
    }
    if (chain_) return;
  }
  Eigen::SparseMatrix<cplx> M = H.sparse().cast<cplx>();
  for (Eigen::Index i = 0; i < M.rows(); ++i) M.coeffRef(i, i) -= z;
  M.makeCompressed();
  lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<cplx>>>();
  lu_->analyzePattern(M);
  lu_->factorize(M);
  if (lu_->info() != Eigen::Success) throw NumericalError("resolvent singular: LU of H - z failed");
}

Eigen::VectorXcd Resolvent::column(std::size_t y) const {
  const auto n = static_cast<Eigen::Index>(H_->size());
  require(y < H_->size(), "column index outside volume");
  if (chain_) {
    Eigen::VectorXcd w = Eigen::VectorXcd::Zero(n);
    w[static_cast<Eigen::Index>(y)] = 1.0;
    for (Eigen::Index i = static_cast<Eigen::Index>(y) + 1; i < n; ++i) w[i] = -low_[i] * w[i - 1];
    w[n - 1] /= piv_[n - 1];
    for (Eigen::Index i = n - 2; i >= 0; --i) w[i] = (w[i] + w[i + 1]) / piv_[i];
    return w;
  }
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n);
  b[static_cast<Eigen::Index>(y)] = 1.0;
  Eigen::VectorXcd w = lu_->solve(b);
  if (!w.allFinite()) throw NumericalError("resolvent singular: non-finite solution");
  return w;
}

void require_off_spectrum(const FiniteVolumeOperator& H, double E) {
  const double tol = 1e-12 * std::max(1.0, H.norm_bound());
  if (H.count_below(E - tol) != H.count_below(E + tol))
    throw NumericalError("resolvent singular: eigenvalue within " + std::to_string(tol) + " of E = " +
                         std::to_string(E));
}

cplx green(const FiniteVolumeOperator& H, cplx z, const Site& x, const Site& y) {
  const auto ix = H.volume().index_of(x);
  const auto iy = H.volume().index_of(y);
  if (!ix || !iy) return 0.0;
  if (z.imag() == 0.0) require_off_spectrum(H, z.real());
  return Resolvent(H, z).column(*iy)[static_cast<Eigen::Index>(*ix)];
}

Eigen::VectorXcd resolvent_column(const FiniteVolumeOperator& H, cplx z, const Site& y) {
  const auto iy = H.volume().index_of(y);
  require(iy.has_value(), "site " + to_string(y) + " outside the volume");
  if (z.imag() == 0.0) require_off_spectrum(H, z.real());
  return Resolvent(H, z).column(*iy);
}

Eigen::VectorXcd resolvent_diagonal(const FiniteVolumeOperator& H, cplx z) {
  const auto n = static_cast<Eigen::Index>(H.size());
  if (z.imag() == 0.0) require_off_spectrum(H, z.real());
  Eigen::VectorXcd g(n);
  if (H.volume().is_chain()) {
    const auto& a = H.diagonal();
    std::vector<cplx> left(static_cast<std::size_t>(n), 0.0), right(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = 1; i < n; ++i) left[i] = 1.0 / (a[i - 1] - z - left[i - 1]);
    for (Eigen::Index i = n - 2; i >= 0; --i) right[i] = 1.0 / (a[i + 1] - z - right[i + 1]);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = 1.0 / (a[i] - z - left[i] - right[i]);
    if (!g.allFinite()) throw NumericalError("resolvent singular: continued fraction broke down");
    return g;
  }
  Resolvent R(H, z);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = R.column(static_cast<std::size_t>(i))[i];
  return g;
}

double resolvent_identity_residual(const FiniteVolumeOperator& H, double E, const Site& x, const Site& y) {
  require(x != y, "resolvent identity residual needs x != y");
  const auto ix = H.volume().index_of(x);
  const auto iy = H.volume().index_of(y);
  require(ix && iy, "x and y must lie in the volume");
  require_off_spectrum(H, E);
  // G is symmetric, so the column at x holds G(E;x,.).
  const Eigen::VectorXcd w = Resolvent(H, E).column(*ix);
  cplx hop = 0.0;
  for (auto j : H.volume().neighbours(*iy)) hop += w[j];
  const cplx gxy = w[static_cast<Eigen::Index>(*iy)];
  return std::abs(hop - (H.diagonal()[*iy] - E) * gxy) / (1.0 + std::abs(gxy));
}

void write_eigenvalues_csv(std::ostream& os, const std::vector<double>& eigenvalues) {
  os << "index,eigenvalue\n";
  os.precision(17);
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) os << i << ',' << eigenvalues[i] << '\n';
}

}  // namespace alloy
