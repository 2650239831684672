#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "alloy/error.hpp"
#include "alloy/operator.hpp"
#include "helpers.hpp"

using namespace alloy;

namespace {

FiniteVolumeOperator chain(std::vector<double> diag) {
  const int n = static_cast<int>(diag.size());
  std::vector<Site> pts;
  for (int i = 0; i < n; ++i) pts.push_back(Site{i});
  return {std::make_shared<const FiniteVolume>(FiniteVolume::explicit_points(1, pts)), std::move(diag)};
}

FiniteVolumeOperator random_operator(const FiniteVolume& vol, std::uint64_t seed, double lambda = 2.0) {
  const auto f = sample_field(SingleSitePotential::delta(vol.dimension()), CouplingMeasure::uniform(-1.0, 1.0), vol,
                              seed, 0);
  return assemble(f, lambda);
}

}  // namespace

TEST_SUITE("operator") {

TEST_CASE("free chain spectrum") {
  const int n = 12;
  const auto ev = eigenvalues(chain(std::vector<double>(n, 0.0)));
  for (int k = 1; k <= n; ++k)
    CHECK(ev[k - 1] == doctest::Approx(-2.0 * std::cos(k * std::numbers::pi / (n + 1))).epsilon(1e-12));
}

TEST_CASE("free square spectrum") {
  const auto vol = std::make_shared<const FiniteVolume>(FiniteVolume::box(2, 2));
  const FiniteVolumeOperator H(vol, std::vector<double>(vol->size(), 0.0));
  std::vector<double> expect;
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 5; ++b)
      expect.push_back(-2.0 * std::cos(a * std::numbers::pi / 6) - 2.0 * std::cos(b * std::numbers::pi / 6));
  std::sort(expect.begin(), expect.end());
  const auto ev = eigenvalues(H);
  REQUIRE(ev.size() == expect.size());
  for (std::size_t i = 0; i < ev.size(); ++i) CHECK(ev[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("dense and sparse assembly agree") {
  const auto H = random_operator(FiniteVolume::box(2, 3), 5);
  const Eigen::MatrixXd S(H.sparse());
  CHECK((H.dense() - S).norm() == 0.0);
  CHECK((H.dense() - H.dense().transpose()).norm() == 0.0);
  CHECK(H.dense().cwiseAbs().rowwise().sum().maxCoeff() <= H.norm_bound() + 1e-12);
}

TEST_CASE("diagonal is lambda eta") {
  const auto vol = FiniteVolume::box(1, 4);
  const auto f = sample_field(SingleSitePotential::delta(1), CouplingMeasure::uniform(0.0, 1.0), vol, 3, 1);
  const auto H = assemble(f, 2.5);
  for (std::size_t i = 0; i < vol.size(); ++i) CHECK(H.diagonal()[i] == doctest::Approx(2.5 * f.eta[i]));
}

TEST_CASE("two-site green function") {
  const auto H = chain({0.3, -0.7});
  const cplx z(0.1, 0.2);
  const cplx det = (0.3 - z) * (-0.7 - z) - 1.0;
  CHECK(std::abs(green(H, z, Site{0}, Site{0}) - (-0.7 - z) / det) < 1e-14);
  CHECK(std::abs(green(H, z, Site{0}, Site{1}) - 1.0 / det) < 1e-14);
  CHECK(std::abs(green(H, z, Site{1}, Site{1}) - (0.3 - z) / det) < 1e-14);
  CHECK(green(H, z, Site{0}, Site{5}) == cplx(0.0));
}

TEST_CASE("resolvent column against a dense inverse") {
  for (const auto& vol : {FiniteVolume::box(1, 6), FiniteVolume::box(2, 2)}) {
    const auto H = random_operator(vol, 17);
    const cplx z(0.2, 0.05);
    const Eigen::MatrixXcd R =
        (H.dense().cast<cplx>() - z * Eigen::MatrixXcd::Identity(vol.size(), vol.size())).inverse();
    const auto col = resolvent_column(H, z, vol.point(3));
    CHECK((col - R.col(3)).norm() < 1e-12);
    CHECK((resolvent_diagonal(H, z) - R.diagonal()).norm() < 1e-12);
  }
}

TEST_CASE("eigen decomposition is orthonormal") {
  const auto H = random_operator(FiniteVolume::box(2, 2), 2);
  const auto d = eigen(H);
  const auto n = static_cast<Eigen::Index>(H.size());
  CHECK((d.eigenvectors.transpose() * d.eigenvectors - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-12);
  CHECK((H.dense() * d.eigenvectors - d.eigenvectors * d.eigenvalues.asDiagonal()).norm() < 1e-11);
}

TEST_CASE("inertia count matches the eigenvalues") {
  for (const auto& vol : {FiniteVolume::box(1, 30), FiniteVolume::box(2, 4)}) {
    const auto H = random_operator(vol, 23);
    const auto ev = eigenvalues(H);
    for (double E : {-3.0, -1.1, 0.0, 0.37, 2.5, 9.0}) {
      const auto expect = static_cast<std::size_t>(std::lower_bound(ev.begin(), ev.end(), E) - ev.begin());
      CHECK(H.count_below(E) == expect);
    }
    const auto inside = eigenvalues_in(H, -0.5, 0.8);
    std::vector<double> ref;
    for (double e : ev)
      if (e >= -0.5 && e < 0.8) ref.push_back(e);
    REQUIRE(inside.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(inside[i] == doctest::Approx(ref[i]).epsilon(1e-10));
  }
}

TEST_CASE("resolvent identity holds off the spectrum") {
  const auto H = random_operator(FiniteVolume::box(2, 3), 31);
  CHECK(resolvent_identity_residual(H, 0.123, Site{0, 0}, Site{1, 1}) < 1e-12);
  CHECK_THROWS_AS(resolvent_identity_residual(H, 0.123, Site{0, 0}, Site{0, 0}), ValidationError);
}

TEST_CASE("real energy on the spectrum is rejected") {
  const auto H = chain({0.0, 0.0});
  CHECK_THROWS_AS(require_off_spectrum(H, 1.0), NumericalError);
  CHECK_NOTHROW(require_off_spectrum(H, 0.5));
}

}
