#include <doctest.h>

#include <cmath>
#include <numbers>

#include "alloy/error.hpp"
#include "alloy/parallel.hpp"
#include "alloy/spectral.hpp"
#include "helpers.hpp"

using namespace alloy;
using testing::anderson;

TEST_SUITE("spectral") {

TEST_CASE("enclosure and band centre") {
  const auto m = anderson(CouplingMeasure::uniform(0.0, 1.0), 2.0);
  CHECK(spectral_enclosure(m).first == -2.0);
  CHECK(spectral_enclosure(m).second == 4.0);
  CHECK(band_center(m) == 1.0);
  const auto g = anderson(CouplingMeasure::gaussian(0.5, 1.0), 2.0, 2);
  CHECK(std::isinf(spectral_enclosure(g).second));
  CHECK(band_center(g) == 1.0);
}

TEST_CASE("one-site fractional moment against quadrature") {
  const auto m = anderson(CouplingMeasure::uniform(0.0, 1.0), 1.0);
  const cplx z(0.5, 0.1);
  const double s = 0.5;
  const double exact =
      testing::simpson([&](double w) { return std::pow(std::norm(w - z), -s / 2); }, 0.0, 1.0, 20000);
  const auto est = fractional_moment(m, FiniteVolume::box(1, 0), z, Site{0}, Site{0}, s, 20000, 4);
  CHECK(std::abs(est.value - exact) < 4 * est.stderr_);
  CHECK(est.n_samples == 20000);
}

TEST_CASE("fractional moment respects the a-priori bound") {
  const AlloyModel m{testing::chain_potential({1.0, 1.0}), CouplingMeasure::raised_cosine(0.0, 1.0), 4.0};
  const auto est = fractional_moment(m, FiniteVolume::box(1, 6), cplx(1.0, 0.0), Site{0}, Site{2}, 0.5, 2000, 9);
  CHECK(est.metadata.contains("bound"));
  CHECK(est.value <= est.metadata["bound"].get<double>());
}

TEST_CASE("fractional moment rejects s outside (0,1)") {
  const auto m = anderson(CouplingMeasure::uniform(0.0, 1.0), 1.0);
  CHECK_THROWS_AS(fractional_moment(m, FiniteVolume::box(1, 2), cplx(0, 1), Site{0}, Site{0}, 1.0, 10, 1),
                  ValidationError);
}

TEST_CASE("decay rate grows with disorder") {
  std::vector<Site> offsets;
  for (int k = 1; k <= 6; ++k) offsets.push_back(Site{k});
  double prev = 0.0;
  for (double lambda : {3.0, 6.0, 20.0}) {
    const auto m = anderson(CouplingMeasure::uniform(-0.5, 0.5), lambda);
    const auto p = fm_decay_profile(m, FiniteVolume::box(1, 12), cplx(0.0, 0.01), Site{0}, offsets, 0.5, 400, 2);
    CHECK(p.points.size() == 6);
    CHECK(p.rate > prev);
    CHECK(p.fit.r2 > 0.9);
    prev = p.rate;
  }
}

TEST_CASE("wegner estimate on a single site") {
  // one eigenvalue lambda omega with omega ~ U(0,1): E Tr chi_I = |I|
  const auto m = anderson(CouplingMeasure::uniform(0.0, 1.0), 1.0);
  const auto w = wegner_count(m, 0, 0.2, 0.5, 4000, 7);
  REQUIRE(w.averaged.has_value());
  CHECK(w.averaged->value == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(std::abs(w.crude.value - 0.3) < 4 * w.crude.stderr_);
  CHECK(w.N == 0);
}

TEST_CASE("wegner averaged and crude estimators agree on a chain") {
  const auto m = anderson(CouplingMeasure::uniform(-1.0, 1.0), 2.0);
  const auto w = wegner_count(m, 5, -0.3, 0.4, 2000, 12);
  REQUIRE(w.averaged.has_value());
  CHECK(std::abs(w.crude.value - w.averaged->value) < 4 * (w.crude.stderr_ + w.averaged->stderr_));
  CHECK(w.averaged->stderr_ < w.crude.stderr_);
}

TEST_CASE("minami estimators agree") {
  const auto m = anderson(CouplingMeasure::gaussian(0.0, 1.0), 3.0);
  const auto r = minami_determinant(m, FiniteVolume::box(1, 3), cplx(0.2, 0.1), Site{0}, Site{1}, 4000, 5);
  REQUIRE(r.averaged.has_value());
  CHECK(r.min_determinant >= -1e-10);
  CHECK(std::abs(r.crude.value - r.averaged->value) < 5 * (r.crude.stderr_ + r.averaged->stderr_));
  CHECK(r.averaged->value <= r.bound);
}

TEST_CASE("two-level probability") {
  const auto m = anderson(CouplingMeasure::gaussian(0.0, 1.0), 4.0);
  const auto t = two_level_probability(m, FiniteVolume::box(1, 4), -0.5, 0.5, 3000, 6);
  CHECK(t.counting_inequality);
  CHECK(t.p_two.value <= t.factorial_half.value);
  CHECK(t.factorial_half.value <= t.bound);
}

TEST_CASE("free IDS") {
  const auto m = anderson(CouplingMeasure::uniform(0.0, 1.0), 0.0);
  std::vector<double> E;
  for (int i = 0; i <= 40; ++i) E.push_back(-2.0 + 0.1 * i);
  const auto ids = ids_estimate(m, 200, E, 2, 1);
  for (std::size_t i = 0; i < E.size(); ++i)
    CHECK(std::abs(ids.values[i] - std::acos(-E[i] / 2.0) / std::numbers::pi) < 3e-3);
  CHECK(ids.at(0.05) == doctest::Approx(0.5 * (ids.values[20] + ids.values[20 + 1])));
  CHECK_THROWS_AS(ids.at(2.5), ValidationError);
}

TEST_CASE("chain IDS: counting and eigenvalue paths agree") {
  const auto m = anderson(CouplingMeasure::uniform(-1.0, 1.0), 1.5);
  std::vector<double> fine, coarse;
  for (int i = 0; i <= 200; ++i) fine.push_back(-4.0 + 0.04 * i);
  const std::vector<std::size_t> pick{40, 100, 133};
  for (auto i : pick) coarse.push_back(fine[i]);
  const auto a = ids_estimate(m, 10, fine, 30, 3);
  const auto b = ids_estimate(m, 10, coarse, 30, 3);
  for (std::size_t j = 0; j < pick.size(); ++j) CHECK(b.values[j] == a.values[pick[j]]);
}

TEST_CASE("positivity probe") {
  IdsTable lin, flat;
  for (int i = 0; i <= 200; ++i) {
    lin.energies.push_back(-1.0 + 0.01 * i);
    lin.values.push_back(0.005 * i);
  }
  flat.energies = lin.energies;
  flat.values.assign(lin.values.size(), 0.3);
  const auto ok = ids_positivity_probe(lin, 0.0, 0.1, {{-0.5, 0.5}}, {0.1, 0.2});
  CHECK(ok.passed);
  CHECK_FALSE(ids_positivity_probe(flat, 0.0, 0.1, {{-0.5, 0.5}}, {0.1, 0.2}).passed);
}

TEST_CASE("rescaling by the IDS") {
  IdsTable lin{{0.0, 1.0}, {0.0, 1.0}, 1, 10};
  const auto r = rescale_eigenvalues({0.5, 0.6, 0.25}, lin, 0.5, 10);
  REQUIRE(r.xi.size() == 3);
  CHECK(r.xi[0] == doctest::Approx(0.0));
  CHECK(r.xi[1] == doctest::Approx(1.0));
  CHECK(r.xi[2] == doctest::Approx(-2.5));
}

TEST_CASE("poisson statistics calibration") {
  const auto p = poisson_statistics(synthetic_poisson_spectra(1000, 5.0, 77), 5.0, 0.25);
  CHECK(p.ks_pass);
  CHECK(p.variance_pass);
  CHECK(p.variance_to_mean == doctest::Approx(1.0).epsilon(0.2));
  const auto r = poisson_statistics(rigid_lattice_spectra(1000, 5.0), 5.0, 0.25);
  CHECK_FALSE(r.ks_pass);
  CHECK(r.variance_to_mean < 0.2);
  CHECK_THROWS_AS(poisson_statistics(synthetic_poisson_spectra(10, 5.0, 1), 5.0, 0.25), ValidationError);
}

TEST_CASE("finite-volume criterion is vacuous at L = 0") {
  const auto m = anderson(CouplingMeasure::uniform(0.0, 1.0), 1.0);
  CHECK(fvc_probability(m, 0, 0.5, 3.0, 50, 1).value == 1.0);
}

TEST_CASE("inverse moments") {
  const auto mu = CouplingMeasure::uniform(0.0, 1.0);
  const auto mid = inverse_moment_check(mu, 0.5, 0.5, 1.0, 2.0);
  CHECK(mid.integral == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-8));
  CHECK(mid.bound == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  const auto far = inverse_moment_check(mu, 0.5, 2.0, 1.0, 2.0);
  CHECK(far.integral == doctest::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-8));
  CHECK(far.margin > 0.0);
  const auto atoms = inverse_moment_check(CouplingMeasure::bernoulli(0.5, 0.0, 1.0), 0.5, 0.25, 1.0, 1.0);
  CHECK(atoms.integral == doctest::Approx(1.0 + 0.5 / std::sqrt(0.75)));
}

TEST_CASE("reverse Holder ratio") {
  const auto mu = CouplingMeasure::uniform(0.0, 1.0);
  CHECK(reverse_holder_ratio({1.0, 2.0}, {1.0, 2.0}, mu, 0.5) == doctest::Approx(1.0));
  // Q1/Q2 = x: sqrt(1/2) / (2/3)
  CHECK(reverse_holder_ratio({0.0, 1.0}, {1.0}, mu, 0.5) == doctest::Approx(std::sqrt(0.5) * 1.5).epsilon(1e-6));
  // |x|^{-1} squared is not integrable
  CHECK_THROWS(reverse_holder_ratio({1.0}, {0.0, 1.0}, mu, 0.5));
}

TEST_CASE("recursion probe") {
  const AlloyModel m{testing::chain_potential({1.0, 0.5}), CouplingMeasure::uniform(0.0, 1.0), 1.0};
  const auto r = recursion_probe(m, FiniteVolume::box(1, 6), 0.37, Site{0}, Site{2}, 0.5, {1.0, 4.0}, 200, 3);
  REQUIRE(r.rows.size() == 2);
  for (const auto& row : r.rows) CHECK(row.max_residual < 1e-10);
  CHECK(r.max_c >= r.min_c);
}

TEST_CASE("parallel estimators reproduce the serial reduction") {
  const AlloyModel m{testing::chain_potential({1.0, 1.0}), CouplingMeasure::raised_cosine(0.0, 1.0), 3.0};
  const auto vol = FiniteVolume::box(1, 8);
  par::set_workers(1);
  const auto a = fractional_moment(m, vol, cplx(0.5, 0.01), Site{0}, Site{3}, 0.5, 300, 21);
  const auto wa = wegner_count(anderson(CouplingMeasure::uniform(0, 1), 2.0), 6, 0.1, 0.9, 200, 4);
  par::set_workers(4);
  const auto b = fractional_moment(m, vol, cplx(0.5, 0.01), Site{0}, Site{3}, 0.5, 300, 21);
  const auto wb = wegner_count(anderson(CouplingMeasure::uniform(0, 1), 2.0), 6, 0.1, 0.9, 200, 4);
  par::set_workers(0);
  CHECK(a.value == b.value);
  CHECK(a.stderr_ == b.stderr_);
  CHECK(wa.averaged->value == wb.averaged->value);
  CHECK(wa.crude.value == wb.crude.value);
}

TEST_CASE("map and map_serial agree") {
  par::set_workers(3);
  const auto f = [](std::size_t i) { return std::sin(static_cast<double>(i)); };
  CHECK(par::map(1000, f) == par::map_serial(1000, f));
  CHECK_THROWS_AS(par::map(10, [](std::size_t i) -> int { if (i == 7) throw NumericalError("x"); return 0; }),
                  NumericalError);
  par::set_workers(0);
}

}
