#include <doctest.h>

#include <cmath>
#include <numbers>

#include "alloy/error.hpp"
#include "alloy/field.hpp"
#include "alloy/measure.hpp"
#include "alloy/model.hpp"
#include "alloy/volume.hpp"
#include "helpers.hpp"

using namespace alloy;

TEST_SUITE("model") {

TEST_CASE("uniform measure cdf and quantile") {
  const auto mu = CouplingMeasure::uniform(-1.0, 3.0);
  CHECK(mu.cdf(0.0) == doctest::Approx(0.25));
  CHECK(mu.mass(0.0, 2.0) == doctest::Approx(0.5));
  CHECK(mu.quantile(0.75) == doctest::Approx(2.0));
  CHECK(mu.mean() == doctest::Approx(1.0));
  CHECK(mu.support().first == -1.0);
  CHECK(mu.support().second == 3.0);
}

TEST_CASE("bernoulli measure has atoms") {
  const auto mu = CouplingMeasure::bernoulli(0.3, 0.0, 1.0);
  CHECK_FALSE(mu.has_density());
  CHECK(mu.mass(1.0, 1.0) == doctest::Approx(0.3));
  CHECK(mu.cdf_left(1.0) == doctest::Approx(0.7));
  CHECK(mu.quantile(0.5) == 0.0);
  CHECK(mu.quantile(0.9) == 1.0);
}

TEST_CASE("raised cosine derivative norms") {
  // rho = 1 - cos(2 pi x) on [0,1]: ||rho'||_1 = 4, ||rho''||_1 = 8 pi.
  const auto n = CouplingMeasure::raised_cosine(0.0, 1.0).norms();
  CHECK(n.d1 == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(n.d2 == doctest::Approx(8.0 * std::numbers::pi).epsilon(1e-6));
  CHECK(n.var == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("raised cosine norms scale with the width") {
  const auto n = CouplingMeasure::raised_cosine(1.0, 3.0).norms();
  CHECK(n.d1 == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(n.d2 == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-6));
}

TEST_CASE("gaussian derivative norms") {
  // |rho'| integrates to 2 rho(0); rho'' changes sign at +-sigma.
  const double sigma = 1.5;
  const auto n = CouplingMeasure::gaussian(0.0, sigma * sigma).norms();
  const double rho0 = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  CHECK(n.d1 == doctest::Approx(2.0 * rho0).epsilon(1e-8));
  CHECK(n.d2 == doctest::Approx(4.0 * rho0 * std::exp(-0.5) / sigma).epsilon(1e-8));
  const double d2 = testing::simpson(
      [&](double x) {
        const double r = rho0 * std::exp(-x * x / (2 * sigma * sigma));
        return std::abs((x * x / std::pow(sigma, 4) - 1.0 / (sigma * sigma)) * r);
      },
      -15.0, 15.0, 60000);
  CHECK(n.d2 == doctest::Approx(d2).epsilon(1e-6));
}

TEST_CASE("uniform density has no W11 norm") {
  const auto n = CouplingMeasure::uniform(0.0, 1.0).norms();
  CHECK(std::isinf(n.d1));
  CHECK(n.var == doctest::Approx(2.0));
}

TEST_CASE("custom density is renormalised") {
  const auto mu = CouplingMeasure::custom({0.0, 1.0, 2.0}, {0.0, 2.0, 0.0});
  CHECK(mu.custom_raw_mass() == doctest::Approx(2.0));
  CHECK(mu.cdf(1.0) == doctest::Approx(0.5));
  CHECK(mu.density(1.0) == doctest::Approx(1.0));
}

TEST_CASE("measure json round trip and rejection") {
  const auto mu = CouplingMeasure::gaussian(0.5, 2.0);
  const auto back = CouplingMeasure::from_json(mu.to_json());
  CHECK(back.cdf(1.3) == doctest::Approx(mu.cdf(1.3)));
  CHECK_THROWS_AS(CouplingMeasure::from_json({{"kind", "uniform"}, {"params", {{"a", 0}, {"c", 1}}}}),
                  ValidationError);
  CHECK_THROWS_AS(CouplingMeasure::from_json({{"kind", "cauchy"}}), ValidationError);
  CHECK_THROWS_AS(CouplingMeasure::uniform(1.0, 1.0), ValidationError);
}

TEST_CASE("holder check for the uniform law") {
  const std::vector<double> eps{0.01, 0.05, 0.1, 0.3};
  CHECK(holder_parameters(CouplingMeasure::uniform(0.0, 1.0), 1.0, 2.0, eps).passed);
  CHECK_FALSE(holder_parameters(CouplingMeasure::uniform(0.0, 1.0), 1.0, 1.5, eps).passed);
}

TEST_CASE("single-site potential summaries") {
  const auto u = testing::chain_potential({1.0, 1.0});
  CHECK(u.u_bar() == 2.0);
  CHECK(u.s_plus() == 2.0);
  CHECK(u.diameter() == 1);
  CHECK(u.contiguous_from_zero());
  CHECK(*u.theta1() == std::vector<int>{0, 1});
  CHECK(u.theta0()->empty());
  CHECK_FALSE(u.is_delta());
  CHECK(SingleSitePotential::delta(2).is_delta());
}

TEST_CASE("mixed-sign potential") {
  const auto u = testing::chain_potential({1.0, -0.5, 0.25});
  CHECK(u.u_bar() == doctest::Approx(0.75));
  CHECK(u.l1_norm() == doctest::Approx(1.75));
  CHECK(u.theta_minus().size() == 1);
  CHECK(u.diameter() == 2);
}

TEST_CASE("decay cutoff truncates small entries") {
  std::vector<SingleSitePotential::Entry> e;
  for (int k = 0; k < 40; ++k) e.push_back({Site{k}, std::pow(0.5, k)});
  const auto u = SingleSitePotential::build(1, e, 1e-6);
  CHECK(u.size() == 20);
  CHECK(u.truncated_entries() == 20);
}

TEST_CASE("model json") {
  const nlohmann::json j = {{"dimension", 2},
                            {"lambda", 3.0},
                            {"single_site", {{{0, 0}, 1.0}, {{1, 0}, 0.5}}},
                            {"measure", {{"kind", "uniform"}, {"params", {{"a", 0}, {"b", 1}}}}}};
  const auto m = AlloyModel::from_json(j);
  CHECK(m.dimension() == 2);
  CHECK(m.lambda == 3.0);
  CHECK(m.u.at(Site{1, 0}) == 0.5);
  auto bad = j;
  bad["single_site"] = {{{0}, 1.0}};
  CHECK_THROWS_AS(AlloyModel::from_json(bad), ValidationError);
  bad = j;
  bad["colour"] = "red";
  CHECK_THROWS_AS(AlloyModel::from_json(bad), ValidationError);
}

TEST_CASE("box volume") {
  const auto v = FiniteVolume::box(2, 1);
  CHECK(v.size() == 9);
  CHECK(v.index_of(Site{0, 0}) == 4u);
  CHECK(v.neighbours(4).size() == 4);
  CHECK(v.neighbours(0).size() == 2);
  CHECK_FALSE(v.is_chain());
  CHECK(FiniteVolume::box(1, 3).is_chain());
  CHECK(FiniteVolume::box(3, 0).size() == 1);
  CHECK(FiniteVolume::box(1, 2).point(0) == Site{-2});
  CHECK_THROWS_AS(FiniteVolume::explicit_points(1, {Site{0}, Site{0}}), ValidationError);
}

TEST_CASE("field reproduces the convolution") {
  const auto u = testing::chain_potential({1.0, -0.5, 0.25});
  const auto f = sample_field(u, CouplingMeasure::uniform(0.0, 1.0), FiniteVolume::box(1, 5), 7, 3);
  CHECK(f.reconstruction_error(u) < 1e-14);
  for (std::size_t r = 0; r < f.volume().size(); ++r) {
    const int k = f.volume().point(r)[0];
    const double expect = f.coupling_at(Site{k}) - 0.5 * f.coupling_at(Site{k - 1}) + 0.25 * f.coupling_at(Site{k - 2});
    CHECK(f.eta[r] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("field is translation covariant") {
  const auto u = testing::chain_potential({1.0, 1.0});
  const auto mu = CouplingMeasure::uniform(0.0, 1.0);
  const auto vol = FiniteVolume::box(1, 3);
  const FieldSampler a(u, mu, vol, Site{0});
  const FieldSampler b(u, mu, vol.shifted(Site{5}), Site{5});
  const auto fa = a.sample(11, 2), fb = b.sample(11, 2);
  CHECK(fa.eta == fb.eta);
  CHECK(fa.couplings == fb.couplings);
}

TEST_CASE("field realizations depend only on the stream") {
  const auto u = testing::chain_potential({1.0, 1.0});
  const auto mu = CouplingMeasure::gaussian(0.0, 1.0);
  const FieldSampler s(u, mu, FiniteVolume::box(1, 4));
  CHECK(s.sample(5, 9).eta == s.sample(5, 9).eta);
  CHECK(s.sample(5, 9).eta != s.sample(5, 10).eta);
}

}
