#include <doctest.h>

#include <cmath>

#include "alloy/error.hpp"
#include "alloy/regularity.hpp"
#include "helpers.hpp"

using namespace alloy;

TEST_SUITE("regularity") {

TEST_CASE("concentration of a sum of two uniforms") {
  CHECK(concentration_exact_uniform_sum(1.0) == doctest::Approx(0.75));
  CHECK(concentration_exact_uniform_sum(0.2) == doctest::Approx(0.19));
  CHECK(concentration_exact_uniform_sum(2.0) == doctest::Approx(1.0));

  const AlloyModel m{testing::chain_potential({1.0, 1.0}), CouplingMeasure::uniform(0.0, 1.0), 1.0};
  const auto est = concentration_empirical(m, Site{0}, 0.5, 100000, 0.005, 42);
  CHECK(std::abs(est.value - concentration_exact_uniform_sum(0.5)) < 0.01);
  CHECK(est.argmax_a == doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("concentration from samples") {
  const std::vector<double> xs{0.0, 0.1, 0.2, 0.25, 0.9};
  const auto c = concentration_from_samples(xs, 0.25, 0.025);
  CHECK(c.value == doctest::Approx(0.8));
  CHECK(c.argmax_a == doctest::Approx(0.0));
}

TEST_CASE("certificate accepts an extremal configuration") {
  const auto u = testing::chain_potential({1.0, 1.0});
  // eta_{-1} = omega_{-1} + omega_{-2}, eta_1 = omega_1 + omega_0: all couplings near 1
  const auto rep = theta1_certificate(u, 0.01, 0.01, [](int) { return 0.999; });
  CHECK(rep.passed);
  CHECK(rep.m == 2.0);
  CHECK(rep.c == 2.0);
  CHECK(rep.eta0 == doctest::Approx(1.998));
}

TEST_CASE("certificate rejects realizations outside the event") {
  const auto u = testing::chain_potential({1.0, 1.0});
  CHECK_THROWS_AS(theta1_certificate(u, 0.01, 0.01, [](int) { return 0.5; }), ValidationError);
}

TEST_CASE("conditional concentration under the certificate event") {
  const AlloyModel m{testing::chain_potential({1.0, 1.0}), CouplingMeasure::uniform(0.0, 1.0), 1.0};
  const double dp = 0.05;
  const auto ev = ConditioningEvent::band({Site{-1}, Site{1}}, 2.0 - dp, 2.0);
  ConditionalOptions opt;
  opt.sampler = ConditionalSampler::Blockwise;
  opt.certify = true;
  opt.certificate_delta_prime = dp;
  const auto r = conditional_concentration_mc(m, Site{0}, 2.0 - 2 * dp, 4 * dp, ev, 500, 10000000, 3, opt);
  CHECK(r.accepted == 500);
  CHECK(r.certificate_failures == 0);
  CHECK(r.estimate == 1.0);
}

TEST_CASE("rejection and blockwise samplers agree") {
  const AlloyModel m{testing::chain_potential({1.0, 1.0}), CouplingMeasure::uniform(0.0, 1.0), 1.0};
  const auto ev = ConditioningEvent::band({Site{2}}, 1.5, 2.0);
  ConditionalOptions rej, blk;
  blk.sampler = ConditionalSampler::Blockwise;
  const auto a = conditional_concentration_mc(m, Site{0}, 0.5, 0.5, ev, 20000, 100000000, 8, rej);
  const auto b = conditional_concentration_mc(m, Site{0}, 0.5, 0.5, ev, 20000, 100000000, 9, blk);
  // eta_0 and eta_2 share no couplings, so conditioning leaves S unchanged: P(eta in [0.5,1]) = 0.375
  CHECK(std::abs(a.estimate - 0.375) < 4 * a.stderr_ + 1e-3);
  CHECK(std::abs(b.estimate - 0.375) < 4 * b.stderr_ + 1e-3);
}

TEST_CASE("al product determinant") {
  const auto a = al_identities(2, 1.0);
  CHECK(a.det == doctest::Approx(3.0));
  CHECK(a.s_recurrence == doctest::Approx(3.0));
  CHECK(a.s_literal == doctest::Approx(2.0));
  CHECK(a.inv_11 == doctest::Approx(a.inv_11_closed));
  CHECK(al_identities(1, 2.0).det == doctest::Approx(5.0));
  CHECK(s_sequence(0, 0.7) == 1.0);
  CHECK(s_sequence(3, 0.5) == doctest::Approx(1 + 0.25 + 0.0625 + 0.015625));
}

TEST_CASE("gaussian conditioning on a two-dimensional vector") {
  // X ~ N(0, I_2), condition on X1 + X2 = 2: X1 | . ~ N(1, 1/2)
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2), a(2), v(1);
  Eigen::MatrixXd B(1, 2);
  a << 1, 0;
  B << 1, 1;
  v << 2;
  const auto g = gaussian_condition_general(mean, Eigen::MatrixXd::Identity(2, 2), a, B, v);
  CHECK(g.mean == doctest::Approx(1.0));
  CHECK(g.variance == doctest::Approx(0.5));
}

TEST_CASE("alloy gaussian conditioning matches the general formula") {
  const std::vector<double> vp{0.3, -0.2, 0.1}, vm{0.5, 0.0};
  for (double u : {0.4, 1.0, 1.7}) {
    const auto a = gaussian_condition_alloy(u, 1.3, 3, 2, vp, vm);
    const auto b = gaussian_condition_alloy_reference(u, 1.3, 3, 2, vp, vm);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-10));
    CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-10));
  }
}

TEST_CASE("conditional variance at u = 1") {
  const std::vector<double> zeros(5, 0.0);
  // 2 sigma^2 / (l + 1) with l = m = 5
  CHECK(gaussian_condition_alloy(1.0, 1.0, 5, 5, zeros, zeros).variance == doctest::Approx(1.0 / 3.0));
}

}
