#include <doctest.h>

#include <cmath>
#include <numbers>

#include "alloy/constants.hpp"
#include "alloy/error.hpp"
#include "helpers.hpp"

using namespace alloy;

TEST_SUITE("constants") {

TEST_CASE("c and C for a two-site profile") {
  const auto u = testing::chain_potential({1.0, 1.0});
  const auto k = apriori_constants(u, 0.5, DensityNorms{4.0, 1.0, 4.0, 0.0});
  CHECK(k.c == doctest::Approx(std::log(1.5)));
  CHECK(k.C == doctest::Approx(5.0));
  // (8 / 2^s) s^-s / (1-s) 4^s 5^s at s = 1/2
  const double expect = 8.0 / std::sqrt(2.0) * std::sqrt(2.0) / 0.5 * 2.0 * std::sqrt(5.0);
  CHECK(k.bound_coefficient == doctest::Approx(expect));
  CHECK(k.bound(4.0) == doctest::Approx(expect / 2.0));
}

TEST_CASE("C picks up the dimension") {
  const auto u = SingleSitePotential::build(2, {{Site{0, 0}, 1.0}, {Site{1, 0}, 1.0}});
  CHECK(apriori_constants(u, 0.5, DensityNorms{4.0, 1.0, 4.0, 0.0}).C == doctest::Approx(25.0));
}

TEST_CASE("a-priori constants need diam > 0 and u_bar > 0") {
  CHECK_THROWS_AS(apriori_constants(SingleSitePotential::delta(1), 0.5, DensityNorms{1, 1, 1, 0}), ValidationError);
  CHECK_THROWS_AS(apriori_constants(testing::chain_potential({1.0, -1.0}), 0.5, DensityNorms{1, 1, 1, 0}),
                  ValidationError);
  CHECK_THROWS_AS(apriori_constants(testing::chain_potential({1.0, 1.0}), 1.0, DensityNorms{1, 1, 1, 0}),
                  ValidationError);
}

TEST_CASE("wegner order") {
  CHECK(wegner_order(testing::chain_potential({1.0, 1.0}), 4).N == 0);
  CHECK(wegner_order(testing::chain_potential({1.0, -2.0}), 4).N == 0);
  const auto w = wegner_order(testing::chain_potential({1.0, -1.0}), 4);
  CHECK(w.N == 1);
  CHECK(std::abs(w.c_u) == doctest::Approx(1.0));
  // 1 - 2z + z^2 = (1-z)^2 vanishes to second order at z = 1
  CHECK(wegner_order(testing::chain_potential({1.0, -2.0, 1.0}), 4).N == 2);
  CHECK_THROWS_AS(wegner_order(testing::chain_potential({1.0, -2.0, 1.0}), 1), NumericalError);
}

TEST_CASE("inverse convolution norm of a geometric kernel") {
  // (1 + z/2)^{-1} has coefficients (-1/2)^k with l1 norm 2.
  const auto u = testing::chain_potential({1.0, 0.5});
  const auto cu = cu_norm(u, 4096);
  CHECK(cu.value == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(symbol_min_modulus(u, 64) == doctest::Approx(0.5));
  CHECK(cu_norm(SingleSitePotential::delta(2), 64).value == doctest::Approx(1.0));
}

TEST_CASE("inverse convolution norm of a 2d product kernel") {
  // (1 + x/2)(1 + y/4) inverts to a product with norm 2 * 4/3.
  const auto u = SingleSitePotential::build(
      2, {{Site{0, 0}, 1.0}, {Site{1, 0}, 0.5}, {Site{0, 1}, 0.25}, {Site{1, 1}, 0.125}});
  CHECK(cu_norm(u, 512).value == doctest::Approx(8.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("vanishing symbol has no bounded inverse") {
  CHECK_THROWS(cu_norm(testing::chain_potential({1.0, -1.0}), 256));
}

TEST_CASE("C_Min") {
  CHECK(c_min(2.0, DensityNorms{4.0, 8.0 * std::numbers::pi, 4.0, 0.0}) == doctest::Approx(8.0 * std::numbers::pi));
  CHECK(c_min(2.0, DensityNorms{4.0, 1.0, 4.0, 0.0}) == doctest::Approx(16.0));
}

TEST_CASE("derived constants record undefined fields") {
  const AlloyModel anderson{SingleSitePotential::delta(1), CouplingMeasure::uniform(0.0, 1.0), 1.0};
  const auto d = derive_constants(anderson, 0.5);
  CHECK_FALSE(d.c.has_value());
  CHECK(d.N == 0);
  CHECK(*d.C_u == doctest::Approx(1.0));
  CHECK_FALSE(d.notes.empty());
  CHECK(d.to_json().contains("u_bar"));

  const AlloyModel smooth{testing::chain_potential({1.0, 1.0}), CouplingMeasure::raised_cosine(0.0, 1.0), 1.0};
  const auto e = derive_constants(smooth, 0.5);
  CHECK(*e.c == doctest::Approx(std::log(1.5)));
  CHECK(*e.C == doctest::Approx(5.0));
}

}
