#pragma once

#include <cmath>
#include <functional>

#include "alloy/model.hpp"

namespace testing {

inline alloy::AlloyModel anderson(alloy::CouplingMeasure mu, double lambda, int dimension = 1) {
  return {alloy::SingleSitePotential::delta(dimension), std::move(mu), lambda};
}

inline alloy::SingleSitePotential chain_potential(std::initializer_list<double> values) {
  std::vector<alloy::SingleSitePotential::Entry> e;
  int k = 0;
  for (double v : values) e.push_back({alloy::Site{k++}, v});
  return alloy::SingleSitePotential::build(1, e);
}

// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace testing
