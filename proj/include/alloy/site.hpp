#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

namespace alloy {

/// A point of the integer lattice Z^d. The dimension is the vector length.
using Site = std::vector<int>;

inline int l1_distance(const Site& a, const Site& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

inline int linf_distance(const Site& a, const Site& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline Site operator+(Site a, const Site& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Site operator-(Site a, const Site& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

/// The 2d unit vectors e with |e|_1 = 1.
inline std::vector<Site> unit_steps(int d) {
  std::vector<Site> steps;
  for (int i = 0; i < d; ++i) {
    Site e(d, 0);
    e[i] = 1;
    steps.push_back(e);
    e[i] = -1;
    steps.push_back(e);
  }
  return steps;
}

inline std::string to_string(const Site& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace alloy
