#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "alloy/site.hpp"

namespace alloy {

/// Ordered finite subset of Z^d with a point -> row index map.
class FiniteVolume {
 public:
  /// Lambda_L = {|y|_inf <= L}, lexicographic order.
  static FiniteVolume box(int dimension, int half_width);
  /// Points kept in the given order; duplicates rejected.
  static FiniteVolume explicit_points(int dimension, std::vector<Site> points);

  int dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Site>& points() const noexcept { return points_; }
  const Site& point(std::size_t i) const { return points_[i]; }

  std::optional<std::size_t> index_of(const Site& x) const;
  bool contains(const Site& x) const { return index_of(x).has_value(); }

  /// Half-width L for box volumes.
  std::optional<int> box_half_width() const noexcept { return box_L_; }

  /// The volume translated by t (point order preserved).
  FiniteVolume shifted(const Site& t) const;

  /// Rows of the lattice neighbours (|x-y|_1 = 1) of row i inside the volume.
  std::span<const std::uint32_t> neighbours(std::size_t i) const {
    return {nbr_.data() + nbr_start_[i], nbr_start_[i + 1] - nbr_start_[i]};
  }
  /// True for d = 1 volumes whose rows are consecutive integers in increasing order.
  bool is_chain() const noexcept { return chain_; }

 private:
  int dim_ = 1;
  std::vector<Site> points_;
  std::map<Site, std::size_t> index_;
  std::optional<int> box_L_;
  Site box_origin_;
  std::vector<std::size_t> nbr_start_;
  std::vector<std::uint32_t> nbr_;
  bool chain_ = false;

  void build_adjacency();
};

}  // namespace alloy
