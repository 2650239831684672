#include "alloy/volume.hpp"

#include <algorithm>

#include "alloy/error.hpp"

namespace alloy {

FiniteVolume FiniteVolume::box(int dimension, int half_width) {
  require(dimension >= 1, "dimension must be positive");
  require(half_width >= 0, "box half-width must be nonnegative");
  const long side = 2L * half_width + 1;
  long count = 1;
  for (int i = 0; i < dimension; ++i) {
    count *= side;
    require(count <= 50'000'000, "box volume too large");
  }
  std::vector<Site> pts;
  pts.reserve(static_cast<std::size_t>(count));
  Site x(static_cast<std::size_t>(dimension), -half_width);
  for (long n = 0; n < count; ++n) {
    pts.push_back(x);
    for (int i = dimension - 1; i >= 0; --i) {
      if (++x[i] <= half_width) break;
      x[i] = -half_width;
    }
  }
  FiniteVolume v;
  v.dim_ = dimension;
  v.points_ = std::move(pts);
  v.box_L_ = half_width;
  v.box_origin_ = Site(static_cast<std::size_t>(dimension), 0);
  v.build_adjacency();
  return v;
}

FiniteVolume FiniteVolume::explicit_points(int dimension, std::vector<Site> points) {
  require(dimension >= 1, "dimension must be positive");
  require(!points.empty(), "volume must contain at least one point");
  FiniteVolume v;
  v.dim_ = dimension;
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(static_cast<int>(points[i].size()) == dimension, "volume point " + to_string(points[i]) + " has wrong dimension");
    require(v.index_.emplace(points[i], i).second, "duplicate point " + to_string(points[i]) + " in volume");
  }
  v.points_ = std::move(points);
  v.build_adjacency();
  return v;
}

std::optional<std::size_t> FiniteVolume::index_of(const Site& x) const {
  if (box_L_) {
    const long L = *box_L_;
    const long side = 2 * L + 1;
    long idx = 0;
    for (int i = 0; i < dim_; ++i) {
      const long c = x[i] - box_origin_[i];
      if (c < -L || c > L) return std::nullopt;
      idx = idx * side + (c + L);
    }
    return static_cast<std::size_t>(idx);
  }
  auto it = index_.find(x);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FiniteVolume FiniteVolume::shifted(const Site& t) const {
  require(static_cast<int>(t.size()) == dim_, "shift has wrong dimension");
  FiniteVolume v = *this;
  for (auto& p : v.points_) p = p + t;
  if (box_L_) {
    v.box_origin_ = box_origin_ + t;
  } else {
    v.index_.clear();
    for (std::size_t i = 0; i < v.points_.size(); ++i) v.index_.emplace(v.points_[i], i);
  }
  return v;
}

void FiniteVolume::build_adjacency() {
  require(points_.size() < (1ULL << 32), "volume too large");
  const auto steps = unit_steps(dim_);
  nbr_start_.assign(1, 0);
  nbr_.clear();
  for (const auto& x : points_) {
    for (const auto& e : steps)
      if (auto j = index_of(x + e)) nbr_.push_back(static_cast<std::uint32_t>(*j));
    std::sort(nbr_.begin() + static_cast<std::ptrdiff_t>(nbr_start_.back()), nbr_.end());
    nbr_start_.push_back(nbr_.size());
  }
  chain_ = dim_ == 1;
  for (std::size_t i = 1; chain_ && i < points_.size(); ++i) chain_ = points_[i][0] == points_[i - 1][0] + 1;
}

}  // namespace alloy
