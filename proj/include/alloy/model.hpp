#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "alloy/measure.hpp"
#include "alloy/site.hpp"

namespace alloy {

enum class Metric { L1, LInf };

/// Finitely supported single-site potential u : Z^d -> R.
///
/// Exponentially decaying profiles are handled by truncation: entries with
/// |u(k)| < decay_cutoff are dropped at construction and counted.
class SingleSitePotential {
 public:
  struct Entry {
    Site site;
    double value;
  };

  static SingleSitePotential build(int dimension, std::vector<Entry> entries, double decay_cutoff = 0.0);

  /// u = delta_0, the standard Anderson model.
  static SingleSitePotential delta(int dimension);

  int dimension() const noexcept { return dim_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  double at(const Site& k) const;

  double u_bar() const noexcept { return u_bar_; }
  double u_max() const noexcept { return u_max_; }
  double u_min() const noexcept { return u_min_; }
  double l1_norm() const noexcept { return l1_; }
  double s_plus() const noexcept { return s_plus_; }
  double decay_cutoff() const noexcept { return cutoff_; }
  std::size_t truncated_entries() const noexcept { return truncated_; }

  std::vector<Site> theta_plus() const;
  std::vector<Site> theta_minus() const;
  int diameter(Metric metric = Metric::L1) const;
  bool is_delta() const;

  /// Theta_1 and Theta_0 of the interval-arithmetic argument; only defined
  /// for d = 1 and support {0, ..., n-1}.
  bool contiguous_from_zero() const;
  std::optional<std::vector<int>> theta1() const;
  std::optional<std::vector<int>> theta0() const;

  /// Support points with fewer than 2d lattice neighbours in the support.
  std::vector<Site> interior_boundary() const;
  bool positive_on_interior_boundary() const;

  nlohmann::json to_json() const;

 private:
  int dim_ = 1;
  std::vector<Entry> entries_;
  double u_bar_ = 0, u_max_ = 0, u_min_ = 0, l1_ = 0, s_plus_ = 0, cutoff_ = 0;
  std::size_t truncated_ = 0;
};

/// H = -Delta + lambda V with the alloy-type potential built from (u, mu).
struct AlloyModel {
  SingleSitePotential u;
  CouplingMeasure mu;
  double lambda = 1.0;

  int dimension() const noexcept { return u.dimension(); }

  nlohmann::json to_json() const;
  /// {dimension, lambda, single_site: [[[k...], value], ...], measure, decay_cutoff}
  static AlloyModel from_json(const nlohmann::json& j);
};

}  // namespace alloy
