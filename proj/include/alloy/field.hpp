#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "alloy/measure.hpp"
#include "alloy/model.hpp"
#include "alloy/volume.hpp"

namespace alloy {

/// Coupling index set Lambda (-) Theta and the convolution stencil for one volume.
struct FieldLayout {
  FiniteVolume volume;
  Site origin;
  std::vector<Site> coupling_sites;                // sorted
  std::vector<std::size_t> row_start;              // CSR over volume points
  std::vector<std::uint32_t> term_coupling;
  std::vector<double> term_weight;                 // u(k - i)

  std::optional<std::size_t> coupling_index(const Site& i) const;
};

struct AlloyFieldRealization {
  std::shared_ptr<const FieldLayout> layout;
  std::vector<double> couplings;  // indexed like layout->coupling_sites
  std::vector<double> eta;        // indexed like layout->volume
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;

  const FiniteVolume& volume() const { return layout->volume; }
  double coupling_at(const Site& i) const;

  /// max_k |eta_k - sum_i omega_i u(k-i)| / max(1, |eta|_inf), recomputed
  /// from u without the precomputed stencil.
  double reconstruction_error(const SingleSitePotential& u) const;
};

/// Draws coupling families and evaluates eta_k = sum_i omega_i u(k-i).
///
/// omega_i is the mu-quantile of a per-site uniform keyed by
/// (seed, stream, i - origin), so a shifted volume with a shifted origin
/// reproduces the same field.
class FieldSampler {
 public:
  FieldSampler(const SingleSitePotential& u, CouplingMeasure mu, FiniteVolume volume, Site origin = {});

  const FieldLayout& layout() const noexcept { return *layout_; }
  const CouplingMeasure& measure() const noexcept { return mu_; }
  std::size_t coupling_count() const noexcept { return layout_->coupling_sites.size(); }
  std::size_t volume_size() const noexcept { return layout_->volume.size(); }

  void draw_couplings(std::uint64_t seed, std::uint64_t stream, std::span<double> out) const;
  void convolve(std::span<const double> couplings, std::span<double> eta) const;

  AlloyFieldRealization sample(std::uint64_t seed, std::uint64_t stream) const;
  AlloyFieldRealization from_couplings(std::vector<double> couplings) const;

 private:
  std::shared_ptr<const FieldLayout> layout_;
  CouplingMeasure mu_;
};

AlloyFieldRealization sample_field(const SingleSitePotential& u, const CouplingMeasure& mu, const FiniteVolume& volume,
                                   std::uint64_t master_seed, std::uint64_t stream_index);

}  // namespace alloy
