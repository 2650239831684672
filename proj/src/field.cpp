#include "alloy/field.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "alloy/error.hpp"

namespace alloy {

std::optional<std::size_t> FieldLayout::coupling_index(const Site& i) const {
  auto it = std::lower_bound(coupling_sites.begin(), coupling_sites.end(), i);
  if (it == coupling_sites.end() || *it != i) return std::nullopt;
  return static_cast<std::size_t>(it - coupling_sites.begin());
}

double AlloyFieldRealization::coupling_at(const Site& i) const {
  auto idx = layout->coupling_index(i);
  if (!idx) throw ValidationError("site " + to_string(i) + " is not in the coupling index set");
  return couplings[*idx];
}

double AlloyFieldRealization::reconstruction_error(const SingleSitePotential& u) const {
  const auto& pts = layout->volume.points();
  double err = 0.0, scale = 1.0;
  for (std::size_t r = 0; r < pts.size(); ++r) {
    double s = 0.0;
    for (const auto& e : u.entries()) s += coupling_at(pts[r] - e.site) * e.value;
    err = std::max(err, std::abs(s - eta[r]));
    scale = std::max(scale, std::abs(eta[r]));
  }
  return err / scale;
}

FieldSampler::FieldSampler(const SingleSitePotential& u, CouplingMeasure mu, FiniteVolume volume, Site origin)
    : mu_(std::move(mu)) {
  require(volume.size() > 0, "empty volume");
  require(volume.dimension() == u.dimension(), "volume and single-site potential dimensions differ");
  if (origin.empty()) origin.assign(static_cast<std::size_t>(u.dimension()), 0);
  require(static_cast<int>(origin.size()) == u.dimension(), "origin has wrong dimension");

  auto layout = std::make_shared<FieldLayout>();
  std::set<Site> sites;
  for (const auto& k : volume.points())
    for (const auto& e : u.entries()) sites.insert(k - e.site);
  layout->coupling_sites.assign(sites.begin(), sites.end());
  require(layout->coupling_sites.size() < (1ULL << 32), "coupling index set too large");

  layout->row_start.reserve(volume.size() + 1);
  layout->row_start.push_back(0);
  for (const auto& k : volume.points()) {
    for (const auto& e : u.entries()) {
      layout->term_coupling.push_back(static_cast<std::uint32_t>(*layout->coupling_index(k - e.site)));
      layout->term_weight.push_back(e.value);
    }
    layout->row_start.push_back(layout->term_coupling.size());
  }
  layout->volume = std::move(volume);
  layout->origin = std::move(origin);
  layout_ = std::move(layout);
}

void FieldSampler::draw_couplings(std::uint64_t seed, std::uint64_t stream, std::span<double> out) const {
  const auto& sites = layout_->coupling_sites;
  Site rel(layout_->origin.size());
  for (std::size_t n = 0; n < sites.size(); ++n) {
    for (std::size_t c = 0; c < rel.size(); ++c) rel[c] = sites[n][c] - layout_->origin[c];
    out[n] = mu_.quantile(rng::site_uniform(seed, stream, rel));
  }
}

void FieldSampler::convolve(std::span<const double> couplings, std::span<double> eta) const {
  const auto& L = *layout_;
  for (std::size_t r = 0; r + 1 < L.row_start.size(); ++r) {
    double s = 0.0;
    for (std::size_t t = L.row_start[r]; t < L.row_start[r + 1]; ++t) s += couplings[L.term_coupling[t]] * L.term_weight[t];
    eta[r] = s;
  }
}

AlloyFieldRealization FieldSampler::sample(std::uint64_t seed, std::uint64_t stream) const {
  AlloyFieldRealization f;
  f.layout = layout_;
  f.master_seed = seed;
  f.stream_index = stream;
  f.couplings.resize(coupling_count());
  f.eta.resize(volume_size());
  draw_couplings(seed, stream, f.couplings);
  convolve(f.couplings, f.eta);
  return f;
}

AlloyFieldRealization FieldSampler::from_couplings(std::vector<double> couplings) const {
  require(couplings.size() == coupling_count(), "coupling vector has wrong length");
  AlloyFieldRealization f;
  f.layout = layout_;
  f.couplings = std::move(couplings);
  f.eta.resize(volume_size());
  convolve(f.couplings, f.eta);
  return f;
}

AlloyFieldRealization sample_field(const SingleSitePotential& u, const CouplingMeasure& mu, const FiniteVolume& volume,
                                   std::uint64_t master_seed, std::uint64_t stream_index) {
  return FieldSampler(u, mu, volume).sample(master_seed, stream_index);
}

}  // namespace alloy
