#include "alloy/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "alloy/error.hpp"

namespace alloy {

SingleSitePotential SingleSitePotential::build(int dimension, std::vector<Entry> entries, double decay_cutoff) {
  require(dimension >= 1, "dimension must be positive");
  require(decay_cutoff >= 0.0, "decay_cutoff must be nonnegative");
  require(!entries.empty(), "single-site potential needs at least one entry");
  SingleSitePotential u;
  u.dim_ = dimension;
  u.cutoff_ = decay_cutoff;
  std::set<Site> seen;
  for (auto& e : entries) {
    require(static_cast<int>(e.site.size()) == dimension,
            "single-site entry " + to_string(e.site) + " has wrong dimension");
    require(std::isfinite(e.value), "single-site values must be finite");
    require(seen.insert(e.site).second, "duplicate lattice point " + to_string(e.site) + " in single-site potential");
    require(e.value != 0.0, "single-site value at " + to_string(e.site) + " is zero; list the support only");
    if (std::abs(e.value) < decay_cutoff) {
      ++u.truncated_;
      continue;
    }
    u.entries_.push_back(std::move(e));
  }
  require(!u.entries_.empty(), "decay_cutoff removed every entry of the single-site potential");
  std::sort(u.entries_.begin(), u.entries_.end(), [](const Entry& a, const Entry& b) { return a.site < b.site; });
  u.u_max_ = 0.0;
  u.u_min_ = std::numeric_limits<double>::infinity();
  for (const auto& e : u.entries_) {
    u.u_bar_ += e.value;
    u.l1_ += std::abs(e.value);
    u.u_max_ = std::max(u.u_max_, std::abs(e.value));
    u.u_min_ = std::min(u.u_min_, std::abs(e.value));
    if (e.value > 0) u.s_plus_ += e.value;
  }
  return u;
}

SingleSitePotential SingleSitePotential::delta(int dimension) {
  return build(dimension, {{Site(static_cast<std::size_t>(dimension), 0), 1.0}});
}

double SingleSitePotential::at(const Site& k) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                             [](const Entry& e, const Site& s) { return e.site < s; });
  return (it != entries_.end() && it->site == k) ? it->value : 0.0;
}

std::vector<Site> SingleSitePotential::theta_plus() const {
  std::vector<Site> out;
  for (const auto& e : entries_)
    if (e.value > 0) out.push_back(e.site);
  return out;
}

std::vector<Site> SingleSitePotential::theta_minus() const {
  std::vector<Site> out;
  for (const auto& e : entries_)
    if (e.value < 0) out.push_back(e.site);
  return out;
}

int SingleSitePotential::diameter(Metric metric) const {
  int diam = 0;
  for (const auto& a : entries_)
    for (const auto& b : entries_)
      diam = std::max(diam, metric == Metric::L1 ? l1_distance(a.site, b.site) : linf_distance(a.site, b.site));
  return diam;
}

bool SingleSitePotential::is_delta() const {
  return entries_.size() == 1 && std::all_of(entries_[0].site.begin(), entries_[0].site.end(), [](int c) { return c == 0; });
}

bool SingleSitePotential::contiguous_from_zero() const {
  if (dim_ != 1) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].site[0] != static_cast<int>(i)) return false;
  return true;
}

std::optional<std::vector<int>> SingleSitePotential::theta1() const {
  if (!contiguous_from_zero()) return std::nullopt;
  const int n = static_cast<int>(entries_.size());
  std::set<int> plus;
  for (const auto& e : entries_)
    if (e.value > 0) plus.insert(e.site[0]);
  std::set<int> shifted;
  for (int k : plus) shifted.insert(k + 1);
  std::vector<int> out;
  if (!plus.count(n - 1)) {
    out.assign(shifted.begin(), shifted.end());
  } else {
    std::set<int> result{0};
    for (int k : shifted)
      if (k >= 0 && k < n) result.insert(k);
    out.assign(result.begin(), result.end());
  }
  return out;
}

std::optional<std::vector<int>> SingleSitePotential::theta0() const {
  auto t1 = theta1();
  if (!t1) return std::nullopt;
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(entries_.size()); ++k)
    if (!std::binary_search(t1->begin(), t1->end(), k)) out.push_back(k);
  return out;
}

std::vector<Site> SingleSitePotential::interior_boundary() const {
  std::set<Site> support;
  for (const auto& e : entries_) support.insert(e.site);
  const auto steps = unit_steps(dim_);
  std::vector<Site> out;
  for (const auto& e : entries_) {
    int neighbours = 0;
    for (const auto& s : steps) neighbours += static_cast<int>(support.count(e.site + s));
    if (neighbours < 2 * dim_) out.push_back(e.site);
  }
  return out;
}

bool SingleSitePotential::positive_on_interior_boundary() const {
  for (const auto& k : interior_boundary())
    if (at(k) <= 0) return false;
  return true;
}

nlohmann::json SingleSitePotential::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries_) arr.push_back({e.site, e.value});
  return arr;
}

nlohmann::json AlloyModel::to_json() const {
  return {{"dimension", u.dimension()},
          {"lambda", lambda},
          {"single_site", u.to_json()},
          {"measure", mu.to_json()},
          {"decay_cutoff", u.decay_cutoff()}};
}

AlloyModel AlloyModel::from_json(const nlohmann::json& j) {
  require(j.is_object(), "model block must be an object");
  for (const auto& [key, _] : j.items())
    require(key == "dimension" || key == "lambda" || key == "single_site" || key == "measure" || key == "decay_cutoff",
            "unknown key in model block: " + key);
  require(j.contains("dimension") && j["dimension"].is_number_integer(), "model.dimension must be an integer");
  require(j.contains("lambda") && j["lambda"].is_number(), "model.lambda must be a number");
  require(j.contains("measure"), "model.measure is required");
  const int d = j["dimension"];
  require(d >= 1, "model.dimension must be positive");
  const double lambda = j["lambda"];
  require(lambda >= 0.0 && std::isfinite(lambda), "model.lambda must be finite and nonnegative");
  std::vector<SingleSitePotential::Entry> entries;
  if (j.contains("single_site")) {
    require(j["single_site"].is_array(), "model.single_site must be an array of [[k...], value]");
    for (const auto& item : j["single_site"]) {
      require(item.is_array() && item.size() == 2 && item[0].is_array() && item[1].is_number(),
              "model.single_site entries must look like [[k...], value]");
      entries.push_back({item[0].get<Site>(), item[1].get<double>()});
    }
  } else {
    entries.push_back({Site(static_cast<std::size_t>(d), 0), 1.0});
  }
  const double cutoff = j.value("decay_cutoff", 0.0);
  return AlloyModel{SingleSitePotential::build(d, std::move(entries), cutoff),
                    CouplingMeasure::from_json(j["measure"]), lambda};
}

}  // namespace alloy
