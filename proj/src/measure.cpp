#include "alloy/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "alloy/error.hpp"

namespace alloy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

double raised_cosine_cdf01(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t - std::sin(2.0 * kPi * t) / (2.0 * kPi);
}

double raised_cosine_quantile01(double u) {
  // Newton with a bisection bracket; the cdf is strictly increasing on (0,1).
  double lo = 0.0, hi = 1.0, t = u;
  for (int it = 0; it < 100; ++it) {
    const double f = raised_cosine_cdf01(t) - u;
    if (f > 0) hi = t; else lo = t;
    const double fp = 1.0 - std::cos(2.0 * kPi * t);
    double next = fp > 1e-14 ? t - f / fp : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) < 1e-15) return next;
    t = next;
  }
  return t;
}

}  // namespace

CouplingMeasure CouplingMeasure::uniform(double a, double b) {
  require(std::isfinite(a) && std::isfinite(b) && a < b, "uniform measure needs a < b");
  CouplingMeasure m;
  m.kind_ = Kind::Uniform;
  m.p0_ = a;
  m.p1_ = b;
  return m;
}

CouplingMeasure CouplingMeasure::gaussian(double mean, double variance) {
  require(std::isfinite(mean) && variance > 0.0 && std::isfinite(variance),
          "gaussian measure needs a finite mean and positive variance");
  CouplingMeasure m;
  m.kind_ = Kind::Gaussian;
  m.p0_ = mean;
  m.p1_ = variance;
  return m;
}

CouplingMeasure CouplingMeasure::bernoulli(double p, double low, double high) {
  require(p > 0.0 && p < 1.0, "bernoulli measure needs p in (0,1)");
  require(low < high, "bernoulli measure needs low < high");
  CouplingMeasure m;
  m.kind_ = Kind::Bernoulli;
  m.p0_ = low;
  m.p1_ = high;
  m.p2_ = p;
  return m;
}

CouplingMeasure CouplingMeasure::raised_cosine(double a, double b) {
  require(std::isfinite(a) && std::isfinite(b) && a < b, "raised_cosine measure needs a < b");
  CouplingMeasure m;
  m.kind_ = Kind::RaisedCosine;
  m.p0_ = a;
  m.p1_ = b;
  return m;
}

CouplingMeasure CouplingMeasure::custom(std::vector<double> grid, std::vector<double> density) {
  require(grid.size() >= 3 && grid.size() == density.size(),
          "custom measure needs at least 3 grid points and matching density values");
  const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  require(h > 0.0, "custom grid must be increasing");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(std::abs(grid[i] - (grid.front() + h * static_cast<double>(i))) <= 1e-9 * (1.0 + std::abs(grid[i])),
            "custom grid must be uniformly spaced");
    require(density[i] >= 0.0 && std::isfinite(density[i]), "custom density must be finite and nonnegative");
  }
  CouplingMeasure m;
  m.kind_ = Kind::Custom;
  m.cum_.assign(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i)
    m.cum_[i] = m.cum_[i - 1] + 0.5 * h * (density[i - 1] + density[i]);
  m.raw_mass_ = m.cum_.back();
  require(m.raw_mass_ > 0.0, "custom density has zero mass");
  for (auto& v : density) v /= m.raw_mass_;
  for (auto& c : m.cum_) c /= m.raw_mass_;
  m.grid_ = std::move(grid);
  m.dens_ = std::move(density);
  m.p0_ = m.grid_.front();
  m.p1_ = m.grid_.back();
  m.p2_ = h;
  return m;
}

std::string CouplingMeasure::kind_name() const {
  switch (kind_) {
    case Kind::Uniform: return "uniform";
    case Kind::Gaussian: return "gaussian";
    case Kind::Bernoulli: return "bernoulli";
    case Kind::RaisedCosine: return "raised_cosine";
    case Kind::Custom: return "custom";
  }
  return "unknown";
}

std::pair<double, double> CouplingMeasure::support() const {
  switch (kind_) {
    case Kind::Gaussian: return {-kInf, kInf};
    case Kind::Bernoulli: return {p0_, p1_};
    default: return {p0_, p1_};
  }
}

double CouplingMeasure::density(double x) const {
  switch (kind_) {
    case Kind::Uniform:
      return (x >= p0_ && x <= p1_) ? 1.0 / (p1_ - p0_) : 0.0;
    case Kind::Gaussian: {
      const double s = std::sqrt(p1_);
      const double z = (x - p0_) / s;
      return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * kPi));
    }
    case Kind::RaisedCosine: {
      if (x <= p0_ || x >= p1_) return 0.0;
      const double w = p1_ - p0_;
      return (1.0 - std::cos(2.0 * kPi * (x - p0_) / w)) / w;
    }
    case Kind::Custom: {
      if (x < p0_ || x > p1_) return 0.0;
      const double pos = (x - p0_) / p2_;
      const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), grid_.size() - 2);
      const double t = pos - static_cast<double>(i);
      return dens_[i] + t * (dens_[i + 1] - dens_[i]);
    }
    case Kind::Bernoulli:
      throw ValidationError("bernoulli measure has no density");
  }
  return 0.0;
}

double CouplingMeasure::cdf(double x) const {
  switch (kind_) {
    case Kind::Uniform:
      return std::clamp((x - p0_) / (p1_ - p0_), 0.0, 1.0);
    case Kind::Gaussian:
      return 0.5 * std::erfc(-(x - p0_) / std::sqrt(2.0 * p1_));
    case Kind::RaisedCosine:
      return raised_cosine_cdf01((x - p0_) / (p1_ - p0_));
    case Kind::Bernoulli:
      return x < p0_ ? 0.0 : (x < p1_ ? 1.0 - p2_ : 1.0);
    case Kind::Custom: {
      if (x <= p0_) return 0.0;
      if (x >= p1_) return 1.0;
      const double pos = (x - p0_) / p2_;
      const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), grid_.size() - 2);
      const double t = (pos - static_cast<double>(i)) * p2_;
      const double slope = (dens_[i + 1] - dens_[i]) / p2_;
      return std::min(1.0, cum_[i] + dens_[i] * t + 0.5 * slope * t * t);
    }
  }
  return 0.0;
}

double CouplingMeasure::cdf_left(double x) const {
  if (kind_ == Kind::Bernoulli) return x <= p0_ ? 0.0 : (x <= p1_ ? 1.0 - p2_ : 1.0);
  return cdf(x);
}

double CouplingMeasure::mass(double lo, double hi) const {
  if (hi < lo) return 0.0;
  return std::max(0.0, cdf(hi) - cdf_left(lo));
}

double CouplingMeasure::quantile(double u) const {
  require(u > 0.0 && u < 1.0, "quantile argument must lie in (0,1)");
  switch (kind_) {
    case Kind::Uniform:
      return p0_ + u * (p1_ - p0_);
    case Kind::Gaussian:
      return p0_ - std::sqrt(2.0 * p1_) * boost::math::erfc_inv(2.0 * u);
    case Kind::RaisedCosine:
      return p0_ + (p1_ - p0_) * raised_cosine_quantile01(u);
    case Kind::Bernoulli:
      return u < 1.0 - p2_ ? p0_ : p1_;
    case Kind::Custom: {
      const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
      const auto i = std::min<std::size_t>(
          static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - cum_.begin() - 1)), grid_.size() - 2);
      const double target = u - cum_[i];
      const double a = 0.5 * (dens_[i + 1] - dens_[i]) / p2_;
      const double b = dens_[i];
      double t;
      if (std::abs(a) < 1e-14 * (1.0 + b)) {
        t = b > 0 ? target / b : 0.0;
      } else {
        const double disc = std::max(0.0, b * b + 4.0 * a * target);
        t = 2.0 * target / (b + std::sqrt(disc));  // stable root of a t^2 + b t = target
      }
      return grid_[i] + std::clamp(t, 0.0, p2_);
    }
  }
  return 0.0;
}

double CouplingMeasure::mean() const {
  switch (kind_) {
    case Kind::Uniform:
    case Kind::RaisedCosine:
      return 0.5 * (p0_ + p1_);
    case Kind::Gaussian:
      return p0_;
    case Kind::Bernoulli:
      return (1.0 - p2_) * p0_ + p2_ * p1_;
    case Kind::Custom: {
      double m = 0.0;
      for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
        // exact integral of x * (linear density) over the cell
        const double x0 = grid_[i], h = p2_;
        const double r0 = dens_[i], r1 = dens_[i + 1];
        m += h * (r0 * (x0 / 2 + h / 6) + r1 * (x0 / 2 + h / 3));
      }
      return m;
    }
  }
  return 0.0;
}

double CouplingMeasure::sup_density() const {
  switch (kind_) {
    case Kind::Uniform: return 1.0 / (p1_ - p0_);
    case Kind::Gaussian: return 1.0 / std::sqrt(2.0 * kPi * p1_);
    case Kind::RaisedCosine: return 2.0 / (p1_ - p0_);
    case Kind::Custom: return *std::max_element(dens_.begin(), dens_.end());
    case Kind::Bernoulli: return kInf;
  }
  return kInf;
}

DensityNorms CouplingMeasure::norms() const {
  DensityNorms n;
  switch (kind_) {
    case Kind::Uniform:
      // Jumps at both ends: rho' is a pair of point masses, not an L^1 function.
      n.d1 = kInf;
      n.d2 = kInf;
      n.var = 2.0 / (p1_ - p0_);
      return n;
    case Kind::Gaussian: {
      const double s = std::sqrt(p1_);
      const double rho0 = 1.0 / (s * std::sqrt(2.0 * kPi));
      n.d1 = 2.0 * rho0;
      n.d2 = 4.0 * rho0 * std::exp(-0.5) / s;
      n.var = n.d1;
      return n;
    }
    case Kind::RaisedCosine: {
      const double w = p1_ - p0_;
      n.d1 = 4.0 / w;
      n.d2 = 8.0 * kPi / (w * w);
      n.var = 4.0 / w;
      return n;
    }
    case Kind::Bernoulli:
      throw ValidationError("bernoulli measure has no density; density norms undefined");
    case Kind::Custom: {
      // Centered differences on the grid and on the every-other-node subgrid,
      // combined by Richardson extrapolation (second order).
      auto diff_norms = [&](std::size_t stride) {
        const double h = p2_ * static_cast<double>(stride);
        std::vector<double> r;
        for (std::size_t i = 0; i < dens_.size(); i += stride) r.push_back(dens_[i]);
        r.insert(r.begin(), 0.0);  // zero extension outside the table
        r.push_back(0.0);
        double d1 = 0.0, d2 = 0.0;
        for (std::size_t i = 1; i + 1 < r.size(); ++i) {
          d1 += std::abs(r[i + 1] - r[i - 1]) / (2.0 * h) * h;
          d2 += std::abs(r[i + 1] - 2.0 * r[i] + r[i - 1]) / (h * h) * h;
        }
        return std::pair{d1, d2};
      };
      const auto [f1, f2] = diff_norms(1);
      const auto [c1, c2] = diff_norms(2);
      n.d1 = f1 + (f1 - c1) / 3.0;
      n.d2 = f2 + (f2 - c2) / 3.0;
      n.error = std::max(std::abs(f1 - c1), std::abs(f2 - c2)) / 3.0;
      double tv = std::abs(dens_.front()) + std::abs(dens_.back());
      for (std::size_t i = 0; i + 1 < dens_.size(); ++i) tv += std::abs(dens_[i + 1] - dens_[i]);
      n.var = tv;
      return n;
    }
  }
  return n;
}

nlohmann::json CouplingMeasure::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_name();
  switch (kind_) {
    case Kind::Uniform:
    case Kind::RaisedCosine:
      j["params"] = {{"a", p0_}, {"b", p1_}};
      break;
    case Kind::Gaussian:
      j["params"] = {{"mean", p0_}, {"variance", p1_}};
      break;
    case Kind::Bernoulli:
      j["params"] = {{"p", p2_}, {"levels", {p0_, p1_}}};
      break;
    case Kind::Custom:
      j["params"] = {{"grid", grid_}, {"density", dens_}};
      break;
  }
  return j;
}

CouplingMeasure CouplingMeasure::from_json(const nlohmann::json& j) {
  require(j.is_object(), "measure must be an object");
  for (const auto& [key, _] : j.items())
    require(key == "kind" || key == "params", "unknown key in measure block: " + key);
  require(j.contains("kind") && j["kind"].is_string(), "measure.kind must be a string");
  const std::string kind = j["kind"];
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  require(params.is_object(), "measure.params must be an object");
  auto num = [&](const char* key) {
    require(params.contains(key) && params[key].is_number(),
            std::string("measure.params.") + key + " must be a number");
    return params[key].get<double>();
  };
  auto only = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, _] : params.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      require(known, "unknown key in measure.params: " + key);
    }
  };
  if (kind == "uniform" || kind == "raised_cosine") {
    only({"a", "b"});
    return kind == "uniform" ? uniform(num("a"), num("b")) : raised_cosine(num("a"), num("b"));
  }
  if (kind == "gaussian") {
    only({"mean", "variance"});
    return gaussian(num("mean"), num("variance"));
  }
  if (kind == "bernoulli") {
    only({"p", "levels"});
    std::vector<double> levels{0.0, 1.0};
    if (params.contains("levels")) {
      require(params["levels"].is_array() && params["levels"].size() == 2,
              "measure.params.levels must be [low, high]");
      levels = params["levels"].get<std::vector<double>>();
    }
    return bernoulli(num("p"), levels[0], levels[1]);
  }
  if (kind == "custom") {
    only({"grid", "density"});
    require(params.contains("grid") && params.contains("density"),
            "custom measure needs params.grid and params.density");
    return custom(params["grid"].get<std::vector<double>>(), params["density"].get<std::vector<double>>());
  }
  throw ValidationError("unknown measure kind: " + kind);
}

HolderCheck holder_parameters(const CouplingMeasure& mu, double alpha, double c1,
                              const std::vector<double>& eps_grid, int t_points) {
  require(alpha > 0.0 && alpha <= 1.0, "holder exponent must lie in (0,1]");
  require(c1 > 0.0, "holder constant must be positive");
  require(!eps_grid.empty() && t_points >= 2, "holder check needs a nonempty grid");
  auto [lo, hi] = mu.support();
  if (!std::isfinite(lo)) {
    lo = mu.quantile(1e-12);
    hi = mu.quantile(1.0 - 1e-12);
  }
  std::vector<double> ts;
  for (int i = 0; i < t_points; ++i)
    ts.push_back(lo + (hi - lo) * static_cast<double>(i) / (t_points - 1));
  HolderCheck out;
  out.alpha = alpha;
  out.c1 = c1;
  for (double eps : eps_grid) {
    require(eps > 0.0, "holder eps grid must be positive");
    for (double t : ts) {
      const double ratio = mu.mass(t - eps, t + eps) / std::pow(eps, alpha);
      if (ratio > out.max_ratio) {
        out.max_ratio = ratio;
        out.witness_t = t;
        out.witness_eps = eps;
      }
    }
  }
  out.passed = out.max_ratio <= c1 * (1.0 + 1e-12);
  return out;
}

}  // namespace alloy
