#include "antibunch/nonclassical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "antibunch/errors.hpp"

namespace antibunch::nonclassical {

using correlation::CorrelationCurve;

namespace {

double sigma_at(const CorrelationCurve& c, std::size_t i) { return c.sigma ? (*c.sigma)[i] : 0.0; }

std::optional<double> z_of(double depth, double se, bool has_sigma) {
  if (!has_sigma || !(se > 0.0)) return std::nullopt;
  return depth / se;
}

void finish(InequalityResult& r, double witness) {
  r.violated = r.depth > kViolationFloor;
  if (r.violated) {
    r.margin = r.depth;
    r.witness_tau = witness;
  }
}

// Largest `diff(i)` over all i != zero; the comparison is against the zero bin.
template <typename Diff>
InequalityResult max_over_delays(const CorrelationCurve& c, std::size_t zero, Diff diff) {
  InequalityResult r;
  const bool has_sigma = c.sigma.has_value();
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = zero;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i == zero) continue;
    const double d = diff(i);
    if (d > best) {
      best = d;
      arg = i;
    }
  }
  if (arg == zero) return r;  // single-point grid: nothing to compare
  r.depth = best;
  const double se = std::hypot(sigma_at(c, arg), sigma_at(c, zero));
  r.z_score = z_of(best, se, has_sigma);
  finish(r, c.tau[arg]);
  return r;
}

} // namespace

std::size_t zero_delay_index(const CorrelationCurve& curve) {
  if (curve.size() == 0) throw InvalidArgument("curve is empty");
  const auto& tau = curve.tau;
  std::size_t best = 0;
  for (std::size_t i = 1; i < tau.size(); ++i) {
    if (std::abs(tau[i]) < std::abs(tau[best])) best = i;
  }
  if (tau[best] == 0.0) return best;
  double spacing = 0.0;
  if (best > 0) spacing = std::max(spacing, tau[best] - tau[best - 1]);
  if (best + 1 < tau.size()) spacing = std::max(spacing, tau[best + 1] - tau[best]);
  if (!(std::abs(tau[best]) <= spacing)) {
    throw InvalidArgument("curve has no point within one bin of zero delay");
  }
  return best;
}

ViolationReport check_schwartz(const CorrelationCurve& curve) {
  curve.validate();
  ViolationReport rep;
  const std::size_t z = zero_delay_index(curve);
  rep.zero_index = z;
  rep.zero_tau = curve.tau[z];
  rep.zero_exact = curve.tau[z] == 0.0;
  rep.unit = curve.unit;

  const auto& g = curve.g2;
  const double g0 = g[z];
  const bool has_sigma = curve.sigma.has_value();

  rep.ineq_a.depth = 1.0 - g0;
  rep.ineq_a.z_score = z_of(rep.ineq_a.depth, sigma_at(curve, z), has_sigma);
  finish(rep.ineq_a, curve.tau[z]);

  rep.ineq_b = max_over_delays(curve, z, [&](std::size_t i) { return g[i] - g0; });
  rep.ineq_c = max_over_delays(curve, z, [&](std::size_t i) { return std::abs(g[i] - 1.0) - std::abs(g0 - 1.0); });
  return rep;
}

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::flat: return "flat";
    case Feature::bunching: return "bunching";
    case Feature::antibunching_zero: return "antibunching_zero";
    case Feature::double_dip: return "double_dip";
  }
  return "flat";
}

Classification classify_feature(const CorrelationCurve& curve, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("classification tolerance must be > 0");
  curve.validate();
  const std::size_t z = zero_delay_index(curve);
  const auto& g = curve.g2;
  const double g0 = g[z];

  double max_dev = 0.0;
  for (double v : g) max_dev = std::max(max_dev, std::abs(v - 1.0));
  if (max_dev < tol) return {Feature::flat, false};

  const auto [gmin_it, gmax_it] = std::minmax_element(g.begin(), g.end());

  // Minima on each side of zero must sit below both the zero bin and the
  // baseline, and must not be the outermost grid point.
  if (z > 0 && z + 1 < g.size()) {
    const auto left = std::min_element(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(z));
    const auto right = std::min_element(g.begin() + static_cast<std::ptrdiff_t>(z) + 1, g.end());
    const auto is_dip = [&](auto it, double edge) {
      return *it < g0 - tol && *it < 1.0 - tol && *it < edge - tol;
    };
    if (is_dip(left, g.front()) && is_dip(right, g.back())) return {Feature::double_dip, false};
  }
  if (g0 > 1.0 + tol && g0 >= *gmax_it - tol) return {Feature::bunching, false};
  if (g0 < 1.0 - tol && g0 <= *gmin_it + tol) return {Feature::antibunching_zero, false};
  return {Feature::flat, true};
}

void to_json(nlohmann::json& j, const InequalityResult& r) {
  j = nlohmann::json{{"violated", r.violated}, {"depth", r.depth}};
  j["margin"] = r.margin ? nlohmann::json(*r.margin) : nlohmann::json(nullptr);
  j["witness_tau"] = r.witness_tau ? nlohmann::json(*r.witness_tau) : nlohmann::json(nullptr);
  j["z_score"] = r.z_score ? nlohmann::json(*r.z_score) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const ViolationReport& r) {
  j = nlohmann::json{
      {"ineq_a", r.ineq_a},
      {"ineq_b", r.ineq_b},
      {"ineq_c", r.ineq_c},
      {"zero_index", r.zero_index},
      {"zero_tau", r.zero_tau},
      {"zero_exact", r.zero_exact},
      {"tau_unit", correlation::to_string(r.unit)},
  };
}

} // namespace antibunch::nonclassical
