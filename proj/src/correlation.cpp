#include "antibunch/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "antibunch/errors.hpp"

namespace antibunch::correlation {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

// Relative bandwidth difference below which the equal-bandwidth limit is used.
constexpr double kDegenerateRel = 1e-9;

// (1 + b f c)^2 + (b f)^2 (1 - c^2) == 1 + b^2 f^2 + 2 b f c, written as a sum
// of squares so exact cancellation lands on 0 rather than a rounding residue.
double interference(double bf, double c) {
  const double re = 1.0 + bf * c;
  return re * re + bf * bf * std::max(0.0, 1.0 - c * c);
}

} // namespace

void SpectralParams::validate() const {
  if (!positive_finite(dw_opo) || !positive_finite(dw_c2)) {
    throw InvalidArgument("bandwidths must be finite and > 0 (dw_opo=" + std::to_string(dw_opo) +
                          ", dw_c2=" + std::to_string(dw_c2) + ")");
  }
}

void MixModel::validate() const {
  if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidArgument("b must be >= 0");
  if (!std::isfinite(phi_mean)) throw InvalidArgument("phi_mean must be finite");
  if (!(phi_sigma >= 0.0) || !std::isfinite(phi_sigma)) throw InvalidArgument("phi_sigma must be >= 0");
  if (!(bg >= 0.0) || !std::isfinite(bg)) throw InvalidArgument("bg must be >= 0");
}

std::string_view to_string(TauUnit unit) { return unit == TauUnit::seconds ? "s" : "scaled"; }

TauUnit tau_unit_from_string(std::string_view s) {
  if (s == "s" || s == "seconds") return TauUnit::seconds;
  if (s == "scaled") return TauUnit::scaled;
  throw InvalidArgument("unknown tau unit '" + std::string(s) + "' (expected s or scaled)");
}

void CorrelationCurve::validate() const {
  if (g2.size() != tau.size()) throw InvalidArgument("curve: tau and g2 lengths differ");
  if (sigma && sigma->size() != tau.size()) throw InvalidArgument("curve: sigma length differs from tau");
  for (std::size_t i = 1; i < tau.size(); ++i) {
    if (!(tau[i] > tau[i - 1])) throw InvalidArgument("curve: tau must be strictly increasing");
  }
  for (double g : g2) {
    if (!(g >= 0.0)) throw InvalidArgument("curve: g2 must be >= 0");
  }
  if (sigma) {
    for (double s : *sigma) {
      if (!(s >= 0.0)) throw InvalidArgument("curve: sigma must be >= 0");
    }
  }
}

double pair_amplitude(double tau, const SpectralParams& sp) {
  sp.validate();
  const double t = std::abs(tau);
  const double slow = std::min(sp.dw_opo, sp.dw_c2);
  const double fast = std::max(sp.dw_opo, sp.dw_c2);
  const double half_t = 0.5 * t;
  if ((fast - slow) / fast < kDegenerateRel) {
    return (1.0 + slow * half_t) * std::exp(-slow * half_t);
  }
  // (fast e^{-slow t/2} - slow e^{-fast t/2}) / (fast - slow), rearranged with
  // expm1 so nearly equal bandwidths do not cancel catastrophically.
  const double x = (fast - slow) * half_t;
  const double rel = x > 0.0 ? -std::expm1(-x) / x : 1.0;
  return std::exp(-slow * half_t) * (1.0 + slow * half_t * rel);
}

double gamma2(double tau, double a2, double bmag, double phi, const SpectralParams& sp) {
  if (!(a2 >= 0.0) || !(bmag >= 0.0)) throw InvalidArgument("gamma2: magnitudes must be >= 0");
  const double f = pair_amplitude(tau, sp);
  return a2 * a2 + bmag * bmag * f * f + 2.0 * a2 * bmag * f * std::cos(phi);
}

double g2_model(double tau, const MixModel& mm, const SpectralParams& sp) {
  mm.validate();
  const double bf = mm.b * pair_amplitude(tau, sp);
  return (interference(bf, std::cos(mm.phi_mean)) + mm.bg) / (1.0 + mm.bg);
}

double mean_cos_phase(double phi_mean, double phi_sigma) {
  return std::cos(phi_mean) * std::exp(-0.5 * phi_sigma * phi_sigma);
}

double g2_phase_averaged(double tau, const MixModel& mm, const SpectralParams& sp) {
  mm.validate();
  const double bf = mm.b * pair_amplitude(tau, sp);
  return (interference(bf, mean_cos_phase(mm.phi_mean, mm.phi_sigma)) + mm.bg) / (1.0 + mm.bg);
}

CorrelationCurve curve(const MixModel& mm, const SpectralParams& sp, std::span<const double> tau_grid, TauUnit unit) {
  mm.validate();
  sp.validate();
  for (std::size_t i = 1; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] > tau_grid[i - 1])) throw InvalidArgument("tau grid must be strictly increasing");
  }
  const double to_seconds = unit == TauUnit::scaled ? sp.scaled_unit() : 1.0;
  CorrelationCurve out;
  out.unit = unit;
  out.tau.assign(tau_grid.begin(), tau_grid.end());
  out.g2.reserve(tau_grid.size());
  for (double t : tau_grid) out.g2.push_back(g2_phase_averaged(t * to_seconds, mm, sp));
  return out;
}

std::optional<std::pair<double, double>> double_dip_zeros(const MixModel& mm, const SpectralParams& sp) {
  mm.validate();
  sp.validate();
  if (mm.phi_sigma != 0.0 || mm.bg != 0.0 || std::abs(std::cos(mm.phi_mean) + 1.0) > 1e-12) {
    throw InvalidArgument("double_dip_zeros requires phi_mean = pi, phi_sigma = 0, bg = 0");
  }
  if (mm.b < 1.0) return std::nullopt;
  if (mm.b == 1.0) return std::pair{0.0, 0.0};

  const double target = 1.0 / mm.b;
  double lo = 0.0;
  double hi = 1.0 / std::min(sp.dw_opo, sp.dw_c2);
  while (pair_amplitude(hi, sp) > target) hi *= 2.0;
  // f is strictly decreasing: f(lo) > target >= f(hi).
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (pair_amplitude(mid, sp) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double root = 0.5 * (lo + hi);
  return std::pair{-root, root};
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  if (!(hi > lo)) throw InvalidArgument("grid: hi must exceed lo");
  std::vector<double> grid(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  if (lo == -hi && n % 2 == 1) {
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    for (std::size_t i = 0; i < n; ++i) grid[i] = static_cast<double>(static_cast<std::ptrdiff_t>(i) - half) * step;
  } else {
    for (std::size_t i = 0; i < n; ++i) grid[i] = lo + static_cast<double>(i) * step;
    grid.back() = hi;
  }
  return grid;
}

} // namespace antibunch::correlation
