#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace antibunch::correlation {

/// Bandwidths of the down-converted field and of the filter cavity, rad/s.
struct SpectralParams {
  double dw_opo = 2.0e8;
  double dw_c2 = 2.8 * 2.0e8;

  /// Throws InvalidArgument unless both bandwidths are finite and > 0.
  void validate() const;
  /// Seconds per unit of the scaled delay axis (4 / dw_opo).
  double scaled_unit() const { return 4.0 / dw_opo; }
};

/// Relative strength and phase of the two-photon field against the coherent
/// field, plus phase noise and an incoherent background.
struct MixModel {
  double b = 0.0;          ///< |B / A^2|
  double phi_mean = 0.0;   ///< mean relative phase, rad
  double phi_sigma = 0.0;  ///< RMS phase noise, rad
  double bg = 0.0;         ///< incoherent background, fraction of the baseline

  void validate() const;
};

enum class TauUnit { seconds, scaled };

std::string_view to_string(TauUnit unit);
/// Accepts "s", "seconds", "scaled" (units of 4/dw_opo).
TauUnit tau_unit_from_string(std::string_view s);

struct CorrelationCurve {
  std::vector<double> tau;
  std::vector<double> g2;
  std::optional<std::vector<double>> sigma;
  TauUnit unit = TauUnit::seconds;

  std::size_t size() const { return tau.size(); }
  /// Lengths equal, tau strictly increasing, g2 >= 0, sigma >= 0.
  void validate() const;
};

/// f(|tau|), normalized two-photon temporal amplitude. tau in seconds.
double pair_amplitude(double tau, const SpectralParams& sp);

/// |A^2 + B f(tau) e^{i phi}|^2 with a2 = |A|^2 and bmag = |B|.
double gamma2(double tau, double a2, double bmag, double phi, const SpectralParams& sp);

/// Fixed-phase normalized correlation. Uses mm.phi_mean and ignores phi_sigma.
double g2_model(double tau, const MixModel& mm, const SpectralParams& sp);

/// <cos phi> under a Gaussian phase law, exp(-sigma^2 / 2) cos(mean).
double mean_cos_phase(double phi_mean, double phi_sigma);

/// Correlation averaged over Gaussian phase noise of width mm.phi_sigma.
double g2_phase_averaged(double tau, const MixModel& mm, const SpectralParams& sp);

/// Evaluates g2_phase_averaged on a strictly increasing grid given in `unit`.
CorrelationCurve curve(const MixModel& mm, const SpectralParams& sp, std::span<const double> tau_grid,
                       TauUnit unit = TauUnit::seconds);

/// Delays +-tau* (seconds) of exact cancellation for phi_mean = pi, phi_sigma = 0,
/// bg = 0. (0, 0) when b == 1, nullopt when b < 1.
std::optional<std::pair<double, double>> double_dip_zeros(const MixModel& mm, const SpectralParams& sp);

/// Evenly spaced grid; exactly symmetric with an exact 0 when lo == -hi and n is odd.
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

} // namespace antibunch::correlation
