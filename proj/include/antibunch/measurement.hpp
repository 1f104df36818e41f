#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "antibunch/correlation.hpp"

namespace antibunch::measurement {

inline constexpr int kFormatVersion = 1;

/// Start-stop coincidence setup: TAC window, detector rates and run plan.
struct DetectionConfig {
  double bin_width = 1e-9;       ///< s
  int n_bins = 400;
  double zero_offset = 47.2e-9;  ///< s, electronic delay of tau = 0 inside the window
  double singles_rate = 1e5;     ///< counts/s per detector at unit efficiency
  double pair_fraction = 0.1;    ///< two-photon / coherent intensity
  double efficiency = 1.0;       ///< detector quantum efficiency, (0, 1]
  double bg_flat_rate = 0.0;     ///< counts/s per bin at unit efficiency (scattering)
  double run_seconds = 5.0;      ///< s
  int n_runs = 1;
  std::uint64_t seed = 42;

  void validate() const;

  /// tau of bin i's center, s.
  double bin_tau(int i) const { return (i + 0.5) * bin_width - zero_offset; }
  /// Accidental coincidences per bin per run: (eta R_coh)^2 * bin_width * run_seconds,
  /// where R_coh = singles_rate / (1 + pair_fraction).
  double accidentals_per_run() const;
  /// Scattering background per bin per run: eta^2 * bg_flat_rate * run_seconds.
  double background_per_run() const;
};

struct CoincidenceHistogram {
  std::vector<std::uint64_t> counts;
  DetectionConfig config;
  std::vector<double> per_run_phases;  ///< rad, wrapped to (-pi, pi]
  std::uint64_t total_starts = 0;

  std::vector<double> bin_centers() const;  ///< s, TAC time axis (not shifted)
};

/// Expected counts per bin above which input is rejected.
inline constexpr double kMaxExpectedCounts = 1e12;

/// Monte Carlo histogram: per run a phase is drawn from N(phi_mean, phi_sigma),
/// bin means follow the fixed-phase model and counts are Poisson.
CoincidenceHistogram simulate_histogram(const correlation::MixModel& mm, const correlation::SpectralParams& sp,
                                        const DetectionConfig& dc);

/// Noise-free counts summed over runs with the phase average taken analytically.
std::vector<double> expected_counts(const correlation::MixModel& mm, const correlation::SpectralParams& sp,
                                    const DetectionConfig& dc);

/// Phase of run `run` for the given seed. Exposed so callers can reproduce
/// a single run's substream.
double sample_run_phase(std::uint64_t seed, int run, double phi_mean, double phi_sigma);

void to_json(nlohmann::json& j, const DetectionConfig& dc);
void from_json(const nlohmann::json& j, DetectionConfig& dc);

} // namespace antibunch::measurement
