#include "antibunch/measurement.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "antibunch/errors.hpp"

namespace antibunch::measurement {

using correlation::MixModel;
using correlation::SpectralParams;

namespace {

std::mt19937_64 run_engine(std::uint64_t seed, int run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), 0x7a3cu};
  return std::mt19937_64(seq);
}

double wrap_phase(double phi) {
  double w = std::remainder(phi, 2.0 * std::numbers::pi);  // [-pi, pi]
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

double draw_phase(std::mt19937_64& eng, double phi_mean, double phi_sigma) {
  if (phi_sigma == 0.0) return wrap_phase(phi_mean);
  std::normal_distribution<double> normal(phi_mean, phi_sigma);
  return wrap_phase(normal(eng));
}

void check_means(const std::vector<double>& mu) {
  for (double m : mu) {
    if (!(m <= kMaxExpectedCounts)) {
      throw InvalidArgument("expected counts per bin exceed " + std::to_string(kMaxExpectedCounts));
    }
  }
}

} // namespace

void DetectionConfig::validate() const {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw InvalidArgument("bin_width must be > 0");
  if (n_bins <= 0) throw InvalidArgument("n_bins must be > 0");
  if (!(run_seconds > 0.0) || !std::isfinite(run_seconds)) throw InvalidArgument("run_seconds must be > 0");
  if (!(efficiency > 0.0 && efficiency <= 1.0)) throw InvalidArgument("efficiency must be in (0, 1]");
  if (n_runs <= 0) throw InvalidArgument("n_runs must be > 0");
  if (!(singles_rate >= 0.0) || !std::isfinite(singles_rate)) throw InvalidArgument("singles_rate must be >= 0");
  if (!(pair_fraction >= 0.0) || !std::isfinite(pair_fraction)) throw InvalidArgument("pair_fraction must be >= 0");
  if (!(bg_flat_rate >= 0.0) || !std::isfinite(bg_flat_rate)) throw InvalidArgument("bg_flat_rate must be >= 0");
  if (!(zero_offset >= 0.0 && zero_offset < n_bins * bin_width)) {
    throw InvalidArgument("zero_offset must lie inside the TAC window [0, n_bins * bin_width)");
  }
}

double DetectionConfig::accidentals_per_run() const {
  const double coherent = efficiency * singles_rate / (1.0 + pair_fraction);
  return coherent * coherent * bin_width * run_seconds;
}

double DetectionConfig::background_per_run() const {
  return efficiency * efficiency * bg_flat_rate * run_seconds;
}

std::vector<double> CoincidenceHistogram::bin_centers() const {
  std::vector<double> c(static_cast<std::size_t>(config.n_bins));
  for (int i = 0; i < config.n_bins; ++i) c[static_cast<std::size_t>(i)] = (i + 0.5) * config.bin_width;
  return c;
}

double sample_run_phase(std::uint64_t seed, int run, double phi_mean, double phi_sigma) {
  auto eng = run_engine(seed, run);
  return draw_phase(eng, phi_mean, phi_sigma);
}

CoincidenceHistogram simulate_histogram(const MixModel& mm, const SpectralParams& sp, const DetectionConfig& dc) {
  mm.validate();
  sp.validate();
  dc.validate();

  const double n_acc = dc.accidentals_per_run();
  const double n_bg = dc.background_per_run();
  const auto n_bins = static_cast<std::size_t>(dc.n_bins);

  std::vector<double> f(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) f[i] = correlation::pair_amplitude(dc.bin_tau(static_cast<int>(i)), sp);

  CoincidenceHistogram hist;
  hist.config = dc;
  hist.counts.assign(n_bins, 0);
  hist.per_run_phases.reserve(static_cast<std::size_t>(dc.n_runs));

  std::vector<double> mu(n_bins);
  for (int run = 0; run < dc.n_runs; ++run) {
    // Phase and counts of a run come from that run's own substream.
    auto eng = run_engine(dc.seed, run);
    const double phi = draw_phase(eng, mm.phi_mean, mm.phi_sigma);
    hist.per_run_phases.push_back(phi);

    MixModel fixed = mm;
    fixed.phi_mean = phi;
    fixed.phi_sigma = 0.0;
    for (std::size_t i = 0; i < n_bins; ++i) {
      mu[i] = n_acc * correlation::g2_model(dc.bin_tau(static_cast<int>(i)), fixed, sp) + n_bg;
    }
    check_means(mu);
    for (std::size_t i = 0; i < n_bins; ++i) {
      if (mu[i] > 0.0) {
        std::poisson_distribution<std::uint64_t> pois(mu[i]);
        hist.counts[i] += pois(eng);
      }
    }
  }
  hist.total_starts = static_cast<std::uint64_t>(std::llround(dc.singles_rate * dc.efficiency * dc.run_seconds)) *
                      static_cast<std::uint64_t>(dc.n_runs);
  return hist;
}

std::vector<double> expected_counts(const MixModel& mm, const SpectralParams& sp, const DetectionConfig& dc) {
  mm.validate();
  sp.validate();
  dc.validate();
  const double n_acc = dc.accidentals_per_run();
  const double n_bg = dc.background_per_run();
  std::vector<double> mu(static_cast<std::size_t>(dc.n_bins));
  for (int i = 0; i < dc.n_bins; ++i) {
    mu[static_cast<std::size_t>(i)] = dc.n_runs * (n_acc * correlation::g2_phase_averaged(dc.bin_tau(i), mm, sp) + n_bg);
  }
  check_means(mu);
  return mu;
}

void to_json(nlohmann::json& j, const DetectionConfig& dc) {
  j = nlohmann::json{
      {"bin_width", dc.bin_width},       {"n_bins", dc.n_bins},
      {"zero_offset", dc.zero_offset},   {"singles_rate", dc.singles_rate},
      {"pair_fraction", dc.pair_fraction}, {"efficiency", dc.efficiency},
      {"bg_flat_rate", dc.bg_flat_rate}, {"run_seconds", dc.run_seconds},
      {"n_runs", dc.n_runs},             {"seed", dc.seed},
  };
}

void from_json(const nlohmann::json& j, DetectionConfig& dc) {
  static const std::set<std::string> known{"bin_width",  "n_bins",       "zero_offset", "singles_rate", "pair_fraction",
                                           "efficiency", "bg_flat_rate", "run_seconds", "n_runs",       "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw FormatError("unknown DetectionConfig key '" + key + "'");
  }
  DetectionConfig d;
  d.bin_width = j.value("bin_width", d.bin_width);
  d.n_bins = j.value("n_bins", d.n_bins);
  d.zero_offset = j.value("zero_offset", d.zero_offset);
  d.singles_rate = j.value("singles_rate", d.singles_rate);
  d.pair_fraction = j.value("pair_fraction", d.pair_fraction);
  d.efficiency = j.value("efficiency", d.efficiency);
  d.bg_flat_rate = j.value("bg_flat_rate", d.bg_flat_rate);
  d.run_seconds = j.value("run_seconds", d.run_seconds);
  d.n_runs = j.value("n_runs", d.n_runs);
  d.seed = j.value("seed", d.seed);
  dc = d;
}

} // namespace antibunch::measurement
