#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "antibunch/correlation.hpp"
#include "antibunch/measurement.hpp"
#include "antibunch/nonclassical.hpp"

namespace antibunch::analysis {

struct NormalizeOptions {
  std::size_t min_baseline_bins = 20;
};

/// g2_hat = counts / mean(counts in baseline window), with sigma from sqrt(N)
/// (N -> 1 for empty bins) combined with the baseline-mean error. The window
/// is given in delay seconds, inclusive. Output tau is delay (bin center minus
/// zero_offset) in seconds.
correlation::CorrelationCurve normalize_histogram(const measurement::CoincidenceHistogram& hist,
                                                  std::pair<double, double> baseline_window,
                                                  const NormalizeOptions& opts = {});

/// From 10 * 4/dw_opo to the last bin of the window.
std::pair<double, double> default_baseline_window(const measurement::DetectionConfig& dc,
                                                  const correlation::SpectralParams& sp);

enum class Param : std::size_t { b, phi_mean, phi_sigma, bg, dw_opo, dw_c2, scale };
inline constexpr std::size_t kNumParams = 7;
using ParamVector = std::array<double, kNumParams>;
using ParamMask = std::array<bool, kNumParams>;

std::string_view param_name(Param p);

struct FitParams {
  correlation::MixModel mm;
  correlation::SpectralParams sp;
  double scale = 1.0;  ///< baseline multiplier applied to the model

  ParamVector to_vector() const;
  static FitParams from_vector(const ParamVector& v);
  double& operator[](Param p);
  double operator[](Param p) const;
};

/// scale * g2_phase_averaged, with tau interpreted in `unit`.
double model_value(double tau, correlation::TauUnit unit, const FitParams& p);

struct FitOptions {
  int max_iter = 500;
  double rel_objective_tol = 1e-10;
  double step_tol = 1e-8;
  double diff_step = 1e-6;  ///< relative step of the central differences
};

struct FitResult {
  FitParams params;
  ParamMask free{};
  /// Standard errors from the inverse curvature of the objective; NaN for
  /// fixed parameters. Present iff converged.
  std::optional<ParamVector> errors;
  double chi2 = 0.0;
  double chi2_dof = 0.0;
  bool converged = false;
  int n_iter = 0;
  /// Objective after each accepted iteration, starting with the initial value.
  std::vector<double> objective_history;
};

/// d model / d param for every free parameter by central differences with
/// relative step `rel_step`. Row-major, size() x (number of free parameters).
std::vector<double> sensitivities(const correlation::CorrelationCurve& curve, const FitParams& p,
                                  const ParamMask& free, double rel_step);

/// Weighted least squares of the phase-averaged model against `curve` by a
/// damped Gauss-Newton (Levenberg-Marquardt) iteration.
FitResult fit_model(const correlation::CorrelationCurve& curve, const FitParams& init, const ParamMask& free,
                    const FitOptions& opts = {});

/// check_schwartz for curves that carry per-point sigma.
nonclassical::ViolationReport violation_significance(const correlation::CorrelationCurve& curve);

/// Centered moving average over `width` points (odd), sigma dropped.
correlation::CorrelationCurve smooth(const correlation::CorrelationCurve& curve, std::size_t width);

struct AnalysisOptions {
  std::optional<std::pair<double, double>> baseline_window;  ///< delay seconds
  std::size_t min_baseline_bins = 20;
  double tol = nonclassical::kDefaultFeatureTol;
  std::size_t smooth_bins = 5;  ///< classification only
  correlation::SpectralParams spectral;  ///< initial bandwidths
  bool fit_bandwidths = true;
  bool fit_baseline = false;  ///< free the baseline scale instead of trusting the window
  bool release_phase = true;  ///< second stage with phi_mean free, phi_sigma held
  FitOptions fit;
};

struct AnalysisReport {
  correlation::CorrelationCurve curve;
  std::pair<double, double> baseline_window;
  nonclassical::Classification feature;
  FitResult fit;
  nonclassical::ViolationReport violations;
};

/// normalize -> classify -> fit with phi_mean pinned to 0 or pi by the
/// feature -> optionally release phi_mean -> violation significance.
AnalysisReport analyze(const measurement::CoincidenceHistogram& hist, const AnalysisOptions& opts = {});

void to_json(nlohmann::json& j, const FitParams& p);
void to_json(nlohmann::json& j, const FitResult& r);

} // namespace antibunch::analysis
