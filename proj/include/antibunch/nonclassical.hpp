#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include <json.hpp>

#include "antibunch/correlation.hpp"

namespace antibunch::nonclassical {

/// Result for one classical inequality.
///
/// `depth` is the signed violation depth and is always filled; it is > 0 when
/// the inequality is violated. `margin` and `witness_tau` are set only for
/// violated inequalities. `z_score` = depth / standard error of the compared
/// difference, set whenever the input curve carries sigma.
struct InequalityResult {
  bool violated = false;
  double depth = 0.0;
  std::optional<double> margin;
  std::optional<double> witness_tau;
  std::optional<double> z_score;
};

struct ViolationReport {
  InequalityResult ineq_a;  ///< g2(0) >= 1
  InequalityResult ineq_b;  ///< g2(0) >= g2(tau)
  InequalityResult ineq_c;  ///< |g2(0) - 1| >= |g2(tau) - 1|
  std::size_t zero_index = 0;
  double zero_tau = 0.0;    ///< grid value used as zero delay
  bool zero_exact = true;   ///< false when the nearest bin stands in for tau = 0
  correlation::TauUnit unit = correlation::TauUnit::seconds;

  bool any_violated() const { return ineq_a.violated || ineq_b.violated || ineq_c.violated; }
};

/// Depths below this are treated as numerical zero on noiseless curves.
inline constexpr double kViolationFloor = 1e-12;

/// Index of the grid point nearest tau = 0. Throws InvalidArgument if that
/// point is more than one grid spacing away from zero.
std::size_t zero_delay_index(const correlation::CorrelationCurve& curve);

/// Evaluates the three classical intensity-correlation inequalities on the grid.
ViolationReport check_schwartz(const correlation::CorrelationCurve& curve);

enum class Feature { flat, bunching, antibunching_zero, double_dip };

std::string_view to_string(Feature f);

struct Classification {
  Feature feature = Feature::flat;
  bool low_confidence = false;
};

inline constexpr double kDefaultFeatureTol = 0.02;

/// Shape classification with extremum tolerance `tol` (> 0).
Classification classify_feature(const correlation::CorrelationCurve& curve, double tol = kDefaultFeatureTol);

void to_json(nlohmann::json& j, const InequalityResult& r);
void to_json(nlohmann::json& j, const ViolationReport& r);

} // namespace antibunch::nonclassical
