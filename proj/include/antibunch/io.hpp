#pragma once

#include <iosfwd>

#include <json.hpp>

#include "antibunch/correlation.hpp"
#include "antibunch/measurement.hpp"

namespace antibunch::io {

/// "# tau_unit=<s|scaled>" then "tau,g2" or "tau,g2,sigma", %.17g values.
void write_curve_csv(std::ostream& os, const correlation::CorrelationCurve& curve);
correlation::CorrelationCurve read_curve_csv(std::istream& is);

/// "# format_version=1" then "bin_center_s,counts".
void write_histogram_csv(std::ostream& os, const measurement::CoincidenceHistogram& hist);
/// {format_version, config, per_run_phases, total_starts}
nlohmann::json histogram_sidecar(const measurement::CoincidenceHistogram& hist);
/// Rebuilds a histogram from its CSV and sidecar, cross-checking bin centers.
measurement::CoincidenceHistogram read_histogram(std::istream& csv, const nlohmann::json& sidecar);

} // namespace antibunch::io
