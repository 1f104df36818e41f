#include "antibunch/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "antibunch/errors.hpp"

namespace antibunch::io {

using correlation::CorrelationCurve;
using correlation::TauUnit;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(fmt::format("line {}: '{}' is not a number", line_no, s));
  }
}

std::uint64_t parse_count(const std::string& s, int line_no) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(fmt::format("line {}: '{}' is not a nonnegative integer count", line_no, s));
  }
  return v;
}

// "# key=value" comment lines.
bool parse_comment(const std::string& line, std::string& key, std::string& value) {
  if (line.empty() || line[0] != '#') return false;
  const auto body = trim(line.substr(1));
  const auto eq = body.find('=');
  if (eq == std::string::npos) return false;
  key = trim(body.substr(0, eq));
  value = trim(body.substr(eq + 1));
  return true;
}

} // namespace

void write_curve_csv(std::ostream& os, const CorrelationCurve& curve) {
  curve.validate();
  fmt::print(os, "# tau_unit={}\n", correlation::to_string(curve.unit));
  os << (curve.sigma ? "tau,g2,sigma\n" : "tau,g2\n");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve.sigma) {
      fmt::print(os, "{:.17g},{:.17g},{:.17g}\n", curve.tau[i], curve.g2[i], (*curve.sigma)[i]);
    } else {
      fmt::print(os, "{:.17g},{:.17g}\n", curve.tau[i], curve.g2[i]);
    }
  }
}

CorrelationCurve read_curve_csv(std::istream& is) {
  CorrelationCurve curve;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  bool unit_seen = false;
  std::size_t columns = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string key, value;
      if (parse_comment(line, key, value) && key == "tau_unit") {
        curve.unit = correlation::tau_unit_from_string(value);
        unit_seen = true;
      }
      continue;
    }
    const auto fields = split(line);
    if (!header_seen) {
      if (fields == std::vector<std::string>{"tau", "g2"}) {
        columns = 2;
      } else if (fields == std::vector<std::string>{"tau", "g2", "sigma"}) {
        columns = 3;
        curve.sigma.emplace();
      } else {
        throw FormatError(fmt::format("line {}: expected header 'tau,g2[,sigma]'", line_no));
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != columns) {
      throw FormatError(fmt::format("line {}: expected {} columns, got {}", line_no, columns, fields.size()));
    }
    curve.tau.push_back(parse_double(fields[0], line_no));
    curve.g2.push_back(parse_double(fields[1], line_no));
    if (columns == 3) curve.sigma->push_back(parse_double(fields[2], line_no));
  }
  if (!header_seen) throw FormatError("curve CSV has no header");
  if (!unit_seen) throw FormatError("curve CSV is missing the '# tau_unit=' line");
  try {
    curve.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  return curve;
}

void write_histogram_csv(std::ostream& os, const measurement::CoincidenceHistogram& hist) {
  fmt::print(os, "# format_version={}\n", measurement::kFormatVersion);
  os << "bin_center_s,counts\n";
  const auto centers = hist.bin_centers();
  for (std::size_t i = 0; i < hist.counts.size(); ++i) fmt::print(os, "{:.17g},{}\n", centers[i], hist.counts[i]);
}

nlohmann::json histogram_sidecar(const measurement::CoincidenceHistogram& hist) {
  return nlohmann::json{{"format_version", measurement::kFormatVersion},
                        {"config", hist.config},
                        {"per_run_phases", hist.per_run_phases},
                        {"total_starts", hist.total_starts}};
}

measurement::CoincidenceHistogram read_histogram(std::istream& csv, const nlohmann::json& sidecar) {
  measurement::CoincidenceHistogram hist;
  try {
    if (sidecar.at("format_version").get<int>() != measurement::kFormatVersion) {
      throw FormatError("unsupported histogram sidecar format_version");
    }
    hist.config = sidecar.at("config").get<measurement::DetectionConfig>();
    hist.per_run_phases = sidecar.at("per_run_phases").get<std::vector<double>>();
    hist.total_starts = sidecar.value("total_starts", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("histogram sidecar: ") + e.what());
  }
  try {
    hist.config.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("histogram sidecar: ") + e.what());
  }
  if (hist.per_run_phases.size() != static_cast<std::size_t>(hist.config.n_runs)) {
    throw FormatError("histogram sidecar: per_run_phases length differs from n_runs");
  }

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  bool version_seen = false;
  const auto expected = hist.bin_centers();
  while (std::getline(csv, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string key, value;
      if (parse_comment(line, key, value) && key == "format_version") {
        if (value != std::to_string(measurement::kFormatVersion)) throw FormatError("unsupported histogram CSV format_version");
        version_seen = true;
      }
      continue;
    }
    const auto fields = split(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"bin_center_s", "counts"}) {
        throw FormatError(fmt::format("line {}: expected header 'bin_center_s,counts'", line_no));
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 2) throw FormatError(fmt::format("line {}: expected 2 columns", line_no));
    const std::size_t i = hist.counts.size();
    if (i >= expected.size()) throw FormatError("histogram CSV has more bins than n_bins");
    const double center = parse_double(fields[0], line_no);
    if (std::abs(center - expected[i]) > 1e-6 * hist.config.bin_width) {
      throw FormatError(fmt::format("line {}: bin center {} does not match the configured binning", line_no, center));
    }
    hist.counts.push_back(parse_count(fields[1], line_no));
  }
  if (!version_seen) throw FormatError("histogram CSV is missing '# format_version='");
  if (hist.counts.size() != expected.size()) throw FormatError("histogram CSV has fewer bins than n_bins");
  return hist;
}

} // namespace antibunch::io
