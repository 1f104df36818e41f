#include "antibunch/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "antibunch/analysis.hpp"
#include "antibunch/correlation.hpp"
#include "antibunch/errors.hpp"
#include "antibunch/io.hpp"
#include "antibunch/measurement.hpp"
#include "antibunch/nonclassical.hpp"

namespace antibunch::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct ModelOptions {
  double b = 0.0;
  double phi_deg = 0.0;
  double phi_sigma = 0.0;
  double bg = 0.0;
  double dw_opo = 2.0e8;
  double ratio = 2.8;

  correlation::MixModel mix() const {
    correlation::MixModel mm{b, deg_to_rad(phi_deg), phi_sigma, bg};
    mm.validate();
    return mm;
  }
  correlation::SpectralParams spectral() const {
    correlation::SpectralParams sp{dw_opo, ratio * dw_opo};
    sp.validate();
    return sp;
  }
};

void add_spectral_options(CLI::App* sub, ModelOptions& m) {
  sub->add_option("--dw-opo", m.dw_opo, "down-converted field bandwidth dw_opo [rad/s]")->capture_default_str();
  sub->add_option("--ratio", m.ratio, "filter-cavity to OPO bandwidth ratio dw_c2/dw_opo [dimensionless]")
      ->capture_default_str();
}

void add_model_options(CLI::App* sub, ModelOptions& m) {
  sub->add_option("--b", m.b, "relative two-photon strength b = |B/A^2| [dimensionless, >= 0]")->capture_default_str();
  sub->add_option("--phi", m.phi_deg, "mean relative phase [degrees]")->capture_default_str();
  sub->add_option("--phi-sigma", m.phi_sigma, "RMS phase noise, Gaussian [radians, >= 0]")->capture_default_str();
  sub->add_option("--bg", m.bg, "incoherent background as a fraction of the baseline [dimensionless, >= 0]")
      ->capture_default_str();
  add_spectral_options(sub, m);
}

std::string option_name_for_key(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

std::string json_scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError("config values must be scalars, got " + v.dump());
}

// Values from the config file fill every option not given on the command line.
void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  if (!cfg.contains("format_version") || cfg["format_version"] != kConfigFormatVersion) {
    throw ConfigError(fmt::format("config file must set format_version = {}", kConfigFormatVersion));
  }
  for (const auto& [key, value] : cfg.items()) {
    if (key == "format_version") continue;
    const std::string name = option_name_for_key(key);
    CLI::Option* opt = sub->get_option_no_throw(name);
    if (opt == nullptr || name == "--config" || name == "--help") {
      throw ConfigError("unknown config key '" + key + "' for subcommand '" + sub->get_name() + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(json_scalar_to_string(value));
    opt->run_callback();
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text(path, text);
  }
}

// --- curve -----------------------------------------------------------------

struct CurveCommand {
  ModelOptions model;
  std::string unit = "scaled";
  double tau_min = -3.0;
  double tau_max = 3.0;
  std::size_t points = 601;
  std::string out;

  void attach(CLI::App* sub) {
    add_model_options(sub, model);
    sub->add_option("--unit", unit, "tau axis unit: 'scaled' (units of 4/dw_opo) or 's' (seconds)")
        ->check(CLI::IsMember({"scaled", "s", "seconds"}))
        ->capture_default_str();
    sub->add_option("--tau-min", tau_min, "first grid delay [--unit]")->capture_default_str();
    sub->add_option("--tau-max", tau_max, "last grid delay [--unit]")->capture_default_str();
    sub->add_option("--points", points, "number of grid points (odd and symmetric keeps tau = 0 exact)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--out", out, "output CSV path (default: stdout)");
  }

  int run(std::ostream& out_stream) const {
    const auto mm = model.mix();
    const auto sp = model.spectral();
    const auto u = correlation::tau_unit_from_string(unit);
    const auto grid = correlation::linear_grid(tau_min, tau_max, points);
    std::ostringstream csv;
    io::write_curve_csv(csv, correlation::curve(mm, sp, grid, u));
    emit(out, csv.str(), out_stream);
    return kOk;
  }
};

// --- simulate --------------------------------------------------------------

void add_detection_options(CLI::App* sub, measurement::DetectionConfig& dc) {
  sub->add_option("--bin-width", dc.bin_width, "TAC bin width [s]")->capture_default_str();
  sub->add_option("--bins", dc.n_bins, "number of TAC bins")->capture_default_str();
  sub->add_option("--zero-offset", dc.zero_offset, "electronic delay of tau = 0 inside the window [s]")
      ->capture_default_str();
  sub->add_option("--singles-rate", dc.singles_rate, "singles rate per detector at unit efficiency [counts/s]")
      ->capture_default_str();
  sub->add_option("--pair-fraction", dc.pair_fraction,
                  "two-photon to coherent intensity ratio [dimensionless, >= 0]")
      ->capture_default_str();
  sub->add_option("--efficiency", dc.efficiency, "detector quantum efficiency [dimensionless, (0, 1]]")
      ->capture_default_str();
  sub->add_option("--bg-rate", dc.bg_flat_rate, "flat scattering background at unit efficiency [counts/s/bin]")
      ->capture_default_str();
  sub->add_option("--run-seconds", dc.run_seconds, "duration of one run [s]")->capture_default_str();
  sub->add_option("--runs", dc.n_runs, "number of runs; the phase is redrawn per run")->capture_default_str();
  sub->add_option("--seed", dc.seed, "RNG seed [64-bit unsigned]")->capture_default_str();
}

struct SimulateCommand {
  ModelOptions model;
  measurement::DetectionConfig dc;
  std::string out = "histogram";

  void attach(CLI::App* sub) {
    add_model_options(sub, model);
    add_detection_options(sub, dc);
    sub->add_option("--out", out, "output prefix; writes <prefix>.csv and <prefix>.json")->capture_default_str();
  }

  int run(std::ostream& out_stream) const {
    const auto mm = model.mix();
    const auto sp = model.spectral();
    dc.validate();
    const auto hist = measurement::simulate_histogram(mm, sp, dc);
    std::ostringstream csv;
    io::write_histogram_csv(csv, hist);
    write_text(out + ".csv", csv.str());
    write_text(out + ".json", io::histogram_sidecar(hist).dump(2) + "\n");
    out_stream << out << ".csv\n" << out << ".json\n";
    return kOk;
  }
};

// --- analyze ---------------------------------------------------------------

struct AnalyzeCommand {
  std::string histogram;
  std::string sidecar;
  std::string out;
  std::string curve_out;
  ModelOptions model;
  double baseline_lo = std::numeric_limits<double>::quiet_NaN();
  double baseline_hi = std::numeric_limits<double>::quiet_NaN();
  analysis::AnalysisOptions opts;
  bool fix_bandwidths = false;
  bool no_release_phase = false;

  void attach(CLI::App* sub) {
    sub->add_option("histogram", histogram, "histogram CSV written by 'simulate'")->required();
    sub->add_option("--sidecar", sidecar, "JSON sidecar (default: histogram path with .json extension)");
    sub->add_option("--out", out, "report JSON path (default: stdout)");
    sub->add_option("--curve-out", curve_out, "normalized curve CSV path (default: <histogram stem>_g2.csv)");
    add_spectral_options(sub, model);
    sub->add_option("--baseline-lo", baseline_lo, "baseline window start, delay [s] (default: 10 * 4/dw_opo)");
    sub->add_option("--baseline-hi", baseline_hi, "baseline window end, delay [s] (default: last bin)");
    sub->add_option("--min-baseline-bins", opts.min_baseline_bins, "minimum bins in the baseline window")
        ->capture_default_str();
    sub->add_option("--tol", opts.tol, "feature classification tolerance [g2 units]")->capture_default_str();
    sub->add_option("--smooth", opts.smooth_bins, "moving-average width used for classification [bins]")
        ->capture_default_str();
    sub->add_flag("--fix-bandwidths", fix_bandwidths, "hold dw_opo and dw_c2 at their initial values");
    sub->add_flag("--fit-baseline", opts.fit_baseline, "fit the baseline scale instead of trusting the window");
    sub->add_flag("--no-release-phase", no_release_phase, "keep phi_mean pinned at 0 or pi");
    sub->add_option("--max-iter", opts.fit.max_iter, "fit iteration limit")->capture_default_str();
  }

  int run(std::ostream& out_stream) {
    opts.spectral = model.spectral();
    opts.fit_bandwidths = !fix_bandwidths;
    opts.release_phase = !no_release_phase;

    const std::string side = sidecar.empty() ? fs::path(histogram).replace_extension(".json").string() : sidecar;
    measurement::CoincidenceHistogram hist;
    try {
      std::istringstream csv(read_text(histogram));
      hist = io::read_histogram(csv, json::parse(read_text(side)));
    } catch (const json::exception& e) {
      throw DataError("sidecar '" + side + "': " + e.what());
    } catch (const FormatError& e) {
      throw DataError(e.what());
    }

    if (!std::isnan(baseline_lo) || !std::isnan(baseline_hi)) {
      const auto def = analysis::default_baseline_window(hist.config, opts.spectral);
      opts.baseline_window = std::pair{std::isnan(baseline_lo) ? def.first : baseline_lo,
                                       std::isnan(baseline_hi) ? def.second : baseline_hi};
    }

    analysis::AnalysisReport rep;
    try {
      rep = analysis::analyze(hist, opts);
    } catch (const InvalidArgument& e) {
      throw DataError(e.what());
    }

    const fs::path hp(histogram);
    const std::string cpath =
        curve_out.empty() ? (hp.parent_path() / (hp.stem().string() + "_g2.csv")).string() : curve_out;
    std::ostringstream csv;
    io::write_curve_csv(csv, rep.curve);
    write_text(cpath, csv.str());

    json report{
        {"format_version", kConfigFormatVersion},
        {"histogram", histogram},
        {"curve_path", cpath},
        {"baseline_window", {rep.baseline_window.first, rep.baseline_window.second}},
        {"feature", nonclassical::to_string(rep.feature.feature)},
        {"low_confidence", rep.feature.low_confidence},
        {"fit", rep.fit},
        {"violations", rep.violations},
    };
    emit(out, report.dump(2) + "\n", out_stream);
    return rep.fit.converged ? kOk : kFitError;
  }
};

// --- check -----------------------------------------------------------------

struct CheckCommand {
  std::string curve_path;
  std::string out;
  double tol = nonclassical::kDefaultFeatureTol;
  std::size_t smooth_bins = analysis::AnalysisOptions{}.smooth_bins;

  void attach(CLI::App* sub) {
    sub->add_option("curve", curve_path, "curve CSV (tau,g2[,sigma])")->required();
    sub->add_option("--out", out, "report JSON path (default: stdout)");
    sub->add_option("--tol", tol, "feature classification tolerance [g2 units]")->capture_default_str();
    sub->add_option("--smooth", smooth_bins, "moving-average width used for classification [bins]")
        ->capture_default_str();
  }

  int run(std::ostream& out_stream) const {
    correlation::CorrelationCurve curve;
    nonclassical::ViolationReport rep;
    nonclassical::Classification cls;
    try {
      std::istringstream in(read_text(curve_path));
      curve = io::read_curve_csv(in);
      rep = nonclassical::check_schwartz(curve);
      cls = nonclassical::classify_feature(analysis::smooth(curve, smooth_bins), tol);
    } catch (const FormatError& e) {
      throw DataError(e.what());
    } catch (const InvalidArgument& e) {
      throw DataError(e.what());
    }
    json report = rep;
    report["format_version"] = kConfigFormatVersion;
    report["feature"] = nonclassical::to_string(cls.feature);
    report["low_confidence"] = cls.low_confidence;
    emit(out, report.dump(2) + "\n", out_stream);
    return kOk;
  }
};

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-photon interference g2(tau): model curves, coincidence simulation, analysis, inequality checks"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  CurveCommand curve_cmd;
  SimulateCommand sim_cmd;
  AnalyzeCommand analyze_cmd;
  CheckCommand check_cmd;
  std::string curve_cfg, sim_cfg, analyze_cfg, check_cfg;

  auto* curve = app.add_subcommand("curve", "write the model g2(tau) as CSV");
  curve_cmd.attach(curve);
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo coincidence histogram (CSV + JSON sidecar)");
  sim_cmd.attach(simulate);
  auto* analyze = app.add_subcommand("analyze", "normalize, classify and fit a histogram; JSON report");
  analyze_cmd.attach(analyze);
  auto* check = app.add_subcommand("check", "classical inequality report for a curve CSV");
  check_cmd.attach(check);

  const char* cfg_help = "JSON config (format_version = 1); keys are option names with '_' for '-'; flags override";
  curve->add_option("--config", curve_cfg, cfg_help);
  simulate->add_option("--config", sim_cfg, cfg_help);
  analyze->add_option("--config", analyze_cfg, cfg_help);
  check->add_option("--config", check_cfg, cfg_help);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (curve->parsed()) {
      if (!curve_cfg.empty()) apply_config(curve, curve_cfg);
      return curve_cmd.run(out);
    }
    if (simulate->parsed()) {
      if (!sim_cfg.empty()) apply_config(simulate, sim_cfg);
      return sim_cmd.run(out);
    }
    if (analyze->parsed()) {
      if (!analyze_cfg.empty()) apply_config(analyze, analyze_cfg);
      return analyze_cmd.run(out);
    }
    if (check->parsed()) {
      if (!check_cfg.empty()) apply_config(check, check_cfg);
      return check_cmd.run(out);
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const OutOfRegime& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

} // namespace antibunch::cli
