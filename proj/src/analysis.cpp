#include "antibunch/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "antibunch/errors.hpp"

namespace antibunch::analysis {

using correlation::CorrelationCurve;
using correlation::TauUnit;
using nonclassical::Feature;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t idx(Param p) { return static_cast<std::size_t>(p); }

// Additive floor of the finite-difference step; bandwidths are purely relative.
double step_floor(std::size_t k) {
  return (k == idx(Param::dw_opo) || k == idx(Param::dw_c2)) ? 0.0 : 1.0;
}

bool within_bounds(const ParamVector& v) {
  return v[idx(Param::b)] >= 0.0 && v[idx(Param::phi_sigma)] >= 0.0 && v[idx(Param::bg)] >= 0.0 &&
         v[idx(Param::dw_opo)] > 0.0 && v[idx(Param::dw_c2)] > 0.0 && v[idx(Param::scale)] > 0.0 &&
         std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Clamps a trial point into the feasible box. Strictly positive parameters
// may shrink by at most 10x per step.
ParamVector project(ParamVector trial, const ParamVector& from) {
  for (Param p : {Param::b, Param::phi_sigma, Param::bg}) trial[idx(p)] = std::max(0.0, trial[idx(p)]);
  for (Param p : {Param::dw_opo, Param::dw_c2, Param::scale}) {
    trial[idx(p)] = std::max(0.1 * from[idx(p)], trial[idx(p)]);
  }
  return trial;
}

// Unvalidated model so that central differences may straddle b = 0 or sigma = 0.
double model_raw(double tau, TauUnit unit, const ParamVector& v) {
  const correlation::SpectralParams sp{v[idx(Param::dw_opo)], v[idx(Param::dw_c2)]};
  const double t = unit == TauUnit::scaled ? tau * sp.scaled_unit() : tau;
  const double bf = v[idx(Param::b)] * correlation::pair_amplitude(t, sp);
  const double c = correlation::mean_cos_phase(v[idx(Param::phi_mean)], v[idx(Param::phi_sigma)]);
  const double bg = v[idx(Param::bg)];
  return v[idx(Param::scale)] * (1.0 + bf * bf + 2.0 * bf * c + bg) / (1.0 + bg);
}

std::vector<std::size_t> free_indices(const ParamMask& free) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < kNumParams; ++k) {
    if (free[k]) out.push_back(k);
  }
  return out;
}

Eigen::MatrixXd jacobian(const CorrelationCurve& curve, const ParamVector& v, const std::vector<std::size_t>& cols,
                         double rel_step) {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(curve.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const std::size_t k = cols[c];
    const double h = rel_step * (std::abs(v[k]) + step_floor(k));
    ParamVector up = v, down = v;
    up[k] += h;
    down[k] -= h;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          (model_raw(curve.tau[i], curve.unit, up) - model_raw(curve.tau[i], curve.unit, down)) / (2.0 * h);
    }
  }
  return jac;
}

double objective(const CorrelationCurve& curve, const ParamVector& v, Eigen::VectorXd* residual = nullptr) {
  const auto& sig = *curve.sigma;
  double sum = 0.0;
  if (residual) residual->resize(static_cast<Eigen::Index>(curve.size()));
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double r = (curve.g2[i] - model_raw(curve.tau[i], curve.unit, v)) / sig[i];
    if (residual) (*residual)(static_cast<Eigen::Index>(i)) = r;
    sum += r * r;
  }
  return sum;
}

} // namespace

CorrelationCurve normalize_histogram(const measurement::CoincidenceHistogram& hist,
                                     std::pair<double, double> baseline_window, const NormalizeOptions& opts) {
  const auto& dc = hist.config;
  dc.validate();
  if (hist.counts.size() != static_cast<std::size_t>(dc.n_bins)) {
    throw InvalidArgument("histogram counts length does not match n_bins");
  }
  const auto [lo, hi] = baseline_window;
  double sum = 0.0;
  std::size_t n_base = 0;
  for (int i = 0; i < dc.n_bins; ++i) {
    const double t = dc.bin_tau(i);
    if (t >= lo && t <= hi) {
      sum += static_cast<double>(hist.counts[static_cast<std::size_t>(i)]);
      ++n_base;
    }
  }
  if (n_base == 0) throw InvalidArgument("baseline window contains no bins");
  if (n_base < opts.min_baseline_bins) {
    throw InvalidArgument("baseline window holds " + std::to_string(n_base) + " bins, need at least " +
                          std::to_string(opts.min_baseline_bins));
  }
  const double mean = sum / static_cast<double>(n_base);
  if (!(mean > 0.0)) throw InvalidArgument("baseline window has zero mean counts");
  const double rel_mean_err = std::sqrt(sum) / static_cast<double>(n_base) / mean;

  CorrelationCurve out;
  out.unit = TauUnit::seconds;
  out.sigma.emplace();
  out.tau.reserve(hist.counts.size());
  for (int i = 0; i < dc.n_bins; ++i) {
    const double n = static_cast<double>(hist.counts[static_cast<std::size_t>(i)]);
    const double g = n / mean;
    out.tau.push_back(dc.bin_tau(i));
    out.g2.push_back(g);
    out.sigma->push_back(std::sqrt(std::max(n, 1.0) / (mean * mean) + g * g * rel_mean_err * rel_mean_err));
  }
  return out;
}

std::pair<double, double> default_baseline_window(const measurement::DetectionConfig& dc,
                                                  const correlation::SpectralParams& sp) {
  sp.validate();
  return {10.0 * sp.scaled_unit(), dc.bin_tau(dc.n_bins - 1)};
}

std::string_view param_name(Param p) {
  switch (p) {
    case Param::b: return "b";
    case Param::phi_mean: return "phi_mean";
    case Param::phi_sigma: return "phi_sigma";
    case Param::bg: return "bg";
    case Param::dw_opo: return "dw_opo";
    case Param::dw_c2: return "dw_c2";
    case Param::scale: return "scale";
  }
  return "?";
}

ParamVector FitParams::to_vector() const {
  return {mm.b, mm.phi_mean, mm.phi_sigma, mm.bg, sp.dw_opo, sp.dw_c2, scale};
}

FitParams FitParams::from_vector(const ParamVector& v) {
  FitParams p;
  p.mm = {v[0], v[1], v[2], v[3]};
  p.sp = {v[4], v[5]};
  p.scale = v[6];
  return p;
}

double& FitParams::operator[](Param p) {
  switch (p) {
    case Param::b: return mm.b;
    case Param::phi_mean: return mm.phi_mean;
    case Param::phi_sigma: return mm.phi_sigma;
    case Param::bg: return mm.bg;
    case Param::dw_opo: return sp.dw_opo;
    case Param::dw_c2: return sp.dw_c2;
    case Param::scale: return scale;
  }
  return scale;
}

double FitParams::operator[](Param p) const { return const_cast<FitParams&>(*this)[p]; }

double model_value(double tau, TauUnit unit, const FitParams& p) {
  p.mm.validate();
  p.sp.validate();
  return model_raw(tau, unit, p.to_vector());
}

std::vector<double> sensitivities(const CorrelationCurve& curve, const FitParams& p, const ParamMask& free,
                                  double rel_step) {
  const auto cols = free_indices(free);
  const Eigen::MatrixXd jac = jacobian(curve, p.to_vector(), cols, rel_step);
  std::vector<double> out(static_cast<std::size_t>(jac.size()));
  for (Eigen::Index r = 0; r < jac.rows(); ++r)
    for (Eigen::Index c = 0; c < jac.cols(); ++c)
      out[static_cast<std::size_t>(r * jac.cols() + c)] = jac(r, c);
  return out;
}

FitResult fit_model(const CorrelationCurve& curve, const FitParams& init, const ParamMask& free,
                    const FitOptions& opts) {
  curve.validate();
  if (!curve.sigma) throw InvalidArgument("fit_model requires a curve with sigma");
  if (curve.size() < 10) throw InvalidArgument("fit_model requires at least 10 points");
  for (double s : *curve.sigma) {
    if (!(s > 0.0)) throw InvalidArgument("fit_model requires sigma > 0 at every point");
  }
  init.mm.validate();
  init.sp.validate();
  if (!(init.scale > 0.0)) throw InvalidArgument("baseline scale must be > 0");

  const auto cols = free_indices(free);
  const auto n_free = static_cast<Eigen::Index>(cols.size());
  FitResult res;
  res.free = free;

  ParamVector v = init.to_vector();
  Eigen::VectorXd resid;
  double obj = objective(curve, v, &resid);
  res.objective_history.push_back(obj);

  const double dof = std::max<double>(1.0, static_cast<double>(curve.size()) - static_cast<double>(n_free));
  const auto finish = [&](bool converged) {
    res.params = FitParams::from_vector(v);
    res.chi2 = obj;
    res.chi2_dof = obj / dof;
    res.converged = converged;
    if (converged) {
      ParamVector err;
      err.fill(kNaN);
      if (n_free > 0) {
        const Eigen::MatrixXd jac = jacobian(curve, v, cols, opts.diff_step);
        const Eigen::VectorXd inv_sig =
            Eigen::Map<const Eigen::VectorXd>(curve.sigma->data(), static_cast<Eigen::Index>(curve.size())).cwiseInverse();
        // Columns scaled to unit parameter size so bandwidths (~1e8) and
        // dimensionless parameters share one rank threshold.
        Eigen::VectorXd col_scale(n_free);
        for (Eigen::Index c = 0; c < n_free; ++c) {
          const std::size_t k = cols[static_cast<std::size_t>(c)];
          col_scale(c) = std::abs(v[k]) + step_floor(k);
        }
        const Eigen::MatrixXd wj = inv_sig.asDiagonal() * jac * col_scale.asDiagonal();
        const Eigen::MatrixXd curv = wj.transpose() * wj;
        const Eigen::MatrixXd cov = curv.completeOrthogonalDecomposition().pseudoInverse();
        const double curv_max = curv.diagonal().maxCoeff();
        for (Eigen::Index c = 0; c < n_free; ++c) {
          if (curv(c, c) <= 1e-12 * curv_max) continue;  // parameter not constrained by the data
          err[cols[static_cast<std::size_t>(c)]] = col_scale(c) * std::sqrt(std::max(0.0, cov(c, c)));
        }
      }
      res.errors = err;
    }
    return res;
  };

  if (n_free == 0) return finish(true);

  const Eigen::VectorXd inv_sig =
      Eigen::Map<const Eigen::VectorXd>(curve.sigma->data(), static_cast<Eigen::Index>(curve.size())).cwiseInverse();
  double lambda = 1e-3;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    res.n_iter = iter;
    if (obj <= 1e-28 * static_cast<double>(curve.size())) return finish(true);

    const Eigen::MatrixXd wj = inv_sig.asDiagonal() * jacobian(curve, v, cols, opts.diff_step);
    const Eigen::MatrixXd a = wj.transpose() * wj;
    const Eigen::VectorXd g = wj.transpose() * resid;
    Eigen::VectorXd diag = a.diagonal();
    const double diag_floor = 1e-12 * std::max(1e-300, diag.maxCoeff());
    diag = diag.cwiseMax(diag_floor);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(g);

      ParamVector trial = v;
      for (Eigen::Index c = 0; c < n_free; ++c) trial[cols[static_cast<std::size_t>(c)]] += step(c);
      trial = project(trial, v);
      double step_norm = 0.0;
      for (std::size_t k : cols) {
        const double rel = (trial[k] - v[k]) / (std::abs(v[k]) + step_floor(k));
        step_norm += rel * rel;
      }
      step_norm = std::sqrt(step_norm);

      if (step.allFinite() && within_bounds(trial)) {
        Eigen::VectorXd trial_resid;
        const double trial_obj = objective(curve, trial, &trial_resid);
        if (trial_obj < obj) {
          const double rel_change = (obj - trial_obj) / std::max(obj, std::numeric_limits<double>::min());
          v = trial;
          obj = trial_obj;
          resid = std::move(trial_resid);
          res.objective_history.push_back(obj);
          lambda = std::max(lambda * 0.1, 1e-12);
          accepted = true;
          if (rel_change < opts.rel_objective_tol || step_norm < opts.step_tol) return finish(true);
          continue;
        }
      }
      // Rejected: at a minimum (or pinned on a bound) the damped step shrinks until it is negligible.
      if (step.allFinite() && step_norm < opts.step_tol) return finish(true);
      lambda *= 10.0;
      if (lambda > 1e20) return finish(false);
    }
  }
  return finish(false);
}

nonclassical::ViolationReport violation_significance(const CorrelationCurve& curve) {
  if (!curve.sigma) throw InvalidArgument("violation_significance requires a curve with sigma");
  return nonclassical::check_schwartz(curve);
}

CorrelationCurve smooth(const CorrelationCurve& curve, std::size_t width) {
  CorrelationCurve out = curve;
  out.sigma.reset();
  if (width <= 1 || curve.size() == 0) return out;
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  const auto n = static_cast<std::ptrdiff_t>(curve.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + half);
    double s = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) s += curve.g2[static_cast<std::size_t>(k)];
    out.g2[static_cast<std::size_t>(i)] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

AnalysisReport analyze(const measurement::CoincidenceHistogram& hist, const AnalysisOptions& opts) {
  opts.spectral.validate();
  AnalysisReport rep;
  rep.baseline_window = opts.baseline_window.value_or(default_baseline_window(hist.config, opts.spectral));
  rep.curve = normalize_histogram(hist, rep.baseline_window, {opts.min_baseline_bins});
  rep.feature = nonclassical::classify_feature(smooth(rep.curve, opts.smooth_bins), opts.tol);
  rep.violations = violation_significance(rep.curve);

  const bool destructive = rep.feature.feature == Feature::antibunching_zero || rep.feature.feature == Feature::double_dip;
  const double g0 = rep.curve.g2[rep.violations.zero_index];

  ParamMask free{};
  free[idx(Param::b)] = true;
  free[idx(Param::phi_sigma)] = true;
  free[idx(Param::dw_opo)] = opts.fit_bandwidths;
  free[idx(Param::dw_c2)] = opts.fit_bandwidths;
  free[idx(Param::scale)] = opts.fit_baseline;

  // g2(0) = (1 + b c)^2 at sigma = 0 gives a starting b; a few other starts
  // guard against the b <-> 1/b style ambiguity near the balance point.
  const double root = std::sqrt(std::max(g0, 0.0));
  std::vector<double> b_starts;
  if (rep.feature.feature == Feature::double_dip) {
    b_starts = {1.0 + root, 2.0};
  } else if (destructive) {
    b_starts = {std::max(0.2, 1.0 - root), 1.0, 1.0 + root};
  } else {
    b_starts = {std::max(0.1, root - 1.0), 0.5, 1.0};
  }

  std::optional<FitResult> best;
  for (double b0 : b_starts) {
    FitParams init;
    init.sp = opts.spectral;
    init.mm = {b0, destructive ? std::numbers::pi : 0.0, 0.3, 0.0};
    FitResult r = fit_model(rep.curve, init, free, opts.fit);
    if (!best || (r.converged && !best->converged) || (r.converged == best->converged && r.chi2 < best->chi2)) {
      best = std::move(r);
    }
  }

  if (opts.release_phase && best->converged) {
    ParamMask stage2 = free;
    stage2[idx(Param::phi_mean)] = true;
    stage2[idx(Param::phi_sigma)] = false;
    FitResult r = fit_model(rep.curve, best->params, stage2, opts.fit);
    if (r.converged && r.chi2 <= best->chi2) {
      // Report the union of both stages; phi_sigma keeps its stage-one error.
      const std::size_t s = idx(Param::phi_sigma);
      (*r.errors)[s] = (*best->errors)[s];
      r.free[s] = true;
      best = std::move(r);
    }
  }
  rep.fit = std::move(*best);
  return rep;
}

void to_json(nlohmann::json& j, const FitParams& p) {
  j = nlohmann::json::object();
  const ParamVector v = p.to_vector();
  for (std::size_t k = 0; k < kNumParams; ++k) j[std::string(param_name(static_cast<Param>(k)))] = v[k];
}

void to_json(nlohmann::json& j, const FitResult& r) {
  j = nlohmann::json{{"params", r.params},  {"chi2", r.chi2},     {"chi2_dof", r.chi2_dof},
                     {"converged", r.converged}, {"n_iter", r.n_iter}};
  nlohmann::json free = nlohmann::json::array();
  for (std::size_t k = 0; k < kNumParams; ++k) {
    if (r.free[k]) free.push_back(param_name(static_cast<Param>(k)));
  }
  j["free"] = free;
  if (r.errors) {
    nlohmann::json err = nlohmann::json::object();
    for (std::size_t k = 0; k < kNumParams; ++k) {
      if (r.free[k] && std::isfinite((*r.errors)[k])) err[std::string(param_name(static_cast<Param>(k)))] = (*r.errors)[k];
    }
    j["errors"] = err;
  } else {
    j["errors"] = nullptr;
  }
}

} // namespace antibunch::analysis
