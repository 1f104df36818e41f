#pragma once

#include <complex>
#include <span>
#include <vector>

#include <json.hpp>

namespace antibunch::fock {

using Complex = std::complex<double>;

inline constexpr int kDefaultCutoff = 16;
inline constexpr double kMaxAlpha = 1.0;
inline constexpr double kMaxXi = 0.5;
/// Truncation is flagged when more than this fraction of the norm falls
/// outside 0..cutoff.
inline constexpr double kTruncationTolerance = 1e-5;

/// Single-mode pure state in the number basis, truncated at `cutoff`.
///
/// Amplitudes are always renormalized; `leaked_norm` keeps the norm that was
/// discarded by the truncation before renormalizing.
class FockState {
public:
  /// Vacuum |0> at the given cutoff.
  explicit FockState(int cutoff = kDefaultCutoff);

  /// Normalizes `amplitudes` and records `leaked_norm` as given.
  static FockState from_amplitudes(std::vector<Complex> amplitudes, double leaked_norm = 0.0);

  int cutoff() const { return static_cast<int>(amps_.size()) - 1; }
  std::span<const Complex> amplitudes() const { return amps_; }
  Complex operator[](int n) const { return amps_.at(static_cast<std::size_t>(n)); }
  double leaked_norm() const { return leaked_norm_; }
  /// Set when more than kTruncationTolerance of the norm was lost.
  bool truncation_error() const { return leaked_norm_ > kTruncationTolerance; }
  double norm() const;

private:
  FockState(std::vector<Complex> amps, double leaked);

  std::vector<Complex> amps_;
  double leaked_norm_ = 0.0;
};

/// Squeeze parameter xi = eta * V_p * t of the generator xi a^+2 - xi* a^2.
class SqueezeParam {
public:
  SqueezeParam() = default;
  /// Throws OutOfRegime when |xi| >= kMaxXi.
  explicit SqueezeParam(Complex xi);

  Complex value() const { return xi_; }

private:
  Complex xi_{0.0, 0.0};
};

struct PhotonRates {
  double p1 = 0.0;
  double p2 = 0.0;
};

/// Normalized coherent state c_n = exp(-|a|^2/2) a^n / sqrt(n!), truncated and
/// renormalized. Requires cutoff >= 2 and |alpha| <= 1.
FockState coherent_state(Complex alpha, int cutoff = kDefaultCutoff);

/// Applies exp(xi a^+2 - xi* a^2) exactly on the truncated space.
///
/// The propagator is built on a padded space so that population pushed above
/// the cutoff can be measured; that population is reported as leaked_norm and
/// the returned state is renormalized.
FockState squeeze_evolve(const FockState& state, const SqueezeParam& xi);

PhotonRates photon_rates(const FockState& state);

/// xi that cancels the two-photon amplitude at leading order: xi = -alpha^2 / 2.
SqueezeParam cancellation_xi(Complex alpha);

/// exp(A) for a dense square matrix stored row-major, by scaling and squaring
/// of a truncated Taylor series.
std::vector<Complex> expm(std::span<const Complex> matrix, int dim);

void to_json(nlohmann::json& j, const FockState& s);
void from_json(const nlohmann::json& j, FockState& s);

} // namespace antibunch::fock
