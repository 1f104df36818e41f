#include "antibunch/fock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "antibunch/errors.hpp"

namespace antibunch::fock {

namespace {

using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

void require_cutoff(int cutoff) {
  if (cutoff < 2) {
    throw InvalidArgument("Fock cutoff must be >= 2, got " + std::to_string(cutoff));
  }
}

double squared_norm(std::span<const Complex> a) {
  double s = 0.0;
  for (const auto& c : a) s += std::norm(c);
  return s;
}

// Extra levels carried during evolution so that population pushed above the
// cutoff is observable rather than reflected back by the truncation.
int padding_for(int cutoff) { return std::max(cutoff, 24); }

Matrix squeeze_generator(Complex xi, int dim) {
  Matrix g = Matrix::Zero(dim, dim);
  for (int n = 0; n + 2 < dim; ++n) {
    const double m = std::sqrt(static_cast<double>(n + 1) * static_cast<double>(n + 2));
    g(n + 2, n) += xi * m;             // xi a^+2
    g(n, n + 2) -= std::conj(xi) * m;  // -xi* a^2
  }
  return g;
}

Matrix expm_dense(const Matrix& a) {
  const Eigen::Index dim = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix scaled = a / std::ldexp(1.0, squarings);

  Matrix result = Matrix::Identity(dim, dim);
  Matrix term = Matrix::Identity(dim, dim);
  for (int k = 1; k <= 40; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

} // namespace

FockState::FockState(int cutoff) {
  require_cutoff(cutoff);
  amps_.assign(static_cast<std::size_t>(cutoff) + 1, Complex{0.0, 0.0});
  amps_[0] = 1.0;
}

FockState::FockState(std::vector<Complex> amps, double leaked) : amps_(std::move(amps)), leaked_norm_(leaked) {}

FockState FockState::from_amplitudes(std::vector<Complex> amplitudes, double leaked_norm) {
  require_cutoff(static_cast<int>(amplitudes.size()) - 1);
  const double n2 = squared_norm(amplitudes);
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw InvalidArgument("Fock amplitudes have zero or non-finite norm");
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& c : amplitudes) c *= inv;
  return FockState(std::move(amplitudes), leaked_norm);
}

double FockState::norm() const { return std::sqrt(squared_norm(amps_)); }

SqueezeParam::SqueezeParam(Complex xi) : xi_(xi) {
  if (!(std::abs(xi) < kMaxXi)) {
    throw OutOfRegime("|xi| must be < " + std::to_string(kMaxXi) + ", got " + std::to_string(std::abs(xi)));
  }
}

FockState coherent_state(Complex alpha, int cutoff) {
  require_cutoff(cutoff);
  if (!(std::abs(alpha) <= kMaxAlpha)) {
    throw OutOfRegime("|alpha| must be <= 1 (weak-field regime), got " + std::to_string(std::abs(alpha)));
  }
  std::vector<Complex> amps(static_cast<std::size_t>(cutoff) + 1);
  const double prefactor = std::exp(-0.5 * std::norm(alpha));
  Complex term = prefactor;
  for (int n = 0; n <= cutoff; ++n) {
    if (n > 0) term *= alpha / std::sqrt(static_cast<double>(n));
    amps[static_cast<std::size_t>(n)] = term;
  }
  const double kept = squared_norm(amps);
  return FockState::from_amplitudes(std::move(amps), std::max(0.0, 1.0 - kept));
}

FockState squeeze_evolve(const FockState& state, const SqueezeParam& xi) {
  if (xi.value() == Complex{0.0, 0.0}) return state;

  const int cutoff = state.cutoff();
  const int dim = cutoff + 1 + padding_for(cutoff);
  Vector in = Vector::Zero(dim);
  for (int n = 0; n <= cutoff; ++n) in(n) = state[n];

  const Vector out = expm_dense(squeeze_generator(xi.value(), dim)) * in;

  std::vector<Complex> kept(static_cast<std::size_t>(cutoff) + 1);
  double kept_norm = 0.0;
  for (int n = 0; n <= cutoff; ++n) {
    kept[static_cast<std::size_t>(n)] = out(n);
    kept_norm += std::norm(out(n));
  }
  const double lost = std::clamp(1.0 - kept_norm / out.squaredNorm(), 0.0, 1.0);
  const double leaked = 1.0 - (1.0 - state.leaked_norm()) * (1.0 - lost);
  return FockState::from_amplitudes(std::move(kept), leaked);
}

PhotonRates photon_rates(const FockState& state) {
  return {std::norm(state[1]), std::norm(state[2])};
}

SqueezeParam cancellation_xi(Complex alpha) {
  if (!(std::abs(alpha) <= kMaxAlpha)) {
    throw OutOfRegime("|alpha| must be <= 1 (weak-field regime), got " + std::to_string(std::abs(alpha)));
  }
  return SqueezeParam(-0.5 * alpha * alpha);
}

std::vector<Complex> expm(std::span<const Complex> matrix, int dim) {
  if (dim <= 0 || matrix.size() != static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim)) {
    throw InvalidArgument("expm: matrix size does not match dimension");
  }
  Matrix a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = matrix[static_cast<std::size_t>(r * dim + c)];
  const Matrix e = expm_dense(a);
  std::vector<Complex> out(matrix.size());
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) out[static_cast<std::size_t>(r * dim + c)] = e(r, c);
  return out;
}

void to_json(nlohmann::json& j, const FockState& s) {
  std::vector<double> re, im;
  for (const auto& c : s.amplitudes()) {
    re.push_back(c.real());
    im.push_back(c.imag());
  }
  j = nlohmann::json{{"cutoff", s.cutoff()}, {"re", re}, {"im", im}, {"leaked_norm", s.leaked_norm()}};
}

void from_json(const nlohmann::json& j, FockState& s) {
  const auto cutoff = j.at("cutoff").get<int>();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (re.size() != im.size() || re.size() != static_cast<std::size_t>(cutoff) + 1) {
    throw FormatError("FockState JSON: re/im length must be cutoff + 1");
  }
  std::vector<Complex> amps(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) amps[i] = {re[i], im[i]};
  s = FockState::from_amplitudes(std::move(amps), j.value("leaked_norm", 0.0));
}

} // namespace antibunch::fock
