#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "antibunch/correlation.hpp"
#include "antibunch/errors.hpp"
#include "antibunch/nonclassical.hpp"

using namespace antibunch;
using namespace antibunch::correlation;
using namespace antibunch::nonclassical;

namespace {

constexpr double kPi = std::numbers::pi;
const SpectralParams kSp{1.0, 2.8};

// Scaled grid to +-50 (f ~ e^-100 at the edges), with the double-dip zeros
// inserted when they exist.
CorrelationCurve model_curve(const MixModel& mm, std::size_t n = 2001) {
  auto grid = linear_grid(-50.0, 50.0, n);
  if (mm.b > 1.0 && mm.phi_sigma == 0.0 && mm.bg == 0.0 && std::cos(mm.phi_mean) == -1.0) {
    const auto z = double_dip_zeros(mm, kSp);
    grid.push_back(z->first / kSp.scaled_unit());
    grid.push_back(z->second / kSp.scaled_unit());
    std::sort(grid.begin(), grid.end());
  }
  return curve(mm, kSp, grid, TauUnit::scaled);
}

} // namespace

TEST_CASE("check_schwartz: single dip violates g2(0) >= 1 and g2(0) >= g2(tau)") {
  const auto rep = check_schwartz(model_curve({1.0, kPi, 0.0, 0.0}));
  CHECK(rep.zero_exact);
  CHECK(rep.zero_tau == 0.0);
  CHECK(rep.ineq_a.violated);
  CHECK(rep.ineq_b.violated);
  CHECK_FALSE(rep.ineq_c.violated);
  CHECK(*rep.ineq_a.margin == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(*rep.ineq_b.margin - 1.0) < 1e-9);
  CHECK(*rep.ineq_a.witness_tau == 0.0);
  CHECK(std::abs(*rep.ineq_b.witness_tau) > 10.0);
  CHECK_FALSE(rep.ineq_c.margin.has_value());
  CHECK_FALSE(rep.ineq_c.witness_tau.has_value());
  CHECK_FALSE(rep.ineq_a.z_score.has_value());
}

TEST_CASE("check_schwartz: double dip violates |g2(0)-1| >= |g2(tau)-1|") {
  const MixModel mm{2.0, kPi, 0.0, 0.0};
  const auto rep = check_schwartz(model_curve(mm));
  CHECK_FALSE(rep.ineq_a.violated);
  CHECK(rep.ineq_c.violated);
  CHECK(std::abs(*rep.ineq_c.margin - 1.0) < 1e-9);
  const auto z = double_dip_zeros(mm, kSp);
  CHECK(std::abs(*rep.ineq_c.witness_tau) == doctest::Approx(z->second / kSp.scaled_unit()).epsilon(1e-12));
}

TEST_CASE("check_schwartz: coherent light") {
  const auto rep = check_schwartz(model_curve({0.0, 0.0, 0.0, 0.0}));
  CHECK_FALSE(rep.any_violated());
  CHECK(rep.ineq_a.depth == 0.0);
  CHECK(rep.ineq_b.depth == 0.0);
  CHECK(rep.ineq_c.depth == 0.0);
}

TEST_CASE("check_schwartz: z-scores by direct arithmetic") {
  auto c = model_curve({1.0, kPi, 0.0, 0.0}, 401);
  c.sigma = std::vector<double>(c.size(), 0.01);
  const auto rep = check_schwartz(c);
  REQUIRE(rep.ineq_a.z_score.has_value());
  CHECK(*rep.ineq_a.z_score == doctest::Approx(rep.ineq_a.depth / 0.01));
  CHECK(*rep.ineq_b.z_score == doctest::Approx(rep.ineq_b.depth / (0.01 * std::sqrt(2.0))));
  CHECK(*rep.ineq_c.z_score == doctest::Approx(rep.ineq_c.depth / (0.01 * std::sqrt(2.0))));
  CHECK(rep.ineq_c.z_score.has_value());  // present for unviolated inequalities too
  CHECK(*rep.ineq_c.z_score < 0.0);

  // Rescaling sigma moves z-scores only.
  auto c2 = c;
  for (auto& s : *c2.sigma) s *= 7.0;
  const auto rep2 = check_schwartz(c2);
  CHECK(rep2.ineq_a.violated == rep.ineq_a.violated);
  CHECK(rep2.ineq_b.violated == rep.ineq_b.violated);
  CHECK(rep2.ineq_c.violated == rep.ineq_c.violated);
  CHECK(rep2.ineq_b.depth == rep.ineq_b.depth);
  CHECK(*rep2.ineq_a.z_score == doctest::Approx(*rep.ineq_a.z_score / 7.0));
}

TEST_CASE("check_schwartz: zero-delay bin") {
  CorrelationCurve c;
  c.tau = {-2.5, -1.5, -0.5, 0.5, 1.5};
  c.g2 = {1.0, 1.0, 0.2, 0.3, 1.0};
  const auto rep = check_schwartz(c);
  CHECK_FALSE(rep.zero_exact);
  CHECK(rep.zero_index == 2);
  CHECK(rep.ineq_a.depth == doctest::Approx(0.8));

  CorrelationCurve far;
  far.tau = {2.0, 3.0, 4.0};
  far.g2 = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(check_schwartz(far), InvalidArgument);
  CHECK_THROWS_AS(check_schwartz(CorrelationCurve{}), InvalidArgument);
}

TEST_CASE("classify_feature: canonical curves") {
  CHECK(classify_feature(model_curve({1.0, kPi, 0.0, 0.0})).feature == Feature::antibunching_zero);
  CHECK(classify_feature(model_curve({2.0, kPi, 0.0, 0.0})).feature == Feature::double_dip);
  const auto bunch = model_curve({1.0, 0.0, 0.0, 0.0});
  CHECK(bunch.g2[1000] == 4.0);
  CHECK(classify_feature(bunch).feature == Feature::bunching);
  const auto flat = classify_feature(model_curve({0.0, 0.0, 0.0, 0.0}));
  CHECK(flat.feature == Feature::flat);
  CHECK_FALSE(flat.low_confidence);
  CHECK_THROWS_AS(classify_feature(model_curve({}), 0.0), InvalidArgument);
}

TEST_CASE("classify_feature: ambiguous curve is low-confidence flat") {
  // Off-zero dip on one side only.
  CorrelationCurve c;
  c.tau = linear_grid(-5.0, 5.0, 11);
  c.g2 = {1, 1, 1, 1, 1, 1, 1, 0.5, 1, 1, 1};
  const auto cls = classify_feature(c);
  CHECK(cls.feature == Feature::flat);
  CHECK(cls.low_confidence);
}

TEST_CASE("property: exactly one class, consistent with the zero-delay sign") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> ub(0.0, 3.0), uphi(-kPi, kPi), us(0.0, 2.0);
  const double tol = 1e-6;
  for (int i = 0; i < 300; ++i) {
    const MixModel mm{ub(rng), uphi(rng), us(rng), 0.0};
    const auto c = model_curve(mm, 1001);
    const auto cls = classify_feature(c, tol);
    const double mc = mean_cos_phase(mm.phi_mean, mm.phi_sigma);
    const double g0 = g2_phase_averaged(0.0, mm, kSp);
    CAPTURE(mm.b);
    CAPTURE(mc);
    CHECK_FALSE(cls.low_confidence);
    switch (cls.feature) {
      case Feature::antibunching_zero:
        CHECK(g0 < 1.0);
        CHECK(mm.b <= -mc + 1e-3);  // minimum of 1 + b^2 f^2 + 2 b f c over f <= 1 sits at f = 1
        break;
      case Feature::double_dip:
        CHECK(mc < 0.0);
        CHECK(mm.b > -mc);
        break;
      case Feature::bunching: CHECK(g0 > 1.0); break;
      case Feature::flat: CHECK(std::abs(g0 - 1.0) < 1e-3); break;
    }
    if (g0 < 1.0 - tol) {
      CHECK((cls.feature == Feature::antibunching_zero || cls.feature == Feature::double_dip));
    }
  }
}

TEST_CASE("property: classically attainable phase-averaged curves report no violation") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ub(0.0, 3.0), uphi(-kPi, kPi), us(0.0, 5.0);
  int checked = 0;
  while (checked < 200) {
    const MixModel mm{ub(rng), uphi(rng), us(rng), 0.0};
    if (mean_cos_phase(mm.phi_mean, mm.phi_sigma) < 0.0) continue;
    ++checked;
    const auto rep = check_schwartz(model_curve(mm, 801));
    CAPTURE(mm.b);
    CAPTURE(mm.phi_mean);
    CAPTURE(mm.phi_sigma);
    CHECK_FALSE(rep.any_violated());
  }
}

TEST_CASE("ViolationReport JSON") {
  const nlohmann::json j = check_schwartz(model_curve({1.0, kPi, 0.0, 0.0}, 101));
  CHECK(j.at("ineq_a").at("violated") == true);
  CHECK(j.at("ineq_c").at("margin").is_null());
  CHECK(j.at("ineq_a").at("z_score").is_null());
  CHECK(j.at("tau_unit") == "scaled");
  CHECK(j.at("zero_exact") == true);
}
