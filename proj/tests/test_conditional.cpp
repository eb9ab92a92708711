#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "dfsim/conditional.hpp"

using namespace dfsim;

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752;

}  // namespace

TEST(MakeState, DefaultsGiveKnownAlicePopulations) {
  const MicroMacroState st = make_state(ImperfectionParams{}, 1000.0);
  ASSERT_EQ(st.dim_a, 3);
  ASSERT_EQ(st.dim_b, 3);
  EXPECT_TRUE(is_density_matrix(st.micro_AB));
  const FockMatrix ra = reduced_a(st);
  // 0.54 * (0.985/2 + 0.015/4) + 0.46, 0.54/2, 0.54 * 0.015/4
  EXPECT_NEAR(std::real(ra(0, 0)), 0.727975, 1e-12);
  EXPECT_NEAR(std::real(ra(1, 1)), 0.27, 1e-12);
  EXPECT_NEAR(std::real(ra(2, 2)), 0.002025, 1e-12);
  EXPECT_NEAR(std::abs(st.alpha_B - cxd(1000.0)), 0.0, 0.0);
}

TEST(MakeState, PerfectSingleHeraldGivesSplitSinglePhoton) {
  ImperfectionParams p;
  p.eta = 1.0;
  p.epsilon2 = 0.0;
  const MicroMacroState st = make_state(p, 0.0);
  // |10> and |01> with equal amplitude; Alice index is the slow one.
  FockVector psi(9);
  psi.setZero();
  psi(3) = kInvSqrt2;
  psi(1) = kInvSqrt2;
  const FockMatrix want = psi * psi.adjoint();
  EXPECT_LT((st.micro_AB - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MakeState, PureTwoPhotonHeraldSplitsBinomially) {
  ImperfectionParams p;
  p.eta = 1.0;
  p.epsilon2 = 1.0;
  const MicroMacroState st = make_state(p, 0.0);
  FockVector psi(9);
  psi.setZero();
  psi(6) = 0.5;                      // |20>
  psi(4) = std::sqrt(2.0) / 2.0;     // |11>
  psi(2) = 0.5;                      // |02>
  const FockMatrix want = psi * psi.adjoint();
  EXPECT_LT((st.micro_AB - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conditioning, WeightEqualsMarginalDensity) {
  const MicroMacroState st = make_state(ImperfectionParams{}, 200.0);
  const double theta = 0.3;
  const PolyGauss marginal = alice_marginal(st, theta);
  EXPECT_NEAR(marginal.total(), 1.0, 1e-12);
  for (const double x : {-1.7, -0.3, 0.0, kInvSqrt2, 2.4}) {
    const ConditionalOutcome out = condition_at(st, theta, x);
    EXPECT_NEAR(out.weight, marginal.pdf(x), 1e-12) << x;
    EXPECT_TRUE(is_density_matrix(out.bob.micro)) << x;
    EXPECT_NEAR(out.x_A.x, x, 0.0);
    EXPECT_NEAR(out.x_A.theta, theta, 0.0);
  }
}

TEST(Conditioning, OutcomeAverageRecoversBobMarginal) {
  const MicroMacroState st = make_state(ImperfectionParams{}, 50.0);
  const double theta = 1.1;
  FockMatrix acc = FockMatrix::Zero(3, 3);
  const double step = 0.01;
  for (double x = -8.0; x <= 8.0 + 1e-12; x += step) {
    const ConditionalOutcome out = condition_at(st, theta, x);
    const double w =
        (std::abs(x + 8.0) < 1e-12 || std::abs(x - 8.0) < 1e-12) ? 0.5 : 1.0;
    acc += (w * step * out.weight) * out.bob.micro;
  }
  EXPECT_LT((acc - reduced_b(st)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Conditioning, CatDecompositionAtTheMagicPoint) {
  // With no two-photon herald, psi_1(x)/psi_0(x) = sqrt(2) x = 1 at
  // x = 1/sqrt(2), so Bob's state is exactly
  // (1 - eta)|0><0| + eta |cat_pm><cat_pm| and the sign follows sgn(x).
  ImperfectionParams p;
  p.epsilon2 = 0.0;
  const MicroMacroState st = make_state(p, 300.0);
  for (const int sign : {+1, -1}) {
    const ConditionalOutcome out = condition_at(st, 0.0, sign * kInvSqrt2);
    const FockVector cat = cat_component(sign);
    FockMatrix want = FockMatrix::Zero(3, 3);
    want.topLeftCorner(2, 2) = 0.54 * (cat * cat.adjoint());
    want(0, 0) += 0.46;
    EXPECT_LT((out.bob.micro - want).cwiseAbs().maxCoeff(), 1e-12) << sign;
    EXPECT_NEAR(std::real(out.bob.micro(1, 0)), sign * 0.27, 1e-12);
    EXPECT_NEAR(std::abs(out.bob.alpha - cxd(300.0)), 0.0, 0.0);
  }
}

TEST(Conditioning, OrthogonalAngleKillsBobMeanQuadrature) {
  ImperfectionParams p;
  p.epsilon2 = 0.0;
  const MicroMacroState st = make_state(p, 100.0);
  const ConditionalOutcome out = condition_at(st, M_PI / 2.0, kInvSqrt2);
  // Alice at pi/2 leaves Bob's coherence purely imaginary, so the mean of
  // Bob's theta = 0 quadrature vanishes identically.
  const PolyGauss bob_pdf = quadrature_pdf(out.bob.micro, 0.0);
  EXPECT_LT(std::abs(bob_pdf.mean()), 1e-12);
  const PolyGauss aligned = quadrature_pdf(out.bob.micro, M_PI / 2.0);
  EXPECT_GT(std::abs(aligned.mean()), 0.1);
}

TEST(Conditioning, SampledOutcomesMatchMarginal) {
  const MicroMacroState st = make_state(ImperfectionParams{}, 1000.0);
  const double theta = 0.0;
  const PolyGauss marginal = alice_marginal(st, theta);

  // 64 equiprobable bins; chi^2 threshold is the 0.999 quantile at 63 dof.
  constexpr int kBins = 64;
  std::array<double, kBins - 1> edges{};
  for (int k = 1; k < kBins; ++k)
    edges[k - 1] = marginal.invert(static_cast<double>(k) / kBins);
  std::array<int, kBins> counts{};
  Rng rng(2024, 3);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const ConditionalOutcome out = alice_condition(st, theta, rng);
    const auto it = std::upper_bound(edges.begin(), edges.end(), out.x_A.x);
    counts[static_cast<int>(it - edges.begin())]++;
  }
  const double expected = static_cast<double>(n) / kBins;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 103.44237731987289);
}

TEST(Conditioning, VanishingDensityThrows) {
  const MicroMacroState st = make_state(ImperfectionParams{}, 10.0);
  EXPECT_THROW(condition_at(st, 0.0, 40.0), std::runtime_error);
}

TEST(CatComponent, GuardsAndValues) {
  EXPECT_THROW(cat_component(0), std::invalid_argument);
  const FockVector plus = cat_component(+1);
  EXPECT_NEAR(std::real(plus(0)), kInvSqrt2, 1e-15);
  EXPECT_NEAR(std::real(plus(1)), kInvSqrt2, 1e-15);
  EXPECT_NEAR(plus.squaredNorm(), 1.0, 1e-15);
}
