#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dfsim/detection.hpp"

using namespace dfsim;

namespace {

DisplacedState displaced_vacuum(double alpha) {
  FockMatrix micro = FockMatrix::Zero(2, 2);
  micro(0, 0) = 1.0;
  return DisplacedState{micro, alpha, 0.0};
}

}  // namespace

TEST(PmfSampler, ReproducesTabulatedWeights) {
  PhotonPmf pmf;
  pmf.n0 = 5;
  pmf.probabilities = {0.2, 0.5, 0.3};
  const PmfSampler sampler(pmf);
  Rng rng(8, 0);
  std::array<long long, 3> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const long long v = sampler.draw(rng);
    ASSERT_GE(v, 5);
    ASSERT_LE(v, 7);
    counts[v - 5]++;
  }
  for (int k = 0; k < 3; ++k) {
    const double p = pmf.probabilities[k];
    const double se = std::sqrt(p * (1.0 - p) / n);
    EXPECT_NEAR(static_cast<double>(counts[k]) / n, p, 5.0 * se) << k;
  }
  EXPECT_THROW(PmfSampler(PhotonPmf{}), std::invalid_argument);
}

TEST(Engines, ExactRefusesLargeAmplitudes) {
  Rng rng(1, 0);
  EXPECT_THROW(
      sample_photon_number(displaced_vacuum(25.0), Engine::exact, rng),
      std::invalid_argument);
  EXPECT_THROW(engine_from_string("fast"), std::invalid_argument);
  EXPECT_EQ(engine_from_string("exact"), Engine::exact);
  EXPECT_EQ(engine_from_string("asymptotic"), Engine::asymptotic);
}

TEST(Engines, AsymptoticCoversLargeAmplitudes) {
  const DisplacedState bob = displaced_vacuum(25.0);
  const StreamSeed stream{91, 0};
  const int n = 20000;
  double s1 = 0.0;
  for (int i = 0; i < n; ++i) {
    Rng rng = stream.at(i);
    s1 += static_cast<double>(sample_photon_number(bob, Engine::asymptotic, rng));
  }
  const double mean = s1 / n;
  const double se = std::sqrt(625.0 / n);
  EXPECT_NEAR(mean, 625.0, 5.0 * se);
}

TEST(EnergyDiff, VacuumDifferenceHasDoubledVariance) {
  const double alpha = 50.0;
  const DisplacedState bob = displaced_vacuum(alpha);
  const StreamSeed stream{17, 2};
  const int n = 20000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    Rng rng = stream.at(i);
    const double d = static_cast<double>(
        measure_energy_diff(bob, alpha, Engine::asymptotic, rng));
    s1 += d;
    s2 += d * d;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double lam = alpha * alpha;
  EXPECT_NEAR(mean, 0.0, 5.0 * std::sqrt(2.0 * lam / n));
  EXPECT_NEAR(var, 2.0 * lam, 300.0);
  Rng rng(1, 0);
  EXPECT_THROW(measure_energy_diff(bob, -1.0, Engine::asymptotic, rng),
               std::invalid_argument);
}

TEST(Discriminate, HandWorkedCounts) {
  const std::vector<long long> plus{2, 3};
  const std::vector<long long> minus{0, 1};
  const auto a = discriminate(plus, minus, 1.5);
  EXPECT_EQ(a.error_plus, 0.0);
  EXPECT_EQ(a.error_minus, 0.0);
  EXPECT_EQ(a.avg_error, 0.0);
  const auto b = discriminate(plus, minus, 2.5);
  EXPECT_EQ(b.error_plus, 0.5);
  EXPECT_EQ(b.error_minus, 0.0);
  EXPECT_EQ(b.avg_error, 0.25);
  // Samples sitting exactly on the threshold count as errors for neither side.
  const auto c = discriminate(plus, minus, 2.0);
  EXPECT_EQ(c.error_plus, 0.0);
  EXPECT_EQ(c.error_minus, 0.0);
  EXPECT_THROW(discriminate({}, minus, 0.0), std::invalid_argument);
  EXPECT_THROW(discriminate(plus, {}, 0.0), std::invalid_argument);
}

TEST(Sweep, GuardsMalformedRequests) {
  const ImperfectionParams p;
  const StreamSeed stream{1, 0};
  EXPECT_THROW(
      conditional_sweep(p, 30.0, 0.0, 500, BinSpec{21, -3.15, 3.15}, stream),
      std::invalid_argument);
  EXPECT_THROW(
      conditional_sweep(p, 30.0, 0.0, 5000, BinSpec{0, -3.15, 3.15}, stream),
      std::invalid_argument);
  EXPECT_THROW(
      conditional_sweep(p, 30.0, 0.0, 5000, BinSpec{5, 2.0, -2.0}, stream),
      std::invalid_argument);
  EXPECT_THROW(
      conditional_sweep(p, 0.0, 0.0, 5000, BinSpec{5, -3.15, 3.15}, stream),
      std::invalid_argument);
  EXPECT_THROW(conditional_sweep(p, 30.0, 0.0, 5000, BinSpec{5, -3.15, 3.15},
                                 stream, SweepOptions{Engine::exact}),
               std::invalid_argument);
}

TEST(Sweep, CountsFlagsAndRecords) {
  const ImperfectionParams p;
  const BinSpec bins{7, -3.15, 3.15};
  const StreamSeed stream{404, 0};
  std::vector<PhotonRecord> records;
  SweepOptions opt;
  opt.config = QuadConfig::orthogonal;
  opt.record_sink = &records;
  const long long shots = 3000;
  const SweepResult res =
      conditional_sweep(p, 30.0, M_PI / 2.0, shots, bins, stream, opt);

  EXPECT_EQ(res.total_shots, shots);
  EXPECT_NEAR(res.alpha_squared, 900.0, 1e-12);
  EXPECT_EQ(std::accumulate(res.counts.begin(), res.counts.end(), 0LL), shots);
  ASSERT_EQ(records.size(), static_cast<std::size_t>(shots));
  EXPECT_EQ(records.front().config, QuadConfig::orthogonal);
  for (int b = 0; b < bins.count; ++b)
    EXPECT_EQ(res.flagged[b] != 0, res.counts[b] < 100) << b;

  // Same stream replays identically; a different stream does not.
  const SweepResult replay =
      conditional_sweep(p, 30.0, M_PI / 2.0, shots, bins, stream, SweepOptions{});
  EXPECT_EQ(replay.counts, res.counts);
  for (int b = 0; b < bins.count; ++b)
    EXPECT_DOUBLE_EQ(replay.variance[b], res.variance[b]);
  const SweepResult other = conditional_sweep(p, 30.0, M_PI / 2.0, shots, bins,
                                              StreamSeed{405, 0}, SweepOptions{});
  EXPECT_NE(other.counts, res.counts);
}

TEST(Sweep, SmoothedRatioOnSyntheticTable) {
  SweepResult s;
  s.bin_centers = {-2, -1, 0, 1, 2};
  s.counts = {1000, 1000, 1000, 1000, 50};
  s.variance = {1.0, 3.0, 9.0, 3.0, 100.0};
  s.variance_se.assign(5, 0.3);
  s.mean.assign(5, 0.0);
  s.mean_se.assign(5, 0.0);
  s.flagged = {0, 0, 0, 0, 1};
  const VarianceRatioSummary r = smoothed_variance_ratio(s);
  ASSERT_TRUE(r.valid);
  // Smoothed values: {2, 13/3, 5, 6} over the unflagged bins.
  EXPECT_EQ(r.max_bin, 3);
  EXPECT_EQ(r.min_bin, 0);
  EXPECT_NEAR(r.ratio, 3.0, 1e-12);
  EXPECT_GT(r.se, 0.0);

  s.flagged = {1, 1, 1, 1, 1};
  EXPECT_FALSE(smoothed_variance_ratio(s).valid);
}

TEST(Sweep, CenterBinVarianceMatchesSinglePhotonPrediction) {
  // eta = 1, no two-photon herald: Alice near x = 0 projects Bob onto the
  // single-photon state, whose displaced photon variance is 3 lambda.
  ImperfectionParams p;
  p.eta = 1.0;
  p.epsilon2 = 0.0;
  SweepOptions opt;
  opt.subtract_reference = false;
  const BinSpec bins{21, -3.15, 3.15};
  const SweepResult res = conditional_sweep(p, 100.0, 0.0, 50000, bins,
                                            StreamSeed{7777, 0}, opt);
  const int center = 10;
  ASSERT_EQ(res.flagged[center], 0);
  const double ratio = res.variance[center] / res.alpha_squared;
  EXPECT_GT(ratio, 2.6);
  EXPECT_LT(ratio, 3.35);
}

TEST(Histograms, WindowValidation) {
  const ImperfectionParams p;
  const StreamSeed stream{5, 0};
  std::array<Window, 3> overlapping = {Window{-0.1, 0.2}, Window{0.0, 0.2},
                                       Window{0.7, 0.2}};
  EXPECT_THROW(histograms_I_II_III(p, 30.0, 0.0, 100, overlapping, stream),
               std::invalid_argument);
  std::array<Window, 3> degenerate = {Window{-1.0, 0.0}, Window{0.0, 0.2},
                                      Window{1.0, 0.2}};
  EXPECT_THROW(histograms_I_II_III(p, 30.0, 0.0, 100, degenerate, stream),
               std::invalid_argument);
  std::array<Window, 3> unreachable = {Window{-7.9, 0.05}, Window{0.0, 0.05},
                                       Window{7.9, 0.05}};
  EXPECT_THROW(histograms_I_II_III(p, 30.0, 0.0, 200, unreachable, stream),
               std::runtime_error);
}

TEST(Histograms, ThreeWindowsSeparateTheCatSigns) {
  const ImperfectionParams p;  // eta 0.54, epsilon2 0.015
  const double alpha = 30.0;
  const auto hists = histograms_I_II_III(p, alpha, 0.0, 20000,
                                         default_windows(), StreamSeed{31, 0});
  for (const auto& h : hists) {
    EXPECT_GT(h.count, 100);
    EXPECT_EQ(h.count, static_cast<long long>(h.samples.size()));
    const double total =
        std::accumulate(h.pmf.begin(), h.pmf.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-12);
    ASSERT_EQ(static_cast<int>(h.pmf.size()), kHistBins);
  }
  // Windows I / III sit on the two cat signs; their mean energy surplus is
  // about +-2 a eta/2 photons. Window II is vacuum dominated.
  EXPECT_GT(hists[2].mean, 10.0);
  EXPECT_LT(hists[0].mean, -10.0);
  EXPECT_LT(std::abs(hists[1].mean), 5.0);
  EXPECT_NEAR(hists[2].window.center, 0.70710678118654752, 1e-15);
}
