#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mlfdr/efilter.hpp"
#include "mlfdr/mirror_ds.hpp"
#include "mlfdr/simlab.hpp"
#include "support/oracles.hpp"

using namespace mlfdr;

namespace {

// Two-sided exact binomial p-value for k successes out of n at p = 1/2.
double binomial_two_sided(std::size_t k, std::size_t n) {
  const auto logpmf = [n](std::size_t i) {
    return std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
           static_cast<double>(n) * std::log(2.0);
  };
  const double observed = logpmf(k);
  double p = 0.0;
  for (std::size_t i = 0; i <= n; ++i)
    if (logpmf(i) <= observed + 1e-9) p += std::exp(logpmf(i));
  return std::min(1.0, p);
}

SimDesign small_null(std::size_t n, std::size_t N) {
  SimDesign d;
  d.n = n;
  d.N = N;
  d.groups = N / 5;
  d.rho = 0.3;
  d.delta = 0.0;
  d.n_signals = 0;
  d.n_signal_groups = 0;
  return d;
}

}  // namespace

TEST(Split, SizesAndDeterminism) {
  const auto s10 = split_half(10, 1);
  EXPECT_EQ(s10.half_a.size(), 5u);
  EXPECT_EQ(s10.half_b.size(), 5u);
  const auto s11 = split_half(11, 1);
  EXPECT_EQ(s11.half_a.size(), 5u);
  EXPECT_EQ(s11.half_b.size(), 6u);
  IndexSet all = s11.half_a;
  all.insert(all.end(), s11.half_b.begin(), s11.half_b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 11; ++i) EXPECT_EQ(all[i], i);
  const auto again = split_half(11, 1);
  EXPECT_EQ(again.half_a, s11.half_a);
  EXPECT_NE(split_half(40, 1).half_a, split_half(40, 2).half_a);
  EXPECT_THROW(split_half(3, 1), std::invalid_argument);
}

TEST(Mirror, Examples) {
  const auto w = mirror_statistics(Eigen::Vector3d(0.5, 0.5, 0.0), Eigen::Vector3d(0.3, -0.3, 7.0));
  EXPECT_DOUBLE_EQ(w(0), 0.8);
  EXPECT_DOUBLE_EQ(w(1), -0.8);
  EXPECT_EQ(w(2), 0.0);
}

TEST(Mirror, AntisymmetricInEitherHalf) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::VectorXd a(6), b(6);
    for (int j = 0; j < 6; ++j) {
      a(j) = rep % 4 == 0 && j == 0 ? 0.0 : z(rng);
      b(j) = z(rng);
    }
    const auto w = mirror_statistics(a, b);
    Eigen::VectorXd af = a, bf = b;
    af(2) = -af(2);
    bf(4) = -bf(4);
    const auto wa = mirror_statistics(af, b);
    const auto wb = mirror_statistics(a, bf);
    EXPECT_EQ(wa(2), -w(2));
    EXPECT_EQ(wb(4), -w(4));
    EXPECT_EQ(wa(3), w(3));
  }
}

TEST(GroupStats, Examples) {
  const LayerPartition p(3, {{{0}, {1}, {2}}, {{0, 1}, {2}}});
  const Eigen::VectorXd w = Eigen::Vector3d(1, 3, -2);
  EXPECT_EQ(group_statistics(w, p, 1, GroupStatMode::mean), (std::vector<double>{2, -2}));
  EXPECT_EQ(group_statistics(w, p, 1, GroupStatMode::max), (std::vector<double>{3, -2}));
  EXPECT_EQ(group_statistics(w, p, 0, GroupStatMode::mean), (std::vector<double>{1, 3, -2}));
  EXPECT_EQ(group_statistics(w, p, 0, GroupStatMode::max), (std::vector<double>{1, 3, -2}));
}

TEST(DsThreshold, Examples) {
  const auto a = ds_threshold({3, 2, 1, -1}, 0.5);
  EXPECT_TRUE(a.zero_plus);
  EXPECT_EQ(a.selected, (IndexSet{0, 1, 2}));
  EXPECT_EQ(a.negatives, 1u);

  const auto b = ds_threshold({3, -2, -1, 2}, 0.25);
  EXPECT_FALSE(b.zero_plus);
  EXPECT_EQ(b.threshold, 2.0);
  EXPECT_EQ(b.selected, (IndexSet{0, 3}));
  EXPECT_EQ(b.negatives, 0u);

  EXPECT_TRUE(ds_threshold({-1, 0, -3}, 0.3).selected.empty());
}

TEST(DsThreshold, MatchesRealLineInfimum) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 5000; ++rep) {
    const std::size_t G = 1 + rng() % 25;
    std::vector<double> T(G);
    for (auto& t : T) t = static_cast<double>(static_cast<int>(rng() % 13) - 5);
    const double alpha = 0.05 + 0.9 * u(rng);
    const auto got = ds_threshold(T, alpha);
    const auto want = oracle::real_line_threshold(T, alpha, 0);
    ASSERT_EQ(got.selected, want.selected) << "rep " << rep;
    ASSERT_EQ(got.zero_plus, want.zero_plus);
    if (!got.zero_plus) ASSERT_EQ(got.threshold, want.t);
    if (got.finite()) {
      // The returned threshold satisfies its own constraint.
      std::size_t neg = 0, pos = 0;
      for (double t : T) {
        neg += got.zero_plus ? t < 0 : t < -got.threshold;
        pos += got.zero_plus ? t > 0 : t > got.threshold;
      }
      EXPECT_EQ(neg, got.negatives);
      EXPECT_LE(static_cast<double>(neg), alpha * std::max<std::size_t>(pos, 1));
    }
  }
}

TEST(DsDetect, EvaluesFromThreshold) {
  const auto p = LayerPartition::singleton(4);
  MirrorFit fit;
  fit.w = Eigen::Vector4d(3, 2, 1, -1);
  const auto run = ds_detect_from_fit(fit, p, 0, 0.5, GroupStatMode::mean);
  EXPECT_EQ(run.outcome.v_hat, 1.0);
  EXPECT_EQ(run.evalues, (std::vector<double>{4, 4, 4, 0}));
  fit.w = Eigen::Vector4d(-3, 0, -1, -1);
  EXPECT_EQ(ds_detect_from_fit(fit, p, 0, 0.5, GroupStatMode::mean).evalues,
            (std::vector<double>(4, 0.0)));
}

TEST(DsDetect, EbhRoundTripOnRandomStatistics) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 3000; ++rep) {
    const std::size_t G = 1 + rng() % 40;
    MirrorFit fit;
    fit.w.resize(static_cast<Eigen::Index>(G));
    for (std::size_t g = 0; g < G; ++g)
      fit.w(static_cast<Eigen::Index>(g)) = rng() % 5 == 0 ? 0.0 : std::round(4 * z(rng) + 2);
    const double alpha0 = 0.05 + 0.4 * (rep % 9) / 8.0;
    const auto run = ds_detect_from_fit(fit, LayerPartition::singleton(G), 0, alpha0,
                                        GroupStatMode::mean);
    ASSERT_EQ(generalized_ebh(run.evalues, alpha0), run.outcome.rejections) << "rep " << rep;
  }
}

TEST(DsDetect, FindsStrongSignals) {
  SimDesign d;
  d.n = 400;
  d.N = 40;
  d.groups = 8;
  d.rho = 0.2;
  d.delta = 8.0;
  d.n_signals = 6;
  d.n_signal_groups = 3;
  const auto sim = generate_dataset(d, 11);
  const auto run = ds_detect(sim.data, sim.partition, 0, 0.1, 5);
  EXPECT_TRUE(is_layer_consistent([&] {
    SelectionResult r;
    r.selected_features = run.outcome.rejections;
    attach_group_selections(r, sim.partition);
    return r;
  }(), sim.partition));
  const auto m = evaluate_selection(run.outcome.rejections, sim.truth, sim.partition);
  EXPECT_GE(m[0].power, 0.5);
  EXPECT_EQ(ds_detect(sim.data, sim.partition, 0, 0.1, 5).evalues, run.evalues);
}

TEST(DsDetect, NullMirrorStatisticsAreSignSymmetric) {
  // Pooled nonzero W over global-null replications: the sign is a fair coin.
  const auto d = small_null(300, 20);
  const auto chol = block_cholesky(d);
  std::size_t positive = 0, nonzero = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto sim = generate_dataset(d, chol, 100 + r);
    const auto run = ds_detect(sim.data, sim.partition, 1, 0.1, 500 + r);
    for (Eigen::Index j = 0; j < run.fit.w.size(); ++j) {
      if (run.fit.w(j) == 0.0) continue;
      ++nonzero;
      positive += run.fit.w(j) > 0;
    }
  }
  ASSERT_GT(nonzero, 100u);
  EXPECT_GT(binomial_two_sided(positive, nonzero), 1e-3) << positive << "/" << nonzero;
  const double frac = static_cast<double>(positive) / static_cast<double>(nonzero);
  EXPECT_GE(frac, 0.45);
  EXPECT_LE(frac, 0.55);
}
