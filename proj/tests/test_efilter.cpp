#include <gtest/gtest.h>

#include <random>

#include "mlfdr/efilter.hpp"
#include "support/oracles.hpp"

using namespace mlfdr;

namespace {

LayerPartition two_layer4() { return LayerPartition(4, {{{0}, {1}, {2}, {3}}, {{0, 1}, {2, 3}}}); }

// Random two-layer partition: singletons over N, then contiguous groups.
LayerPartition random_partition(std::size_t N, std::size_t G2, std::mt19937_64& rng) {
  std::vector<std::size_t> cuts;
  for (std::size_t j = 1; j < N; ++j) cuts.push_back(j);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(G2 - 1);
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(N);
  std::vector<IndexSet> groups;
  std::size_t start = 0;
  for (std::size_t c : cuts) {
    IndexSet g;
    for (std::size_t j = start; j < c; ++j) g.push_back(j);
    groups.push_back(g);
    start = c;
  }
  return LayerPartition(N, {LayerPartition::singleton(N).groups(0), groups});
}

// E-values on the threshold grid {G/(alpha k)} plus zeros, so ties are common.
EValueTable grid_evalues(const LayerPartition& p, const std::vector<double>& alphas,
                         std::mt19937_64& rng) {
  EValueTable e;
  for (std::size_t m = 0; m < p.num_layers(); ++m) {
    const std::size_t G = p.group_count(m);
    std::vector<double> v(G);
    for (auto& x : v) {
      const std::size_t k = rng() % (G + 2);
      x = (k == 0 || k > G) ? 0.0 : grid_threshold(G, alphas[m], k);
    }
    e.values.push_back(v);
  }
  return e;
}

}  // namespace

TEST(FdpHat, Examples) {
  // G=10 singleton layer, four selected, t=50.
  const auto p = LayerPartition::singleton(10);
  EValueTable e({{60, 60, 60, 60, 0, 0, 0, 0, 0, 0}});
  EXPECT_DOUBLE_EQ(fdp_hat_layer(e, {50.0}, p, 0), 0.05);
  EXPECT_EQ(fdp_hat_layer(e, {kInfinity}, p, 0), 0.0);
  const auto p4 = LayerPartition::singleton(4);
  EXPECT_DOUBLE_EQ(fdp_hat_layer(EValueTable({{0, 0, 0, 0}}), {2.0}, p4, 0), 2.0);
  EXPECT_THROW(fdp_hat_layer(e, {50.0}, p, 1), std::out_of_range);
}

TEST(CandidateSelection, Examples) {
  const auto p = two_layer4();
  EValueTable e({{8, 0, 8, 0}, {2, 0}});
  EXPECT_EQ(candidate_selection(e, {2, 2}, p), (IndexSet{0}));
  EValueTable ones({{1, 2, 3, 4}, {1, 1}});
  EXPECT_EQ(candidate_selection(ones, {1, 1}, p), (IndexSet{0, 1, 2, 3}));
  EXPECT_EQ(candidate_selection(ones, {1, kInfinity}, p), IndexSet{});
}

TEST(Efilter, HandTraceSelectsFeatureOne) {
  const auto p = two_layer4();
  const auto r = generalized_efilter(EValueTable({{8, 0, 8, 0}, {4, 0}}), FilterLevels({0.5, 0.5}), p);
  EXPECT_EQ(r.thresholds, (std::vector<double>{8, 4}));
  EXPECT_EQ(r.selected_features, (IndexSet{0}));
  EXPECT_EQ(r.per_layer_groups[1], (IndexSet{0}));
}

TEST(Efilter, LayerConflictGivesEmpty) {
  const auto r = generalized_efilter(EValueTable({{8, 0, 8, 0}, {2, 0}}), FilterLevels({0.5, 0.5}),
                                     two_layer4());
  EXPECT_TRUE(r.selected_features.empty());
}

TEST(Efilter, AllZeroEvaluesSelectNothing) {
  // Thresholds stop at the largest finite grid point G/alpha, where the empty
  // selection is already admissible.
  const auto r = generalized_efilter(EValueTable({{0, 0, 0, 0}, {0, 0}}), FilterLevels({0.2, 0.2}),
                                     two_layer4());
  EXPECT_TRUE(r.selected_features.empty());
  EXPECT_DOUBLE_EQ(r.thresholds[0], 4 / 0.2);
  EXPECT_DOUBLE_EQ(r.thresholds[1], 2 / 0.2);
}

TEST(Efilter, ValidatesInputs) {
  const auto p = two_layer4();
  EXPECT_THROW(generalized_efilter(EValueTable({{1, 1, 1, 1}}), FilterLevels({0.2}), p),
               std::invalid_argument);
  EXPECT_THROW(generalized_efilter(EValueTable({{-1, 1, 1, 1}, {1, 1}}), FilterLevels({0.2, 0.2}), p),
               std::invalid_argument);
  EXPECT_THROW(generalized_efilter(EValueTable({{1, 1, 1, 1}, {1, 1}}), FilterLevels({0.2, 1.0}), p),
               std::invalid_argument);
}

TEST(Ebh, Examples) {
  EXPECT_EQ(generalized_ebh({10, 2, 0.5, 0}, 0.5), (IndexSet{0}));
  EXPECT_EQ(generalized_ebh({4, 4, 4, 4}, 0.5), (IndexSet{0, 1, 2, 3}));
  EXPECT_EQ(generalized_ebh({0, 0, 0}, 0.5), IndexSet{});
}

TEST(Ebh, MatchesEnumerationOracle) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t N = 1 + rng() % 30;
    const double alpha = 0.05 + 0.9 * u(rng);
    std::vector<double> e(N);
    for (auto& x : e) {
      const int kind = rng() % 3;
      x = kind == 0 ? 0.0
                    : kind == 1 ? grid_threshold(N, alpha, 1 + rng() % N) : 40.0 * u(rng);
    }
    EXPECT_EQ(generalized_ebh(e, alpha), oracle::ebh(e, alpha));
  }
}

TEST(Efilter, SingleLayerEqualsEbh) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t N = 1 + rng() % 25;
    const double alpha = 0.05 + 0.9 * u(rng);
    std::vector<double> e(N);
    for (auto& x : e) x = rng() % 3 == 0 ? 0.0 : 3.0 * N * u(rng);
    const auto r = generalized_efilter(EValueTable({e}), FilterLevels({alpha}),
                                       LayerPartition::singleton(N));
    EXPECT_EQ(r.selected_features, generalized_ebh(e, alpha));
  }
}

TEST(Efilter, MinimalityAgainstBruteForce) {
  std::mt19937_64 rng(2024);
  const std::vector<double> levels{0.1, 0.2, 0.3, 0.5};
  for (int rep = 0; rep < 1500; ++rep) {
    const std::size_t N = 2 + rng() % 7;
    const std::size_t G2 = 1 + rng() % std::min<std::size_t>(4, N);
    const auto p = random_partition(N, G2, rng);
    const std::vector<double> alphas{levels[rng() % 4], levels[rng() % 4]};
    const auto e = grid_evalues(p, alphas, rng);
    const auto r = generalized_efilter(e, FilterLevels(alphas), p);
    const auto expect = oracle::efilter_min_thresholds(e, alphas, p);
    ASSERT_EQ(r.thresholds, expect) << "rep " << rep;
    EXPECT_EQ(r.selected_features, oracle::survivors(e, expect, p));
  }
}

TEST(Efilter, AdmissibleAndConsistentOnRandomInstances) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t N = 2 + rng() % 30;
    const std::size_t G2 = 1 + rng() % N;
    const auto p = random_partition(N, G2, rng);
    const std::vector<double> alphas{0.05 + 0.5 * u(rng), 0.05 + 0.5 * u(rng)};
    EValueTable e;
    for (std::size_t m = 0; m < 2; ++m) {
      std::vector<double> v(p.group_count(m));
      for (auto& x : v) x = rng() % 2 ? 0.0 : 5.0 * N * u(rng);
      e.values.push_back(v);
    }
    const auto r = generalized_efilter(e, FilterLevels(alphas), p);
    EXPECT_TRUE(is_layer_consistent(r, p));
    for (std::size_t m = 0; m < 2; ++m) {
      // Admissibility in the exact form: G/t = alpha k <= alpha (|S| v 1).
      EXPECT_LE(r.per_layer_fdp_hat[m], alphas[m] * (1 + 1e-12));
    }
    EXPECT_LE(r.passes, N + G2 + 1);
  }
}

TEST(Efilter, MonotoneInEvalues) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t N = 2 + rng() % 12;
    const auto p = random_partition(N, 1 + rng() % N, rng);
    const std::vector<double> alphas{0.3, 0.3};
    EValueTable e;
    for (std::size_t m = 0; m < 2; ++m) {
      std::vector<double> v(p.group_count(m));
      for (auto& x : v) x = rng() % 2 ? 0.0 : 4.0 * N * u(rng);
      e.values.push_back(v);
    }
    const auto before = generalized_efilter(e, FilterLevels(alphas), p);
    EValueTable raised = e;
    const std::size_t m = rng() % 2;
    raised.values[m][rng() % raised.values[m].size()] += 10.0 * N * u(rng);
    const auto after = generalized_efilter(raised, FilterLevels(alphas), p);
    EXPECT_TRUE(std::includes(after.selected_features.begin(), after.selected_features.end(),
                              before.selected_features.begin(), before.selected_features.end()))
        << "rep " << rep;
  }
}

TEST(Efilter, PassBoundTracked) {
  reset_efilter_diagnostics();
  const auto p = two_layer4();
  generalized_efilter(EValueTable({{8, 0, 8, 0}, {4, 0}}), FilterLevels({0.5, 0.5}), p);
  const auto d = efilter_diagnostics();
  EXPECT_EQ(d.invocations, 1u);
  EXPECT_GE(d.min_slack, 0);
  EXPECT_LE(d.max_passes, 4u + 2u + 1u);
}
