#include "mlfdr/efilter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mlfdr {

namespace {

std::atomic<std::uint64_t> g_invocations{0};
std::atomic<std::uint64_t> g_max_passes{0};
std::atomic<std::int64_t> g_min_slack{std::numeric_limits<std::int64_t>::max()};

template <class T>
void atomic_max(std::atomic<T>& a, T v) {
  T cur = a.load();
  while (v > cur && !a.compare_exchange_weak(cur, v)) {
  }
}

template <class T>
void atomic_min(std::atomic<T>& a, T v) {
  T cur = a.load();
  while (v < cur && !a.compare_exchange_weak(cur, v)) {
  }
}

std::vector<char> layer_pass_mask(const LayerPartition& partition,
                                  const std::vector<double>& scores, double threshold,
                                  std::size_t layer) {
  std::vector<char> pass(partition.num_features(), 0);
  if (std::isinf(threshold)) return pass;
  for (std::size_t g = 0; g < scores.size(); ++g) {
    if (scores[g] >= threshold)
      for (std::size_t j : partition.members(layer, g)) pass[j] = 1;
  }
  return pass;
}

}  // namespace

void EValueTable::validate(const LayerPartition& partition) const {
  if (values.size() != partition.num_layers())
    throw std::invalid_argument("e-value table has " + std::to_string(values.size()) +
                                " layers, partition has " +
                                std::to_string(partition.num_layers()));
  for (std::size_t m = 0; m < values.size(); ++m) {
    if (values[m].size() != partition.group_count(m))
      throw std::invalid_argument("e-value table layer " + std::to_string(m + 1) + " has " +
                                  std::to_string(values[m].size()) + " entries, expected " +
                                  std::to_string(partition.group_count(m)));
    for (std::size_t g = 0; g < values[m].size(); ++g) {
      const double e = values[m][g];
      if (!std::isfinite(e) || e < 0.0)
        throw std::invalid_argument("e-value at layer " + std::to_string(m + 1) + ", group " +
                                    std::to_string(g + 1) + " is negative or non-finite");
    }
  }
}

void FilterLevels::validate(std::size_t num_layers) const {
  if (alphas.size() != num_layers)
    throw std::invalid_argument("expected " + std::to_string(num_layers) + " levels, got " +
                                std::to_string(alphas.size()));
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("levels must lie in (0, 1)");
}

namespace detail {

IndexSet joint_survivors(const LayerPartition& partition,
                         const std::vector<std::vector<double>>& scores,
                         const std::vector<double>& thresholds) {
  const std::size_t N = partition.num_features();
  std::vector<char> alive(N, 1);
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    const auto pass = layer_pass_mask(partition, scores[m], thresholds[m], m);
    for (std::size_t j = 0; j < N; ++j) alive[j] = alive[j] && pass[j];
  }
  IndexSet out;
  for (std::size_t j = 0; j < N; ++j)
    if (alive[j]) out.push_back(j);
  return out;
}

DescentResult threshold_descent(const DescentProblem& problem) {
  const LayerPartition& partition = *problem.partition;
  const std::size_t M = partition.num_layers();
  const std::size_t N = partition.num_features();
  if (problem.scores.size() != M || problem.grid.size() != M)
    throw std::invalid_argument("threshold descent: layer count mismatch");

  auto value_at = [&](std::size_t m, std::size_t idx) {
    return idx < problem.grid[m].size() ? problem.grid[m][idx] : kInfinity;
  };

  std::size_t bound = 1;
  for (const auto& g : problem.grid) bound += g.size();

  DescentResult res;
  res.index.assign(M, 0);
  std::vector<std::vector<char>> pass(M);
  for (std::size_t m = 0; m < M; ++m)
    pass[m] = layer_pass_mask(partition, problem.scores[m], value_at(m, 0), m);

  std::vector<char> ok(N);
  std::vector<double> live_scores;
  bool changed = true;
  while (changed) {
    changed = false;
    ++res.passes;
    if (res.passes > bound)
      throw std::logic_error("threshold descent exceeded its pass bound");
    for (std::size_t m = 0; m < M; ++m) {
      const auto& grid = problem.grid[m];
      std::size_t idx = res.index[m];
      if (idx >= grid.size()) continue;

      std::fill(ok.begin(), ok.end(), 1);
      for (std::size_t l = 0; l < M; ++l) {
        if (l == m) continue;
        for (std::size_t j = 0; j < N; ++j) ok[j] = ok[j] && pass[l][j];
      }
      const auto& groups = partition.groups(m);
      live_scores.clear();
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const bool has_ok =
            std::any_of(groups[g].begin(), groups[g].end(), [&](std::size_t j) { return ok[j]; });
        if (has_ok) live_scores.push_back(problem.scores[m][g]);
      }
      std::sort(live_scores.begin(), live_scores.end());

      while (idx < grid.size()) {
        const auto first = std::lower_bound(live_scores.begin(), live_scores.end(), grid[idx]);
        const auto count = static_cast<std::size_t>(live_scores.end() - first);
        if (problem.admissible(m, idx, count)) break;
        ++idx;
      }
      if (idx != res.index[m]) {
        res.index[m] = idx;
        pass[m] = layer_pass_mask(partition, problem.scores[m], value_at(m, idx), m);
        changed = true;
      }
    }
  }

  g_invocations.fetch_add(1);
  atomic_max<std::uint64_t>(g_max_passes, res.passes);
  atomic_min<std::int64_t>(g_min_slack, static_cast<std::int64_t>(bound) -
                                            static_cast<std::int64_t>(res.passes));

  res.thresholds.resize(M);
  for (std::size_t m = 0; m < M; ++m) res.thresholds[m] = value_at(m, res.index[m]);
  res.selected = joint_survivors(partition, problem.scores, res.thresholds);
  return res;
}

}  // namespace detail

IndexSet candidate_selection(const EValueTable& evalues, const std::vector<double>& thresholds,
                             const LayerPartition& partition) {
  evalues.validate(partition);
  if (thresholds.size() != partition.num_layers())
    throw std::invalid_argument("threshold vector length does not match layer count");
  return detail::joint_survivors(partition, evalues.values, thresholds);
}

double fdp_hat_layer(const EValueTable& evalues, const std::vector<double>& thresholds,
                     const LayerPartition& partition, std::size_t layer) {
  partition.group_count(layer);
  const double t = thresholds.at(layer);
  if (std::isinf(t)) return 0.0;
  const IndexSet selected = candidate_selection(evalues, thresholds, partition);
  const std::size_t s = induced_group_selection(selected, partition, layer).size();
  const double G = static_cast<double>(partition.group_count(layer));
  return (G / t) / static_cast<double>(std::max<std::size_t>(s, 1));
}

SelectionResult generalized_efilter(const EValueTable& evalues, const FilterLevels& levels,
                                    const LayerPartition& partition) {
  evalues.validate(partition);
  levels.validate(partition.num_layers());
  const std::size_t M = partition.num_layers();

  detail::DescentProblem problem;
  problem.partition = &partition;
  problem.scores = evalues.values;
  problem.grid.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t G = partition.group_count(m);
    problem.grid[m].resize(G);
    // Ascending thresholds: index i corresponds to k = G - i.
    for (std::size_t i = 0; i < G; ++i)
      problem.grid[m][i] = grid_threshold(G, levels.alphas[m], G - i);
  }
  problem.admissible = [&](std::size_t m, std::size_t idx, std::size_t count) {
    const std::size_t k = partition.group_count(m) - idx;
    return k <= std::max<std::size_t>(count, 1);
  };

  const auto res = detail::threshold_descent(problem);
  SelectionResult out;
  out.selected_features = res.selected;
  out.thresholds = res.thresholds;
  out.passes = res.passes;
  attach_group_selections(out, partition);
  for (std::size_t m = 0; m < M; ++m) {
    const double t = out.thresholds[m];
    const double G = static_cast<double>(partition.group_count(m));
    out.per_layer_fdp_hat.push_back(
        std::isinf(t) ? 0.0
                      : (G / t) / static_cast<double>(
                                      std::max<std::size_t>(out.per_layer_groups[m].size(), 1)));
  }
  return out;
}

IndexSet generalized_ebh(const std::vector<double>& evalues, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  for (double e : evalues)
    if (!std::isfinite(e) || e < 0.0)
      throw std::invalid_argument("e-values must be nonnegative and finite");
  const std::size_t N = evalues.size();
  std::vector<double> sorted = evalues;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::size_t khat = 0;
  for (std::size_t k = N; k >= 1; --k) {
    if (sorted[k - 1] >= grid_threshold(N, alpha, k)) {
      khat = k;
      break;
    }
  }
  IndexSet out;
  if (khat == 0) return out;
  const double t = grid_threshold(N, alpha, khat);
  for (std::size_t j = 0; j < N; ++j)
    if (evalues[j] >= t) out.push_back(j);
  return out;
}

EfilterDiagnostics efilter_diagnostics() {
  EfilterDiagnostics d;
  d.invocations = g_invocations.load();
  d.max_passes = g_max_passes.load();
  d.min_slack = d.invocations == 0 ? 0 : g_min_slack.load();
  return d;
}

void reset_efilter_diagnostics() {
  g_invocations = 0;
  g_max_passes = 0;
  g_min_slack = std::numeric_limits<std::int64_t>::max();
}

}  // namespace mlfdr
