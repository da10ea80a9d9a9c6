#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "mlfdr/core_model.hpp"

namespace mlfdr {

/// Per-layer, per-group generalized e-values. values[m][g] >= 0 and finite.
struct EValueTable {
  std::vector<std::vector<double>> values;

  EValueTable() = default;
  explicit EValueTable(std::vector<std::vector<double>> v) : values(std::move(v)) {}

  std::size_t num_layers() const { return values.size(); }
  const std::vector<double>& layer(std::size_t m) const { return values.at(m); }

  /// Throws std::invalid_argument on shape mismatch or negative/non-finite entries.
  void validate(const LayerPartition& partition) const;
};

/// Target levels, one per layer, each in (0, 1).
struct FilterLevels {
  std::vector<double> alphas;

  FilterLevels() = default;
  explicit FilterLevels(std::vector<double> a) : alphas(std::move(a)) {}
  void validate(std::size_t num_layers) const;
};

/// The k-th grid threshold G/(alpha*k). Every comparison against a grid point
/// goes through this so the update and selection steps see identical doubles.
inline double grid_threshold(std::size_t G, double alpha, std::size_t k) {
  return static_cast<double>(G) / (alpha * static_cast<double>(k));
}

/// (G/t) / (|S^(m)| v 1) at the given thresholds; 0 when t is infinite.
double fdp_hat_layer(const EValueTable& evalues, const std::vector<double>& thresholds,
                     const LayerPartition& partition, std::size_t layer);

/// Features whose enclosing group clears the threshold at every layer.
IndexSet candidate_selection(const EValueTable& evalues, const std::vector<double>& thresholds,
                             const LayerPartition& partition);

SelectionResult generalized_efilter(const EValueTable& evalues, const FilterLevels& levels,
                                    const LayerPartition& partition);

/// e-BH on a single vector of e-values. Returns sorted 0-based indices.
IndexSet generalized_ebh(const std::vector<double>& evalues, double alpha);

struct EfilterDiagnostics {
  std::uint64_t invocations = 0;
  std::uint64_t max_passes = 0;
  /// Smallest (bound - passes) seen over all invocations.
  std::int64_t min_slack = 0;
};

/// Process-wide counters over every threshold descent run so far.
EfilterDiagnostics efilter_diagnostics();
void reset_efilter_diagnostics();

namespace detail {

/// Coordinate descent over per-layer ascending candidate thresholds.
/// Index grid[m].size() stands for an infinite threshold and is always admissible.
struct DescentProblem {
  const LayerPartition* partition = nullptr;
  std::vector<std::vector<double>> scores;  // [layer][group]
  std::vector<std::vector<double>> grid;    // [layer], strictly ascending, finite
  /// admissible(layer, index, |S^(layer)|) for a finite grid index.
  std::function<bool(std::size_t, std::size_t, std::size_t)> admissible;
};

struct DescentResult {
  std::vector<std::size_t> index;
  std::vector<double> thresholds;
  IndexSet selected;
  std::size_t passes = 0;
};

DescentResult threshold_descent(const DescentProblem& problem);

/// Features surviving every layer at the given thresholds.
IndexSet joint_survivors(const LayerPartition& partition,
                         const std::vector<std::vector<double>>& scores,
                         const std::vector<double>& thresholds);

}  // namespace detail

}  // namespace mlfdr
