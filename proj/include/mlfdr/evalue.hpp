#pragma once

#include <cstddef>
#include <vector>

#include "mlfdr/core_model.hpp"
#include "mlfdr/efilter.hpp"

namespace mlfdr {

/// One run of a base procedure on one layer: G hypotheses, the rejected
/// groups and the estimated number of false rejections.
struct DetectionOutcome {
  std::size_t layer_size = 0;
  IndexSet rejections;
  double v_hat = 0.0;
  double original_level = 0.1;

  void validate() const;
};

struct ReplicationWeights {
  std::vector<double> weights;

  static ReplicationWeights uniform(std::size_t R);
  /// Nonnegative and summing to 1 within 1e-12.
  void validate() const;
};

/// e_g = G * 1{g rejected} / (v_hat v alpha0)
std::vector<double> evalues_from_outcome(const DetectionOutcome& outcome);

/// e_g = G * 1{g rejected} / (alpha0 * (|R| v 1))
std::vector<double> conservative_evalues_from_outcome(const DetectionOutcome& outcome);

/// Weighted average over replications.
std::vector<double> aggregate_evalues(const std::vector<std::vector<double>>& tables,
                                      const ReplicationWeights& weights);

/// E-values from the per-layer outcomes of one complete multilayer run; layer m
/// uses the level gammas[m] in place of the outcome's own level.
EValueTable evalues_from_multilayer_run(const std::vector<DetectionOutcome>& per_layer,
                                        const std::vector<double>& gammas);

}  // namespace mlfdr
