#include "mlfdr/evalue.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mlfdr {

void DetectionOutcome::validate() const {
  if (layer_size == 0) throw std::invalid_argument("detection outcome: layer size is 0");
  if (!(v_hat >= 0.0) || !std::isfinite(v_hat))
    throw std::invalid_argument("detection outcome: v_hat must be finite and >= 0");
  if (!(original_level > 0.0 && original_level < 1.0))
    throw std::invalid_argument("detection outcome: level must lie in (0, 1)");
  for (std::size_t g : rejections)
    if (g >= layer_size)
      throw std::invalid_argument("detection outcome: rejected group " + std::to_string(g + 1) +
                                  " exceeds layer size " + std::to_string(layer_size));
}

ReplicationWeights ReplicationWeights::uniform(std::size_t R) {
  if (R == 0) throw std::invalid_argument("need at least one replication");
  return {std::vector<double>(R, 1.0 / static_cast<double>(R))};
}

void ReplicationWeights::validate() const {
  if (weights.empty()) throw std::invalid_argument("weights are empty");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to 1");
}

namespace {

std::vector<double> indicator_scaled(const DetectionOutcome& o, double value) {
  std::vector<double> e(o.layer_size, 0.0);
  for (std::size_t g : o.rejections) e[g] = value;
  return e;
}

}  // namespace

std::vector<double> evalues_from_outcome(const DetectionOutcome& outcome) {
  outcome.validate();
  const double G = static_cast<double>(outcome.layer_size);
  return indicator_scaled(outcome, G / std::max(outcome.v_hat, outcome.original_level));
}

std::vector<double> conservative_evalues_from_outcome(const DetectionOutcome& outcome) {
  outcome.validate();
  const double G = static_cast<double>(outcome.layer_size);
  const double r = static_cast<double>(std::max<std::size_t>(outcome.rejections.size(), 1));
  return indicator_scaled(outcome, G / (outcome.original_level * r));
}

std::vector<double> aggregate_evalues(const std::vector<std::vector<double>>& tables,
                                      const ReplicationWeights& weights) {
  weights.validate();
  if (tables.size() != weights.weights.size())
    throw std::invalid_argument("got " + std::to_string(tables.size()) + " e-value vectors but " +
                                std::to_string(weights.weights.size()) + " weights");
  const std::size_t G = tables.front().size();
  std::vector<double> out(G, 0.0);
  for (std::size_t r = 0; r < tables.size(); ++r) {
    if (tables[r].size() != G) throw std::invalid_argument("e-value vectors differ in length");
    for (std::size_t g = 0; g < G; ++g) out[g] += weights.weights[r] * tables[r][g];
  }
  return out;
}

EValueTable evalues_from_multilayer_run(const std::vector<DetectionOutcome>& per_layer,
                                        const std::vector<double>& gammas) {
  if (per_layer.size() != gammas.size())
    throw std::invalid_argument("missing layer: " + std::to_string(per_layer.size()) +
                                " outcomes for " + std::to_string(gammas.size()) + " levels");
  EValueTable table;
  for (std::size_t m = 0; m < per_layer.size(); ++m) {
    DetectionOutcome o = per_layer[m];
    o.original_level = gammas[m];
    table.values.push_back(evalues_from_outcome(o));
  }
  return table;
}

}  // namespace mlfdr
