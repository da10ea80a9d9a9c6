#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mlfdr/core_model.hpp"
#include "mlfdr/efilter.hpp"
#include "mlfdr/evalue.hpp"
#include "mlfdr/mirror_ds.hpp"
#include "mlfdr/parallel.hpp"

namespace mlfdr {

enum class BaseProcedure { ds, knockoff, bh };

const char* to_string(BaseProcedure base);
BaseProcedure base_procedure_from_string(const std::string& name);

struct LayerConfig {
  BaseProcedure base = BaseProcedure::ds;
  double alpha = 0.2;              // target level before expansion
  std::optional<double> alpha0;    // original level; alpha/2 when unset
  std::size_t replications = 1;
  std::vector<double> weights;     // empty means uniform
  GroupStatMode ds_mode = GroupStatMode::mean;
  std::vector<double> p_values;    // per group, bh base only

  double original_level() const { return alpha0 ? *alpha0 : alpha / 2.0; }
};

struct PipelineConfig {
  LayerPartition partition;
  std::vector<LayerConfig> layers;
  double expansion = 1.0;  // c, multiplies the target levels
  std::uint64_t seed = 0;
  ExecutionPolicy policy = ExecutionPolicy::parallel;
  DsOptions ds;

  /// Throws std::invalid_argument on out-of-range levels, c*alpha >= 1,
  /// weight mismatches or missing p-values.
  void validate() const;
  std::vector<double> effective_alphas() const;
  std::vector<double> original_alphas() const;
  ReplicationWeights weights_for(std::size_t layer) const;
};

struct PipelineReport {
  SelectionResult selection;
  std::vector<std::vector<DetectionOutcome>> outcomes;  // [layer][replication]
  EValueTable evalues;                                   // aggregated
  std::vector<double> effective_alphas;
  std::vector<double> original_alphas;
  /// Per layer: some group's aggregated e-value clears the final threshold.
  std::vector<bool> existence_condition;
  std::vector<std::string> diagnostics;
  double runtime_seconds = 0.0;
};

/// One base run per layer; every layer must have a single replication.
PipelineReport run_fefp(const Dataset& data, const PipelineConfig& config);

/// R^(m) base runs per layer, e-values averaged with the layer weights.
PipelineReport run_dfefp(const Dataset& data, const PipelineConfig& config);

/// DFEFP with the DS base at every layer.
PipelineReport run_eds_filter(const Dataset& data, const PipelineConfig& config);

/// DFEFP with DS on a singleton first layer and knockoffs elsewhere, targets scaled by c.
PipelineReport run_eds_gkf(const Dataset& data, PipelineConfig config, double c);

enum class InnerProcedure { fefp, mkf };

/// Repeats a complete multilayer procedure at the original levels, converts
/// each run to e-values and filters their average at the target levels.
/// The replication count is taken from the first layer.
PipelineReport run_alt_derand(const Dataset& data, const PipelineConfig& config,
                              InnerProcedure inner, double mkf_c = 1.0);

/// Benjamini-Hochberg at alpha0 with v_hat = N * t_alpha.
std::pair<DetectionOutcome, std::vector<double>> bh_detect(const std::vector<double>& p_values,
                                                           double alpha0);

/// Default two-layer configuration used by the simulation study: DS with
/// `ds_reps` replications on layer 1 and knockoffs on the remaining layers.
PipelineConfig eds_gkf_config(const LayerPartition& partition, double alpha, double alpha0,
                              std::size_t ds_reps, std::uint64_t seed);

/// DS at every layer.
PipelineConfig eds_config(const LayerPartition& partition, double alpha, double alpha0,
                          std::size_t reps, std::uint64_t seed);

}  // namespace mlfdr
