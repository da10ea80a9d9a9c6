#include "mlfdr/pipelines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mlfdr/knockoff.hpp"

namespace mlfdr {

namespace {

using Clock = std::chrono::steady_clock;

std::string layer_context(std::size_t m) { return "layer " + std::to_string(m + 1) + ": "; }

struct BaseResult {
  DetectionOutcome outcome;
  std::vector<double> evalues;
};

BaseResult run_base(const Dataset& data, const PipelineConfig& cfg, std::size_t m,
                    std::size_t r) {
  const LayerConfig& lc = cfg.layers[m];
  const double alpha0 = lc.original_level();
  const std::uint64_t seed = derive_seed(cfg.seed, m, r);
  try {
    switch (lc.base) {
      case BaseProcedure::ds: {
        DsOptions opt = cfg.ds;
        opt.mode = lc.ds_mode;
        DsRun run = ds_detect(data, cfg.partition, m, alpha0, seed, opt);
        return {std::move(run.outcome), std::move(run.evalues)};
      }
      case BaseProcedure::knockoff: {
        std::optional<std::uint64_t> rs;
        if (lc.replications > 1) rs = seed;
        KnockoffRun run = knockoff_detect(data, cfg.partition, m, alpha0, rs);
        return {std::move(run.outcome), std::move(run.evalues)};
      }
      case BaseProcedure::bh: {
        auto [o, e] = bh_detect(lc.p_values, alpha0);
        return {std::move(o), std::move(e)};
      }
    }
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(layer_context(m) + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(layer_context(m) + e.what());
  }
  throw std::logic_error("unknown base procedure");
}

void finish_report(PipelineReport& rep, const PipelineConfig& cfg, Clock::time_point start) {
  rep.effective_alphas = cfg.effective_alphas();
  rep.original_alphas = cfg.original_alphas();
  rep.selection = generalized_efilter(rep.evalues, FilterLevels(rep.effective_alphas),
                                      cfg.partition);
  if (!is_layer_consistent(rep.selection, cfg.partition))
    throw std::logic_error("selection is not consistent across layers");
  for (std::size_t m = 0; m < cfg.partition.num_layers(); ++m) {
    const auto& e = rep.evalues.values[m];
    const double top = e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
    rep.existence_condition.push_back(top >= rep.selection.thresholds[m]);
    if (!rep.existence_condition.back())
      rep.diagnostics.push_back(layer_context(m) + "no e-value reaches the threshold");
  }
  rep.runtime_seconds = std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

const char* to_string(BaseProcedure base) {
  switch (base) {
    case BaseProcedure::ds:
      return "ds";
    case BaseProcedure::knockoff:
      return "knockoff";
    case BaseProcedure::bh:
      return "bh";
  }
  return "?";
}

BaseProcedure base_procedure_from_string(const std::string& name) {
  if (name == "ds") return BaseProcedure::ds;
  if (name == "knockoff") return BaseProcedure::knockoff;
  if (name == "bh") return BaseProcedure::bh;
  throw std::invalid_argument("unknown base procedure '" + name + "'");
}

void PipelineConfig::validate() const {
  if (layers.size() != partition.num_layers())
    throw std::invalid_argument("config has " + std::to_string(layers.size()) +
                                " layer entries, partition has " +
                                std::to_string(partition.num_layers()));
  if (!(expansion >= 1.0) || !std::isfinite(expansion))
    throw std::invalid_argument("expansion factor must be >= 1");
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const auto& lc = layers[m];
    if (!(lc.alpha > 0.0 && lc.alpha < 1.0))
      throw std::invalid_argument(layer_context(m) + "alpha must lie in (0, 1)");
    const double a0 = lc.original_level();
    if (!(a0 > 0.0 && a0 < 1.0))
      throw std::invalid_argument(layer_context(m) + "alpha0 must lie in (0, 1)");
    if (!(expansion * lc.alpha < 1.0))
      throw std::invalid_argument(layer_context(m) + "c * alpha must be below 1");
    if (lc.replications == 0)
      throw std::invalid_argument(layer_context(m) + "replications must be >= 1");
    weights_for(m).validate();
    if (lc.base == BaseProcedure::bh && lc.p_values.size() != partition.group_count(m))
      throw std::invalid_argument(layer_context(m) + "bh base needs one p-value per group");
  }
}

std::vector<double> PipelineConfig::effective_alphas() const {
  std::vector<double> a;
  for (const auto& lc : layers) a.push_back(expansion * lc.alpha);
  return a;
}

std::vector<double> PipelineConfig::original_alphas() const {
  std::vector<double> a;
  for (const auto& lc : layers) a.push_back(lc.original_level());
  return a;
}

ReplicationWeights PipelineConfig::weights_for(std::size_t layer) const {
  const auto& lc = layers.at(layer);
  if (lc.weights.empty()) return ReplicationWeights::uniform(lc.replications);
  if (lc.weights.size() != lc.replications)
    throw std::invalid_argument(layer_context(layer) + "weight count does not match replications");
  return {lc.weights};
}

PipelineReport run_dfefp(const Dataset& data, const PipelineConfig& config) {
  const auto start = Clock::now();
  config.validate();
  if (config.partition.num_features() != data.num_features())
    throw std::invalid_argument("partition and dataset disagree on feature count");
  const std::size_t M = config.partition.num_layers();

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t r = 0; r < config.layers[m].replications; ++r) jobs.emplace_back(m, r);
  std::vector<BaseResult> results(jobs.size());
  for_each_index(jobs.size(), config.policy, [&](std::size_t i) {
    results[i] = run_base(data, config, jobs[i].first, jobs[i].second);
  });

  PipelineReport rep;
  rep.outcomes.resize(M);
  std::vector<std::vector<std::vector<double>>> tables(M);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    rep.outcomes[jobs[i].first].push_back(std::move(results[i].outcome));
    tables[jobs[i].first].push_back(std::move(results[i].evalues));
  }
  for (std::size_t m = 0; m < M; ++m)
    rep.evalues.values.push_back(aggregate_evalues(tables[m], config.weights_for(m)));
  finish_report(rep, config, start);
  return rep;
}

PipelineReport run_fefp(const Dataset& data, const PipelineConfig& config) {
  for (std::size_t m = 0; m < config.layers.size(); ++m)
    if (config.layers[m].replications != 1)
      throw std::invalid_argument(layer_context(m) + "FEFP uses a single replication per layer");
  return run_dfefp(data, config);
}

PipelineReport run_eds_filter(const Dataset& data, const PipelineConfig& config) {
  for (std::size_t m = 0; m < config.layers.size(); ++m)
    if (config.layers[m].base != BaseProcedure::ds)
      throw std::invalid_argument(layer_context(m) + "eDS-filter uses DS at every layer");
  return run_dfefp(data, config);
}

PipelineReport run_eds_gkf(const Dataset& data, PipelineConfig config, double c) {
  if (config.layers.empty() || config.layers[0].base != BaseProcedure::ds ||
      !config.partition.is_singleton_layer(0))
    throw std::invalid_argument("eDS+gKF needs DS on a singleton first layer");
  for (std::size_t m = 1; m < config.layers.size(); ++m)
    if (config.layers[m].base != BaseProcedure::knockoff)
      throw std::invalid_argument(layer_context(m) + "eDS+gKF uses knockoffs beyond layer 1");
  config.expansion = c;
  return run_dfefp(data, config);
}

PipelineReport run_alt_derand(const Dataset& data, const PipelineConfig& config,
                              InnerProcedure inner, double mkf_c) {
  const auto start = Clock::now();
  config.validate();
  const std::size_t M = config.partition.num_layers();
  const std::size_t R = config.layers[0].replications;
  for (std::size_t m = 1; m < M; ++m)
    if (config.layers[m].replications != R)
      throw std::invalid_argument("alternate derandomization needs equal replications per layer");
  const std::vector<double> gammas = config.original_alphas();

  // Each replication is a complete multilayer run at the original levels.
  std::vector<std::vector<DetectionOutcome>> runs(R);
  for_each_index(R, config.policy, [&](std::size_t r) {
    std::vector<DetectionOutcome> per_layer(M);
    if (inner == InnerProcedure::mkf) {
      std::optional<std::uint64_t> rs;
      if (R > 1) rs = derive_seed(config.seed, 0xa17, r);
      const MkfResult mkf = mkf_plus(data, config.partition, gammas, mkf_c, rs);
      for (std::size_t m = 0; m < M; ++m) {
        per_layer[m].layer_size = config.partition.group_count(m);
        per_layer[m].rejections = mkf.selection.per_layer_groups[m];
        per_layer[m].v_hat = mkf.v_hat[m];
        per_layer[m].original_level = gammas[m];
      }
    } else {
      EValueTable single;
      for (std::size_t m = 0; m < M; ++m)
        single.values.push_back(run_base(data, config, m, r).evalues);
      const SelectionResult sel =
          generalized_efilter(single, FilterLevels(gammas), config.partition);
      for (std::size_t m = 0; m < M; ++m) {
        const double G = static_cast<double>(config.partition.group_count(m));
        per_layer[m].layer_size = config.partition.group_count(m);
        per_layer[m].rejections = sel.per_layer_groups[m];
        // G / t with t = G / (gamma k); rebuilt as gamma * k so the e-value
        // G / v_hat reproduces the grid threshold bit for bit.
        if (!std::isinf(sel.thresholds[m])) {
          const double k = std::round(G / (gammas[m] * sel.thresholds[m]));
          per_layer[m].v_hat = gammas[m] * k;
        }
        per_layer[m].original_level = gammas[m];
      }
    }
    runs[r] = std::move(per_layer);
  });

  PipelineReport rep;
  rep.outcomes.assign(M, {});
  std::vector<std::vector<std::vector<double>>> tables(M);
  for (std::size_t r = 0; r < R; ++r) {
    const EValueTable e = evalues_from_multilayer_run(runs[r], gammas);
    for (std::size_t m = 0; m < M; ++m) {
      rep.outcomes[m].push_back(runs[r][m]);
      tables[m].push_back(e.values[m]);
    }
  }
  for (std::size_t m = 0; m < M; ++m)
    rep.evalues.values.push_back(aggregate_evalues(tables[m], config.weights_for(m)));
  finish_report(rep, config, start);
  return rep;
}

std::pair<DetectionOutcome, std::vector<double>> bh_detect(const std::vector<double>& p_values,
                                                           double alpha0) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw std::invalid_argument("alpha0 must lie in (0, 1)");
  if (p_values.empty()) throw std::invalid_argument("bh: no p-values");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bh: p-values must lie in [0, 1]");
  const std::size_t N = p_values.size();
  std::vector<double> sorted = p_values;
  std::sort(sorted.begin(), sorted.end());
  std::size_t khat = 0;
  for (std::size_t k = N; k >= 1; --k) {
    if (sorted[k - 1] <= alpha0 * static_cast<double>(k) / static_cast<double>(N)) {
      khat = k;
      break;
    }
  }
  DetectionOutcome o;
  o.layer_size = N;
  o.original_level = alpha0;
  if (khat > 0) {
    const double t = alpha0 * static_cast<double>(khat) / static_cast<double>(N);
    for (std::size_t j = 0; j < N; ++j)
      if (p_values[j] <= t) o.rejections.push_back(j);
    // N * t_alpha, written so the product is formed the same way as alpha0 * k.
    o.v_hat = alpha0 * static_cast<double>(khat);
  }
  auto e = evalues_from_outcome(o);
  return {std::move(o), std::move(e)};
}

PipelineConfig eds_gkf_config(const LayerPartition& partition, double alpha, double alpha0,
                              std::size_t ds_reps, std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.partition = partition;
  cfg.seed = seed;
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    LayerConfig lc;
    lc.base = m == 0 ? BaseProcedure::ds : BaseProcedure::knockoff;
    lc.alpha = alpha;
    lc.alpha0 = alpha0;
    lc.replications = m == 0 ? ds_reps : 1;
    cfg.layers.push_back(lc);
  }
  return cfg;
}

PipelineConfig eds_config(const LayerPartition& partition, double alpha, double alpha0,
                          std::size_t reps, std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.partition = partition;
  cfg.seed = seed;
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    LayerConfig lc;
    lc.base = BaseProcedure::ds;
    lc.alpha = alpha;
    lc.alpha0 = alpha0;
    lc.replications = reps;
    cfg.layers.push_back(lc);
  }
  return cfg;
}

}  // namespace mlfdr
