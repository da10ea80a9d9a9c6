#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mlfdr/core_model.hpp"
#include "mlfdr/evalue.hpp"
#include "mlfdr/mirror_ds.hpp"
#include "mlfdr/regression.hpp"

namespace mlfdr {

struct KnockoffDesign {
  Eigen::MatrixXd x;        // unit-norm columns
  Eigen::MatrixXd x_tilde;
  Eigen::MatrixXd s_matrix;  // gamma * blockdiag(Sigma_gg)
  Eigen::MatrixXd gram;      // Sigma = x' x
  double gamma = 0.0;
};

/// Fixed-design equicorrelated group knockoffs for the groups of `layer`.
/// Requires n >= 2N and a well-conditioned Gram matrix. The orthogonal
/// complement is deterministic unless `randomize_seed` is given.
KnockoffDesign construct_group_knockoffs(const Eigen::MatrixXd& X,
                                         const LayerPartition& partition, std::size_t layer,
                                         std::optional<std::uint64_t> randomize_seed = {});

/// T_g = max(Z_g, Z~_g) sign(Z_g - Z~_g), Z_g the largest Lasso entry penalty
/// among the group's original columns, Z~_g the same over its knockoffs.
std::vector<double> knockoff_statistics(const KnockoffDesign& design, const Eigen::VectorXd& y,
                                        const LayerPartition& partition, std::size_t layer,
                                        const LambdaGrid& grid = {});

/// Group statistics from precomputed entry times of [X, X~].
std::vector<double> signed_max_statistics(const Eigen::VectorXd& entry_times,
                                          const LayerPartition& partition, std::size_t layer);

/// inf{t > 0 : (1 + #{T < -t}) / (#{T > t} v 1) <= alpha}, selecting {T >= t}.
ThresholdResult knockoff_plus_threshold(const std::vector<double>& t_stats, double alpha);

struct KnockoffRun {
  DetectionOutcome outcome;
  std::vector<double> evalues;
  std::vector<double> stats;
  ThresholdResult threshold;
};

/// Knockoff+ at one layer. v_hat = 1 + the negative-side count at the threshold.
KnockoffRun knockoff_detect(const Dataset& data, const LayerPartition& partition,
                            std::size_t layer, double alpha0,
                            std::optional<std::uint64_t> randomize_seed = {});

/// Same, from precomputed statistics.
KnockoffRun knockoff_detect_from_stats(std::vector<double> stats, double alpha0);

struct MkfResult {
  SelectionResult selection;
  std::vector<std::vector<double>> stats;  // per layer
  std::vector<double> v_hat;               // c (1 + #{T <= -t}) per layer
};

/// Multilayer knockoff filter with constant c. Statistics per layer are built
/// from that layer's own group knockoffs.
MkfResult mkf_plus(const Dataset& data, const LayerPartition& partition,
                   const std::vector<double>& alphas, double c,
                   std::optional<std::uint64_t> randomize_seed = {});

/// The threshold search of mkf_plus on given statistics.
MkfResult mkf_plus_from_stats(const std::vector<std::vector<double>>& stats,
                              const LayerPartition& partition, const std::vector<double>& alphas,
                              double c);

}  // namespace mlfdr
