#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mlfdr/core_model.hpp"
#include "mlfdr/evalue.hpp"
#include "mlfdr/regression.hpp"

namespace mlfdr {

struct SplitIndices {
  IndexSet half_a;  // floor(n/2) rows
  IndexSet half_b;  // ceil(n/2) rows
};

/// Uniformly random balanced split, independent of the response. Requires n >= 4.
SplitIndices split_half(std::size_t n, std::uint64_t seed);

/// W_j = sign(a_j b_j) (|a_j| + |b_j|).
Eigen::VectorXd mirror_statistics(const Eigen::VectorXd& beta_a, const Eigen::VectorXd& beta_b);

enum class GroupStatMode { mean, max };

std::vector<double> group_statistics(const Eigen::VectorXd& w, const LayerPartition& partition,
                                     std::size_t layer, GroupStatMode mode);

/// Outcome of a symmetric-statistic threshold scan.
struct ThresholdResult {
  double threshold = kInfinity;  // 0 together with zero_plus means 0+
  bool zero_plus = false;
  IndexSet selected;
  /// Negative-side count at the returned threshold: #{T < -t}, or #{T < 0} at 0+.
  std::size_t negatives = 0;
  bool finite() const { return threshold != kInfinity; }
};

/// inf{t > 0 : #{T < -t} / (#{T > t} v 1) <= alpha}, selecting {T >= t}.
/// An infimum of 0 is reported as 0+ and selects the strictly positive T.
ThresholdResult ds_threshold(const std::vector<double>& t_stats, double alpha);

namespace detail {
/// The scan shared by ds_threshold (offset 0) and knockoff+ (offset 1).
ThresholdResult symmetric_threshold_scan(const std::vector<double>& t_stats, double alpha,
                                         std::size_t offset);
}  // namespace detail

struct DsOptions {
  GroupStatMode mode = GroupStatMode::mean;
  std::size_t cv_folds = 10;
  LassoOptions lasso;
  double collinearity_tol = 1e-8;
};

/// Feature-level output of one split: mirror statistics plus diagnostics.
struct MirrorFit {
  Eigen::VectorXd w;
  IndexSet lasso_support;
  IndexSet dropped_collinear;
  double lambda_star = 0.0;
};

/// Split, Lasso-CV on the first half, OLS on the second half restricted to the
/// Lasso support, mirror statistics.
MirrorFit ds_mirror_fit(const Dataset& data, std::uint64_t seed, const DsOptions& options = {});

struct DsRun {
  DetectionOutcome outcome;
  std::vector<double> evalues;
  std::vector<double> group_stats;
  ThresholdResult threshold;
  MirrorFit fit;
};

/// DS detection at one layer with level alpha0. v_hat is the negative-side
/// count at the selected threshold.
DsRun ds_detect(const Dataset& data, const LayerPartition& partition, std::size_t layer,
                double alpha0, std::uint64_t seed, const DsOptions& options = {});

/// Same, starting from an existing mirror fit.
DsRun ds_detect_from_fit(MirrorFit fit, const LayerPartition& partition, std::size_t layer,
                         double alpha0, GroupStatMode mode);

}  // namespace mlfdr
