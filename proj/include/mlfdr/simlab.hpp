#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlfdr/core_model.hpp"
#include "mlfdr/mirror_ds.hpp"
#include "mlfdr/parallel.hpp"

namespace mlfdr {

struct SimDesign {
  std::string label;
  std::size_t n = 600;
  std::size_t N = 300;
  std::size_t groups = 30;           // contiguous groups of the second layer
  std::size_t cov_blocks = 0;        // Toeplitz blocks; 0 means one per group
  double rho = 0.6;
  double delta = 5.0;
  std::size_t n_signals = 24;
  std::size_t n_signal_groups = 8;
  double noise_sd = 1.0;
  std::size_t layers = 2;            // 1: feature layer only
  std::size_t trials = 50;
  std::uint64_t seed = 1;

  std::size_t group_size() const { return N / groups; }
  std::size_t block_count() const { return cov_blocks == 0 ? groups : cov_blocks; }
  void validate() const;
};

/// Grid points of a named preset: paper-fig1, paper-fig2, paper-fig3, desk,
/// desk-fig1, supp-low, supp-high, supp-higher.
std::vector<SimDesign> preset_designs(const std::string& name);
std::vector<std::string> preset_names();

/// Entry (i, j) = (G'-1-|i-j|) rho / (G'-1) off the diagonal, 1 on it.
Eigen::MatrixXd toeplitz_block_sigma(std::size_t group_size, double rho);

struct SimData {
  Dataset data;
  GroundTruth truth;
  LayerPartition partition;
  Eigen::VectorXd beta;
};

/// Lower Cholesky factor of one covariance block; throws NumericalError if the
/// block is not positive definite.
Eigen::MatrixXd block_cholesky(const SimDesign& design);

SimData generate_dataset(const SimDesign& design, std::uint64_t seed);
SimData generate_dataset(const SimDesign& design, const Eigen::MatrixXd& block_chol,
                         std::uint64_t seed);

/// Inclusion-rate selection over R DS runs at level alpha on the feature layer.
IndexSet mds_baseline(const Dataset& data, double alpha, std::size_t R, std::uint64_t seed,
                      const DsOptions& options = {},
                      ExecutionPolicy policy = ExecutionPolicy::serial);

/// The cutoff rule on given inclusion rates.
IndexSet mds_select(const std::vector<double>& inclusion_rates, double alpha);

struct ExperimentSettings {
  double alpha = 0.2;
  double alpha0 = 0.1;
  std::size_t ds_reps = 50;
  std::size_t mds_reps = 50;
  double c_kn = 1.93;
  DsOptions ds;
  ExecutionPolicy policy = ExecutionPolicy::parallel;
};

/// Known methods: eds_gkf, eds_gkf_ckn, mkf_plus, eds_filter, ds, mds.
std::vector<std::string> known_methods();

struct ExperimentRecord {
  std::string method;
  std::size_t layer = 0;
  std::size_t point = 0;
  std::size_t trial = 0;
  double rho = 0.0;
  double delta = 0.0;
  double fdp = 0.0;
  double power = 0.0;
  std::size_t selected = 0;
  double runtime_seconds = 0.0;
};

struct TrialFailure {
  std::size_t point = 0;
  std::size_t trial = 0;
  std::string method;
  std::string message;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  std::vector<TrialFailure> failures;  // excluded trials
};

/// Every method on fresh data per (point, trial); seeds derive from
/// (master seed, point, trial). A trial where any method fails is excluded.
ExperimentResult run_experiment(const std::vector<SimDesign>& points,
                                const std::vector<std::string>& methods,
                                const ExperimentSettings& settings, std::size_t trials,
                                std::uint64_t seed);

struct SummaryRow {
  std::string method;
  std::size_t layer = 0;
  std::size_t point = 0;
  double rho = 0.0;
  double delta = 0.0;
  std::size_t trials = 0;
  double fdr = 0.0;
  double fdr_se = 0.0;
  double power = 0.0;
  double power_se = 0.0;
};

std::vector<SummaryRow> summarize(const ExperimentResult& result);

}  // namespace mlfdr
