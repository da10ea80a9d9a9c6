#include "mlfdr/knockoff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "mlfdr/efilter.hpp"
#include "mlfdr/parallel.hpp"

namespace mlfdr {

namespace {

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

// Symmetric square root and inverse square root of a positive definite block.
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("group knockoffs: diagonal block is not positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd orthogonal_complement(const Eigen::MatrixXd& Xn,
                                      std::optional<std::uint64_t> seed) {
  const auto n = Xn.rows();
  const auto N = Xn.cols();
  Eigen::MatrixXd basis(n, 2 * N);
  basis.leftCols(N) = Xn;
  if (seed) {
    std::mt19937_64 rng(*seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (Eigen::Index j = 0; j < N; ++j)
      for (Eigen::Index i = 0; i < n; ++i) basis(i, N + j) = z(rng);
  } else {
    basis.rightCols(N).setZero();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(seed ? basis : Eigen::MatrixXd(Xn));
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2 * N);
  return Q.rightCols(N);
}

}  // namespace

KnockoffDesign construct_group_knockoffs(const Eigen::MatrixXd& X,
                                         const LayerPartition& partition, std::size_t layer,
                                         std::optional<std::uint64_t> randomize_seed) {
  const auto n = X.rows();
  const auto N = X.cols();
  if (static_cast<std::size_t>(N) != partition.num_features())
    throw std::invalid_argument("group knockoffs: partition and design disagree on N");
  if (n < 2 * N)
    throw std::invalid_argument("group knockoffs need n >= 2N (n=" + std::to_string(n) +
                                ", N=" + std::to_string(N) + ")");
  if (!X.allFinite()) throw std::invalid_argument("group knockoffs: non-finite design");

  KnockoffDesign d;
  d.x = X;
  for (Eigen::Index j = 0; j < N; ++j) {
    const double norm = X.col(j).norm();
    if (norm == 0.0) throw NumericalError("group knockoffs: zero column " + std::to_string(j + 1));
    d.x.col(j) /= norm;
  }
  d.gram = d.x.transpose() * d.x;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.gram, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw NumericalError("group knockoffs: Gram matrix is singular or ill-conditioned");

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
  Eigen::MatrixXd D_inv_sqrt = Eigen::MatrixXd::Zero(N, N);
  for (const auto& group : partition.groups(layer)) {
    std::vector<Eigen::Index> idx(group.begin(), group.end());
    const Eigen::MatrixXd block = d.gram(idx, idx);
    D(idx, idx) = block;
    D_inv_sqrt(idx, idx) = inv_sqrt(block);
  }
  const Eigen::MatrixXd scaled = D_inv_sqrt * d.gram * D_inv_sqrt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(0.5 * (scaled + scaled.transpose()),
                                                     Eigen::EigenvaluesOnly);
  d.gamma = std::min(1.0, 2.0 * es2.eigenvalues().minCoeff());
  if (!(d.gamma > 0.0)) throw NumericalError("group knockoffs: no feasible scaling");
  d.s_matrix = d.gamma * D;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(d.gram);
  const Eigen::MatrixXd sigma_inv_s = ldlt.solve(d.s_matrix);
  Eigen::MatrixXd A = 2.0 * d.s_matrix - d.s_matrix * sigma_inv_s;
  A = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esA(A);
  const Eigen::VectorXd ev = esA.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd C = ev.cwiseSqrt().asDiagonal() * esA.eigenvectors().transpose();

  const Eigen::MatrixXd U = orthogonal_complement(d.x, randomize_seed);
  d.x_tilde = d.x - d.x * sigma_inv_s + U * C;
  return d;
}

std::vector<double> signed_max_statistics(const Eigen::VectorXd& entry_times,
                                          const LayerPartition& partition, std::size_t layer) {
  const std::size_t N = partition.num_features();
  if (static_cast<std::size_t>(entry_times.size()) != 2 * N)
    throw std::invalid_argument("entry times must have length 2N");
  const auto& groups = partition.groups(layer);
  std::vector<double> t(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double z = 0.0, zt = 0.0;
    for (std::size_t j : groups[g]) {
      z = std::max(z, entry_times(static_cast<Eigen::Index>(j)));
      zt = std::max(zt, entry_times(static_cast<Eigen::Index>(N + j)));
    }
    t[g] = std::max(z, zt) * sign(z - zt);
  }
  return t;
}

std::vector<double> knockoff_statistics(const KnockoffDesign& design, const Eigen::VectorXd& y,
                                        const LayerPartition& partition, std::size_t layer,
                                        const LambdaGrid& grid) {
  Eigen::MatrixXd aug(design.x.rows(), 2 * design.x.cols());
  aug << design.x, design.x_tilde;
  const LambdaGrid g = grid.values.empty() ? default_entry_grid(aug, y) : grid;
  return signed_max_statistics(lasso_entry_times(aug, y, g), partition, layer);
}

ThresholdResult knockoff_plus_threshold(const std::vector<double>& t_stats, double alpha) {
  return detail::symmetric_threshold_scan(t_stats, alpha, 1);
}

KnockoffRun knockoff_detect_from_stats(std::vector<double> stats, double alpha0) {
  KnockoffRun run;
  run.stats = std::move(stats);
  run.threshold = knockoff_plus_threshold(run.stats, alpha0);
  run.outcome.layer_size = run.stats.size();
  run.outcome.rejections = run.threshold.selected;
  run.outcome.v_hat = 1.0 + static_cast<double>(run.threshold.negatives);
  run.outcome.original_level = alpha0;
  run.evalues = evalues_from_outcome(run.outcome);
  return run;
}

KnockoffRun knockoff_detect(const Dataset& data, const LayerPartition& partition,
                            std::size_t layer, double alpha0,
                            std::optional<std::uint64_t> randomize_seed) {
  const KnockoffDesign design =
      construct_group_knockoffs(data.design, partition, layer, randomize_seed);
  return knockoff_detect_from_stats(knockoff_statistics(design, data.response, partition, layer),
                                    alpha0);
}

MkfResult mkf_plus_from_stats(const std::vector<std::vector<double>>& stats,
                              const LayerPartition& partition, const std::vector<double>& alphas,
                              double c) {
  const std::size_t M = partition.num_layers();
  FilterLevels(alphas).validate(M);
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("mkf: c must be positive");
  if (stats.size() != M) throw std::invalid_argument("mkf: need statistics for every layer");

  detail::DescentProblem problem;
  problem.partition = &partition;
  problem.scores = stats;
  problem.grid.resize(M);
  std::vector<std::vector<double>> neg_mag(M);
  for (std::size_t m = 0; m < M; ++m) {
    if (stats[m].size() != partition.group_count(m))
      throw std::invalid_argument("mkf: statistic count does not match group count at layer " +
                                  std::to_string(m + 1));
    for (double t : stats[m]) {
      if (t != 0.0) problem.grid[m].push_back(std::abs(t));
      if (t < 0) neg_mag[m].push_back(-t);
    }
    std::sort(problem.grid[m].begin(), problem.grid[m].end());
    problem.grid[m].erase(std::unique(problem.grid[m].begin(), problem.grid[m].end()),
                          problem.grid[m].end());
    std::sort(neg_mag[m].begin(), neg_mag[m].end());
  }
  auto negatives_at = [&](std::size_t m, double t) {
    return static_cast<std::size_t>(neg_mag[m].end() -
                                    std::lower_bound(neg_mag[m].begin(), neg_mag[m].end(), t));
  };
  problem.admissible = [&](std::size_t m, std::size_t idx, std::size_t count) {
    const double v = c * static_cast<double>(1 + negatives_at(m, problem.grid[m][idx]));
    return v <= alphas[m] * static_cast<double>(std::max<std::size_t>(count, 1));
  };

  const auto res = detail::threshold_descent(problem);
  MkfResult out;
  out.stats = stats;
  out.selection.selected_features = res.selected;
  out.selection.thresholds = res.thresholds;
  out.selection.passes = res.passes;
  attach_group_selections(out.selection, partition);
  for (std::size_t m = 0; m < M; ++m) {
    const double t = res.thresholds[m];
    const double v = c * static_cast<double>(1 + (std::isinf(t) ? 0 : negatives_at(m, t)));
    out.v_hat.push_back(v);
    out.selection.per_layer_fdp_hat.push_back(
        std::isinf(t) ? 0.0
                      : v / static_cast<double>(std::max<std::size_t>(
                                out.selection.per_layer_groups[m].size(), 1)));
  }
  return out;
}

MkfResult mkf_plus(const Dataset& data, const LayerPartition& partition,
                   const std::vector<double>& alphas, double c,
                   std::optional<std::uint64_t> randomize_seed) {
  if (partition.num_features() != data.num_features())
    throw std::invalid_argument("mkf: partition and dataset disagree on feature count");
  std::vector<std::vector<double>> stats;
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    std::optional<std::uint64_t> seed;
    if (randomize_seed) seed = derive_seed(*randomize_seed, m);
    const KnockoffDesign design = construct_group_knockoffs(data.design, partition, m, seed);
    stats.push_back(knockoff_statistics(design, data.response, partition, m));
  }
  return mkf_plus_from_stats(stats, partition, alphas, c);
}

}  // namespace mlfdr
