#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlfdr/core_model.hpp"
#include "mlfdr/parallel.hpp"

namespace mlfdr {

struct LassoOptions {
  double tol = 1e-7;          // max G_jj * change^2 per sweep, relative to var(y)
  int max_sweeps = 10000;
  bool standardize = true;    // unit 1/n variance columns
  bool intercept = true;      // center X and y
  bool track_objective = false;
  /// Cross-validation paths stop once the training deviance ratio exceeds
  /// 0.999 or, after 5 points, improves by less than a 1e-5 fraction.
  bool truncate_cv_paths = true;
};

struct LassoFit {
  Eigen::VectorXd coefficients;  // original scale
  double lambda = 0.0;
  double intercept = 0.0;
  int n_iterations = 0;
  bool converged = false;
  IndexSet dropped_columns;      // zero-variance columns, coefficient forced to 0
  std::vector<double> objective_trace;

  IndexSet support() const;
};

/// Decreasing penalty values.
struct LambdaGrid {
  std::vector<double> values;

  static LambdaGrid log_spaced(double lambda_max, std::size_t n_points, double ratio);
  std::size_t size() const { return values.size(); }
  double ratio() const { return values.empty() ? 1.0 : values.back() / values.front(); }
};

/// max_j |x_j' y| / n after the preprocessing implied by `options`.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const LassoOptions& options = {});

/// 100 points, ratio 1e-3 (1e-2 when n < p).
LambdaGrid default_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const LassoOptions& options = {}, std::size_t n_points = 100);

/// Minimizes (1/2n)|y - X b|^2 + lambda |b|_1 by cyclic coordinate descent.
LassoFit lasso_coordinate_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double lambda, const LassoOptions& options = {});

/// Warm-started fits along a decreasing grid.
std::vector<LassoFit> lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const LambdaGrid& grid, const LassoOptions& options = {});

/// Largest |x_j'(y - X b)/n - lambda*sign(b_j)| style KKT violation on the
/// solver's working scale. Zero at an exact optimum.
double lasso_kkt_violation(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const LassoFit& fit, const LassoOptions& options = {});

struct CvResult {
  LassoFit fit;               // refit on all rows at lambda_star
  double lambda_star = 0.0;
  std::size_t best_index = 0;
  LambdaGrid grid;
  std::vector<double> cv_error;  // pooled held-out MSE over the scored grid prefix
  std::size_t skipped_folds = 0;
};

/// Fold k holds the rows whose position in a seeded shuffle is congruent to k.
std::vector<std::size_t> cv_fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

/// K-fold cross-validation. An empty grid means default_lambda_grid on all rows.
/// Ties in CV error go to the larger penalty. With truncated paths only the
/// grid prefix reached by every fold is scored.
CvResult lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t folds,
                  const LambdaGrid& grid, std::uint64_t seed, const LassoOptions& options = {},
                  ExecutionPolicy policy = ExecutionPolicy::serial);

/// Least squares on the support columns, zeros elsewhere. No intercept.
/// Throws NumericalError when the restricted design is rank deficient.
Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const IndexSet& support);

struct OlsResult {
  Eigen::VectorXd coefficients;
  IndexSet used;
  IndexSet dropped;  // collinear with earlier-indexed support columns
};

/// Like ols, but drops support columns (in index order) whose residual after
/// projecting out the earlier kept columns is below rel_tol of their norm.
OlsResult ols_drop_collinear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const IndexSet& support, double rel_tol = 1e-8);

/// Z_j = largest grid penalty at which coefficient j is nonzero, 0 if never.
/// The fit uses the columns as given: no centering or scaling.
Eigen::VectorXd lasso_entry_times(const Eigen::MatrixXd& X_augmented, const Eigen::VectorXd& y,
                                  const LambdaGrid& grid);

/// Grid used for entry times when the caller supplies none.
LambdaGrid default_entry_grid(const Eigen::MatrixXd& X_augmented, const Eigen::VectorXd& y,
                              std::size_t n_points = 500);

}  // namespace mlfdr
