#include "mlfdr/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace mlfdr {

namespace {

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size())
    throw std::invalid_argument("regression: X has " + std::to_string(X.rows()) +
                                " rows but y has " + std::to_string(y.size()) + " entries");
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("regression: empty design");
  if (!X.allFinite() || !y.allFinite())
    throw std::invalid_argument("regression: non-finite inputs");
}

// Raw sufficient statistics; fold statistics are obtained by subtraction.
struct Moments {
  double n = 0.0;
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  Eigen::VectorXd xsum;
  double ysum = 0.0;
  double yty = 0.0;
};

Moments moments_of(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Moments m;
  m.n = static_cast<double>(X.rows());
  m.xtx = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  m.xtx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  m.xtx.triangularView<Eigen::StrictlyUpper>() = m.xtx.transpose();
  m.xty = X.transpose() * y;
  m.xsum = X.colwise().sum().transpose();
  m.ysum = y.sum();
  m.yty = y.squaredNorm();
  return m;
}

Moments subtract(const Moments& all, const Moments& part) {
  Moments m;
  m.n = all.n - part.n;
  m.xtx = all.xtx - part.xtx;
  m.xty = all.xty - part.xty;
  m.xsum = all.xsum - part.xsum;
  m.ysum = all.ysum - part.ysum;
  m.yty = all.yty - part.yty;
  return m;
}

// Working-scale problem: minimize 0.5 b'Gb - c'b + lambda |b|_1.
struct Problem {
  Eigen::MatrixXd gram;
  Eigen::VectorXd c;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  double ymean = 0.0;
  double yy = 0.0;
  std::vector<char> usable;
  IndexSet dropped;
};

Problem prepare(const Moments& mo, const LassoOptions& opt) {
  const auto p = mo.xtx.rows();
  const double n = mo.n;
  Problem pr;
  pr.mean = opt.intercept ? Eigen::VectorXd(mo.xsum / n) : Eigen::VectorXd::Zero(p);
  pr.ymean = opt.intercept ? mo.ysum / n : 0.0;
  Eigen::MatrixXd cross = mo.xtx - n * pr.mean * pr.mean.transpose();
  Eigen::VectorXd cy = mo.xty - n * pr.ymean * pr.mean;
  pr.yy = (mo.yty - n * pr.ymean * pr.ymean) / n;

  pr.usable.assign(static_cast<std::size_t>(p), 1);
  pr.scale = Eigen::VectorXd::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = cross(j, j) / n;
    const double raw = mo.xtx(j, j) / n;
    if (!(var > 1e-10 * raw) || raw <= 0.0) {
      pr.usable[j] = 0;
      pr.dropped.push_back(static_cast<std::size_t>(j));
      continue;
    }
    if (opt.standardize) pr.scale(j) = std::sqrt(var);
  }
  pr.gram = cross / n;
  pr.c = cy / n;
  for (Eigen::Index j = 0; j < p; ++j) {
    pr.gram.row(j) /= pr.scale(j);
    pr.gram.col(j) /= pr.scale(j);
    pr.c(j) /= pr.scale(j);
  }
  for (std::size_t j : pr.dropped) {
    const auto jj = static_cast<Eigen::Index>(j);
    pr.gram.row(jj).setZero();
    pr.gram.col(jj).setZero();
    pr.c(jj) = 0.0;
  }
  return pr;
}

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

struct Solver {
  const Problem& pr;
  const LassoOptions& opt;
  Eigen::VectorXd b;
  Eigen::VectorXd r;  // c - G b

  Solver(const Problem& p, const LassoOptions& o)
      : pr(p), opt(o), b(Eigen::VectorXd::Zero(p.c.size())), r(p.c) {}

  double objective_at(const Eigen::VectorXd& bv, const Eigen::VectorXd& rv, double lambda) const {
    return 0.5 * (pr.yy - bv.dot(pr.c) - bv.dot(rv)) + lambda * bv.lpNorm<1>();
  }
  double objective(double lambda) const { return objective_at(b, r, lambda); }

  // One cycle over `idx`; returns the largest G_jj d^2.
  double cycle(const std::vector<Eigen::Index>& idx, double lambda) {
    double worst = 0.0;
    for (Eigen::Index j : idx) {
      const double gjj = pr.gram(j, j);
      const double bnew = soft_threshold(r(j) + gjj * b(j), lambda) / gjj;
      const double d = bnew - b(j);
      if (d != 0.0) {
        r.noalias() -= pr.gram.col(j) * d;
        b(j) = bnew;
        worst = std::max(worst, gjj * d * d);
      }
    }
    return worst;
  }

  LassoFit solve(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("lasso: lambda must be finite and >= 0");
    LassoFit fit;
    fit.lambda = lambda;
    const auto p = b.size();
    const double thresh = opt.tol * std::max(pr.yy, std::numeric_limits<double>::min());
    std::vector<Eigen::Index> all;
    for (Eigen::Index j = 0; j < p; ++j)
      if (pr.usable[j]) all.push_back(j);
    if (opt.track_objective) fit.objective_trace.push_back(objective(lambda));
    int sweeps = 0;
    while (sweeps < opt.max_sweeps) {
      ++sweeps;
      const double full = cycle(all, lambda);
      if (opt.track_objective) fit.objective_trace.push_back(objective(lambda));
      if (full < thresh) {
        fit.converged = true;
        break;
      }
      std::vector<Eigen::Index> active;
      for (Eigen::Index j : all)
        if (b(j) != 0.0) active.push_back(j);
      while (sweeps < opt.max_sweeps) {
        ++sweeps;
        const double inner = cycle(active, lambda);
        if (opt.track_objective) fit.objective_trace.push_back(objective(lambda));
        if (inner < thresh) break;
      }
    }
    fit.n_iterations = sweeps;
    // Refresh the gradient to shed accumulated rounding.
    r = pr.c - pr.gram * b;
    fit.coefficients = b.cwiseQuotient(pr.scale);
    fit.intercept = pr.ymean - pr.mean.dot(fit.coefficients);
    fit.dropped_columns = pr.dropped;
    return fit;
  }
};

double deviance_ratio(const Problem& pr, const Solver& s) {
  if (!(pr.yy > 0.0)) return 1.0;
  return 1.0 - (pr.yy - s.b.dot(pr.c) - s.b.dot(s.r)) / pr.yy;
}

std::vector<LassoFit> path_on(const Problem& pr, const LambdaGrid& grid, const LassoOptions& opt,
                              std::size_t upto, bool truncate = false) {
  constexpr double kDevMax = 0.999;
  constexpr double kDevGain = 1e-5;
  constexpr std::size_t kMinPoints = 5;
  Solver solver(pr, opt);
  std::vector<LassoFit> fits;
  fits.reserve(upto);
  double prev = 0.0;
  for (std::size_t i = 0; i < upto; ++i) {
    fits.push_back(solver.solve(grid.values[i]));
    if (!truncate) continue;
    const double dev = deviance_ratio(pr, solver);
    if (dev > kDevMax) break;
    if (i + 1 >= kMinPoints && dev - prev < kDevGain * dev) break;
    prev = dev;
  }
  return fits;
}

void check_grid(const LambdaGrid& grid) {
  if (grid.values.empty()) throw std::invalid_argument("lambda grid is empty");
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    if (!(grid.values[i] >= 0.0) || !std::isfinite(grid.values[i]))
      throw std::invalid_argument("lambda grid values must be finite and >= 0");
    if (i > 0 && grid.values[i] > grid.values[i - 1])
      throw std::invalid_argument("lambda grid must be decreasing");
  }
}

}  // namespace

IndexSet LassoFit::support() const {
  IndexSet s;
  for (Eigen::Index j = 0; j < coefficients.size(); ++j)
    if (coefficients(j) != 0.0) s.push_back(static_cast<std::size_t>(j));
  return s;
}

LambdaGrid LambdaGrid::log_spaced(double lambda_max, std::size_t n_points, double ratio) {
  if (n_points == 0) throw std::invalid_argument("lambda grid needs at least one point");
  if (!(lambda_max > 0.0) || !(ratio > 0.0 && ratio <= 1.0))
    throw std::invalid_argument("lambda grid: need lambda_max > 0 and ratio in (0, 1]");
  LambdaGrid g;
  g.values.resize(n_points);
  if (n_points == 1) {
    g.values[0] = lambda_max;
    return g;
  }
  const double step = std::log(ratio) / static_cast<double>(n_points - 1);
  for (std::size_t i = 0; i < n_points; ++i)
    g.values[i] = lambda_max * std::exp(step * static_cast<double>(i));
  g.values[0] = lambda_max;
  return g;
}

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const LassoOptions& options) {
  check_inputs(X, y);
  const Problem pr = prepare(moments_of(X, y), options);
  return pr.c.cwiseAbs().maxCoeff();
}

LambdaGrid default_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const LassoOptions& options, std::size_t n_points) {
  double lmax = lasso_lambda_max(X, y, options);
  if (!(lmax > 0.0)) lmax = 1e-8;
  const double ratio = X.rows() < X.cols() ? 1e-2 : 1e-3;
  return LambdaGrid::log_spaced(lmax, n_points, ratio);
}

LassoFit lasso_coordinate_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double lambda, const LassoOptions& options) {
  check_inputs(X, y);
  const Problem pr = prepare(moments_of(X, y), options);
  Solver solver(pr, options);
  return solver.solve(lambda);
}

std::vector<LassoFit> lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const LambdaGrid& grid, const LassoOptions& options) {
  check_inputs(X, y);
  check_grid(grid);
  const Problem pr = prepare(moments_of(X, y), options);
  return path_on(pr, grid, options, grid.size());
}

double lasso_kkt_violation(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const LassoFit& fit, const LassoOptions& options) {
  check_inputs(X, y);
  const Problem pr = prepare(moments_of(X, y), options);
  const Eigen::VectorXd b = fit.coefficients.cwiseProduct(pr.scale);
  const Eigen::VectorXd r = pr.c - pr.gram * b;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    if (!pr.usable[j]) continue;
    const double v = b(j) != 0.0 ? std::abs(r(j) - fit.lambda * (b(j) > 0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(r(j)) - fit.lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

std::vector<std::size_t> cv_fold_assignment(std::size_t n, std::size_t folds,
                                            std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (n < folds) throw std::invalid_argument("cross-validation needs n >= folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = i % folds;
  return fold;
}

CvResult lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t folds,
                  const LambdaGrid& grid_in, std::uint64_t seed, const LassoOptions& options,
                  ExecutionPolicy policy) {
  check_inputs(X, y);
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const auto assignment = cv_fold_assignment(n, folds, seed);
  const Moments all = moments_of(X, y);

  CvResult res;
  res.grid = grid_in.values.empty() ? default_lambda_grid(X, y, options) : grid_in;
  check_grid(res.grid);
  const std::size_t L = res.grid.size();

  std::vector<std::vector<double>> sse(folds);
  std::vector<std::size_t> held(folds, 0);
  std::vector<char> skipped(folds, 0);

  for_each_index(folds, policy, [&](std::size_t k) {
    std::vector<Eigen::Index> test_rows;
    double ymin = kInfinity, ymax = -kInfinity;
    for (std::size_t i = 0; i < n; ++i) {
      if (assignment[i] == k) {
        test_rows.push_back(static_cast<Eigen::Index>(i));
      } else {
        ymin = std::min(ymin, y(static_cast<Eigen::Index>(i)));
        ymax = std::max(ymax, y(static_cast<Eigen::Index>(i)));
      }
    }
    if (!(ymax > ymin)) {
      skipped[k] = 1;
      return;
    }
    const Eigen::MatrixXd Xt = X(test_rows, Eigen::all);
    const Eigen::VectorXd yt = y(test_rows);
    const Problem pr = prepare(subtract(all, moments_of(Xt, yt)), options);
    const auto fits = path_on(pr, res.grid, options, L, options.truncate_cv_paths);
    sse[k].resize(fits.size());
    for (std::size_t l = 0; l < fits.size(); ++l) {
      const Eigen::VectorXd resid =
          yt - (Xt * fits[l].coefficients).array().matrix() -
          Eigen::VectorXd::Constant(yt.size(), fits[l].intercept);
      sse[k][l] = resid.squaredNorm();
    }
    held[k] = test_rows.size();
  });

  std::size_t used_rows = 0;
  std::size_t scored = L;
  for (std::size_t k = 0; k < folds; ++k)
    if (!skipped[k]) scored = std::min(scored, sse[k].size());
  res.cv_error.assign(scored, 0.0);
  for (std::size_t k = 0; k < folds; ++k) {
    if (skipped[k]) {
      ++res.skipped_folds;
      continue;
    }
    used_rows += held[k];
    for (std::size_t l = 0; l < scored; ++l) res.cv_error[l] += sse[k][l];
  }
  if (used_rows == 0) throw NumericalError("lasso_cv: every fold has a constant response");
  for (double& e : res.cv_error) e /= static_cast<double>(used_rows);

  res.best_index = 0;
  for (std::size_t l = 1; l < scored; ++l)
    if (res.cv_error[l] < res.cv_error[res.best_index]) res.best_index = l;
  res.lambda_star = res.grid.values[res.best_index];

  const Problem pr = prepare(all, options);
  auto fits = path_on(pr, res.grid, options, res.best_index + 1);
  res.fit = std::move(fits.back());
  return res;
}

Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const IndexSet& support) {
  check_inputs(X, y);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  if (support.empty()) return beta;
  if (support.size() > static_cast<std::size_t>(X.rows()))
    throw NumericalError("ols: support larger than the number of rows");
  std::vector<Eigen::Index> cols;
  for (std::size_t j : support) {
    if (j >= static_cast<std::size_t>(X.cols()))
      throw std::invalid_argument("ols: support index out of range");
    cols.push_back(static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd Xs = X(Eigen::all, cols);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  if (qr.rank() < Xs.cols()) throw NumericalError("ols: restricted design is rank deficient");
  const Eigen::VectorXd b = qr.solve(y);
  for (std::size_t i = 0; i < cols.size(); ++i) beta(cols[i]) = b(static_cast<Eigen::Index>(i));
  return beta;
}

OlsResult ols_drop_collinear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const IndexSet& support, double rel_tol) {
  check_inputs(X, y);
  OlsResult res;
  res.coefficients = Eigen::VectorXd::Zero(X.cols());
  IndexSet sorted = normalized(support);
  Eigen::MatrixXd Q(X.rows(), static_cast<Eigen::Index>(std::min<std::size_t>(
                                  sorted.size(), static_cast<std::size_t>(X.rows()))));
  Eigen::Index kept = 0;
  for (std::size_t j : sorted) {
    if (j >= static_cast<std::size_t>(X.cols()))
      throw std::invalid_argument("ols: support index out of range");
    const auto jj = static_cast<Eigen::Index>(j);
    const double norm0 = X.col(jj).norm();
    if (norm0 == 0.0 || kept == Q.cols()) {
      res.dropped.push_back(j);
      continue;
    }
    Eigen::VectorXd v = X.col(jj);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index q = 0; q < kept; ++q) v -= Q.col(q).dot(v) * Q.col(q);
    const double norm1 = v.norm();
    if (norm1 <= rel_tol * norm0) {
      res.dropped.push_back(j);
      continue;
    }
    Q.col(kept++) = v / norm1;
    res.used.push_back(j);
  }
  if (res.used.empty()) return res;
  std::vector<Eigen::Index> cols(res.used.begin(), res.used.end());
  const Eigen::MatrixXd Xs = X(Eigen::all, cols);
  const Eigen::VectorXd b = Xs.householderQr().solve(y);
  for (std::size_t i = 0; i < cols.size(); ++i)
    res.coefficients(cols[i]) = b(static_cast<Eigen::Index>(i));
  return res;
}

LambdaGrid default_entry_grid(const Eigen::MatrixXd& X_augmented, const Eigen::VectorXd& y,
                              std::size_t n_points) {
  LassoOptions opt;
  opt.standardize = false;
  opt.intercept = false;
  double lmax = lasso_lambda_max(X_augmented, y, opt);
  if (!(lmax > 0.0)) lmax = 1e-8;
  return LambdaGrid::log_spaced(lmax, n_points, 1e-3);
}

Eigen::VectorXd lasso_entry_times(const Eigen::MatrixXd& X_augmented, const Eigen::VectorXd& y,
                                  const LambdaGrid& grid) {
  check_inputs(X_augmented, y);
  check_grid(grid);
  LassoOptions opt;
  opt.standardize = false;
  opt.intercept = false;
  const Problem pr = prepare(moments_of(X_augmented, y), opt);
  Solver solver(pr, opt);
  const auto p = X_augmented.cols();
  Eigen::VectorXd Z = Eigen::VectorXd::Zero(p);
  Eigen::Index remaining = p - static_cast<Eigen::Index>(pr.dropped.size());
  for (double lambda : grid.values) {
    if (remaining == 0) break;
    const LassoFit fit = solver.solve(lambda);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (Z(j) == 0.0 && fit.coefficients(j) != 0.0) {
        Z(j) = lambda;
        --remaining;
      }
    }
  }
  return Z;
}

}  // namespace mlfdr
