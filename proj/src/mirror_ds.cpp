#include "mlfdr/mirror_ds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mlfdr/parallel.hpp"

namespace mlfdr {

namespace {

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, const IndexSet& rows) {
  std::vector<Eigen::Index> r(rows.begin(), rows.end());
  return X(r, Eigen::all);
}

Eigen::VectorXd rows_of(const Eigen::VectorXd& y, const IndexSet& rows) {
  std::vector<Eigen::Index> r(rows.begin(), rows.end());
  return y(r);
}

}  // namespace

SplitIndices split_half(std::size_t n, std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("split_half: need n >= 4");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  SplitIndices s;
  s.half_a.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n / 2));
  s.half_b.assign(perm.begin() + static_cast<std::ptrdiff_t>(n / 2), perm.end());
  std::sort(s.half_a.begin(), s.half_a.end());
  std::sort(s.half_b.begin(), s.half_b.end());
  return s;
}

Eigen::VectorXd mirror_statistics(const Eigen::VectorXd& beta_a, const Eigen::VectorXd& beta_b) {
  if (beta_a.size() != beta_b.size())
    throw std::invalid_argument("mirror_statistics: coefficient vectors differ in length");
  Eigen::VectorXd w(beta_a.size());
  for (Eigen::Index j = 0; j < w.size(); ++j)
    w(j) = sign(beta_a(j) * beta_b(j)) * (std::abs(beta_a(j)) + std::abs(beta_b(j)));
  return w;
}

std::vector<double> group_statistics(const Eigen::VectorXd& w, const LayerPartition& partition,
                                     std::size_t layer, GroupStatMode mode) {
  if (static_cast<std::size_t>(w.size()) != partition.num_features())
    throw std::invalid_argument("group_statistics: statistic length does not match partition");
  const auto& groups = partition.groups(layer);
  std::vector<double> t(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    if (mode == GroupStatMode::mean) {
      double s = 0.0;
      for (std::size_t j : members) s += w(static_cast<Eigen::Index>(j));
      t[g] = s / static_cast<double>(members.size());
    } else {
      double m = -kInfinity;
      for (std::size_t j : members) m = std::max(m, w(static_cast<Eigen::Index>(j)));
      t[g] = m;
    }
  }
  return t;
}

namespace detail {

ThresholdResult symmetric_threshold_scan(const std::vector<double>& t_stats, double alpha,
                                         std::size_t offset) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  std::vector<double> pos_mag, neg_mag, mags;
  for (double t : t_stats) {
    if (!std::isfinite(t)) throw std::invalid_argument("threshold scan: non-finite statistic");
    if (t > 0) pos_mag.push_back(t);
    if (t < 0) neg_mag.push_back(-t);
    if (t != 0.0) mags.push_back(std::abs(t));
  }
  std::sort(pos_mag.begin(), pos_mag.end());
  std::sort(neg_mag.begin(), neg_mag.end());
  std::sort(mags.begin(), mags.end());
  mags.erase(std::unique(mags.begin(), mags.end()), mags.end());

  // The ratio is constant on (0, a_1) and on each [a_i, a_{i+1}); its value
  // there uses #{T > t}, while the selection is {T >= t}.
  auto admissible = [&](std::size_t negatives, std::size_t above) {
    return static_cast<double>(offset + negatives) <=
           alpha * static_cast<double>(std::max<std::size_t>(above, 1));
  };
  ThresholdResult res;
  if (admissible(neg_mag.size(), pos_mag.size())) {
    res.threshold = 0.0;
    res.zero_plus = true;
    res.negatives = neg_mag.size();
    for (std::size_t g = 0; g < t_stats.size(); ++g)
      if (t_stats[g] > 0) res.selected.push_back(g);
    return res;
  }
  for (double a : mags) {
    const auto above = static_cast<std::size_t>(
        pos_mag.end() - std::upper_bound(pos_mag.begin(), pos_mag.end(), a));
    const auto negatives = static_cast<std::size_t>(
        neg_mag.end() - std::upper_bound(neg_mag.begin(), neg_mag.end(), a));
    if (admissible(negatives, above)) {
      res.threshold = a;
      res.negatives = negatives;
      for (std::size_t g = 0; g < t_stats.size(); ++g)
        if (t_stats[g] >= a) res.selected.push_back(g);
      return res;
    }
  }
  return res;
}

}  // namespace detail

ThresholdResult ds_threshold(const std::vector<double>& t_stats, double alpha) {
  return detail::symmetric_threshold_scan(t_stats, alpha, 0);
}

MirrorFit ds_mirror_fit(const Dataset& data, std::uint64_t seed, const DsOptions& options) {
  const std::size_t n = data.num_samples();
  const SplitIndices split = split_half(n, derive_seed(seed, 0x5b1));
  const Eigen::MatrixXd Xa = rows_of(data.design, split.half_a);
  const Eigen::VectorXd ya = rows_of(data.response, split.half_a);
  Eigen::MatrixXd Xb = rows_of(data.design, split.half_b);
  Eigen::VectorXd yb = rows_of(data.response, split.half_b);

  const std::size_t folds = std::min(options.cv_folds, split.half_a.size());
  const CvResult cv = lasso_cv(Xa, ya, folds, LambdaGrid{}, derive_seed(seed, 0xcf), options.lasso);

  MirrorFit out;
  out.lambda_star = cv.lambda_star;
  out.lasso_support = cv.fit.support();

  // Second-half OLS with an intercept, via centering.
  if (options.lasso.intercept) {
    const Eigen::RowVectorXd mu = Xb.colwise().mean();
    Xb.rowwise() -= mu;
    yb.array() -= yb.mean();
  }
  const OlsResult o = ols_drop_collinear(Xb, yb, out.lasso_support, options.collinearity_tol);
  out.dropped_collinear = o.dropped;
  out.w = mirror_statistics(cv.fit.coefficients, o.coefficients);
  return out;
}

DsRun ds_detect_from_fit(MirrorFit fit, const LayerPartition& partition, std::size_t layer,
                         double alpha0, GroupStatMode mode) {
  DsRun run;
  run.fit = std::move(fit);
  run.group_stats = group_statistics(run.fit.w, partition, layer, mode);
  run.threshold = ds_threshold(run.group_stats, alpha0);
  run.outcome.layer_size = partition.group_count(layer);
  run.outcome.rejections = run.threshold.selected;
  run.outcome.v_hat = static_cast<double>(run.threshold.negatives);
  run.outcome.original_level = alpha0;
  run.evalues = evalues_from_outcome(run.outcome);
  return run;
}

DsRun ds_detect(const Dataset& data, const LayerPartition& partition, std::size_t layer,
                double alpha0, std::uint64_t seed, const DsOptions& options) {
  if (partition.num_features() != data.num_features())
    throw std::invalid_argument("ds_detect: partition and dataset disagree on feature count");
  return ds_detect_from_fit(ds_mirror_fit(data, seed, options), partition, layer, alpha0,
                            options.mode);
}

}  // namespace mlfdr
