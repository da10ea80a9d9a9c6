#include "mlfdr/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <tuple>

#include "mlfdr/knockoff.hpp"
#include "mlfdr/pipelines.hpp"

namespace mlfdr {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<SimDesign> vary(SimDesign base, const std::vector<double>& values, bool rho) {
  std::vector<SimDesign> out;
  for (double v : values) {
    SimDesign d = base;
    if (rho)
      d.rho = v;
    else
      d.delta = v;
    out.push_back(d);
  }
  return out;
}

SimDesign paper_main() {
  SimDesign d;
  d.n = 1600;
  d.N = 800;
  d.groups = 80;
  d.n_signals = 60;
  d.n_signal_groups = 20;
  d.delta = 5.0;
  return d;
}

SimDesign supplement(std::size_t n, std::size_t N) {
  SimDesign d;
  d.n = n;
  d.N = N;
  d.groups = N;  // signals located anywhere
  d.cov_blocks = 10;
  d.n_signals = 80;
  d.n_signal_groups = N;
  d.rho = 0.5;
  d.delta = 6.0;
  d.layers = 1;
  return d;
}

}  // namespace

void SimDesign::validate() const {
  if (n < 4 || N < 1) throw std::invalid_argument("design: need n >= 4 and N >= 1");
  if (groups == 0 || N % groups != 0)
    throw std::invalid_argument("design: the group count must divide N");
  if (block_count() == 0 || N % block_count() != 0)
    throw std::invalid_argument("design: the block count must divide N");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("design: rho must lie in [0, 1)");
  if (!(delta >= 0.0) || !(noise_sd >= 0.0))
    throw std::invalid_argument("design: delta and noise_sd must be >= 0");
  if (n_signal_groups > groups)
    throw std::invalid_argument("design: more signal groups than groups");
  if (n_signals > n_signal_groups * group_size())
    throw std::invalid_argument("design: more signals than features in the signal groups");
  if (layers != 1 && layers != 2) throw std::invalid_argument("design: layers must be 1 or 2");
}

std::vector<std::string> preset_names() {
  return {"paper-fig1", "paper-fig2", "paper-fig3", "desk",
          "desk-fig1",  "supp-low",   "supp-high",  "supp-higher"};
}

std::vector<SimDesign> preset_designs(const std::string& name) {
  const std::vector<double> rhos{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<SimDesign> out;
  if (name == "paper-fig1") {
    out = vary(paper_main(), rhos, true);
  } else if (name == "paper-fig2") {
    SimDesign d = paper_main();
    d.rho = 0.7;
    out = vary(d, {3, 4, 5, 6, 7}, false);
  } else if (name == "paper-fig3") {
    SimDesign d = paper_main();
    d.delta = 3.0;
    out = vary(d, rhos, true);
  } else if (name == "desk") {
    out = {SimDesign{}};
  } else if (name == "desk-fig1") {
    out = vary(SimDesign{}, rhos, true);
  } else if (name == "supp-low") {
    out = vary(supplement(1000, 800), {4, 5, 6, 7, 8, 9}, false);
  } else if (name == "supp-high") {
    out = vary(supplement(800, 1000), {4, 5, 6, 7, 8, 9}, false);
  } else if (name == "supp-higher") {
    out = vary(supplement(800, 2000), {4, 5, 6, 7, 8, 9}, false);
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  for (auto& d : out) d.label = name;
  return out;
}

Eigen::MatrixXd toeplitz_block_sigma(std::size_t group_size, double rho) {
  if (group_size < 2) throw std::invalid_argument("toeplitz block: need group size >= 2");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("toeplitz block: rho must lie in [0, 1)");
  const auto g = static_cast<Eigen::Index>(group_size);
  Eigen::MatrixXd S(g, g);
  const double denom = static_cast<double>(group_size - 1);
  for (Eigen::Index i = 0; i < g; ++i)
    for (Eigen::Index j = 0; j < g; ++j) {
      const auto d = std::abs(i - j);
      S(i, j) = d == 0 ? 1.0 : static_cast<double>(g - 1 - d) * rho / denom;
    }
  return S;
}

Eigen::MatrixXd block_cholesky(const SimDesign& design) {
  design.validate();
  const std::size_t b = design.N / design.block_count();
  if (b < 2) return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b));
  Eigen::LLT<Eigen::MatrixXd> llt(toeplitz_block_sigma(b, design.rho));
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance block is not positive definite");
  return llt.matrixL();
}

SimData generate_dataset(const SimDesign& design, std::uint64_t seed) {
  return generate_dataset(design, block_cholesky(design), seed);
}

SimData generate_dataset(const SimDesign& design, const Eigen::MatrixXd& L, std::uint64_t seed) {
  design.validate();
  const auto n = static_cast<Eigen::Index>(design.n);
  const auto N = static_cast<Eigen::Index>(design.N);
  const auto b = L.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);

  Eigen::MatrixXd Z(n, N);
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index i = 0; i < n; ++i) Z(i, j) = z(rng);
  Eigen::MatrixXd X(n, N);
  for (Eigen::Index start = 0; start < N; start += b)
    X.middleCols(start, b).noalias() = Z.middleCols(start, b) * L.transpose();

  // Signal groups first, then signals drawn from their union.
  const std::size_t gs = design.group_size();
  std::vector<std::size_t> gidx(design.groups);
  std::iota(gidx.begin(), gidx.end(), 0);
  std::shuffle(gidx.begin(), gidx.end(), rng);
  std::vector<std::size_t> pool;
  for (std::size_t k = 0; k < design.n_signal_groups; ++k)
    for (std::size_t j = 0; j < gs; ++j) pool.push_back(gidx[k] * gs + j);
  std::sort(pool.begin(), pool.end());
  std::shuffle(pool.begin(), pool.end(), rng);
  IndexSet relevant(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(design.n_signals));
  std::sort(relevant.begin(), relevant.end());

  const double sd = design.delta * std::sqrt(std::log(static_cast<double>(design.N)) /
                                              static_cast<double>(design.n));
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(N);
  if (sd > 0.0) {
    std::normal_distribution<double> bdist(0.0, sd);
    for (std::size_t j : relevant) beta(static_cast<Eigen::Index>(j)) = bdist(rng);
  }
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps(i) = z(rng);
  Eigen::VectorXd y = X * beta + design.noise_sd * eps;

  SimData out{Dataset(std::move(X), std::move(y)), GroundTruth{relevant},
              design.layers == 2 && design.groups < design.N
                  ? LayerPartition::singleton_and_blocks(design.N, gs)
                  : LayerPartition::singleton(design.N),
              std::move(beta)};
  if (sd == 0.0) out.truth.relevant_features.clear();
  return out;
}

IndexSet mds_select(const std::vector<double>& rates, double alpha) {
  std::vector<double> sorted = rates;
  std::sort(sorted.begin(), sorted.end());
  std::size_t khat = 0;
  double cum = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cum += sorted[k];
    if (cum <= alpha)
      khat = k + 1;
    else
      break;
  }
  const double cutoff = khat == 0 ? 0.0 : sorted[khat - 1];
  IndexSet out;
  for (std::size_t j = 0; j < rates.size(); ++j)
    if (rates[j] > cutoff) out.push_back(j);
  return out;
}

IndexSet mds_baseline(const Dataset& data, double alpha, std::size_t R, std::uint64_t seed,
                      const DsOptions& options, ExecutionPolicy policy) {
  if (R == 0) throw std::invalid_argument("mds: need at least one replication");
  const LayerPartition single = LayerPartition::singleton(data.num_features());
  std::vector<IndexSet> sel(R);
  for_each_index(R, policy, [&](std::size_t r) {
    sel[r] = ds_detect(data, single, 0, alpha, derive_seed(seed, 0, r), options).outcome.rejections;
  });
  std::vector<double> rates(data.num_features(), 0.0);
  for (const auto& s : sel) {
    if (s.empty()) continue;
    const double w = 1.0 / (static_cast<double>(R) * static_cast<double>(s.size()));
    for (std::size_t j : s) rates[j] += w;
  }
  return mds_select(rates, alpha);
}

std::vector<std::string> known_methods() {
  return {"eds_gkf", "eds_gkf_ckn", "mkf_plus", "eds_filter", "ds", "mds"};
}

ExperimentResult run_experiment(const std::vector<SimDesign>& points,
                                const std::vector<std::string>& methods,
                                const ExperimentSettings& settings, std::size_t trials,
                                std::uint64_t seed) {
  const auto known = known_methods();
  for (const auto& m : methods)
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw std::invalid_argument("unknown method '" + m + "'");
  std::vector<Eigen::MatrixXd> chol;
  for (const auto& p : points) chol.push_back(block_cholesky(p));

  struct Job {
    std::size_t point, trial;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (std::size_t t = 0; t < trials; ++t) jobs.push_back({p, t});

  struct JobOut {
    std::vector<ExperimentRecord> records;
    std::vector<TrialFailure> failures;
  };
  std::vector<JobOut> outs(jobs.size());

  auto want = [&](const char* name) {
    return std::find(methods.begin(), methods.end(), name) != methods.end();
  };

  for_each_index(jobs.size(), settings.policy, [&](std::size_t i) {
    const auto [p, t] = jobs[i];
    const SimDesign& design = points[p];
    const std::uint64_t trial_seed = derive_seed(seed, p, t);
    JobOut& out = outs[i];
    std::string current;
    try {
      const SimData sim = generate_dataset(design, chol[p], derive_seed(trial_seed, 0));
      auto emit = [&](const std::string& name, const IndexSet& selected, double secs) {
        const auto metrics = evaluate_selection(selected, sim.truth, sim.partition);
        for (std::size_t m = 0; m < metrics.size(); ++m)
          out.records.push_back({name, m, p, t, design.rho, design.delta, metrics[m].fdp,
                                 metrics[m].power, metrics[m].selected, secs});
      };
      const std::size_t M = sim.partition.num_layers();
      const std::vector<double> alphas(M, settings.alpha);

      if (want("eds_gkf") || want("eds_gkf_ckn")) {
        current = "eds_gkf";
        PipelineConfig cfg = eds_gkf_config(sim.partition, settings.alpha, settings.alpha0,
                                            settings.ds_reps, derive_seed(trial_seed, 1));
        cfg.policy = ExecutionPolicy::serial;
        cfg.ds = settings.ds;
        const auto rep = run_eds_gkf(sim.data, cfg, 1.0);
        if (want("eds_gkf")) emit("eds_gkf", rep.selection.selected_features, rep.runtime_seconds);
        if (want("eds_gkf_ckn")) {
          std::vector<double> lv(M, settings.c_kn * settings.alpha);
          const auto sel = generalized_efilter(rep.evalues, FilterLevels(lv), sim.partition);
          emit("eds_gkf_ckn", sel.selected_features, rep.runtime_seconds);
        }
      }
      if (want("mkf_plus")) {
        current = "mkf_plus";
        const auto start = Clock::now();
        const auto res = mkf_plus(sim.data, sim.partition, alphas, 1.0);
        emit("mkf_plus", res.selection.selected_features,
             std::chrono::duration<double>(Clock::now() - start).count());
      }
      if (want("eds_filter")) {
        current = "eds_filter";
        PipelineConfig cfg = eds_config(sim.partition, settings.alpha, settings.alpha0,
                                        settings.ds_reps, derive_seed(trial_seed, 2));
        cfg.policy = ExecutionPolicy::serial;
        cfg.ds = settings.ds;
        const auto rep = run_eds_filter(sim.data, cfg);
        emit("eds_filter", rep.selection.selected_features, rep.runtime_seconds);
      }
      if (want("ds")) {
        current = "ds";
        const auto start = Clock::now();
        const LayerPartition single = LayerPartition::singleton(design.N);
        const auto run = ds_detect(sim.data, single, 0, settings.alpha,
                                   derive_seed(trial_seed, 3), settings.ds);
        emit("ds", run.outcome.rejections,
             std::chrono::duration<double>(Clock::now() - start).count());
      }
      if (want("mds")) {
        current = "mds";
        const auto start = Clock::now();
        const auto sel = mds_baseline(sim.data, settings.alpha, settings.mds_reps,
                                      derive_seed(trial_seed, 4), settings.ds);
        emit("mds", sel, std::chrono::duration<double>(Clock::now() - start).count());
      }
    } catch (const std::exception& e) {
      out.records.clear();
      out.failures.push_back({p, t, current, e.what()});
    }
  });

  ExperimentResult res;
  for (auto& o : outs) {
    res.records.insert(res.records.end(), o.records.begin(), o.records.end());
    res.failures.insert(res.failures.end(), o.failures.begin(), o.failures.end());
  }
  return res;
}

std::vector<SummaryRow> summarize(const ExperimentResult& result) {
  using Key = std::tuple<std::size_t, std::string, std::size_t>;
  std::map<Key, std::vector<const ExperimentRecord*>> by;
  std::vector<std::string> order;
  for (const auto& r : result.records) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
    by[{r.point, r.method, r.layer}].push_back(&r);
  }
  auto mean_se = [](const std::vector<double>& v) {
    const double k = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / k;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / (k - 1.0) / k) : 0.0;
    return std::pair{mean, se};
  };
  std::vector<SummaryRow> rows;
  for (const auto& [key, recs] : by) {
    std::vector<double> f, pw;
    for (const auto* r : recs) {
      f.push_back(r->fdp);
      pw.push_back(r->power);
    }
    SummaryRow row;
    row.point = std::get<0>(key);
    row.method = std::get<1>(key);
    row.layer = std::get<2>(key);
    row.rho = recs.front()->rho;
    row.delta = recs.front()->delta;
    row.trials = recs.size();
    std::tie(row.fdr, row.fdr_se) = mean_se(f);
    std::tie(row.power, row.power_se) = mean_se(pw);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [&](const SummaryRow& a, const SummaryRow& b) {
    const auto ia = std::find(order.begin(), order.end(), a.method) - order.begin();
    const auto ib = std::find(order.begin(), order.end(), b.method) - order.begin();
    return std::tie(a.point, ia, a.layer) < std::tie(b.point, ib, b.layer);
  });
  return rows;
}

}  // namespace mlfdr
