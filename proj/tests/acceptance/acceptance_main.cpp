// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion.
// Usage: mlfdr_acceptance [--only N]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mlfdr/cli.hpp"
#include "mlfdr/efilter.hpp"
#include "mlfdr/evalue.hpp"
#include "mlfdr/io.hpp"
#include "mlfdr/knockoff.hpp"
#include "mlfdr/mirror_ds.hpp"
#include "mlfdr/pipelines.hpp"
#include "mlfdr/simlab.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace mlfdr;

namespace {

// Pinned tolerances and limits.
constexpr double kGramTol = 1e-6;
constexpr double kPsdTol = 1e-8;
constexpr double kFdrSlack = 0.05;
constexpr double kPowerSlack = 0.05;
constexpr double kSymLow = 0.45, kSymHigh = 0.55;
constexpr double kBudgetSe = 3.0;
constexpr double kStableRate = 0.90;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  double limit_seconds;
  std::function<Verdict()> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Desk-scale design shared by criteria 6 and 8.
SimDesign desk_design() {
  SimDesign d;
  d.n = 600;
  d.N = 300;
  d.groups = 30;
  d.n_signals = 24;
  d.n_signal_groups = 8;
  d.delta = 5.0;
  d.rho = 0.6;
  return d;
}

SimDesign null_design(std::size_t n, std::size_t N, double rho) {
  SimDesign d;
  d.n = n;
  d.N = N;
  d.groups = N / 10;
  d.rho = rho;
  d.delta = 0.0;
  d.n_signals = 0;
  d.n_signal_groups = 0;
  return d;
}

LayerPartition random_contiguous(std::size_t N, std::size_t G, std::mt19937_64& rng) {
  std::vector<std::size_t> cuts;
  for (std::size_t j = 1; j < N; ++j) cuts.push_back(j);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(G - 1);
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(N);
  std::vector<IndexSet> groups;
  std::size_t start = 0;
  for (std::size_t c : cuts) {
    IndexSet g;
    for (std::size_t j = start; j < c; ++j) g.push_back(j);
    groups.push_back(g);
    start = c;
  }
  return LayerPartition(N, {LayerPartition::singleton(N).groups(0), groups});
}

// 1. e-BH round trip on outcomes of valid controlled procedures.
Verdict c1() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double levels[] = {0.05, 0.1, 0.2};
  int mismatches = 0, drawn = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    DetectionOutcome o;
    o.layer_size = 1 + rng() % 50;
    o.original_level = levels[rng() % 3];
    IndexSet all(o.layer_size);
    for (std::size_t g = 0; g < all.size(); ++g) all[g] = g;
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t r = rng() % (o.layer_size + 1);
    o.rejections.assign(all.begin(), all.begin() + static_cast<long>(r));
    std::sort(o.rejections.begin(), o.rejections.end());
    // v_hat uniform on [0, G], redrawn until the procedure's own guarantee
    // v_hat <= alpha0 |R| holds (no constraint when nothing is rejected).
    do {
      o.v_hat = static_cast<double>(o.layer_size) * u(rng);
      ++drawn;
    } while (r > 0 && o.v_hat > o.original_level * static_cast<double>(r));
    if (generalized_ebh(evalues_from_outcome(o), o.original_level) != o.rejections) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 1000 outcomes (" +
                               std::to_string(drawn) + " v_hat draws)"};
}

// 2. e-filter thresholds equal the brute-force coordinatewise minimum.
Verdict c2() {
  std::mt19937_64 rng(202);
  const double levels[] = {0.1, 0.2, 0.3, 0.5};
  int mismatches = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t N = 1 + rng() % 8;
    const std::size_t G2 = 1 + rng() % std::min<std::size_t>(4, N);
    const auto p = N == 1 ? LayerPartition(1, {{{0}}, {{0}}}) : random_contiguous(N, G2, rng);
    const std::vector<double> alphas{levels[rng() % 4], levels[rng() % 4]};
    EValueTable e;
    for (std::size_t m = 0; m < 2; ++m) {
      const std::size_t G = p.group_count(m);
      std::vector<double> v(G);
      for (auto& x : v) {
        const std::size_t k = rng() % (G + 2);
        x = (k == 0 || k > G) ? 0.0 : grid_threshold(G, alphas[m], k);
      }
      e.values.push_back(v);
    }
    const auto got = generalized_efilter(e, FilterLevels(alphas), p);
    if (got.thresholds != oracle::efilter_min_thresholds(e, alphas, p)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 500 instances"};
}

// 3. Pass bound over every e-filter run in this process.
Verdict c3() {
  // Extra load beyond whatever earlier criteria ran.
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t N = 2 + rng() % 60;
    const auto p = random_contiguous(N, 1 + rng() % (N - 1), rng);
    EValueTable e;
    std::vector<double> alphas;
    for (std::size_t m = 0; m < 2; ++m) {
      std::vector<double> v(p.group_count(m));
      for (auto& x : v) x = rng() % 2 ? 0.0 : 4.0 * N * u(rng);
      e.values.push_back(v);
      alphas.push_back(0.05 + 0.5 * u(rng));
    }
    generalized_efilter(e, FilterLevels(alphas), p);
  }
  const auto d = efilter_diagnostics();
  return {d.invocations > 0 && d.min_slack >= 0,
          std::to_string(d.invocations) + " runs, max passes " + std::to_string(d.max_passes) +
              ", min slack " + std::to_string(d.min_slack)};
}

// 4. Knockoff Gram identities.
Verdict c4() {
  std::mt19937_64 rng(404);
  double worst_gram = 0.0, worst_cross = 0.0, min_eig = kInfinity;
  for (int rep = 0; rep < 100; ++rep) {
    SimDesign d = null_design(80, 20, 0.1 * static_cast<double>(rng() % 9));
    d.groups = 2;
    const auto X = generate_dataset(d, 4000 + rep).data.design;
    const auto p = random_contiguous(20, 2 + rng() % 8, rng);
    const auto k = construct_group_knockoffs(X, p, 1);
    worst_gram = std::max(worst_gram,
                          (k.x_tilde.transpose() * k.x_tilde - k.gram).cwiseAbs().maxCoeff());
    worst_cross = std::max(
        worst_cross, (k.x.transpose() * k.x_tilde - (k.gram - k.s_matrix)).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(2 * k.gram - k.s_matrix);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  return {worst_gram <= kGramTol && worst_cross <= kGramTol && min_eig >= -kPsdTol,
          "max |X~'X~ - S| " + fmt("%.2e", worst_gram) + ", max |X'X~ - (S - D)| " +
              fmt("%.2e", worst_cross) + ", min eig(2S - D) " + fmt("%.2e", min_eig)};
}

// 5. Null symmetry of mirror statistics.
Verdict c5() {
  const auto d = null_design(400, 100, 0.5);
  const auto chol = block_cholesky(d);
  std::size_t pos = 0, nonzero = 0;
  for (int r = 0; r < 200; ++r) {
    const auto sim = generate_dataset(d, chol, derive_seed(505, r));
    const auto fit = ds_mirror_fit(sim.data, derive_seed(506, r));
    for (Eigen::Index j = 0; j < fit.w.size(); ++j) {
      if (fit.w(j) == 0.0) continue;
      ++nonzero;
      pos += fit.w(j) > 0.0;
    }
  }
  const double frac = nonzero ? static_cast<double>(pos) / static_cast<double>(nonzero) : 0.0;
  return {nonzero > 0 && frac >= kSymLow && frac <= kSymHigh,
          "positive fraction " + fmt("%.4f", frac) + " of " + std::to_string(nonzero) +
              " nonzero W"};
}

// 6. Scaled simulation: FDR at both layers and the power comparison.
Verdict c6() {
  ExperimentSettings st;
  st.alpha = 0.2;
  st.alpha0 = 0.1;
  st.ds_reps = 20;
  st.c_kn = 1.93;
  const auto res =
      run_experiment({desk_design()}, {"eds_gkf", "eds_gkf_ckn", "mkf_plus"}, st, 30, 606);
  const auto rows = summarize(res);
  bool ok = res.failures.empty();
  double p_ckn = 0.0, p_mkf = 0.0;
  std::ostringstream os;
  for (const auto& r : rows) {
    ok = ok && r.fdr <= st.alpha + kFdrSlack;
    os << r.method << "[L" << r.layer + 1 << "] fdr " << fmt("%.3f", r.fdr) << " pow "
       << fmt("%.3f", r.power) << "; ";
    if (r.layer == 0 && r.method == "eds_gkf_ckn") p_ckn = r.power;
    if (r.layer == 0 && r.method == "mkf_plus") p_mkf = r.power;
  }
  ok = ok && p_ckn >= p_mkf - kPowerSlack;
  os << "trials " << (rows.empty() ? 0 : rows.front().trials) << ", excluded "
     << res.failures.size();
  return {ok, os.str()};
}

// 7. Power collapse when alpha0 exceeds alpha.
Verdict c7() {
  SimDesign d;
  d.n = 400;
  d.N = 200;
  d.groups = 200;
  d.cov_blocks = 20;
  d.n_signals = 20;
  d.n_signal_groups = 200;
  d.delta = 6.0;
  d.rho = 0.5;
  d.layers = 1;
  const auto chol = block_cholesky(d);
  const double alpha = 0.1;
  const std::size_t trials = 20, reps = 20;
  std::vector<double> high, low;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto sim = generate_dataset(d, chol, derive_seed(707, t));
    for (double a0 : {2 * alpha, alpha / 2}) {
      auto cfg = eds_config(sim.partition, alpha, a0, reps, derive_seed(708, t));
      const auto rep = run_eds_filter(sim.data, cfg);
      const double pw =
          evaluate_selection(rep.selection.selected_features, sim.truth, sim.partition)[0].power;
      (a0 > alpha ? high : low).push_back(pw);
    }
  }
  const double ph = mean_of(high), pl = mean_of(low);
  return {ph < 0.05 && pl >= 0.5, "power at alpha0=2alpha " + fmt("%.3f", ph) +
                                      ", at alpha0=alpha/2 " + fmt("%.3f", pl)};
}

// 8. DFEFP stability with R=200.
Verdict c8() {
  const auto d = desk_design();
  const auto chol = block_cholesky(d);
  int same = 0;
  const int datasets = 20;
  for (int s = 0; s < datasets; ++s) {
    const auto sim = generate_dataset(d, chol, derive_seed(808, s));
    auto a = eds_gkf_config(sim.partition, 0.2, 0.1, 200, derive_seed(809, s));
    auto b = eds_gkf_config(sim.partition, 0.2, 0.1, 200, derive_seed(810, s));
    const auto ra = run_dfefp(sim.data, a);
    const auto rb = run_dfefp(sim.data, b);
    same += ra.selection.selected_features == rb.selection.selected_features;
  }
  const double rate = static_cast<double>(same) / datasets;
  return {rate >= kStableRate,
          std::to_string(same) + "/" + std::to_string(datasets) + " identical selections"};
}

// 9. Relaxed e-value budgets under the global null. Two original levels:
// at 0.1 knockoff+ cannot reject with these group counts, 0.3 exercises it.
Verdict c9() {
  const auto d = null_design(400, 100, 0.5);
  const auto chol = block_cholesky(d);
  const int reps = 300;
  const double levels[] = {0.1, 0.3};
  std::vector<std::vector<double>> sums(8);  // [level][ds L1, ds L2, kn L1, kn L2]
  for (int r = 0; r < reps; ++r) {
    const auto sim = generate_dataset(d, chol, derive_seed(909, r));
    const auto fit = ds_mirror_fit(sim.data, derive_seed(910, r));
    for (std::size_t m = 0; m < 2; ++m) {
      const auto kd = construct_group_knockoffs(sim.data.design, sim.partition, m);
      const auto stats = knockoff_statistics(kd, sim.data.response, sim.partition, m);
      const double G = static_cast<double>(sim.partition.group_count(m));
      for (int l = 0; l < 2; ++l) {
        const auto ds = ds_detect_from_fit(fit, sim.partition, m, levels[l], GroupStatMode::mean);
        const auto kn = knockoff_detect_from_stats(stats, levels[l]);
        double sd = 0.0, sk = 0.0;
        for (double e : ds.evalues) sd += e;
        for (double e : kn.evalues) sk += e;
        sums[4 * l + m].push_back(sd / G);
        sums[4 * l + 2 + m].push_back(sk / G);
      }
    }
  }
  const char* names[] = {"DS L1", "DS L2", "knockoff L1", "knockoff L2"};
  bool ok = true;
  std::ostringstream os;
  for (int k = 0; k < 8; ++k) {
    const double m = mean_of(sums[k]), se = se_of(sums[k]);
    const bool fine = m <= 1.0 + kBudgetSe * se;
    ok = ok && fine;
    if (k % 4 == 0) os << "alpha0 " << levels[k / 4] << ": ";
    os << names[k % 4] << " " << fmt("%.3f", m) << "+-" << fmt("%.3f", se) << (fine ? "" : " over")
       << (k == 7 ? "" : k % 4 == 3 ? " | " : ", ");
  }
  return {ok, os.str()};
}

// 10. Threshold scans against the piecewise-constant real-line oracle.
Verdict c10() {
  std::mt19937_64 rng(1010);
  std::normal_distribution<double> z;
  int mismatches = 0;
  for (int offset = 0; offset <= 1; ++offset) {
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t G = 1 + rng() % 40;
      std::vector<double> T(G);
      const bool ties = rep % 2 == 0;
      for (auto& t : T) {
        t = ties ? static_cast<double>(static_cast<int>(rng() % 11) - 4) : z(rng) + 0.8;
        if (rng() % 7 == 0) t = 0.0;
      }
      const double alpha = 0.05 + 0.05 * static_cast<double>(rep % 10);
      const auto got = offset ? knockoff_plus_threshold(T, alpha) : ds_threshold(T, alpha);
      const auto want = oracle::real_line_threshold(T, alpha, offset);
      const bool same_t = got.zero_plus == want.zero_plus &&
                          (got.zero_plus || got.threshold == want.t);
      if (got.selected != want.selected || !same_t) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 400 vectors"};
}

// 11. CLI determinism and file round trips.
Verdict c11() {
  TempDir dir;
  std::vector<std::string> problems;
  auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    if (code != 0) problems.push_back("exit " + std::to_string(code) + ": " + err.str());
    return out.str();
  };

  SimDesign d;
  d.n = 200;
  d.N = 40;
  d.groups = 20;
  d.rho = 0.3;
  d.delta = 8.0;
  d.n_signals = 12;
  d.n_signal_groups = 10;
  const auto sim = generate_dataset(d, 1111);
  write_dataset_csv(dir.file("data.csv"), sim.data);
  write_group_map(dir.file("groups.csv"), sim.partition);
  const auto back = load_dataset(dir.file("data.csv"), dir.file("groups.csv"));
  if (!(back.data.design == sim.data.design) || !(back.data.response == sim.data.response))
    problems.push_back("dataset round trip changed values");
  for (std::size_t m = 0; m < 2; ++m)
    if (back.partition.groups(m) != sim.partition.groups(m))
      problems.push_back("group map round trip changed layer " + std::to_string(m + 1));

  for (const char* tag : {"a", "b"}) {
    run({"analyze", "--data", dir.file("data.csv"), "--groups", dir.file("groups.csv"), "--reps",
         "5", "--seed", "3", "--out", dir.file(std::string("an_") + tag)});
    run({"filter", "--evalues", dir.file("an_a/evalues.csv"), "--groups", dir.file("groups.csv"),
         "--alpha", "0.3", "--format", "csv", "--out", dir.file(std::string("fi_") + tag)});
    run({"simulate", "--config",
         dir.write("sim.json", R"({"seed": 5, "simulate": {"design": {"n": 120, "N": 20,
           "groups": 4, "n_signals": 4, "n_signal_groups": 2}, "methods": ["eds_gkf", "ds",
           "mds"], "ds_reps": 2, "mds_reps": 2, "trials": 2}})"),
         "--out", dir.file(std::string("si_") + tag)});
  }
  const std::vector<std::string> files{"an_%/selection.json", "an_%/evalues.csv",
                                       "fi_%/selection.csv",  "si_%/results.csv",
                                       "si_%/summary.csv",    "si_%/summary.json"};
  for (auto f : files) {
    auto a = f, b = f;
    a.replace(a.find('%'), 1, "a");
    b.replace(b.find('%'), 1, "b");
    const auto ta = slurp(dir.file(a));
    if (ta.empty() || ta != slurp(dir.file(b))) problems.push_back(f + " differs or is empty");
  }
  const auto ev = read_evalues_csv(dir.file("an_a/evalues.csv"), back.partition);
  write_evalues_csv(dir.file("ev2.csv"), ev, back.partition);
  if (slurp(dir.file("ev2.csv")) != slurp(dir.file("an_a/evalues.csv")))
    problems.push_back("e-value table round trip not byte-identical");

  std::string detail = problems.empty() ? "6 output files byte-identical, round trips exact"
                                        : problems.front();
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{{1, 5, c1},    {2, 30, c2},   {3, 1e9, c3},   {4, 10, c4},
                                   {5, 120, c5},  {6, 900, c6},  {7, 300, c7},   {8, 1200, c8},
                                   {9, 300, c9},  {10, 5, c10},  {11, 10, c11}};
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only.push_back(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: mlfdr_acceptance [--only N]...\n";
      return 2;
    }
  }
  reset_efilter_diagnostics();
  bool all_pass = true;
  // Criterion 3 inspects every e-filter run, so it goes last.
  std::vector<Criterion> order = all;
  std::stable_partition(order.begin(), order.end(), [](const Criterion& c) { return c.id != 3; });
  std::vector<std::string> lines(all.size());
  for (const auto& c : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = v.pass && in_time;
    all_pass = all_pass && pass;
    std::ostringstream line;
    line << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << " (" << v.detail
         << ") [" << fmt("%.1f", secs) << " s"
         << (c.limit_seconds < 1e8 ? ", limit " + fmt("%.0f", c.limit_seconds) + " s" : "")
         << (in_time ? "" : ", over time") << "]";
    std::cout << line.str() << std::endl;
  }
  return all_pass ? 0 : 1;
}
