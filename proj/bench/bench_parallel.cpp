// Serial vs OpenMP timings for the three parallel kernels.
// Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "mlfdr/pipelines.hpp"
#include "mlfdr/regression.hpp"
#include "mlfdr/simlab.hpp"

namespace {

using namespace mlfdr;

ExecutionPolicy policy_of(const benchmark::State& s) {
  return s.range(0) ? ExecutionPolicy::parallel : ExecutionPolicy::serial;
}

SimDesign bench_design() {
  SimDesign d;
  d.n = 400;
  d.N = 150;
  d.groups = 15;
  d.n_signals = 12;
  d.n_signal_groups = 4;
  d.delta = 5.0;
  d.rho = 0.5;
  return d;
}

void BM_LassoCv(benchmark::State& state) {
  const auto sim = generate_dataset(bench_design(), 1);
  for (auto _ : state) {
    auto cv = lasso_cv(sim.data.design, sim.data.response, 10, {}, 2, {}, policy_of(state));
    benchmark::DoNotOptimize(cv.lambda_star);
  }
}

void BM_Dfefp(benchmark::State& state) {
  const auto sim = generate_dataset(bench_design(), 3);
  auto cfg = eds_gkf_config(sim.partition, 0.2, 0.1, 8, 4);
  cfg.policy = policy_of(state);
  for (auto _ : state) {
    auto rep = run_dfefp(sim.data, cfg);
    benchmark::DoNotOptimize(rep.selection.selected_features.size());
  }
}

void BM_Experiment(benchmark::State& state) {
  ExperimentSettings st;
  st.ds_reps = 2;
  st.mds_reps = 2;
  st.policy = policy_of(state);
  auto d = bench_design();
  d.n = 200;
  d.N = 60;
  d.groups = 6;
  d.n_signal_groups = 3;
  for (auto _ : state) {
    auto res = run_experiment({d}, {"eds_gkf", "mkf_plus"}, st, 4, 5);
    benchmark::DoNotOptimize(res.records.size());
  }
}

}  // namespace

BENCHMARK(BM_LassoCv)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Dfefp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Experiment)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
