// Serial loops against their OpenMP versions. Run with OMP_NUM_THREADS set
// to the core count; on one core the two should be within noise.

#include <benchmark/benchmark.h>

#include "labmatch/equilibrium.hpp"
#include "labmatch/experiments.hpp"
#include "labmatch/inference.hpp"

using namespace labmatch;

namespace {

Exec mode(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

void BM_BuildBlock(benchmark::State& st) {
    EconomyConfig c;
    c.n_workers = c.n_firms = static_cast<int>(st.range(1));
    c.capital_support = {0.5, 1.0, 1.5};
    c.capital_mass = {0.3, 0.3, 0.4};
    const MatchSettings s = MatchSettings::from(c, 1);
    const auto split = split_from_mask(6, c.capital_mass);
    for (auto _ : st) benchmark::DoNotOptimize(build_block(split, 2.0, s, mode(st)));
}

void BM_BestResponse(benchmark::State& st) {
    EconomyConfig c;
    c.n_workers = c.n_firms = static_cast<int>(st.range(1));
    c.covariate_dim = 3;
    c.theta2 = {-0.75, 0.25, 0.5};
    c.beta = 2.0;
    BlockCache cache(MatchSettings::from(c, 1));
    const GameSetup g = make_game(c, draw_workers(c, 1, 0).covariates, cache);
    for (auto _ : st) benchmark::DoNotOptimize(best_response(0.4, g, mode(st)));
}

void BM_Bootstrap(benchmark::State& st) {
    const EconomyConfig c = table_economy(table_specs()[0], 1.0, static_cast<int>(st.range(1)));
    BlockCache cache(MatchSettings::from(c, 1));
    const SimulatedData sd = simulate_data(c, cache, 1, 0);
    BootstrapOptions bo;
    bo.B = 32;
    bo.max_fail_share = 1.0;
    for (auto _ : st)
        benchmark::DoNotOptimize(bootstrap_theta_ci(c.theta(), 1.0, sd.data.X, c, cache, bo, 1, 0, mode(st)));
}

void BM_McTest(benchmark::State& st) {
    const EconomyConfig c = table_economy(table_specs()[0], 2.0, static_cast<int>(st.range(1)));
    BlockCache cache(MatchSettings::from(c, 1));
    const SimulatedData sd = simulate_data(c, cache, 1, 0);
    const Contingency obs = sd.data.table(2);
    for (auto _ : st)
        benchmark::DoNotOptimize(mc_test(obs, sd.data.n_high(), sd.split, 2.0, c, 99, 0.05, 1, mode(st)));
}

} // namespace

BENCHMARK(BM_BuildBlock)->ArgNames({"parallel", "n"})->ArgsProduct({{0, 1}, {250, 1000}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BestResponse)->ArgNames({"parallel", "n"})->ArgsProduct({{0, 1}, {1000, 10000}});
BENCHMARK(BM_Bootstrap)->ArgNames({"parallel", "n"})->ArgsProduct({{0, 1}, {250}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_McTest)->ArgNames({"parallel", "n"})->ArgsProduct({{0, 1}, {250}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
