// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "xfit/dgp.hpp"
#include "xfit/simulation.hpp"

namespace {

void BM_OracleSerial(benchmark::State& state) {
    const xfit::DgpSpec spec;
    const auto draws = static_cast<std::uint64_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(xfit::oracle_truth_serial(spec, draws, {7, 0}));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_OracleParallel(benchmark::State& state) {
    const xfit::DgpSpec spec;
    const auto draws = static_cast<std::uint64_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(xfit::oracle_truth(spec, draws, {7, 0}));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

xfit::SimulationConfig small_study() {
    xfit::SimulationConfig c;
    c.dgp.n = 300;
    c.reps = 8;
    c.learners.candidates = {xfit::LearnerSpec::logistic(), xfit::LearnerSpec::constant()};
    return c;
}

void BM_MonteCarloSerial(benchmark::State& state) {
    const auto config = small_study();
    const auto truth = xfit::compute_truth(config.dgp);
    for (auto _ : state) {
        benchmark::DoNotOptimize(xfit::run_monte_carlo_serial(config, truth));
    }
}

void BM_MonteCarloParallel(benchmark::State& state) {
    const auto config = small_study();
    const auto truth = xfit::compute_truth(config.dgp);
    for (auto _ : state) {
        benchmark::DoNotOptimize(xfit::run_monte_carlo(config, truth));
    }
}

}  // namespace

BENCHMARK(BM_OracleSerial)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleParallel)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
