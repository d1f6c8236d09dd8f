// Factorized parallel kernels against the dense serial reference.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "rsmud/analysis.hpp"
#include "rsmud/harness.hpp"
#include "rsmud/kernels.hpp"

namespace {

using namespace rsmud;

std::vector<double> ramp(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 / static_cast<double>(1 + (i * 7919) % 101);
    return v;
}

void BM_TransitionSumFactorized(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const TrafficModel m{k, 0.2, 0.8, 0};
    const auto base = ramp(std::size_t{1} << k);
    std::vector<double> v;
    for (auto _ : state) {
        v = base;
        kernels::transition_sum(m, v);
        benchmark::DoNotOptimize(v.data());
    }
}

void BM_TransitionSumDense(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const TrafficModel m{k, 0.2, 0.8, 0};
    const auto base = ramp(std::size_t{1} << k);
    for (auto _ : state) benchmark::DoNotOptimize(reference::transition_sum(m, base));
}

void BM_TransitionMaxFactorized(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const TrafficModel m{k, 0.2, 0.8, 0};
    const auto base = ramp(std::size_t{1} << k);
    std::vector<double> v;
    std::vector<Mask> arg(base.size());
    for (auto _ : state) {
        v = base;
        kernels::transition_max(m, v, arg);
        benchmark::DoNotOptimize(v.data());
    }
}

void BM_TransitionMaxDense(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const TrafficModel m{k, 0.2, 0.8, 0};
    const auto base = ramp(std::size_t{1} << k);
    std::vector<double> out(base.size());
    std::vector<Mask> arg(base.size());
    for (auto _ : state) {
        reference::transition_max(m, base, out, arg);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_SimulateFig5Point(benchmark::State& state) {
    set_thread_count(static_cast<int>(state.range(0)));
    ExperimentConfig cfg = preset("fig5");
    cfg.ebn0_db = {6.0};
    cfg.trials = 2000;
    cfg.batch = 2000;
    for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg));
    set_thread_count(0);
}

void BM_SemianalyticFig6Point(benchmark::State& state) {
    set_thread_count(static_cast<int>(state.range(0)));
    const ExperimentConfig cfg = preset("fig6");
    const Scene scene = make_scene(cfg, 0.2, 3, 8.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(semianalytic_dynamic_bound(scene.universe, scene.traffic, scene.channel, 3, 200, 2,
                                                            PepMode::map_identities, 7));
    set_thread_count(0);
}

}  // namespace

BENCHMARK(BM_TransitionSumFactorized)->DenseRange(4, 14, 2);
BENCHMARK(BM_TransitionSumDense)->DenseRange(4, 12, 2);
BENCHMARK(BM_TransitionMaxFactorized)->DenseRange(4, 14, 2);
BENCHMARK(BM_TransitionMaxDense)->DenseRange(4, 12, 2);
BENCHMARK(BM_SimulateFig5Point)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SemianalyticFig6Point)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
