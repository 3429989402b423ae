#include "mstate/block.hpp"
#include "mstate/mgf.hpp"
#include "mstate/model_io.hpp"
#include "mstate/moments.hpp"
#include "mstate/montecarlo.hpp"

#include <benchmark/benchmark.h>

#ifndef MSTATE_MODEL_DIR
#define MSTATE_MODEL_DIR "models"
#endif

namespace {

const mstate::LoadedModel& model() {
    static const auto m = mstate::load_model(std::filesystem::path(MSTATE_MODEL_DIR) / "disability_g82m.json");
    return m;
}

void monte_carlo(benchmark::State& state, bool parallel) {
    const auto& m = model();
    const auto paths = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto samples = mstate::sample_present_values(m.model, m.payments, 0.0, 70.0, 0, paths, 1, mstate::kDefaultStep,
                                                     parallel);
        benchmark::DoNotOptimize(samples.values.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void mc_serial(benchmark::State& state) { monte_carlo(state, false); }
void mc_parallel(benchmark::State& state) { monte_carlo(state, true); }

void mgf_residual(benchmark::State& state, bool parallel) {
    const auto& m = model();
    const mstate::Vector theta{{0.3, 0.2, 0.4}};
    std::vector<double> s;
    for (int q = 1; q <= state.range(0); ++q) s.push_back(q + 0.5);
    for (auto _ : state) {
        auto r = mstate::mgf_pde_residual(m.model, m.payments, theta, s, 70.0, 1.0 / 64.0,
                                          mstate::Scheme::MidpointExp, 1e-4, parallel);
        benchmark::DoNotOptimize(r.data());
    }
}

void residual_serial(benchmark::State& state) { mgf_residual(state, false); }
void residual_parallel(benchmark::State& state) { mgf_residual(state, true); }

void moments_ode(benchmark::State& state) {
    const auto& m = model();
    const mstate::MultiIndex k{2, 2, 2};
    for (auto _ : state) {
        auto g = mstate::partial_moments(m.model, m.payments, k, 70.0);
        benchmark::DoNotOptimize(g.partial(0, 1).data());
    }
}

void moments_block(benchmark::State& state) {
    const auto& m = model();
    const mstate::MultiIndex k{2, 2, 2};
    for (auto _ : state) {
        auto g = mstate::block_moment_curves(m.model, m.payments, k, 70.0);
        benchmark::DoNotOptimize(g.partial(0, 1).data());
    }
}

} // namespace

BENCHMARK(mc_serial)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(mc_parallel)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(residual_serial)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(residual_parallel)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(moments_ode)->Unit(benchmark::kMillisecond);
BENCHMARK(moments_block)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
