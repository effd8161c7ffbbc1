// Serial reference kernels against their OpenMP counterparts.

#include "clpt/expansions.hpp"
#include "clpt/samplers.hpp"
#include "clpt/stability.hpp"

#include <benchmark/benchmark.h>

using namespace clpt;

namespace {

const ControlProblem& problem1q() {
    static const ControlProblem p = build_single_qubit_problem();
    return p;
}

void BM_CubicKernelSerial(benchmark::State& st) {
    const auto g = rotating_frame_grid(problem1q(), 2.0, static_cast<int>(st.range(0)), 3);
    for (auto _ : st) benchmark::DoNotOptimize(dyson_cubic_kernel_serial(g));
}
void BM_CubicKernelParallel(benchmark::State& st) {
    const auto g = rotating_frame_grid(problem1q(), 2.0, static_cast<int>(st.range(0)), 3);
    for (auto _ : st) benchmark::DoNotOptimize(dyson_cubic_kernel(g));
}
BENCHMARK(BM_CubicKernelSerial)->Arg(16)->Arg(32);
BENCHMARK(BM_CubicKernelParallel)->Arg(16)->Arg(32);

void BM_HessianSerial(benchmark::State& st) {
    const Protocol c = s_delta_cell_average(2.52, 0.77, static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(taylor_hessian_serial(problem1q(), c));
}
void BM_HessianParallel(benchmark::State& st) {
    const Protocol c = s_delta_cell_average(2.52, 0.77, static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(taylor_coefficients_at(problem1q(), c, 2));
}
BENCHMARK(BM_HessianSerial)->Arg(32)->Arg(64);
BENCHMARK(BM_HessianParallel)->Arg(32)->Arg(64);

void BM_SdEnsembleSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(sd_ensemble_serial(problem1q(), 2.0, 200, 8, 1));
}
void BM_SdEnsembleParallel(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(sd_ensemble(problem1q(), 2.0, 200, 8, 1));
}
BENCHMARK(BM_SdEnsembleSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SdEnsembleParallel)->Unit(benchmark::kMillisecond);

LmcConfig short_lmc() {
    LmcConfig c;
    c.T = 2.6;
    c.max_relax_iterations = 2000;
    c.stride = 50;
    c.samples = 10;
    return c;
}
void BM_LmcEnsembleSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(lmc_ensemble_serial(problem1q(), short_lmc(), 4, 1));
}
void BM_LmcEnsembleParallel(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(lmc_ensemble(problem1q(), short_lmc(), 4, 1));
}
BENCHMARK(BM_LmcEnsembleSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LmcEnsembleParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
