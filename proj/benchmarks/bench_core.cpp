#include <benchmark/benchmark.h>

#include "lif/firstpassage.hpp"
#include "lif/fpe.hpp"
#include "lif/mc.hpp"
#include "lif/subdensity.hpp"

using namespace lif;

static void BM_McPath(benchmark::State& state) {
    mc::PathConfig cfg;
    cfg.t_end = 2.0;
    cfg.substep = 1e-3;
    cfg.seed = 1;
    cfg.n_paths = 1;
    std::uint64_t idx = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mc::simulate_path(idx++, cfg));
    }
}
BENCHMARK(BM_McPath);

static void BM_ImplicitStep(benchmark::State& state) {
    Grid1D g = Grid1D::truncated(6.0, 1.0 / state.range(0));
    auto op = fpe::build_operator(g, fpe::Mode::flux_shift);
    fpe::ImplicitStepper stepper(op, 1e-4);
    std::vector<double> f(op.n(), 1.0 / 7.0);
    for (auto _ : state) {
        stepper.advance(f);
        benchmark::DoNotOptimize(f.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ImplicitStep)->Arg(100)->Arg(200)->Arg(400)->Complexity();

static void BM_VolterraMarch(benchmark::State& state) {
    TimeGrid grid = TimeGrid::uniform(1.0, 1.0 / state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(fp::solve_M(grid));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_VolterraMarch)->Arg(1000)->Arg(2000)->Arg(4000)->Complexity();

static void BM_SeriesRow(benchmark::State& state) {
    Grid1D g = Grid1D::truncated(6.0, 1.0 / 100.0);
    TimeGrid march = TimeGrid::uniform(1.0, 1e-3);
    auto f0 = sub::f0_pde(g, march, 1e-3);
    auto fT1 = fp::fT1_from_M(fp::solve_M(march));
    auto ladder = fp::build_ladder(fT1);
    auto n_series = fp::firing_rate(ladder);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sub::convolve_row(f0, n_series, 1.0));
    }
}
BENCHMARK(BM_SeriesRow);

BENCHMARK_MAIN();
