#include "qsync/meanfield.hpp"
#include "qsync/spectra.hpp"
#include "qsync/sync_measures.hpp"
#include "qsync/trajectories.hpp"

#include <benchmark/benchmark.h>

using namespace qsync;

namespace {

SystemParams generic() {
    SystemParams p;
    p.g_AB = 0.3;
    p.g_tilde = 0.1;
    p.omega_A = 0.2;
    return p;
}

void BM_build_two_osc(benchmark::State& state) {
    const FockSpace s(static_cast<int>(state.range(0)), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_two_osc(generic(), s));
    }
}
BENCHMARK(BM_build_two_osc)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_steady(benchmark::State& state) {
    const FockSpace s(static_cast<int>(state.range(0)), 2);
    const Superoperator l = build_two_osc(generic(), s);
    SteadyOptions o;
    o.method = static_cast<SteadyMethod>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_steady(l, o));
    }
    state.SetLabel(to_string(o.method));
}
BENCHMARK(BM_steady)
    ->Args({6, static_cast<int>(SteadyMethod::dense)})
    ->Args({10, static_cast<int>(SteadyMethod::direct)})
    ->Args({10, static_cast<int>(SteadyMethod::krylov)})
    ->Args({20, static_cast<int>(SteadyMethod::krylov)})
    ->Unit(benchmark::kMillisecond);

void BM_p2_relative(benchmark::State& state) {
    const DensityMatrix rho = solve_steady(build_two_osc(generic(), FockSpace(10, 2)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(p2_relative(rho, static_cast<int>(state.range(0))));
    }
}
BENCHMARK(BM_p2_relative)->Arg(360)->Arg(720)->Unit(benchmark::kMicrosecond);

void BM_correlation(benchmark::State& state) {
    SystemParams p = generic();
    p.omega_A = 0.0;
    const Superoperator l = build_two_osc(p, FockSpace(8, 2));
    const DensityMatrix rho = solve_steady(l);
    for (auto _ : state) {
        benchmark::DoNotOptimize(correlation(l, rho, CorrelationKind::AA));
    }
}
BENCHMARK(BM_correlation)->Unit(benchmark::kMillisecond);

void BM_meanfield_integrate(benchmark::State& state) {
    const MFModel m = two_oscillator_model(with_pinned_gain(generic()));
    const MFState a0{Complex(1.0, 0.0), Complex(0.0, 1.0)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate(m, a0));
    }
}
BENCHMARK(BM_meanfield_integrate)->Unit(benchmark::kMillisecond);

void BM_trajectory(benchmark::State& state) {
    const FockSpace s(static_cast<int>(state.range(0)), 2);
    TrajectoryOptions o;
    o.t_end = 0.1;
    o.dt = 1e-3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate(generic(), s, o));
    }
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_trajectory)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
