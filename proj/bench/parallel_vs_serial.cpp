// Serial reference vs OpenMP kernels: tuning grid and bench replications.

#include "minbal/bench.hpp"
#include "minbal/simgen.hpp"
#include "minbal/tuning.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace minbal;

namespace {

struct TuneFixture {
    Dataset data;
    BasisMatrix basis;
    BalanceTarget target;
    TuneConfig config;

    explicit TuneFixture(int n)
        : data(gen_kang_schafer(n, Overlap::Bad, 1)),
          basis(expand_basis(data.x, BasisConfig{}, data.covariate_names)),
          target(target_profile(basis, data.z, TargetKind::PopulationMean)) {
        config.grid = default_grid(basis.balance_dimension(), 21);
        config.seed = 7;
    }
    TuneInput input() const { return TuneInput{basis, data.z, target}; }
};

BenchSpec bench_spec(int replications) {
    BenchSpec spec;
    spec.n = 500;
    spec.replications = replications;
    spec.modes = {BalanceMode::Exact, BalanceMode::Tuned};
    spec.grid_points = 11;
    return spec;
}

void BM_TuneSerial(benchmark::State& state) {
    const TuneFixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(tune_delta_serial(f.input(), f.config));
}

void BM_TuneParallel(benchmark::State& state) {
    const TuneFixture f(static_cast<int>(state.range(0)));
    omp_set_num_threads(static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(tune_delta(f.input(), f.config));
}

void BM_BenchSerial(benchmark::State& state) {
    const BenchSpec spec = bench_spec(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(run_bench_serial(spec));
}

void BM_BenchParallel(benchmark::State& state) {
    const BenchSpec spec = bench_spec(static_cast<int>(state.range(0)));
    const int jobs = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(run_bench(spec, jobs));
}

} // namespace

BENCHMARK(BM_TuneSerial)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TuneParallel)->ArgsProduct({{1000, 4000}, {1, 2, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BenchSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BenchParallel)->ArgsProduct({{8}, {1, 2, 4}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
