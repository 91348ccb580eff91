// Serial reference against the OpenMP kernels on the same inputs.

#include <random>

#include <benchmark/benchmark.h>

#include "mcpscope/analytics.hpp"
#include "mcpscope/kernels/kmeans.hpp"

namespace {

using namespace mcpscope;

kernels::Points blobs(int n, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    kernels::Points x(n, dim);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) x(i, d) = static_cast<double>((i % 16 == d % 16) ? 3 : 0) + noise(rng);
    }
    return x;
}

analytics::TimeSeries share_curve() {
    analytics::TimeSeries ts;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int t = 0; t < 16; ++t) {
        ts.t.push_back(t);
        ts.y.push_back(0.6 - 0.4 * std::exp(-0.15 * t) + noise(rng));
        ts.weights.push_back(1000.0 + 50.0 * t);
    }
    return ts;
}

void BM_KMeans(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
    const auto x = blobs(4000, 64, 1);
    kernels::KMeansOptions opt;
    opt.k = 40;
    opt.n_init = 2;
    opt.max_iter = 50;
    opt.exec = exec;
    for (auto _ : state) benchmark::DoNotOptimize(kernels::kmeans(x, opt).inertia);
    state.SetLabel(exec == kernels::Exec::serial ? "serial" : "parallel");
}
BENCHMARK(BM_KMeans)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Bootstrap(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
    const auto ts = share_curve();
    analytics::BootstrapOptions b;
    b.n_boot = 500;
    b.exec = exec;
    for (auto _ : state) {
        benchmark::DoNotOptimize(analytics::bootstrap_ci(ts, analytics::Model::asymptotic, b).replicates.size());
    }
    state.SetLabel(exec == kernels::Exec::serial ? "serial" : "parallel");
}
BENCHMARK(BM_Bootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
