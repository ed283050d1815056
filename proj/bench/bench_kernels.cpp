// Serial reference vs OpenMP backend for each kernel.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "shortvid/kernels.hpp"
#include "shortvid/rng.hpp"

using namespace shortvid;
using kernels::Backend;

namespace {

Backend backend_of(const benchmark::State& st) { return st.range(0) ? Backend::openmp : Backend::serial; }

void label(benchmark::State& st) { st.SetLabel(st.range(0) ? "openmp" : "serial"); }

// Facility-location style cost over 2^k subsets.
void BM_MinSubset(benchmark::State& st) {
    const int k = static_cast<int>(st.range(1));
    Rng rng(1);
    std::vector<double> r(static_cast<std::size_t>(k * k)), d(static_cast<std::size_t>(k));
    for (auto& x : r) x = uniform01(rng);
    for (auto& x : d) x = uniform01(rng);
    const auto cost = [&](std::uint64_t m) {
        double c = 0.0;
        for (int j = 0; j < k; ++j)
            if (m >> j & 1) c += d[j];
        for (int i = 0; i < k; ++i) {
            double best = INFINITY;
            for (int j = 0; j < k; ++j)
                if (m >> j & 1) best = std::min(best, r[i * k + j]);
            c += best / k;
        }
        return c;
    };
    for (auto _ : st)
        benchmark::DoNotOptimize(st.range(0) ? kernels::min_subset_omp(k, cost) : kernels::min_subset_serial(k, cost));
    label(st);
}
BENCHMARK(BM_MinSubset)->ArgsProduct({{0, 1}, {14, 18}})->Unit(benchmark::kMillisecond);

void BM_KnapsackDp(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(1));
    Rng rng(2);
    std::vector<std::int64_t> w(n);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 1 + static_cast<std::int64_t>(uniform_index(rng, 200));
        v[i] = uniform(rng, 1.0, 100.0);
    }
    const std::int64_t cap = static_cast<std::int64_t>(n) * 25;
    for (auto _ : st)
        benchmark::DoNotOptimize(st.range(0) ? kernels::knapsack_dp_omp(w, v, cap) : kernels::knapsack_dp_serial(w, v, cap));
    label(st);
}
BENCHMARK(BM_KnapsackDp)->ArgsProduct({{0, 1}, {500, 2000}})->Unit(benchmark::kMillisecond);

void BM_AssignNearest(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(1));
    const std::size_t dim = 8, k = 32;
    Rng rng(3);
    std::vector<double> pts(n * dim), ctr(k * dim);
    for (auto& x : pts) x = standard_normal(rng);
    for (auto& x : ctr) x = standard_normal(rng);
    for (auto _ : st)
        benchmark::DoNotOptimize(st.range(0) ? kernels::assign_nearest_omp(pts, ctr, dim)
                                             : kernels::assign_nearest_serial(pts, ctr, dim));
    label(st);
}
BENCHMARK(BM_AssignNearest)->ArgsProduct({{0, 1}, {100000, 1000000}})->Unit(benchmark::kMillisecond);

// A CPU-bound per-index task, standing in for one simulated user.
void BM_ParallelMap(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(1));
    const auto work = [](std::size_t i) {
        Rng rng(derive_seed(7, i));
        double s = 0.0;
        for (int k = 0; k < 2000; ++k) s += lognormal(rng, 0.0, 0.5);
        return s;
    };
    for (auto _ : st) benchmark::DoNotOptimize(kernels::parallel_map(n, work, backend_of(st)));
    label(st);
}
BENCHMARK(BM_ParallelMap)->ArgsProduct({{0, 1}, {256, 4096}})->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
