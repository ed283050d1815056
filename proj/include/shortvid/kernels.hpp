#pragma once

// Data-parallel kernels. Every kernel has a serial reference implementation and
// an OpenMP implementation that must produce bit-identical results; the serial
// versions are what the tests compare against.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

namespace shortvid::kernels {

enum class Backend { serial, openmp };

/// Number of worker threads the OpenMP backend will use.
int max_threads();

/// out[i] = fn(i) for i in [0, n). `fn` must be safe to call concurrently.
template <class Fn>
auto parallel_map(std::size_t n, Fn&& fn, Backend backend = Backend::openmp)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<R> out(n);
    if (backend == Backend::serial) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    const auto count = static_cast<std::int64_t>(n);
    // Exceptions may not leave a parallel region; keep the first and rethrow.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(shortvid_parallel_map_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

/// Strict "a is preferred over b" among subsets of equal cost: fewer members
/// first, then the lexicographically smaller ascending index list.
bool subset_tie_preferred(std::uint64_t a, std::uint64_t b);

struct SubsetOptimum {
    std::uint64_t mask = 0;
    double cost = 0.0;
};

/// Exhaustive minimisation of `cost(mask)` over every nonempty subset of `k`
/// elements (k <= 40). Ties resolved with subset_tie_preferred.
SubsetOptimum min_subset_serial(int k, const std::function<double(std::uint64_t)>& cost);
SubsetOptimum min_subset_omp(int k, const std::function<double(std::uint64_t)>& cost);

struct KnapsackSolution {
    std::vector<std::size_t> chosen; ///< ascending indices
    double value = 0.0;
};

/// Exact 0/1 knapsack over integer weights. An item is taken only when it
/// strictly improves the value, so both backends choose the same set.
KnapsackSolution knapsack_dp_serial(std::span<const std::int64_t> weights, std::span<const double> values,
                                    std::int64_t capacity);
KnapsackSolution knapsack_dp_omp(std::span<const std::int64_t> weights, std::span<const double> values,
                                 std::int64_t capacity);

/// Index of the nearest center (squared Euclidean, lowest index on ties) for
/// each row-major point of dimension `dim`.
std::vector<std::size_t> assign_nearest_serial(std::span<const double> points, std::span<const double> centers,
                                               std::size_t dim);
std::vector<std::size_t> assign_nearest_omp(std::span<const double> points, std::span<const double> centers,
                                            std::size_t dim);

} // namespace shortvid::kernels
