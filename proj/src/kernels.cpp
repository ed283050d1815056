#include "shortvid/kernels.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <stdexcept>

#include <omp.h>

#include "shortvid/error.hpp"

namespace shortvid::kernels {

int max_threads() { return omp_get_max_threads(); }

bool subset_tie_preferred(std::uint64_t a, std::uint64_t b) {
    const int pa = std::popcount(a);
    const int pb = std::popcount(b);
    if (pa != pb) return pa < pb;
    const std::uint64_t diff = a ^ b;
    if (diff == 0) return false;
    const std::uint64_t lowest = diff & (~diff + 1);
    return (a & lowest) != 0;
}

namespace {

bool better(const SubsetOptimum& cand, const SubsetOptimum& incumbent) {
    if (cand.cost < incumbent.cost) return true;
    if (cand.cost > incumbent.cost) return false;
    return subset_tie_preferred(cand.mask, incumbent.mask);
}

void check_k(int k) {
    if (k < 1 || k > 40) throw InvalidParameter("subset enumeration needs 1 <= k <= 40");
}

} // namespace

SubsetOptimum min_subset_serial(int k, const std::function<double(std::uint64_t)>& cost) {
    check_k(k);
    const std::uint64_t end = std::uint64_t{1} << k;
    SubsetOptimum best{1, cost(1)};
    for (std::uint64_t mask = 2; mask < end; ++mask) {
        SubsetOptimum cand{mask, cost(mask)};
        if (better(cand, best)) best = cand;
    }
    return best;
}

SubsetOptimum min_subset_omp(int k, const std::function<double(std::uint64_t)>& cost) {
    check_k(k);
    const auto end = static_cast<std::int64_t>(std::uint64_t{1} << k);
    SubsetOptimum best{1, cost(1)};
#pragma omp parallel
    {
        SubsetOptimum local{1, best.cost};
#pragma omp for schedule(static)
        for (std::int64_t m = 2; m < end; ++m) {
            SubsetOptimum cand{static_cast<std::uint64_t>(m), cost(static_cast<std::uint64_t>(m))};
            if (better(cand, local)) local = cand;
        }
#pragma omp critical
        if (better(local, best)) best = local;
    }
    return best;
}

namespace {

void check_knapsack(std::span<const std::int64_t> weights, std::span<const double> values, std::int64_t capacity) {
    if (weights.size() != values.size()) throw InvalidInput("knapsack weights and values differ in length");
    if (capacity < 0) throw InvalidParameter("knapsack capacity must be >= 0");
    for (auto w : weights)
        if (w < 0) throw InvalidParameter("knapsack weights must be >= 0");
}

KnapsackSolution backtrack(const std::vector<std::vector<bool>>& take, std::span<const std::int64_t> weights,
                           std::span<const double> values, std::int64_t capacity) {
    KnapsackSolution sol;
    std::int64_t c = capacity;
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (take[i][static_cast<std::size_t>(c)]) {
            sol.chosen.push_back(i);
            c -= weights[i];
        }
    }
    std::reverse(sol.chosen.begin(), sol.chosen.end());
    for (auto i : sol.chosen) sol.value += values[i];
    return sol;
}

} // namespace

KnapsackSolution knapsack_dp_serial(std::span<const std::int64_t> weights, std::span<const double> values,
                                    std::int64_t capacity) {
    check_knapsack(weights, values, capacity);
    const auto cells = static_cast<std::size_t>(capacity) + 1;
    std::vector<double> best(cells, 0.0);
    std::vector<std::vector<bool>> take(weights.size(), std::vector<bool>(cells, false));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const std::int64_t w = weights[i];
        for (std::int64_t c = capacity; c >= w; --c) {
            const double with = best[static_cast<std::size_t>(c - w)] + values[i];
            if (with > best[static_cast<std::size_t>(c)]) {
                best[static_cast<std::size_t>(c)] = with;
                take[i][static_cast<std::size_t>(c)] = true;
            }
        }
    }
    auto sol = backtrack(take, weights, values, capacity);
    sol.value = best[static_cast<std::size_t>(capacity)];
    return sol;
}

KnapsackSolution knapsack_dp_omp(std::span<const std::int64_t> weights, std::span<const double> values,
                                 std::int64_t capacity) {
    check_knapsack(weights, values, capacity);
    const auto cells = static_cast<std::size_t>(capacity) + 1;
    std::vector<double> prev(cells, 0.0);
    std::vector<double> next(cells, 0.0);
    // vector<bool> is not safe for concurrent writes to neighbouring bits.
    std::vector<std::vector<unsigned char>> take(weights.size(), std::vector<unsigned char>(cells, 0));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const std::int64_t w = weights[i];
        const double v = values[i];
        auto& row = take[i];
        const auto n = static_cast<std::int64_t>(cells);
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < n; ++c) {
            const auto uc = static_cast<std::size_t>(c);
            double keep = prev[uc];
            if (c >= w) {
                const double with = prev[static_cast<std::size_t>(c - w)] + v;
                if (with > keep) {
                    keep = with;
                    row[uc] = 1;
                }
            }
            next[uc] = keep;
        }
        std::swap(prev, next);
    }
    std::vector<std::vector<bool>> take_bits(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) take_bits[i].assign(take[i].begin(), take[i].end());
    auto sol = backtrack(take_bits, weights, values, capacity);
    sol.value = prev[static_cast<std::size_t>(capacity)];
    return sol;
}

namespace {

std::size_t nearest(const double* p, std::span<const double> centers, std::size_t dim) {
    const std::size_t k = centers.size() / dim;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        double d = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double diff = p[j] - centers[c * dim + j];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

void check_points(std::span<const double> points, std::span<const double> centers, std::size_t dim) {
    if (dim == 0 || points.size() % dim != 0 || centers.size() % dim != 0 || centers.empty())
        throw InvalidInput("point/center buffers do not match the dimension");
}

} // namespace

std::vector<std::size_t> assign_nearest_serial(std::span<const double> points, std::span<const double> centers,
                                               std::size_t dim) {
    check_points(points, centers, dim);
    const std::size_t n = points.size() / dim;
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = nearest(points.data() + i * dim, centers, dim);
    return out;
}

std::vector<std::size_t> assign_nearest_omp(std::span<const double> points, std::span<const double> centers,
                                            std::size_t dim) {
    check_points(points, centers, dim);
    const auto n = static_cast<std::int64_t>(points.size() / dim);
    std::vector<std::size_t> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = nearest(points.data() + static_cast<std::size_t>(i) * dim, centers, dim);
    return out;
}

} // namespace shortvid::kernels
