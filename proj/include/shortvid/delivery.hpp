#pragma once

// Server-side choice of which ladders to send with a feed item, and the small
// time-series service (bandwidth forecasts) the schedulers consult.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shortvid/kernels.hpp"
#include "shortvid/media.hpp"

namespace shortvid::delivery {

struct DeliveryDecision {
    std::vector<bool> deliver; ///< d_i
    double expected_cost = 0.0;
    bool approximate = false;  ///< greedy fallback was used

    std::uint64_t mask() const;
    std::size_t count() const;
};

/// Row-major K x K matrix; replace[i*K + j] is the cost of playing j when i was the best fit.
struct DeliveryProblem {
    std::vector<double> p;            ///< P^s_i
    std::vector<double> replace;      ///< replace_cost_i(j)
    std::vector<double> deliver_cost; ///< per ladder

    std::size_t size() const { return p.size(); }
    double replace_cost(std::size_t i, std::size_t j) const { return replace[i * p.size() + j]; }
    /// Throws InvalidParameter on shape mismatches, negative costs, a nonzero
    /// diagonal or P that is not a distribution.
    void validate() const;
};

/// Σ_i P_i · min_{j in S} replace_i(j) + Σ_{i in S} deliver_i. Throws on an empty set.
double delivery_cost(const DeliveryProblem& prob, std::uint64_t mask);

struct DeliveryOptions {
    int exact_cap = 30;
    enum class Method { branch_and_bound, exhaustive } method = Method::branch_and_bound;
    kernels::Backend backend = kernels::Backend::openmp; ///< exhaustive method only
};

/// Exact minimum over nonempty subsets (ties: fewer ladders, then the smaller
/// ascending index list). Above exact_cap ladders a greedy result is flagged approximate.
DeliveryDecision optimal_delivery(const DeliveryProblem& prob, const DeliveryOptions& opts = {});

/// Greedy: best single ladder, then add the best marginal improvement until none helps.
DeliveryDecision greedy_delivery(const DeliveryProblem& prob);

struct ReplaceCostWeights {
    double quality = 1.0;  ///< per quality point
    double bitrate = 0.1;  ///< per 100 kbps
};

/// Default replace_cost: weighted |quality gap| + |bitrate gap|; zero diagonal.
std::vector<double> default_replace_cost(const playback::LadderGroup& ladders, const ReplaceCostWeights& w = {});

/// meta_bytes / α_dev / α_net · scale.
double deliver_cost(double meta_bytes, double device_factor, double network_factor, double scale = 1.0);

struct LadderChoiceModel {
    std::size_t ladders = 0;
    std::vector<std::vector<double>> p; ///< per bucket

    const std::vector<double>& bucket(std::size_t b) const;
    void validate() const;
};

struct ChoiceObservation {
    std::size_t bucket = 0;
    std::size_t ladder = 0;
};

/// Per-bucket add-one smoothed frequencies. Empty history gives uniform rows.
LadderChoiceModel estimate_p_inductive(std::span<const ChoiceObservation> history, std::size_t buckets,
                                       std::size_t ladders);

/// Placeholder for profit-based estimation: per bucket, softmax of the supplied
/// per-ladder profit estimates at the given temperature.
LadderChoiceModel estimate_p_deductive(const std::vector<std::vector<double>>& profit, double temperature = 1.0);

// ---- forecast service ----

enum class ForecastMethod { moving_average, seasonal_naive };
std::string to_string(ForecastMethod m);
ForecastMethod forecast_method_from_name(const std::string& name);

struct ForecastModel {
    int window = 12;       ///< k
    int horizon = 1;       ///< N
    int period = 288;      ///< slots per day
    ForecastMethod method = ForecastMethod::moving_average;
    std::string static_feature; ///< e.g. vendor id; carried into reports

    void validate() const;
};

struct ForecastResult {
    std::vector<double> values;
    std::vector<double> percentile_of_day; ///< 0-100, mid-rank within the last observed day
};

ForecastResult forecast(std::span<const double> series, const ForecastModel& model);

/// Mid-rank percentile: 100·(#below + #equal/2)/n; all-equal profiles give 50.
double percentile_rank(std::span<const double> profile, double value);

} // namespace shortvid::delivery
