#pragma once

// AB assignment, feed interleaving, strategy labels for transcode outputs and
// the quasi-experimental estimator.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace shortvid::experiment {

/// Arm index of `user` under (salt, ratios); a pure function of its inputs.
std::size_t ab_assign(std::uint64_t user, const std::string& salt, std::span<const double> ratios);

enum class Tag { treatment, control };
enum class InterleaveMode { alternate, random };
std::string to_string(Tag t);
InterleaveMode interleave_mode_from_name(const std::string& name);

/// Alternate mode starts with treatment on even sessions and control on odd ones.
std::vector<Tag> interleave(std::size_t items, InterleaveMode mode, std::uint64_t session, std::uint64_t seed = 0);

struct StrategyWindow {
    std::string strategy;
    std::string group;
    double start = 0.0; ///< inclusive
    double end = 1e300; ///< exclusive
};

struct TranscodeOutput {
    std::uint64_t item = 0;
    std::string strategy;
};

struct LabeledOutput {
    std::uint64_t item = 0;
    std::string strategy;
    std::string group;
    double start = 0.0;
    double end = 0.0;
};

/// Request-time lookup of the output serving (item, user group, time).
class LabelResolver {
public:
    explicit LabelResolver(std::vector<LabeledOutput> outputs);
    /// Latest-starting matching window; nullopt = untagged.
    std::optional<LabeledOutput> resolve(std::uint64_t item, const std::string& group, double t) const;
    const std::vector<LabeledOutput>& outputs() const { return outputs_; }

private:
    std::vector<LabeledOutput> outputs_;
    std::map<std::pair<std::uint64_t, std::string>, std::vector<std::size_t>> index_;
};

struct PoolShare {
    std::string strategy;
    double fraction = 0.0;
};

struct LabelResult {
    std::vector<LabeledOutput> labeled;
    LabelResolver resolver{{}};
    std::map<std::string, long> pool_units;
};

/// Tags every output with each window of its strategy (unknown strategies throw
/// InvalidInput) and splits `pool_total` resource units by largest remainder.
LabelResult label_outputs(std::span<const TranscodeOutput> outputs, std::span<const StrategyWindow> windows,
                          std::span<const PoolShare> pools = {}, long pool_total = 0);

std::map<std::string, long> partition_pool(std::span<const PoolShare> pools, long total);

// ---- quasi-experimental estimation ----

struct SetSizes {
    double a_plus_b = 0.0;
    double b_prime = 0.0;
    double a_prime = 0.0;
};

struct QuasiInputs {
    double t_c = 0.0;
    double c_c = 0.0;
    double t_bp = 0.0;
    double c_ap = 0.0;
    std::optional<SetSizes> sizes;
    double lambda = 2.5;
};

/// Exact form T_C − C_C + T_B'·|A+B|/|B'| − C_A'·|A+B|/|A'| when sizes are
/// given, else T_C − C_C + (T_B' − C_A')·λ.
double quasi_delta(const QuasiInputs& in);

/// T_{C+B'} − C_{C+A'}.
double quasi_delta_perf(double t_c_plus_bp, double c_c_plus_ap);

struct VideoCovariates {
    std::uint64_t id = 0;
    std::vector<double> values;
};

struct VideoSplit {
    std::vector<std::size_t> a;
    std::vector<std::size_t> b;
    double max_relative_gap = 0.0;
    bool balanced = false;
    int iterations = 0;
};

/// Random halves, then greedy swaps until every covariate mean differs by at
/// most `tolerance` (relative) or iterations run out (balanced = false).
VideoSplit balance_video_split(std::span<const VideoCovariates> videos, std::uint64_t seed, double tolerance = 0.02,
                               int max_iter = 20000);

double max_relative_gap(std::span<const VideoCovariates> videos, std::span<const std::size_t> a,
                        std::span<const std::size_t> b);

struct QuasiScenario {
    std::size_t users = 200000;
    std::size_t views_per_user = 30;
    std::size_t catalog = 2000;
    double transcode_fraction = 0.5;
    double effect = 0.05;         ///< multiplicative playtime effect of the new strategy
    double balance_tolerance = 0.005;
    std::uint64_t seed = 0;
};

struct QuasiOutcome {
    QuasiInputs inputs;
    double delta_exact = 0.0;
    double delta_lambda = 0.0;
    double delta_perf = 0.0;
    double relative_effect = 0.0; ///< exact Δ over the control baseline on A+B
    double true_relative = 0.0;
    VideoSplit split;
    std::size_t treatment_users = 0;
    std::size_t control_users = 0;
    std::size_t dropped_views = 0;
};

/// Synthetic end-to-end run: catalog, AB users, balanced A/B split, history
/// adjustment (views filtered, not deleted) and estimation.
QuasiOutcome run_quasi_experiment(const QuasiScenario& s);

} // namespace shortvid::experiment
