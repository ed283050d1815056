#pragma once

// User-item-aware encoding: video value prediction, windowed ladder-group
// updates, encoding rewards and quota-limited transcode allocation.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shortvid/core_model.hpp"
#include "shortvid/kernels.hpp"
#include "shortvid/losses.hpp"
#include "shortvid/media.hpp"

namespace shortvid::uiae {

// ---- value model ----

struct ValueSample {
    double author_activity = 0.0;
    double author_posts = 0.0;
    double author_fans = 0.0;
    double duration_s = 0.0;
    double playback_volume = 0.0;
    double like_count = 0.0;
    double vv_growth = 0.0;
    int category = 0;
    int hour = 0;
    bool holiday = false;
    std::vector<double> targets; ///< per head: view volume, play time, likes

    void validate() const;
};

inline constexpr std::size_t kCategoryBuckets = 8;

/// Bias, log1p counts, growth, hour on the circle, holiday flag, category one-hot.
std::vector<double> value_features(const ValueSample& s);

struct LinearHead {
    std::vector<double> weights; ///< raw feature space
    bool constant = false;       ///< degenerate targets: bias-only model
};

struct ValueModel {
    core::Loss loss;
    bool log_target = true;
    std::vector<LinearHead> heads;

    /// Raw linear output for head h.
    double raw(std::span<const double> x, std::size_t head) const;
    /// Prediction on the training scale (log1p space when log_target).
    double predict_scaled(std::span<const double> x, std::size_t head) const;
    /// Prediction in target units.
    double predict(const ValueSample& s, std::size_t head) const;
};

struct TrainConfig {
    core::Loss loss;
    bool log_target = true;
    int max_epochs = 5000;
    double tolerance = 1e-13; ///< stop when the epoch loss improves by less
};

struct HeadTrace {
    std::vector<double> epoch_loss; ///< [0] before training
};

/// Full-batch gradient descent on standardized features with step 1/L, where L
/// bounds the curvature of the mean loss, then mapped back to raw features.
LinearHead train_linear_head(const std::vector<std::vector<double>>& x, std::span<const double> y,
                             const core::Loss& loss, const TrainConfig& cfg, HeadTrace* trace = nullptr);

ValueModel train_value_model(std::span<const ValueSample> samples, const TrainConfig& cfg,
                             std::vector<HeadTrace>* traces = nullptr);

struct ValueMetrics {
    double rec_auc = 0.0;
    double mae = 0.0;
};

/// ROC-AUC of `scores` against "truth is in the top `top_fraction`" (average
/// ranks for ties). Throws UndefinedResult when only one class remains.
double rec_auc(std::span<const double> scores, std::span<const double> truth, double top_fraction);

ValueMetrics evaluate_value_model(const ValueModel& model, std::span<const ValueSample> test, std::size_t head,
                                  double top_fraction = 0.1);

// ---- costs and reward ----

enum class Resource { cpu, fpga, gpu };
std::string to_string(Resource r);
Resource resource_from_name(const std::string& name);

/// Normalized transcode-seconds per content second, keyed by (preset, resource).
struct CalcTable {
    std::map<std::pair<std::string, Resource>, double> entries;

    static CalcTable defaults();
    double at(const std::string& preset, Resource r) const;
};

struct CostComponents {
    double bw_bytes = 0.0;
    double calc = 0.0;        ///< transcode-seconds
    double store_bytes = 0.0;
};

struct ConsumptionForecast {
    std::vector<double> selection_share; ///< per ladder, sums to 1
    double plays = 0.0;
    double mean_watch_s = 0.0;
};

/// bw = Σ share·plays·bitrate·watch, calc = table·duration per rendition,
/// store = Σ bitrate·duration (bytes).
CostComponents cost_components(const playback::LadderGroup& ladders, double duration_s,
                               const ConsumptionForecast& consumption, const std::string& preset, Resource resource,
                               const CalcTable& table);

struct CostPrices {
    double per_gb_bandwidth = 0.02;
    double per_gb_storage = 0.005;
    double per_calc_second = 0.0001;

    double currency(const CostComponents& c) const;
};

struct ClusterProfile {
    core::MetricWeights sensitivity;
    core::QoPVector qop; ///< predicted QoP under the candidate ladder group
};

struct RewardInputs {
    std::vector<double> ug;                 ///< cluster histogram
    core::QoPVector baseline;
    std::vector<ClusterProfile> clusters;
    core::ImpactTable impacts = core::ImpactTable::defaults();
    core::EconomyParams economy;
    double users = 1.0;                     ///< scales the per-user LTV term
    CostComponents delta_cost;              ///< candidate minus baseline
    CostPrices prices;
};

/// Σ_g u_g · users · arpu · lt_base · Σ_m sens_g,m · contribution_m − price(Δcost).
double reward(const RewardInputs& in);

// ---- windowed ladder update ----

struct WindowRecord {
    int t = 0;
    std::vector<double> ug;
    core::QoPVector qop;
    double profit = 0.0;
    double qd_prob = 0.5;
    double fd_prob = 0.5;
    playback::LadderGroup ladder;

    void validate() const;
};

struct UpdateConfig {
    double score_th = 0.5;
    double smoothing = 0.3;
};

enum class Direction { quality, fluency };

struct LadderUpdate {
    playback::LadderGroup ladder;
    Direction direction = Direction::quality;
    bool withdrawn = false;  ///< value score under the threshold
    bool kept = false;       ///< no candidate survived the direction filter
    std::vector<double> ug_forecast;
    double qd_forecast = 0.0;
    double fd_forecast = 0.0;
    std::vector<double> rewards; ///< per surviving candidate, in input order
    std::vector<std::size_t> evaluated;
};

using RewardFn = std::function<double(const playback::LadderGroup&, const std::vector<double>& ug)>;

/// Exponential smoothing s_t = a x_t + (1-a) s_{t-1}; the last state is the forecast.
double smooth(std::span<const double> xs, double alpha);

LadderUpdate update_ladder(std::span<const WindowRecord> history, double value_score,
                           std::span<const playback::LadderGroup> candidates, const RewardFn& reward_fn,
                           const UpdateConfig& cfg = {});

// ---- transcode allocation ----

struct TranscodeTask {
    std::uint64_t item = 0;
    playback::LadderGroup ladders;
    double reward = 0.0;
    double quota = 1.0;
    Resource resource = Resource::cpu;
};

struct TranscodeAllocation {
    std::vector<std::size_t> accepted; ///< ascending task indices
    double quota_used = 0.0;
    double reward_sum = 0.0;
    bool exact = false;
};

struct AllocationConfig {
    double granularity = 0.01;
    std::size_t dp_cell_limit = 1000000;
    kernels::Backend backend = kernels::Backend::openmp;
};

TranscodeAllocation allocate_transcodes(std::span<const TranscodeTask> tasks, double budget,
                                        const AllocationConfig& cfg = {});

/// Ratio greedy, best single task, then single swaps while they improve.
TranscodeAllocation greedy_transcodes(std::span<const TranscodeTask> tasks, double budget);

// ---- quota control ----

struct QuotaController {
    double kp = 0.6;
    double ki = 0.05;
    double kd = 0.0;
    double target = 0.8;     ///< utilization
    double scale = 100.0;    ///< budget units per unit of control signal
    double max_budget = 1e9;
    double integral = 0.0;
    double last_error = 0.0;
    bool has_last = false;

    void validate() const;
};

/// Budget increment scale·(kp·e + ki·∫e + kd·de/dt) with e = target − measured,
/// result clamped to [0, max_budget].
double pid_quota(QuotaController& c, double measured, double dt, double budget);

/// First-order utilization plant: u += lag·(load·budget/cores − u), clipped to [0, 1.5].
struct QuotaPlant {
    double cores = 100.0;
    double load_per_budget = 1.0;
    double lag = 0.5;
    double utilization = 0.0;

    double step(double budget);
};

// ---- consumer clustering ----

struct Clustering {
    std::vector<std::size_t> assignment;
    std::vector<double> centers; ///< row-major k x dim
    std::vector<double> histogram;
    std::size_t k = 0;
    bool reduced = false; ///< fewer clusters than requested
};

Clustering cluster_consumers(std::span<const double> points, std::size_t dim, std::size_t k, std::uint64_t seed,
                             int max_iter = 100, kernels::Backend backend = kernels::Backend::openmp);

} // namespace shortvid::uiae
