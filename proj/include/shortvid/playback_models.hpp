#pragma once

// Client-side models that feed the decider: the action matrix, playtime
// fusion, uplift portraits and the QoE baseline objective.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shortvid/core_model.hpp"
#include "shortvid/media.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::playback {

struct ActionEntry {
    int module = 0;
    int implementation = 0;
    int resource = 0;
    double usage = 0.0;
    double qop_impact = 0.0; ///< LT-equivalent (fraction of LT)
};

class ActionMatrix {
public:
    /// Throws InvalidInput on a duplicate (module, implementation, resource).
    void add(const ActionEntry& e);
    /// Entry whose impact is the LT-equivalent of per-metric percent changes.
    void add(int module, int implementation, int resource, double usage,
             const std::vector<std::pair<core::Metric, double>>& changes_pct, const core::ImpactTable& impacts);
    const std::vector<ActionEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<ActionEntry> entries_;
};

/// k entries with the largest |qop_impact|; ties by (module, implementation, resource).
std::vector<ActionEntry> top_k_actions(const ActionMatrix& matrix, std::size_t k);

/// Playtime distribution in seconds.
struct PlaytimeDistribution {
    enum class Kind { point, geometric, empirical };
    Kind kind = Kind::point;
    double value = 0.0;       ///< point mass
    double stop_prob = 0.1;   ///< geometric: per-second stop probability
    double cap_s = 0.0;       ///< geometric: truncation (item duration)
    std::vector<double> samples;

    static PlaytimeDistribution point(double s);
    /// Whole seconds watched before stopping, truncated at cap_s with the residual mass at cap_s.
    static PlaytimeDistribution geometric(double stop_prob, double cap_s);
    static PlaytimeDistribution empirical(std::vector<double> samples);

    double mean() const;
    double sample(Rng& rng) const;
    void validate() const;
};

struct PlaytimeModel {
    std::map<int, PlaytimeDistribution> bucket_dist;
    std::map<std::uint64_t, PlaytimeDistribution> item_dist;
    std::map<std::uint64_t, PlaytimeDistribution> user_dist;
    std::array<double, 3> alphas{1.0, 0.0, 0.0};

    void validate() const;
};

struct PlaytimeEstimate {
    double mean = 0.0;
    std::array<double, 3> weights{}; ///< effective (bucket, item, user) weights after fallback
    std::array<const PlaytimeDistribution*, 3> components{};

    /// Draw from the α-mixture.
    double sample(Rng& rng) const;
};

/// α-fusion of bucket, item and user playtime. A missing item or user
/// component hands its weight to the bucket component.
PlaytimeEstimate estimate_playtime(const UserState& u, const Item& i, const PlaytimeModel& m);

struct LinearOutcome {
    std::vector<double> weights;
    double bias = 0.0;
    double eval(const std::vector<double>& x) const;
};

struct UpliftPortraitModel {
    LinearOutcome treatment;
    LinearOutcome control;
    std::vector<double> thresholds; ///< thr_1 < ... < thr_{n-1} for n buckets

    void validate() const;
    double uplift(const std::vector<double>& features) const;
};

/// Bucket id in 1..n: first j with uplift <= thr_j, else n.
int uplift_bucket(const std::vector<double>& features, const UpliftPortraitModel& model);

/// Quality - alpha*block_dur - beta*quality_switch - gamma*cost.
double qoe(double quality, double block_dur, double quality_switch, double cost, double alpha, double beta,
           double gamma);

} // namespace shortvid::playback
