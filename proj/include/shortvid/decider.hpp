#pragma once

// Streaming/playback deciders: map the client state to ladder choice,
// pre-download depth, per-item download cap and pre-render.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "shortvid/core_model.hpp"
#include "shortvid/media.hpp"

namespace shortvid::playback {

struct Action {
    std::size_t ladder = 0;
    int depth = 2;             ///< items pre-downloaded beyond the current one
    double cap_bytes = 0.0;    ///< per-item pre-download cap
    bool prerender = true;
};

struct DeciderState {
    double buffer_s = 0.0;           ///< media buffered for the playing item
    double est_kbps = 0.0;           ///< bandwidth estimate (may be +inf)
    NetworkClass network = NetworkClass::fair;
    int portrait = 0;
    const core::MetricWeights* qop_sens = nullptr;
    const Item* item = nullptr;      ///< item the ladder is being chosen for
    std::optional<double> prev_quality;
    double expected_playtime_s = 0.0;
    double device_score = 0.5;
};

/// Per-ladder terms of the QoE-style score.
struct LadderFeatures {
    double quality = 0.0;   ///< 0-100
    double stall_s = 0.0;   ///< predicted stall over the expected playtime
    double switch_q = 0.0;  ///< |quality - previous quality|
    double cost_mb = 0.0;   ///< expected download volume
};

LadderFeatures ladder_features(const DeciderState& s, std::size_t ladder, double safety);

struct RuleParams {
    double quality_w = 1.0;
    double alpha = 10.0; ///< per predicted stall second
    double beta = 0.2;   ///< per quality point switched
    double gamma = 2.0;  ///< per MB
    bool personalized = false; ///< scale quality_w / alpha by the user's sensitivities
    double safety = 0.9;       ///< fraction of the bandwidth estimate trusted
    int depth = 2;
    double cap_s = 3.0;        ///< pre-download cap in media seconds of the chosen ladder
    bool prerender = true;
};

/// Bucketing of the client state for the Q table:
/// buffer {<2, 2-6, >=6} x network class x portrait bucket.
struct StateBucketing {
    std::vector<double> buffer_edges{2.0, 6.0};
    int portrait_buckets = 2;

    int state_count() const;
    int bucket(double buffer_s, NetworkClass net, int portrait) const;
};

struct QTable {
    int states = 0;
    int actions = 0;
    std::vector<double> q;
    std::vector<unsigned char> visited;

    QTable() = default;
    QTable(int s, int a);
    double& at(int s, int a) { return q[static_cast<std::size_t>(s * actions + a)]; }
    double at(int s, int a) const { return q[static_cast<std::size_t>(s * actions + a)]; }
    bool seen(int s, int a) const { return visited[static_cast<std::size_t>(s * actions + a)] != 0; }
    void mark(int s, int a) { visited[static_cast<std::size_t>(s * actions + a)] = 1; }
    /// Best visited action in state s, lowest index on ties; nullopt when s is unvisited.
    std::optional<int> best_action(int s) const;
    double max_value(int s) const; ///< 0 for an unvisited state
};

enum class DeciderKind { rule, linear, tabular_q };

struct Decision {
    Action action;
    bool fell_back = false; ///< tabular-Q state unvisited, rule decider used
};

struct Decider {
    DeciderKind kind = DeciderKind::rule;
    std::string name = "rule";
    RuleParams rule;
    /// Linear score θ·[1, quality/100, stall_s, switch/100, cost_mb] per ladder.
    std::vector<double> theta;
    StateBucketing bucketing;
    QTable q;

    Decision decide(const DeciderState& s) const;
    void validate() const;
};

inline constexpr std::size_t kLinearFeatureCount = 5;
std::vector<double> linear_features(const LadderFeatures& f);

/// Fixed-weight QoE decider.
Decider make_rule_decider(const RuleParams& p, std::string name = "rule");

std::string to_string(DeciderKind k);
std::string decider_to_json(const Decider& d);
/// Throws ConfigError on a bad document or unsupported version.
Decider decider_from_json(const std::string& text);

} // namespace shortvid::playback
