#pragma once

// Runs a decider over a whole synthetic population: one feed, one network
// trace and one session per user.

#include <cstdint>
#include <span>
#include <vector>

#include "shortvid/kernels.hpp"
#include "shortvid/session.hpp"
#include "shortvid/workload.hpp"

namespace shortvid::playback {

struct PopulationRunConfig {
    SessionConfig session;
    EstProfitConfig profit;
    workload::NetworkTraceSpec traces;
    std::size_t feed_length = 20;
    std::uint64_t seed = 0;
    kernels::Backend backend = kernels::Backend::openmp;
};

struct UserOutcome {
    std::uint64_t user = 0;
    int portrait = 0;
    double est_profit = 0.0;
    double traffic_bytes = 0.0;
    core::QoPVector qop;
};

struct PopulationRun {
    std::vector<UserOutcome> users;
    double mean_profit = 0.0;
    double mean_traffic_bytes = 0.0;
};

/// Feeds are drawn by popularity and traces by the user's network class, both
/// seeded by (cfg.seed, user id), so two deciders see identical conditions.
PopulationRun run_population(const Decider& decider, std::span<const UserState> users, std::span<const Item> catalog,
                             const PopulationRunConfig& cfg);

/// Field-wise mean of the per-user session QoP.
core::QoPVector mean_qop(const PopulationRun& run);

struct TrafficMatchedComparison {
    PopulationRun baseline;
    PopulationRun candidate;
    double candidate_gamma = 0.0; ///< per-MB cost weight after matching
    double traffic_gap = 0.0;     ///< candidate / baseline mean traffic - 1
    bool matched = false;
    int evaluations = 0;
    /// Set when no single weight lands within tolerance: the first
    /// `mixed_users` users (by position) run at `mixed_gamma`, the rest at
    /// `candidate_gamma`.
    std::size_t mixed_users = 0;
    double mixed_gamma = 0.0;
};

/// Tunes the candidate rule decider's per-MB cost weight by log-scale bisection
/// until its mean traffic is within `tolerance` of the baseline's. Traffic is a
/// step function of the weight, so when bisection collapses on a jump the two
/// bracketing weights are mixed across users.
TrafficMatchedComparison compare_at_equal_traffic(const Decider& baseline, Decider candidate,
                                                  std::span<const UserState> users, std::span<const Item> catalog,
                                                  const PopulationRunConfig& cfg, double tolerance = 0.01,
                                                  int max_evaluations = 40);

} // namespace shortvid::playback
