#pragma once

// Offline decider optimisation: gradient descent for linear deciders,
// Q-learning for tabular deciders, and candidate search.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "shortvid/decider.hpp"
#include "shortvid/losses.hpp"
#include "shortvid/session.hpp"

namespace shortvid::playback {

struct LabeledSample {
    std::vector<double> x;
    double y = 0.0;
};

struct GradientConfig {
    core::Loss loss;
    int epochs = 100;
    std::size_t batch = 32;
    double lr = 0.1;
    std::uint64_t seed = 0;
};

struct GradientResult {
    Decider decider;
    std::vector<double> epoch_loss; ///< mean loss after each epoch; [0] is before training
};

/// Mini-batch gradient descent of θ on mean loss(θ·x, y). An empty θ starts at zero.
GradientResult optimize_decider_gradient(const Decider& start, std::span<const LabeledSample> data,
                                         const GradientConfig& cfg);

double mean_loss(std::span<const double> theta, std::span<const LabeledSample> data, const core::Loss& loss);

struct QLearningConfig {
    double alpha = 0.1;
    double gamma = 0.9;
    double epsilon = 0.1; ///< behaviour exploration (online only)
    int sweeps = 1;       ///< replay passes over the episode set (offline)
    std::uint64_t seed = 0;
};

/// Replays (s, a, r, s') tuples: Q(s,a) += α[r + γ max_a' Q(s',a') − Q(s,a)];
/// terminal tuples drop the bootstrap term.
QTable q_learning_offline(std::span<const Episode> episodes, int states, int actions, const QLearningConfig& cfg);

struct StepResult {
    double r = 0.0;
    int s_next = 0;
    bool terminal = false;
};
using Environment = std::function<StepResult(int s, int a, Rng& rng)>;

/// ε-greedy interaction with `env` for `steps` transitions, restarting at
/// `start` after terminal steps.
QTable q_learning_online(const Environment& env, int states, int actions, int start, long steps,
                         const QLearningConfig& cfg);

/// Tabular-Q decider over `bucketing` trained from episodes (actions = ladder index).
Decider optimize_decider_q(std::span<const Episode> episodes, const StateBucketing& bucketing, int actions,
                           const QLearningConfig& cfg, const RuleParams& fallback = {});

struct ValidationCase {
    UserState user;
    std::vector<Item> items;
    NetworkTrace trace;
    std::uint64_t seed = 0;
};

struct SearchResult {
    std::size_t best = 0;
    std::vector<double> scores;
};

/// Mean EstProfit of `d` over the cases (each case run with its own seed).
double evaluate_decider(const Decider& d, std::span<const ValidationCase> cases, const SessionConfig& base,
                        const EstProfitConfig& profit);

/// Argmax of mean EstProfit; ties keep the earliest candidate. Candidates are
/// evaluated in parallel.
SearchResult heuristic_search(std::span<const Decider> candidates, std::span<const ValidationCase> cases,
                              const SessionConfig& base, const EstProfitConfig& profit);

} // namespace shortvid::playback
