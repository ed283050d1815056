#include "shortvid/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shortvid/error.hpp"
#include "shortvid/kernels.hpp"

namespace shortvid::playback {

double mean_loss(std::span<const double> theta, std::span<const LabeledSample> data, const core::Loss& loss) {
    double total = 0.0;
    for (const auto& d : data) {
        double z = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j) z += theta[j] * d.x[j];
        total += loss.value(z, d.y);
    }
    return total / static_cast<double>(data.size());
}

GradientResult optimize_decider_gradient(const Decider& start, std::span<const LabeledSample> data,
                                         const GradientConfig& cfg) {
    if (data.empty()) throw InvalidParameter("gradient training needs data");
    if (!(cfg.lr > 0.0)) throw InvalidParameter("learning rate must be > 0");
    if (cfg.epochs < 0 || cfg.batch == 0) throw InvalidParameter("epochs must be >= 0 and batch >= 1");
    const std::size_t dim = data.front().x.size();
    for (const auto& d : data)
        if (d.x.size() != dim) throw InvalidInput("feature vectors differ in length");

    GradientResult res;
    res.decider = start;
    res.decider.kind = DeciderKind::linear;
    auto& theta = res.decider.theta;
    if (theta.empty()) theta.assign(dim, 0.0);
    if (theta.size() != dim) throw InvalidParameter("decider weights do not match the feature length");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, 0x9d));
    std::vector<double> g(dim);
    res.epoch_loss.push_back(mean_loss(theta, data, cfg.loss));
    for (int e = 0; e < cfg.epochs; ++e) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
            const std::size_t end = std::min(order.size(), b + cfg.batch);
            std::fill(g.begin(), g.end(), 0.0);
            for (std::size_t k = b; k < end; ++k) {
                const auto& d = data[order[k]];
                double z = 0.0;
                for (std::size_t j = 0; j < dim; ++j) z += theta[j] * d.x[j];
                const double dz = cfg.loss.grad(z, d.y);
                for (std::size_t j = 0; j < dim; ++j) g[j] += dz * d.x[j];
            }
            const double scale = cfg.lr / static_cast<double>(end - b);
            for (std::size_t j = 0; j < dim; ++j) theta[j] -= scale * g[j];
        }
        res.epoch_loss.push_back(mean_loss(theta, data, cfg.loss));
    }
    return res;
}

namespace {

void check_q(int states, int actions, const QLearningConfig& cfg) {
    if (states < 1 || actions < 1) throw InvalidParameter("Q-learning needs at least one state and action");
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw InvalidParameter("learning rate must lie in (0,1]");
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw InvalidParameter("discount must lie in [0,1)");
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw InvalidParameter("epsilon must lie in [0,1]");
}

void q_update(QTable& q, int s, int a, double r, int s2, bool terminal, const QLearningConfig& cfg) {
    const double target = r + (terminal ? 0.0 : cfg.gamma * q.max_value(s2));
    q.at(s, a) += cfg.alpha * (target - q.at(s, a));
    q.mark(s, a);
}

} // namespace

QTable q_learning_offline(std::span<const Episode> episodes, int states, int actions, const QLearningConfig& cfg) {
    check_q(states, actions, cfg);
    if (cfg.sweeps < 1) throw InvalidParameter("sweeps must be >= 1");
    QTable q(states, actions);
    for (const auto& e : episodes)
        if (e.s < 0 || e.s >= states || e.s_next < 0 || e.s_next >= states || e.a < 0 || e.a >= actions)
            throw InvalidInput("episode state or action out of range");
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep)
        for (const auto& e : episodes) q_update(q, e.s, e.a, e.r, e.s_next, e.terminal, cfg);
    return q;
}

QTable q_learning_online(const Environment& env, int states, int actions, int start, long steps,
                         const QLearningConfig& cfg) {
    check_q(states, actions, cfg);
    if (start < 0 || start >= states) throw InvalidParameter("start state out of range");
    QTable q(states, actions);
    Rng rng(derive_seed(cfg.seed, 0x91));
    int s = start;
    for (long t = 0; t < steps; ++t) {
        int a;
        if (bernoulli(rng, cfg.epsilon)) {
            a = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(actions)));
        } else {
            // greedy over all actions; unvisited ones count as 0
            a = 0;
            for (int k = 1; k < actions; ++k)
                if (q.at(s, k) > q.at(s, a)) a = k;
        }
        const StepResult out = env(s, a, rng);
        if (out.s_next < 0 || out.s_next >= states) throw InvalidInput("environment returned an invalid state");
        const double target = out.r + (out.terminal ? 0.0 : cfg.gamma * *std::max_element(
                                                                  q.q.begin() + out.s_next * actions,
                                                                  q.q.begin() + (out.s_next + 1) * actions));
        q.at(s, a) += cfg.alpha * (target - q.at(s, a));
        q.mark(s, a);
        s = out.terminal ? start : out.s_next;
    }
    return q;
}

Decider optimize_decider_q(std::span<const Episode> episodes, const StateBucketing& bucketing, int actions,
                           const QLearningConfig& cfg, const RuleParams& fallback) {
    Decider d;
    d.kind = DeciderKind::tabular_q;
    d.name = "tabular_q";
    d.rule = fallback;
    d.bucketing = bucketing;
    d.q = q_learning_offline(episodes, bucketing.state_count(), actions, cfg);
    d.validate();
    return d;
}

double evaluate_decider(const Decider& d, std::span<const ValidationCase> cases, const SessionConfig& base,
                        const EstProfitConfig& profit) {
    if (cases.empty()) throw InvalidInput("validation set is empty");
    double total = 0.0;
    for (const auto& c : cases) {
        SessionConfig cfg = base;
        cfg.seed = c.seed;
        cfg.record_slots = false;
        const auto tr = run_session(d, c.user, c.items, c.trace, cfg);
        total += est_profit(tr.qop, c.user.qop_sens, profit);
    }
    return total / static_cast<double>(cases.size());
}

SearchResult heuristic_search(std::span<const Decider> candidates, std::span<const ValidationCase> cases,
                              const SessionConfig& base, const EstProfitConfig& profit) {
    if (candidates.empty()) throw InvalidParameter("heuristic search needs at least one candidate");
    SearchResult res;
    res.scores = kernels::parallel_map(candidates.size(), [&](std::size_t i) {
        return evaluate_decider(candidates[i], cases, base, profit);
    });
    for (std::size_t i = 1; i < res.scores.size(); ++i)
        if (res.scores[i] > res.scores[res.best]) res.best = i;
    return res;
}

} // namespace shortvid::playback
