#include "shortvid/population.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "shortvid/error.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::playback {

PopulationRun run_population(const Decider& decider, std::span<const UserState> users, std::span<const Item> catalog,
                             const PopulationRunConfig& cfg) {
    if (catalog.empty()) throw InvalidInput("catalog is empty");
    if (users.empty()) throw InvalidInput("population is empty");
    if (cfg.feed_length == 0) throw InvalidParameter("feed length must be >= 1");
    std::vector<double> cdf(catalog.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < catalog.size(); ++i) cdf[i] = acc += catalog[i].popularity_weight;
    if (!(acc > 0.0)) throw InvalidInput("catalog popularity sums to 0");

    PopulationRun run;
    run.users = kernels::parallel_map(
        users.size(),
        [&](std::size_t k) {
            const auto& u = users[k];
            Rng rng(derive_seed(cfg.seed, 2 * u.id));
            std::vector<Item> feed;
            feed.reserve(cfg.feed_length);
            for (std::size_t i = 0; i < cfg.feed_length; ++i) {
                const auto pos = std::upper_bound(cdf.begin(), cdf.end(), uniform01(rng) * acc) - cdf.begin();
                feed.push_back(catalog[std::min<std::size_t>(catalog.size() - 1, static_cast<std::size_t>(pos))]);
            }
            const auto trace =
                workload::generate_network_trace(u.context.network, cfg.traces, derive_seed(cfg.seed, 2 * u.id + 1));
            auto scfg = cfg.session;
            scfg.seed = derive_seed(cfg.seed, u.id ^ 0x5e55);
            scfg.record_slots = false;
            const auto tr = run_session(decider, u, feed, trace, scfg);
            UserOutcome o;
            o.user = u.id;
            o.portrait = u.portrait("sensitivity", 0);
            o.qop = tr.qop;
            o.traffic_bytes = tr.traffic_bytes;
            o.est_profit = est_profit(tr.qop, u.qop_sens, cfg.profit);
            return o;
        },
        cfg.backend);
    for (const auto& o : run.users) {
        run.mean_profit += o.est_profit;
        run.mean_traffic_bytes += o.traffic_bytes;
    }
    run.mean_profit /= static_cast<double>(run.users.size());
    run.mean_traffic_bytes /= static_cast<double>(run.users.size());
    return run;
}

core::QoPVector mean_qop(const PopulationRun& run) {
    core::QoPVector m;
    if (run.users.empty()) return m;
    for (auto metric : core::kAllMetrics) {
        double s = 0.0;
        for (const auto& o : run.users) s += o.qop.get(metric);
        m.set(metric, s / static_cast<double>(run.users.size()));
    }
    return m;
}

TrafficMatchedComparison compare_at_equal_traffic(const Decider& baseline, Decider candidate,
                                                  std::span<const UserState> users, std::span<const Item> catalog,
                                                  const PopulationRunConfig& cfg, double tolerance,
                                                  int max_evaluations) {
    if (candidate.kind != DeciderKind::rule) throw InvalidParameter("traffic matching tunes a rule decider");
    if (!(tolerance > 0.0)) throw InvalidParameter("tolerance must be > 0");
    TrafficMatchedComparison out;
    out.baseline = run_population(baseline, users, catalog, cfg);
    const double target = out.baseline.mean_traffic_bytes;
    struct Side {
        PopulationRun run;
        double gamma = 0.0;
        double gap = 0.0;
    };
    std::optional<Side> above, below;
    auto eval = [&](double gamma) {
        candidate.rule.gamma = gamma;
        ++out.evaluations;
        auto r = run_population(candidate, users, catalog, cfg);
        const double gap = target > 0.0 ? r.mean_traffic_bytes / target - 1.0 : 0.0;
        if (out.evaluations == 1 || std::abs(gap) < std::abs(out.traffic_gap)) {
            out.candidate = r;
            out.candidate_gamma = gamma;
            out.traffic_gap = gap;
            out.matched = std::abs(gap) <= tolerance;
        }
        auto& side = gap > 0.0 ? above : below;
        side = Side{std::move(r), gamma, gap};
        return gap;
    };
    // Traffic falls as the per-MB weight grows.
    double lo = std::log(std::max(candidate.rule.gamma, 1e-3) / 64.0);
    double hi = std::log(std::max(candidate.rule.gamma, 1e-3) * 64.0);
    double g = eval(std::exp(0.5 * (lo + hi)));
    while (!out.matched && out.evaluations < max_evaluations && hi - lo > 1e-9) {
        if (g > 0.0)
            lo = 0.5 * (lo + hi);
        else
            hi = 0.5 * (lo + hi);
        g = eval(std::exp(0.5 * (lo + hi)));
    }
    if (out.matched || !above || !below) return out;

    // Per-user outcomes are independent of each other, so a population where the
    // first k users run at the heavier weight is assembled from the two runs.
    const std::size_t n = users.size();
    double heavy = 0.0;
    for (const auto& u : below->run.users) heavy += u.traffic_bytes;
    std::size_t best_k = 0;
    double best_gap = below->gap, sum = heavy;
    for (std::size_t k = 1; k <= n; ++k) {
        sum += above->run.users[k - 1].traffic_bytes - below->run.users[k - 1].traffic_bytes;
        const double gap = sum / static_cast<double>(n) / target - 1.0;
        if (std::abs(gap) < std::abs(best_gap)) {
            best_gap = gap;
            best_k = k;
        }
    }
    if (!(std::abs(best_gap) < std::abs(out.traffic_gap))) return out;
    PopulationRun mixed;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& o = i < best_k ? above->run.users[i] : below->run.users[i];
        mixed.users.push_back(o);
        mixed.mean_profit += o.est_profit;
        mixed.mean_traffic_bytes += o.traffic_bytes;
    }
    mixed.mean_profit /= static_cast<double>(n);
    mixed.mean_traffic_bytes /= static_cast<double>(n);
    out.candidate = std::move(mixed);
    out.candidate_gamma = below->gamma;
    out.mixed_gamma = above->gamma;
    out.mixed_users = best_k;
    out.traffic_gap = out.candidate.mean_traffic_bytes / target - 1.0;
    out.matched = std::abs(out.traffic_gap) <= tolerance;
    return out;
}

} // namespace shortvid::playback
