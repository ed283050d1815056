#include "shortvid/session.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "shortvid/error.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::playback {

using nlohmann::json;

namespace {

constexpr double kEps = 1e-9;

double item_bytes(const Item& it, std::size_t l) {
    const auto& ladder = it.ladders[l];
    return ladder.file_bytes > 0.0 ? ladder.file_bytes : ladder.bytes_per_second() * it.duration_s;
}

double prior_kbps(NetworkClass n) {
    switch (n) {
    case NetworkClass::poor: return 1200.0;
    case NetworkClass::fair: return 3000.0;
    case NetworkClass::good: return 8000.0;
    }
    return 3000.0;
}

core::QoPVector item_qop(const ItemRecord& r) {
    core::QoPVector q;
    q.first_frame_ms = r.first_frame_ms.value_or(0.0);
    const double total = r.played_s + r.stall_s;
    q.rebuffer_ratio = total > 0.0 ? r.stall_s / total : 0.0;
    q.rebuffer_dur_per_vv_ms = r.stall_s * 1000.0;
    q.traffic_bytes = r.bytes;
    q.video_quality = r.played_s > 0.0 ? r.quality : 0.0;
    q.fps = r.played_s > 0.0 ? 30.0 : 0.0;
    return q;
}

} // namespace

double pct50(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[(v.size() + 1) / 2 - 1];
}

core::QoPVector aggregate_qop(std::span<const ItemRecord> items, double traffic_bytes) {
    core::QoPVector q;
    std::vector<double> ff;
    double play = 0.0;
    double stall = 0.0;
    double quality = 0.0;
    int views = 0;
    for (const auto& r : items) {
        if (!r.viewed) continue;
        stall += r.stall_s;
        play += r.played_s;
        quality += r.quality * r.played_s;
        if (r.first_frame_ms) {
            ff.push_back(*r.first_frame_ms);
            ++views;
        }
    }
    q.first_frame_ms = pct50(ff);
    q.rebuffer_ratio = play + stall > 0.0 ? stall / (play + stall) : 0.0;
    q.rebuffer_dur_per_vv_ms = views > 0 ? stall * 1000.0 / views : 0.0;
    q.traffic_bytes = traffic_bytes;
    q.video_quality = play > 0.0 ? quality / play : 0.0;
    q.fps = play > 0.0 ? 30.0 : 0.0;
    return q;
}

SessionTrace run_session(const Decider& decider, const UserState& u, std::span<const Item> itl,
                         const NetworkTrace& net, const SessionConfig& cfg) {
    if (!(cfg.clock_step_ms > 0.0)) throw InvalidParameter("clock step must be > 0");
    if (!(cfg.max_wait_s > 0.0)) throw InvalidParameter("max wait must be > 0");
    if (!(cfg.ewma_weight > 0.0 && cfg.ewma_weight <= 1.0)) throw InvalidParameter("EWMA weight must lie in (0,1]");
    if (itl.empty()) throw InvalidInput("session needs at least one item");
    for (const auto& it : itl) it.validate();
    u.validate();
    net.validate();
    decider.validate();
    if (cfg.playtime) cfg.playtime->validate();

    const std::size_t n = itl.size();
    const double step = cfg.clock_step_ms;
    const double dt = step / 1000.0;
    Rng rng(derive_seed(cfg.seed, u.id));

    SessionTrace tr;
    std::vector<ItemRecord> rec(n);
    std::vector<double> got(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        rec[i].position = i;
        rec[i].item_id = itl[i].id;
    }
    double est = cfg.initial_kbps.value_or(prior_kbps(u.context.network));
    const int portrait = u.portrait("sensitivity", 0);

    std::size_t cur = 0;
    double t_ms = 0.0;
    bool started = false;
    double played = 0.0;
    double wait = 0.0;
    double stall_run = 0.0;
    bool in_stall = false;
    double target = 0.0;
    std::optional<double> prev_quality;
    bool prerender = decider.rule.prerender;

    const auto bps = [&](std::size_t pos) { return itl[pos].ladders[*rec[pos].ladder].bytes_per_second(); };
    const auto buffer_of_current = [&]() {
        if (rec[cur].ladder) return got[cur] / bps(cur) - played;
        return cur == 0 ? u.buffer_s : 0.0;
    };
    const auto expected_playtime = [&](std::size_t pos) {
        const Item& it = itl[pos];
        if (pos < cfg.fixed_playtimes_s.size()) return std::min(cfg.fixed_playtimes_s[pos], it.duration_s);
        if (cfg.playtime) return std::min(estimate_playtime(u, it, *cfg.playtime).mean, it.duration_s);
        return PlaytimeDistribution::geometric(it.stop_prob, it.duration_s).mean();
    };
    const auto state_for = [&](std::size_t pos) {
        DeciderState s;
        s.buffer_s = std::max(0.0, buffer_of_current());
        s.est_kbps = est;
        s.network = u.context.network;
        s.portrait = portrait;
        s.qop_sens = &u.qop_sens;
        s.item = &itl[pos];
        s.prev_quality = prev_quality;
        s.expected_playtime_s = expected_playtime(pos);
        s.device_score = u.device_score;
        return s;
    };
    const auto choose_ladder = [&](std::size_t pos) {
        if (rec[pos].ladder) return;
        const auto s = state_for(pos);
        const Decision d = decider.decide(s);
        if (d.fell_back) ++tr.fallbacks;
        rec[pos].ladder = std::min(d.action.ladder, itl[pos].ladders.size() - 1);
        rec[pos].quality = itl[pos].ladders[*rec[pos].ladder].quality_score;
        rec[pos].decision_buffer_s = s.buffer_s;
        rec[pos].decision_network = s.network;
        rec[pos].decision_portrait = s.portrait;
    };
    const auto prefix = [&](std::size_t pos) {
        return std::min({cfg.startup_bytes, cfg.startup_media_s * bps(pos), item_bytes(itl[pos], *rec[pos].ladder)});
    };
    const auto begin_item = [&](std::size_t pos) {
        choose_ladder(pos);
        auto& r = rec[pos];
        r.viewed = true;
        r.start_ms = t_ms;
        if (pos < cfg.fixed_playtimes_s.size())
            target = cfg.fixed_playtimes_s[pos];
        else if (cfg.playtime)
            target = estimate_playtime(u, itl[pos], *cfg.playtime).sample(rng);
        else
            target = PlaytimeDistribution::geometric(itl[pos].stop_prob, itl[pos].duration_s).sample(rng);
        target = std::min(std::max(target, 0.0), itl[pos].duration_s);
        r.target_playtime_s = target;
        played = 0.0;
        wait = 0.0;
        stall_run = 0.0;
        in_stall = false;
        started = got[pos] >= prefix(pos) - kEps;
        if (started) r.first_frame_ms = prerender ? 0.0 : cfg.render_startup_ms;
    };
    const auto finish_item = [&](std::size_t pos, bool abandoned) {
        auto& r = rec[pos];
        r.end_ms = t_ms;
        r.abandoned = abandoned;
        if (r.played_s > 0.0) prev_quality = r.quality;
    };

    choose_ladder(0);
    got[0] = std::min(item_bytes(itl[0], *rec[0].ladder), u.buffer_s * bps(0));
    begin_item(0);

    bool active = true;
    while (cur < n) {
        if (t_ms >= net.horizon_ms - kEps) {
            tr.truncated = true;
            break;
        }
        if (t_ms / 1000.0 >= cfg.max_session_s - kEps) break;

        const Decision d = decider.decide(state_for(cur));
        if (d.fell_back) ++tr.fallbacks;
        const Action& act = d.action;
        prerender = act.prerender;

        const double raw = net.bytes_between(t_ms, t_ms + step);
        double budget = raw;
        if (cfg.traffic_cap_bytes) budget = std::min(budget, std::max(0.0, *cfg.traffic_cap_bytes - tr.traffic_bytes));

        SlotRecord slot;
        slot.t_ms = t_ms;
        slot.position = cur;
        slot.depth = act.depth;
        slot.cap_bytes = act.cap_bytes;
        slot.prerender = act.prerender;

        double used = 0.0;
        double cur_dl = 0.0;
        const std::size_t last = std::min(n - 1, cur + static_cast<std::size_t>(std::max(act.depth, 0)));
        for (std::size_t pos = cur; pos <= last && used < budget; ++pos) {
            choose_ladder(pos);
            const double full = item_bytes(itl[pos], *rec[pos].ladder);
            const double limit = pos == cur ? full : std::min(act.cap_bytes, full);
            const double take = std::min(std::max(0.0, limit - got[pos]), budget - used);
            got[pos] += take;
            rec[pos].bytes += take;
            used += take;
            if (pos == cur) cur_dl = take;
        }
        tr.traffic_bytes += used;
        slot.downloaded_bytes = used;
        if (used > 0.0) {
            const double measured = raw * 8.0 / (dt * 1000.0);
            if (std::isinf(measured) || std::isinf(est))
                est = measured;
            else
                est = (1.0 - cfg.ewma_weight) * est + cfg.ewma_weight * measured;
        }

        auto& r = rec[cur];
        slot.downloaded_media_s = cur_dl / bps(cur);
        if (!started) {
            if (got[cur] >= prefix(cur) - kEps) {
                started = true;
                r.first_frame_ms = t_ms + step - r.start_ms + (act.prerender ? 0.0 : cfg.render_startup_ms);
                slot.first_frame = true;
                wait = 0.0;
            } else {
                wait += dt;
            }
        } else {
            const double avail = got[cur] / bps(cur) - played;
            const double remaining = target - played;
            const double p = std::max(0.0, std::min({dt, avail, remaining}));
            played += p;
            r.played_s += p;
            slot.played_s = p;
            if (p < dt - kEps && remaining - p > kEps) {
                const double stall = dt - p;
                if (!in_stall) ++r.stall_events;
                in_stall = true;
                stall_run += stall;
                r.stall_s += stall;
                slot.stall_s = stall;
            } else {
                in_stall = false;
                stall_run = 0.0;
            }
        }
        slot.buffer_s = std::max(0.0, got[cur] / bps(cur) - played);
        if (cfg.record_slots) tr.slots.push_back(slot);
        t_ms += step;

        const bool done = started && played >= target - kEps;
        const bool abandon = (!started && wait >= cfg.max_wait_s - kEps) || stall_run >= cfg.max_wait_s - kEps;
        if (done || abandon) {
            finish_item(cur, abandon && !done);
            ++cur;
            if (cur < n)
                begin_item(cur);
            else
                active = false;
        }
    }
    if (active && cur < n) finish_item(cur, false);

    tr.traffic_bytes = 0.0;
    for (auto& r : rec) {
        r.qop = item_qop(r);
        tr.traffic_bytes += r.bytes;
    }
    tr.items = std::move(rec);
    tr.qop = aggregate_qop(tr.items, tr.traffic_bytes);
    return tr;
}

core::QoPVector EstProfitConfig::default_reference() {
    core::QoPVector q;
    q.first_frame_ms = 500.0;
    q.rebuffer_ratio = 0.02;
    q.rebuffer_dur_per_vv_ms = 300.0;
    q.video_quality = 70.0;
    q.fps = 30.0;
    return q;
}

double est_profit(const core::QoPVector& qop, const core::MetricWeights& sens, const EstProfitConfig& cfg) {
    const auto delta = core::qop_delta_to_lt(cfg.reference, qop, cfg.impacts);
    const double lt = core::weighted_relative_lt(delta, sens);
    return cfg.economy.arpu_base * cfg.economy.lt_base * lt - cfg.traffic_price_per_gb * qop.traffic_bytes / 1e9;
}

std::vector<Episode> episodes_from_trace(const SessionTrace& trace, const UserState& u,
                                         const StateBucketing& bucketing, const EstProfitConfig& cfg) {
    std::vector<Episode> out;
    for (const auto& r : trace.items) {
        if (!r.viewed || !r.ladder) continue;
        Episode e;
        e.s = bucketing.bucket(r.decision_buffer_s, r.decision_network, r.decision_portrait);
        e.a = static_cast<int>(*r.ladder);
        e.r = est_profit(r.qop, u.qop_sens, cfg);
        if (!out.empty()) out.back().s_next = e.s;
        out.push_back(e);
    }
    if (!out.empty()) {
        out.back().terminal = true;
        out.back().s_next = out.back().s;
    }
    return out;
}

void write_trace_jsonl(std::ostream& out, const SessionTrace& trace) {
    for (const auto& s : trace.slots) {
        json j{{"type", "slot"},          {"t_ms", s.t_ms},         {"position", s.position},
               {"buffer_s", s.buffer_s},  {"downloaded_bytes", s.downloaded_bytes},
               {"played_s", s.played_s},  {"stall_s", s.stall_s},   {"depth", s.depth},
               {"cap_bytes", s.cap_bytes}, {"prerender", s.prerender}, {"first_frame", s.first_frame}};
        out << j.dump() << '\n';
    }
    for (const auto& r : trace.items) {
        json j{{"type", "item"},         {"position", r.position},     {"item_id", r.item_id},
               {"start_ms", r.start_ms}, {"end_ms", r.end_ms},         {"target_playtime_s", r.target_playtime_s},
               {"played_s", r.played_s}, {"stall_s", r.stall_s},       {"stall_events", r.stall_events},
               {"bytes", r.bytes},       {"viewed", r.viewed},         {"abandoned", r.abandoned}};
        j["ladder"] = r.ladder ? json(*r.ladder) : json(nullptr);
        j["first_frame_ms"] = r.first_frame_ms ? json(*r.first_frame_ms) : json(nullptr);
        out << j.dump() << '\n';
    }
    json s{{"type", "session"}, {"traffic_bytes", trace.traffic_bytes}, {"truncated", trace.truncated},
           {"fallbacks", trace.fallbacks}};
    for (auto m : core::kAllMetrics) s["qop"][std::string(core::metric_name(m))] = trace.qop.get(m);
    out << s.dump() << '\n';
}

void write_episodes_jsonl(std::ostream& out, std::span<const Episode> episodes) {
    for (const auto& e : episodes)
        out << json{{"s", e.s}, {"a", e.a}, {"r", e.r}, {"s_next", e.s_next}, {"terminal", e.terminal}}.dump()
            << '\n';
}

std::vector<Episode> read_episodes_jsonl(std::istream& in) {
    std::vector<Episode> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("s").get<int>(), j.at("a").get<int>(), j.at("r").get<double>(),
                           j.at("s_next").get<int>(), j.value("terminal", false)});
        } catch (const json::exception& e) {
            throw InvalidInput(std::string("bad episode line: ") + e.what());
        }
    }
    return out;
}

} // namespace shortvid::playback
