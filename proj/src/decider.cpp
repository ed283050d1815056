#include "shortvid/decider.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "shortvid/error.hpp"
#include "shortvid/playback_models.hpp"

namespace shortvid::playback {

using nlohmann::json;

LadderFeatures ladder_features(const DeciderState& s, std::size_t ladder, double safety) {
    const Ladder& l = s.item->ladders[ladder];
    LadderFeatures f;
    f.quality = l.quality_score;
    const double horizon = std::max(s.expected_playtime_s, 0.0);
    const double need = std::max(0.0, horizon - s.buffer_s);
    const double bw = s.est_kbps * safety;
    if (std::isinf(bw))
        f.stall_s = 0.0;
    else if (bw <= 0.0)
        f.stall_s = need;
    else
        f.stall_s = std::max(0.0, need * l.bitrate_kbps / bw - horizon);
    f.switch_q = s.prev_quality ? std::abs(l.quality_score - *s.prev_quality) : 0.0;
    f.cost_mb = horizon * l.bitrate_kbps / 8000.0;
    return f;
}

std::vector<double> linear_features(const LadderFeatures& f) {
    return {1.0, f.quality / 100.0, f.stall_s, f.switch_q / 100.0, f.cost_mb};
}

int StateBucketing::state_count() const {
    return static_cast<int>(buffer_edges.size() + 1) * 3 * portrait_buckets;
}

int StateBucketing::bucket(double buffer_s, NetworkClass net, int portrait) const {
    int b = 0;
    while (b < static_cast<int>(buffer_edges.size()) && buffer_s >= buffer_edges[static_cast<std::size_t>(b)]) ++b;
    const int p = std::clamp(portrait, 0, portrait_buckets - 1);
    return (b * 3 + static_cast<int>(net)) * portrait_buckets + p;
}

QTable::QTable(int s, int a)
    : states(s), actions(a), q(static_cast<std::size_t>(s * a), 0.0), visited(static_cast<std::size_t>(s * a), 0) {
    if (s < 1 || a < 1) throw InvalidParameter("Q table needs at least one state and one action");
}

std::optional<int> QTable::best_action(int s) const {
    std::optional<int> best;
    for (int a = 0; a < actions; ++a)
        if (seen(s, a) && (!best || at(s, a) > at(s, *best))) best = a;
    return best;
}

double QTable::max_value(int s) const {
    const auto a = best_action(s);
    return a ? at(s, *a) : 0.0;
}

namespace {

Action rule_action(const RuleParams& p, const DeciderState& s, double (*score)(const RuleParams&,
                                                                             const DeciderState&,
                                                                             const LadderFeatures&)) {
    Action a;
    a.depth = p.depth;
    a.prerender = p.prerender;
    if (s.item == nullptr || s.item->ladders.empty()) return a;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < s.item->ladders.size(); ++l) {
        const double v = score(p, s, ladder_features(s, l, p.safety));
        if (v > best) {
            best = v;
            a.ladder = l;
        }
    }
    a.cap_bytes = p.cap_s * s.item->ladders[a.ladder].bytes_per_second();
    return a;
}

double rule_score(const RuleParams& p, const DeciderState& s, const LadderFeatures& f) {
    double wq = p.quality_w;
    double alpha = p.alpha;
    if (p.personalized && s.qop_sens != nullptr) {
        wq *= (*s.qop_sens)[core::Metric::video_quality];
        alpha *= (*s.qop_sens)[core::Metric::rebuffer_ratio];
    }
    return qoe(wq * f.quality, f.stall_s, f.switch_q, f.cost_mb, alpha, p.beta, p.gamma);
}

} // namespace

Decision Decider::decide(const DeciderState& s) const {
    Decision d;
    switch (kind) {
    case DeciderKind::rule: d.action = rule_action(rule, s, rule_score); break;
    case DeciderKind::linear: {
        d.action = rule_action(rule, s, rule_score);
        if (s.item == nullptr || s.item->ladders.empty()) break;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < s.item->ladders.size(); ++l) {
            const auto x = linear_features(ladder_features(s, l, rule.safety));
            double v = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) v += theta[j] * x[j];
            if (v > best) {
                best = v;
                d.action.ladder = l;
            }
        }
        d.action.cap_bytes = rule.cap_s * s.item->ladders[d.action.ladder].bytes_per_second();
        break;
    }
    case DeciderKind::tabular_q: {
        d.action = rule_action(rule, s, rule_score);
        const int state = bucketing.bucket(s.buffer_s, s.network, s.portrait);
        const auto best = q.best_action(state);
        if (!best) {
            d.fell_back = true;
            break;
        }
        if (s.item != nullptr && !s.item->ladders.empty()) {
            d.action.ladder = std::min<std::size_t>(static_cast<std::size_t>(*best), s.item->ladders.size() - 1);
            d.action.cap_bytes = rule.cap_s * s.item->ladders[d.action.ladder].bytes_per_second();
        }
        break;
    }
    }
    return d;
}

void Decider::validate() const {
    if (rule.alpha < 0 || rule.beta < 0 || rule.gamma < 0 || rule.quality_w < 0)
        throw InvalidParameter("rule weights must be >= 0");
    if (!(rule.safety > 0.0)) throw InvalidParameter("bandwidth safety factor must be > 0");
    if (rule.depth < 0 || !(rule.cap_s >= 0.0)) throw InvalidParameter("pre-download depth and cap must be >= 0");
    if (kind == DeciderKind::linear) {
        if (theta.size() != kLinearFeatureCount) throw InvalidParameter("linear decider needs 5 weights");
        for (double t : theta)
            if (!std::isfinite(t)) throw InvalidParameter("linear decider weights must be finite");
    }
    if (kind == DeciderKind::tabular_q) {
        if (bucketing.portrait_buckets < 1) throw InvalidParameter("need at least one portrait bucket");
        for (std::size_t i = 1; i < bucketing.buffer_edges.size(); ++i)
            if (!(bucketing.buffer_edges[i] > bucketing.buffer_edges[i - 1]))
                throw InvalidParameter("buffer bucket edges must increase");
        if (q.states != bucketing.state_count()) throw InvalidParameter("Q table does not match the bucketing");
    }
}

Decider make_rule_decider(const RuleParams& p, std::string name) {
    Decider d;
    d.kind = DeciderKind::rule;
    d.rule = p;
    d.name = std::move(name);
    d.validate();
    return d;
}

std::string to_string(DeciderKind k) {
    switch (k) {
    case DeciderKind::rule: return "rule";
    case DeciderKind::linear: return "linear";
    case DeciderKind::tabular_q: return "tabular_q";
    }
    return "?";
}

namespace {
constexpr int kDeciderVersion = 1;
}

std::string decider_to_json(const Decider& d) {
    json j;
    j["version"] = kDeciderVersion;
    j["kind"] = to_string(d.kind);
    j["name"] = d.name;
    j["rule"] = {{"quality_w", d.rule.quality_w}, {"alpha", d.rule.alpha},   {"beta", d.rule.beta},
                 {"gamma", d.rule.gamma},         {"personalized", d.rule.personalized},
                 {"safety", d.rule.safety},       {"depth", d.rule.depth},   {"cap_s", d.rule.cap_s},
                 {"prerender", d.rule.prerender}};
    if (d.kind == DeciderKind::linear) j["theta"] = d.theta;
    if (d.kind == DeciderKind::tabular_q) {
        j["bucketing"] = {{"buffer_edges", d.bucketing.buffer_edges},
                          {"portrait_buckets", d.bucketing.portrait_buckets}};
        j["q"] = {{"states", d.q.states}, {"actions", d.q.actions}, {"values", d.q.q}, {"visited", d.q.visited}};
    }
    return j.dump(2);
}

Decider decider_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.at("version").get<int>() != kDeciderVersion) throw ConfigError("unsupported decider version");
        Decider d;
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "rule")
            d.kind = DeciderKind::rule;
        else if (kind == "linear")
            d.kind = DeciderKind::linear;
        else if (kind == "tabular_q")
            d.kind = DeciderKind::tabular_q;
        else
            throw ConfigError("unknown decider kind '" + kind + "'");
        d.name = j.value("name", kind);
        if (j.contains("rule")) {
            const auto& r = j["rule"];
            d.rule.quality_w = r.value("quality_w", d.rule.quality_w);
            d.rule.alpha = r.value("alpha", d.rule.alpha);
            d.rule.beta = r.value("beta", d.rule.beta);
            d.rule.gamma = r.value("gamma", d.rule.gamma);
            d.rule.personalized = r.value("personalized", d.rule.personalized);
            d.rule.safety = r.value("safety", d.rule.safety);
            d.rule.depth = r.value("depth", d.rule.depth);
            d.rule.cap_s = r.value("cap_s", d.rule.cap_s);
            d.rule.prerender = r.value("prerender", d.rule.prerender);
        }
        if (d.kind == DeciderKind::linear) d.theta = j.at("theta").get<std::vector<double>>();
        if (d.kind == DeciderKind::tabular_q) {
            d.bucketing.buffer_edges = j.at("bucketing").at("buffer_edges").get<std::vector<double>>();
            d.bucketing.portrait_buckets = j.at("bucketing").at("portrait_buckets").get<int>();
            const auto& q = j.at("q");
            d.q = QTable(q.at("states").get<int>(), q.at("actions").get<int>());
            d.q.q = q.at("values").get<std::vector<double>>();
            d.q.visited = q.at("visited").get<std::vector<unsigned char>>();
            if (d.q.q.size() != static_cast<std::size_t>(d.q.states * d.q.actions) || d.q.visited.size() != d.q.q.size())
                throw ConfigError("Q table size does not match states x actions");
        }
        d.validate();
        return d;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad decider document: ") + e.what());
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("bad decider document: ") + e.what());
    }
}

} // namespace shortvid::playback
