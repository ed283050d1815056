#include "shortvid/playback_models.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "shortvid/error.hpp"

namespace shortvid::playback {

void ActionMatrix::add(const ActionEntry& e) {
    for (const auto& x : entries_)
        if (x.module == e.module && x.implementation == e.implementation && x.resource == e.resource)
            throw InvalidInput("duplicate (module, implementation, resource) in action matrix");
    if (!std::isfinite(e.qop_impact) || !std::isfinite(e.usage)) throw InvalidInput("action entry must be finite");
    entries_.push_back(e);
}

void ActionMatrix::add(int module, int implementation, int resource, double usage,
                       const std::vector<std::pair<core::Metric, double>>& changes_pct,
                       const core::ImpactTable& impacts) {
    add(ActionEntry{module, implementation, resource, usage, core::lt_equivalent(changes_pct, impacts)});
}

std::vector<ActionEntry> top_k_actions(const ActionMatrix& matrix, std::size_t k) {
    if (k < 1) throw InvalidParameter("k must be >= 1");
    std::vector<ActionEntry> out = matrix.entries();
    const auto key = [](const ActionEntry& e) { return std::tuple(e.module, e.implementation, e.resource); };
    std::stable_sort(out.begin(), out.end(), [&](const ActionEntry& a, const ActionEntry& b) {
        const double ia = std::abs(a.qop_impact);
        const double ib = std::abs(b.qop_impact);
        if (ia != ib) return ia > ib;
        return key(a) < key(b);
    });
    if (out.size() > k) out.resize(k);
    return out;
}

PlaytimeDistribution PlaytimeDistribution::point(double s) {
    PlaytimeDistribution d;
    d.kind = Kind::point;
    d.value = s;
    d.validate();
    return d;
}

PlaytimeDistribution PlaytimeDistribution::geometric(double stop_prob, double cap_s) {
    PlaytimeDistribution d;
    d.kind = Kind::geometric;
    d.stop_prob = stop_prob;
    d.cap_s = cap_s;
    d.validate();
    return d;
}

PlaytimeDistribution PlaytimeDistribution::empirical(std::vector<double> samples) {
    PlaytimeDistribution d;
    d.kind = Kind::empirical;
    d.samples = std::move(samples);
    d.validate();
    return d;
}

void PlaytimeDistribution::validate() const {
    switch (kind) {
    case Kind::point:
        if (!(value >= 0.0) || !std::isfinite(value)) throw InvalidParameter("playtime must be finite and >= 0");
        break;
    case Kind::geometric:
        if (!(stop_prob > 0.0 && stop_prob <= 1.0)) throw InvalidParameter("stop probability must lie in (0,1]");
        if (!(cap_s >= 0.0) || !std::isfinite(cap_s)) throw InvalidParameter("playtime cap must be finite and >= 0");
        break;
    case Kind::empirical:
        if (samples.empty()) throw InvalidInput("empirical playtime needs samples");
        for (double s : samples)
            if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidInput("playtime samples must be finite and >= 0");
        break;
    }
}

double PlaytimeDistribution::mean() const {
    switch (kind) {
    case Kind::point: return value;
    case Kind::geometric: {
        // E[min(K, D)] = sum_{k=1}^{floor D} P(K >= k) + (D - floor D) P(K >= floor D + 1)
        const double q = 1.0 - stop_prob;
        const double whole = std::floor(cap_s);
        const auto n = static_cast<long>(whole);
        double total = 0.0;
        double qk = 1.0;
        for (long k = 1; k <= n; ++k) {
            qk *= q;
            total += qk;
        }
        return total + (cap_s - whole) * qk * q;
    }
    case Kind::empirical: {
        double s = 0.0;
        for (double x : samples) s += x;
        return s / static_cast<double>(samples.size());
    }
    }
    return 0.0;
}

double PlaytimeDistribution::sample(Rng& rng) const {
    switch (kind) {
    case Kind::point: return value;
    case Kind::geometric: return std::min(static_cast<double>(geometric_failures(rng, stop_prob)), cap_s);
    case Kind::empirical: return samples[uniform_index(rng, samples.size())];
    }
    return 0.0;
}

void PlaytimeModel::validate() const {
    double total = 0.0;
    for (double a : alphas) {
        if (!(a >= 0.0)) throw InvalidParameter("playtime alphas must be >= 0");
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidParameter("playtime alphas must sum to 1");
    for (const auto& [k, d] : bucket_dist) d.validate();
    for (const auto& [k, d] : item_dist) d.validate();
    for (const auto& [k, d] : user_dist) d.validate();
}

double PlaytimeEstimate::sample(Rng& rng) const {
    double u = uniform01(rng);
    for (std::size_t c = 0; c < 3; ++c) {
        if (weights[c] <= 0.0) continue;
        if (u < weights[c]) return components[c]->sample(rng);
        u -= weights[c];
    }
    for (std::size_t c = 3; c-- > 0;)
        if (weights[c] > 0.0) return components[c]->sample(rng);
    return components[0]->sample(rng);
}

PlaytimeEstimate estimate_playtime(const UserState& u, const Item& i, const PlaytimeModel& m) {
    m.validate();
    const auto b = m.bucket_dist.find(i.duration_bucket);
    if (b == m.bucket_dist.end())
        throw InvalidInput("item " + std::to_string(i.id) + " maps to no configured duration bucket");
    PlaytimeEstimate est;
    est.components = {&b->second, nullptr, nullptr};
    est.weights = m.alphas;
    if (auto it = m.item_dist.find(i.id); it != m.item_dist.end())
        est.components[1] = &it->second;
    else {
        est.weights[0] += est.weights[1];
        est.weights[1] = 0.0;
    }
    if (auto it = m.user_dist.find(u.id); it != m.user_dist.end())
        est.components[2] = &it->second;
    else {
        est.weights[0] += est.weights[2];
        est.weights[2] = 0.0;
    }
    for (std::size_t c = 0; c < 3; ++c)
        if (est.weights[c] > 0.0) est.mean += est.weights[c] * est.components[c]->mean();
    return est;
}

double LinearOutcome::eval(const std::vector<double>& x) const {
    if (x.size() != weights.size()) throw InvalidInput("feature length does not match the outcome model");
    double s = bias;
    for (std::size_t j = 0; j < x.size(); ++j) s += weights[j] * x[j];
    return s;
}

void UpliftPortraitModel::validate() const {
    if (thresholds.empty()) throw InvalidParameter("uplift model needs at least one threshold");
    for (std::size_t j = 1; j < thresholds.size(); ++j)
        if (!(thresholds[j] > thresholds[j - 1])) throw InvalidParameter("uplift thresholds must strictly increase");
}

double UpliftPortraitModel::uplift(const std::vector<double>& features) const {
    return treatment.eval(features) - control.eval(features);
}

int uplift_bucket(const std::vector<double>& features, const UpliftPortraitModel& model) {
    model.validate();
    const double up = model.uplift(features);
    for (std::size_t j = 0; j < model.thresholds.size(); ++j)
        if (up <= model.thresholds[j]) return static_cast<int>(j) + 1;
    return static_cast<int>(model.thresholds.size()) + 1;
}

double qoe(double quality, double block_dur, double quality_switch, double cost, double alpha, double beta,
           double gamma) {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) throw InvalidParameter("QoE weights must be >= 0");
    return quality - alpha * block_dur - beta * quality_switch - gamma * cost;
}

} // namespace shortvid::playback
