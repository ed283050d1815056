#include "shortvid/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "shortvid/error.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::workload {

using playback::ResolutionClass;

CatalogSpec CatalogSpec::defaults() {
    const std::vector<LadderTemplate> ladders{
        {500.0, 55.0, ResolutionClass::p360, 1500.0},
        {900.0, 65.0, ResolutionClass::p540, 1800.0},
        {1600.0, 75.0, ResolutionClass::p720, 2200.0},
        {3000.0, 85.0, ResolutionClass::p1080, 2800.0},
    };
    CatalogSpec spec;
    spec.buckets = {
        {5.0, 15.0, 0.40, 0.05, 0.15, ladders},
        {15.0, 60.0, 0.45, 0.03, 0.08, ladders},
        {60.0, 180.0, 0.15, 0.01, 0.04, ladders},
    };
    return spec;
}

void CatalogSpec::validate() const {
    if (item_count == 0) throw InvalidParameter("catalog needs at least one item");
    if (zipf_exponent && !(*zipf_exponent >= 0.0)) throw InvalidParameter("zipf exponent must be >= 0");
    if (!(top_fraction > 0.0 && top_fraction < 1.0)) throw InvalidParameter("top fraction must lie in (0,1)");
    if (!(target_top_mass > 0.0 && target_top_mass < 1.0)) throw InvalidParameter("target mass must lie in (0,1)");
    if (buckets.empty()) throw InvalidParameter("catalog needs at least one duration bucket");
    double total = 0.0;
    for (const auto& b : buckets) {
        if (!(b.min_s > 0.0 && b.max_s >= b.min_s)) throw InvalidParameter("bad duration bucket bounds");
        if (!(b.weight >= 0.0)) throw InvalidParameter("bucket weights must be >= 0");
        if (!(b.stop_prob_lo > 0.0 && b.stop_prob_hi >= b.stop_prob_lo && b.stop_prob_hi <= 1.0))
            throw InvalidParameter("bad stop probability range");
        if (b.ladders.empty()) throw InvalidParameter("bucket needs a ladder template");
        total += b.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidParameter("duration-bucket mixture must sum to 1");
    if (categories < 1) throw InvalidParameter("categories must be >= 1");
}

double zipf_top_mass(std::size_t n, double s, double fraction) {
    if (n == 0) throw InvalidParameter("zipf needs n >= 1");
    const auto top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
    double head = 0.0;
    double total = 0.0;
    for (std::size_t r = 1; r <= n; ++r) {
        const double w = std::pow(static_cast<double>(r), -s);
        total += w;
        if (r <= top) head += w;
    }
    return head / total;
}

double solve_zipf_exponent(std::size_t n, double target, double fraction) {
    double lo = 0.0;
    double hi = 8.0;
    if (zipf_top_mass(n, hi, fraction) < target) throw InvalidParameter("target concentration unreachable");
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (zipf_top_mass(n, mid, fraction) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

Catalog generate_catalog(const CatalogSpec& spec, std::uint64_t seed) {
    spec.validate();
    Catalog cat;
    const std::size_t n = spec.item_count;
    if (spec.zipf_exponent) {
        cat.exponent = *spec.zipf_exponent;
    } else if (n < 1000) {
        cat.exponent = 1.0;
        cat.warnings.push_back("catalog below 1000 items: exponent left uncalibrated at 1.0");
    } else {
        cat.exponent = solve_zipf_exponent(n, spec.target_top_mass, spec.top_fraction);
        cat.calibrated = true;
    }

    Rng rng(derive_seed(seed, 0xca7a));
    std::vector<double> weights(n);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        weights[r] = std::pow(static_cast<double>(r + 1), -cat.exponent);
        total += weights[r];
    }
    // Random rank per item so that ids carry no popularity information.
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(rank[i - 1], rank[uniform_index(rng, i)]);

    std::vector<double> cdf;
    for (const auto& b : spec.buckets) cdf.push_back((cdf.empty() ? 0.0 : cdf.back()) + b.weight);

    cat.items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        playback::Item item;
        item.id = i;
        item.popularity_weight = weights[rank[i]] / total;
        const double u = uniform01(rng);
        std::size_t b = 0;
        while (b + 1 < cdf.size() && u >= cdf[b]) ++b;
        const auto& bucket = spec.buckets[b];
        item.duration_bucket = static_cast<int>(b);
        item.duration_s = uniform(rng, bucket.min_s, bucket.max_s);
        item.stop_prob = uniform(rng, bucket.stop_prob_lo, bucket.stop_prob_hi);
        item.category = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.categories)));
        for (std::size_t l = 0; l < bucket.ladders.size(); ++l) {
            const auto& t = bucket.ladders[l];
            playback::Ladder ladder;
            ladder.index = static_cast<int>(l);
            ladder.bitrate_kbps = t.bitrate_kbps;
            ladder.quality_score = t.quality_score;
            ladder.resolution = t.resolution;
            ladder.meta_bytes = t.meta_bytes;
            ladder.file_bytes = t.bitrate_kbps * 1000.0 / 8.0 * item.duration_s;
            item.ladders.ladders.push_back(ladder);
        }
        cat.items.push_back(std::move(item));
    }

    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = cat.items[i].popularity_weight;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(spec.top_fraction * static_cast<double>(n))));
    cat.top_mass = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top), 0.0);
    return cat;
}

double sample_watch_time(const playback::Item& item, Rng& rng) {
    const auto k = geometric_failures(rng, item.stop_prob);
    return std::min(static_cast<double>(k), item.duration_s);
}

void WaveformSpec::validate() const {
    if (days < 1 || slots_per_day < 1) throw InvalidParameter("waveform needs days >= 1 and slots_per_day >= 1");
    if (!(slot_seconds > 0.0)) throw InvalidParameter("slot length must be > 0");
    if (!(base_mbps >= 0.0)) throw InvalidParameter("base bandwidth must be >= 0");
    if (!daily_shape.empty() && daily_shape.size() != static_cast<std::size_t>(slots_per_day))
        throw InvalidParameter("daily shape length must equal slots_per_day");
    for (double v : daily_shape)
        if (!(v >= 0.0)) throw InvalidParameter("daily shape must be nonnegative");
    if (!(noise >= 0.0 && noise < 1.0)) throw InvalidParameter("noise must lie in [0,1)");
}

std::vector<double> diurnal_shape(int slots_per_day, double valley_ratio, double peak_hour, double peak_width_h) {
    std::vector<double> shape(static_cast<std::size_t>(slots_per_day));
    for (int s = 0; s < slots_per_day; ++s) {
        const double hour = 24.0 * (s + 0.5) / slots_per_day;
        double d = std::abs(hour - peak_hour);
        d = std::min(d, 24.0 - d);
        const double bump = std::exp(-0.5 * (d / peak_width_h) * (d / peak_width_h));
        shape[static_cast<std::size_t>(s)] = valley_ratio + (1.0 - valley_ratio) * bump;
    }
    return shape;
}

BandwidthWaveform generate_waveform(const WaveformSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto shape = spec.daily_shape.empty()
                           ? diurnal_shape(spec.slots_per_day, spec.valley_ratio, spec.peak_hour, spec.peak_width_h)
                           : spec.daily_shape;
    BandwidthWaveform wf;
    wf.days = spec.days;
    wf.slots_per_day = spec.slots_per_day;
    wf.slot_seconds = spec.slot_seconds;
    wf.mbps.resize(static_cast<std::size_t>(spec.days) * static_cast<std::size_t>(spec.slots_per_day));
    Rng rng(derive_seed(seed, 0x3a7e));
    for (std::size_t t = 0; t < wf.mbps.size(); ++t) {
        const double factor = spec.noise > 0.0 ? uniform(rng, 1.0 - spec.noise, 1.0 + spec.noise) : 1.0;
        wf.mbps[t] = spec.base_mbps * shape[t % static_cast<std::size_t>(spec.slots_per_day)] * factor;
    }
    return wf;
}

PopulationSpec PopulationSpec::defaults() {
    using core::Metric;
    PopulationSpec spec;
    PortraitClass rebuffer{"rebuffer_sensitive", 0.5, {}};
    rebuffer.sensitivity[Metric::rebuffer_ratio] = 3.0;
    rebuffer.sensitivity[Metric::rebuffer_dur_per_vv_ms] = 3.0;
    rebuffer.sensitivity[Metric::first_frame_ms] = 2.0;
    rebuffer.sensitivity[Metric::video_quality] = 0.3;
    PortraitClass quality{"quality_sensitive", 0.5, {}};
    quality.sensitivity[Metric::rebuffer_ratio] = 0.3;
    quality.sensitivity[Metric::rebuffer_dur_per_vv_ms] = 0.3;
    quality.sensitivity[Metric::first_frame_ms] = 0.5;
    quality.sensitivity[Metric::video_quality] = 3.0;
    spec.portraits = {rebuffer, quality};
    return spec;
}

void PopulationSpec::validate() const {
    if (user_count == 0) throw InvalidParameter("population needs at least one user");
    if (!(device_lo >= 0.0 && device_hi <= 1.0 && device_lo <= device_hi))
        throw InvalidParameter("device score range must lie in [0,1]");
    if (portraits.empty()) throw InvalidParameter("population needs at least one portrait class");
    double total = 0.0;
    for (const auto& p : portraits) {
        if (!(p.weight >= 0.0)) throw InvalidParameter("portrait weights must be >= 0");
        total += p.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidParameter("portrait mixture must sum to 1");
    const double net = network_mix[0] + network_mix[1] + network_mix[2];
    if (std::abs(net - 1.0) > 1e-9) throw InvalidParameter("network mixture must sum to 1");
}

std::vector<playback::UserState> generate_population(const PopulationSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, 0x9090));
    std::vector<playback::UserState> users(spec.user_count);
    for (std::size_t i = 0; i < users.size(); ++i) {
        auto& u = users[i];
        u.id = i;
        u.device_score = uniform(rng, spec.device_lo, spec.device_hi);
        double pick = uniform01(rng);
        std::size_t cls = 0;
        while (cls + 1 < spec.portraits.size() && pick >= spec.portraits[cls].weight) {
            pick -= spec.portraits[cls].weight;
            ++cls;
        }
        u.portraits["sensitivity"] = static_cast<int>(cls);
        u.qop_sens = spec.portraits[cls].sensitivity;
        double net = uniform01(rng);
        if (net < spec.network_mix[0])
            u.context.network = playback::NetworkClass::poor;
        else if (net < spec.network_mix[0] + spec.network_mix[1])
            u.context.network = playback::NetworkClass::fair;
        else
            u.context.network = playback::NetworkClass::good;
        u.context.hour = static_cast<int>(uniform_index(rng, 24));
        u.network_trace_id = std::string(playback::to_string(u.context.network));
    }
    return users;
}

void NetworkTraceSpec::validate() const {
    if (!(duration_s > 0.0 && step_s > 0.0)) throw InvalidParameter("trace duration and step must be > 0");
    for (double m : mean_kbps)
        if (!(m > 0.0)) throw InvalidParameter("class mean bandwidth must be > 0");
    for (double p : outage_prob)
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("outage probability must lie in [0,1]");
    if (!(log_sigma >= 0.0)) throw InvalidParameter("log sigma must be >= 0");
    if (!(ar >= 0.0 && ar < 1.0)) throw InvalidParameter("ar coefficient must lie in [0,1)");
    if (!(outage_s >= 0.0 && outage_kbps >= 0.0)) throw InvalidParameter("bad outage parameters");
}

playback::NetworkTrace generate_network_trace(playback::NetworkClass cls, const NetworkTraceSpec& spec,
                                              std::uint64_t seed) {
    spec.validate();
    const auto c = static_cast<std::size_t>(cls);
    Rng rng(derive_seed(seed, 0x7ace + c));
    const double mu = std::log(spec.mean_kbps[c]) - 0.5 * spec.log_sigma * spec.log_sigma;
    const double innov = spec.log_sigma * std::sqrt(1.0 - spec.ar * spec.ar);
    const auto steps = static_cast<std::size_t>(std::ceil(spec.duration_s / spec.step_s));
    std::vector<double> t, kbps;
    double x = spec.log_sigma * standard_normal(rng);
    double outage_left = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        x = spec.ar * x + innov * standard_normal(rng);
        if (outage_left <= 0.0 && bernoulli(rng, spec.outage_prob[c])) outage_left = spec.outage_s;
        t.push_back(static_cast<double>(i) * spec.step_s * 1000.0);
        if (outage_left > 0.0) {
            kbps.push_back(spec.outage_kbps);
            outage_left -= spec.step_s;
        } else {
            kbps.push_back(std::exp(mu + x));
        }
    }
    return playback::NetworkTrace::from_rows(std::move(t), std::move(kbps));
}

} // namespace shortvid::workload
