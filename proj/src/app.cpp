#include "shortvid/app.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "shortvid/cdn.hpp"
#include "shortvid/core_model.hpp"
#include "shortvid/delivery.hpp"
#include "shortvid/error.hpp"
#include "shortvid/experiment.hpp"
#include "shortvid/population.hpp"
#include "shortvid/publish.hpp"
#include "shortvid/rng.hpp"
#include "shortvid/uiae.hpp"
#include "shortvid/workload.hpp"

namespace shortvid::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Typed lookup with a default; wrong types surface as ConfigError naming the key.
template <class T>
T opt(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

const json& section(const json& cfg, const char* name) {
    static const json empty = json::object();
    if (!cfg.contains(name)) return empty;
    const auto& s = cfg.at(name);
    if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
    return s;
}

std::size_t count_of(const json& j, const char* key, std::size_t fallback) {
    const auto v = opt<double>(j, key, static_cast<double>(fallback));
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError(std::string("config key '") + key + "' must be a count");
    return static_cast<std::size_t>(v);
}

core::EconomyParams economy_of(const json& cfg) {
    const auto& e = section(cfg, "economy");
    core::EconomyParams p;
    p.lt_base = opt(e, "lt_base", p.lt_base);
    p.arpu_base = opt(e, "arpu_base", p.arpu_base);
    p.roi_gamma = opt(e, "roi_gamma", p.roi_gamma);
    p.discount_rate = opt(e, "discount_rate", p.discount_rate);
    try {
        p.validate();
    } catch (const InvalidParameter& ex) {
        throw ConfigError(std::string("economy: ") + ex.what());
    }
    return p;
}

core::ImpactTable impacts_of(const Scenario& s) {
    auto t = core::ImpactTable::defaults();
    if (!s.config.contains("impacts")) return t;
    json j = s.config.at("impacts");
    if (j.is_string()) {
        fs::path p = j.get<std::string>();
        if (p.is_relative()) p = fs::path(s.base_dir) / p;
        try {
            j = json::parse(read_file(p.string()));
        } catch (const json::parse_error& e) {
            throw ConfigError("impact table " + p.string() + ": " + e.what());
        }
    }
    if (!j.is_object()) throw ConfigError("impacts must be an object or a file name");
    for (const auto& [name, entry] : j.items()) {
        const auto m = core::metric_from_name(name);
        if (!m) throw ConfigError("impact table names unknown metric " + name);
        auto& e = t[*m];
        e.coefficient = opt(entry, "coefficient_pct", e.coefficient * 100.0) / 100.0;
        e.direction = opt(entry, "direction", e.direction);
        e.available = opt(entry, "available", e.available);
    }
    try {
        t.validate();
    } catch (const InvalidParameter& ex) {
        throw ConfigError(std::string("impacts: ") + ex.what());
    }
    return t;
}

json profit_json(const core::ProfitBreakdown& p) {
    return {{"delta_lt", p.delta_lt},   {"delta_arpu", p.delta_arpu},
            {"delta_cost", p.delta_cost}, {"profit", p.profit},
            {"roi", p.roi ? json(*p.roi) : json(nullptr)}, {"passes_gate", p.passes_gate}};
}

json qop_json(const core::QoPVector& q) {
    json j = json::object();
    for (auto m : core::kAllMetrics) j[std::string(core::metric_name(m))] = q.get(m);
    return j;
}

workload::Catalog catalog_of(const json& cfg, std::uint64_t seed) {
    const auto& c = section(section(cfg, "workload"), "catalog");
    auto spec = workload::CatalogSpec::defaults();
    spec.item_count = count_of(c, "items", spec.item_count);
    spec.top_fraction = opt(c, "top_fraction", spec.top_fraction);
    spec.target_top_mass = opt(c, "target_top_mass", spec.target_top_mass);
    if (c.contains("zipf_exponent")) spec.zipf_exponent = opt(c, "zipf_exponent", 1.0);
    return workload::generate_catalog(spec, derive_seed(seed, 11));
}

workload::WaveformSpec waveform_of(const json& cfg) {
    const auto& w = section(section(cfg, "workload"), "waveform");
    workload::WaveformSpec spec;
    spec.days = opt(w, "days", spec.days);
    spec.slots_per_day = opt(w, "slots_per_day", spec.slots_per_day);
    spec.slot_seconds = opt(w, "slot_seconds", spec.slot_seconds);
    spec.base_mbps = opt(w, "base_mbps", spec.base_mbps);
    spec.valley_ratio = opt(w, "valley_ratio", spec.valley_ratio);
    spec.peak_hour = opt(w, "peak_hour", spec.peak_hour);
    spec.peak_width_h = opt(w, "peak_width_h", spec.peak_width_h);
    spec.noise = opt(w, "noise", spec.noise);
    return spec;
}

playback::RuleParams rule_of(const json& j, playback::RuleParams p) {
    p.quality_w = opt(j, "quality_w", p.quality_w);
    p.alpha = opt(j, "alpha", p.alpha);
    p.beta = opt(j, "beta", p.beta);
    p.gamma = opt(j, "gamma", p.gamma);
    p.personalized = opt(j, "personalized", p.personalized);
    p.safety = opt(j, "safety", p.safety);
    p.depth = opt(j, "depth", p.depth);
    p.cap_s = opt(j, "cap_s", p.cap_s);
    p.prerender = opt(j, "prerender", p.prerender);
    return p;
}

// ---- playback ----

json decider_summary(const playback::Decider& d, const playback::PopulationRun& r) {
    return {{"decider", d.name},
            {"personalized", d.rule.personalized},
            {"gamma", d.rule.gamma},
            {"mean_est_profit", r.mean_profit},
            {"mean_traffic_bytes", r.mean_traffic_bytes},
            {"mean_qop", qop_json(playback::mean_qop(r))}};
}

json run_playback(const Scenario& s, RunOutput& out) {
    const auto& cfg = s.config;
    const auto& pb = section(cfg, "playback");
    const auto& wl = section(cfg, "workload");
    const auto cat = catalog_of(cfg, s.seed);

    auto pspec = workload::PopulationSpec::defaults();
    const auto& pop = section(wl, "population");
    pspec.user_count = count_of(pop, "users", 200);
    pspec.network_mix = opt(pop, "network_mix", pspec.network_mix);
    const auto users = workload::generate_population(pspec, derive_seed(s.seed, 12));

    playback::PopulationRunConfig rc;
    rc.seed = derive_seed(s.seed, 13);
    rc.feed_length = count_of(pb, "feed_length", rc.feed_length);
    rc.profit.impacts = impacts_of(s);
    rc.profit.economy = economy_of(cfg);
    rc.profit.traffic_price_per_gb = opt(pb, "traffic_price_per_gb", 0.0);
    const auto& tr = section(wl, "traces");
    rc.traces.duration_s = opt(tr, "duration_s", rc.traces.duration_s);
    rc.traces.mean_kbps = opt(tr, "mean_kbps", rc.traces.mean_kbps);
    rc.traces.outage_prob = opt(tr, "outage_prob", rc.traces.outage_prob);

    playback::RuleParams base_p = rule_of(section(pb, "baseline"), {});
    playback::RuleParams cand_p = base_p;
    cand_p.personalized = true;
    cand_p = rule_of(section(pb, "candidate"), cand_p);
    const auto base = playback::make_rule_decider(base_p, "fixed_qoe");
    const auto cand = playback::make_rule_decider(cand_p, "sensitivity_aware");

    const double tol = opt(pb, "match_tolerance", 0.01);
    const auto cmp = playback::compare_at_equal_traffic(base, cand, users, cat.items, rc, tol);
    auto tuned = cand;
    tuned.rule.gamma = cmp.candidate_gamma;

    json by_portrait = json::array();
    for (std::size_t k = 0; k < pspec.portraits.size(); ++k) {
        double b = 0.0, c = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < users.size(); ++i)
            if (cmp.baseline.users[i].portrait == static_cast<int>(k)) {
                b += cmp.baseline.users[i].est_profit;
                c += cmp.candidate.users[i].est_profit;
                ++n;
            }
        by_portrait.push_back({{"portrait", pspec.portraits[k].name},
                               {"users", n},
                               {"baseline_mean_est_profit", n ? b / static_cast<double>(n) : 0.0},
                               {"candidate_mean_est_profit", n ? c / static_cast<double>(n) : 0.0}});
    }

    Csv csv;
    csv.header = {"user", "portrait", "baseline_est_profit", "candidate_est_profit", "baseline_traffic_bytes",
                  "candidate_traffic_bytes"};
    for (std::size_t i = 0; i < users.size(); ++i)
        csv.rows.push_back({static_cast<double>(users[i].id), static_cast<double>(cmp.baseline.users[i].portrait),
                            cmp.baseline.users[i].est_profit, cmp.candidate.users[i].est_profit,
                            cmp.baseline.users[i].traffic_bytes, cmp.candidate.users[i].traffic_bytes});
    out.series["playback_users"] = std::move(csv);

    const auto econ = economy_of(cfg);
    const double uplift = cmp.candidate.mean_profit - cmp.baseline.mean_profit;
    const double delta_lt = econ.arpu_base > 0.0 ? uplift / econ.arpu_base : 0.0;
    return {{"users", users.size()},
            {"catalog_items", cat.items.size()},
            {"catalog_top_mass", cat.top_mass},
            {"baseline", decider_summary(base, cmp.baseline)},
            {"candidate", decider_summary(tuned, cmp.candidate)},
            {"traffic_gap", cmp.traffic_gap},
            {"traffic_matched", cmp.matched},
            {"matching_runs", cmp.evaluations},
            {"mixed_users", cmp.mixed_users},
            {"mixed_gamma", cmp.mixed_gamma},
            {"est_profit_uplift", uplift},
            {"by_portrait", by_portrait},
            {"profit", profit_json(core::profit(delta_lt, 0.0, 0.0, econ))}};
}

// ---- cdn ----

std::vector<cdn::VendorState> vendors_of(const json& j) {
    if (!j.is_array() || j.empty()) throw ConfigError("cdn.vendors must be a nonempty array");
    std::vector<cdn::VendorState> v;
    for (const auto& e : j) {
        cdn::VendorState x;
        x.id = static_cast<int>(v.size());
        x.name = opt<std::string>(e, "name", "vendor" + std::to_string(x.id));
        x.unit_price = opt(e, "unit_price", x.unit_price);
        x.target_share = opt(e, "share", x.target_share);
        x.capacity_mbps = opt(e, "capacity_mbps", x.capacity_mbps);
        x.nominal_speed_kbps = opt(e, "speed_kbps", x.nominal_speed_kbps);
        v.push_back(std::move(x));
    }
    try {
        cdn::validate_vendors(v);
    } catch (const InvalidParameter& ex) {
        throw ConfigError(std::string("cdn.vendors: ") + ex.what());
    }
    return v;
}

json bill_json(const cdn::Bill& b) { return {{"peak_mbps", b.peak_mbps}, {"amount", b.amount}, {"total", b.total}}; }

cdn::Bill bill_for(std::vector<cdn::VendorState> vendors, const std::vector<std::vector<double>>& load) {
    for (std::size_t j = 0; j < vendors.size(); ++j) vendors[j].edge_mbps = load[j];
    return cdn::cost_95peak(vendors);
}

json run_cdn(const Scenario& s, RunOutput& out) {
    const auto& c = section(s.config, "cdn");
    const auto vendors = vendors_of(c.contains("vendors") ? c.at("vendors") : json());
    const auto wave = workload::generate_waveform(waveform_of(s.config), derive_seed(s.seed, 21));

    cdn::StaggerConfig sc;
    sc.slots_per_day = wave.slots_per_day;
    const auto modes = opt<std::vector<std::string>>(c, "stagger_modes", {"phase_shift", "complementary_shift",
                                                                          "cross_day_shift"});
    const auto proportional = cdn::proportional_loads(wave.mbps, vendors);
    const auto base_bill = bill_for(vendors, proportional);
    json plans = json::array();
    std::optional<cdn::PeakPlan> best;
    for (const auto& name : modes) {
        const auto plan = cdn::stagger_peaks(wave.mbps, vendors, cdn::stagger_mode_from_name(name), sc);
        const auto bill = bill_for(vendors, plan.load);
        plans.push_back({{"mode", name},
                         {"srr", plan.srr},
                         {"baseline_srr", plan.baseline_srr},
                         {"lambda", plan.lambda},
                         {"exhaustive", plan.exhaustive},
                         {"duty", plan.duty},
                         {"bill", bill_json(bill)}});
        if (!best || plan.srr > best->srr) best = plan;
    }
    if (best) {
        Csv csv;
        csv.header = {"slot", "total_mbps"};
        for (const auto& v : vendors) csv.header.push_back(v.name + "_mbps");
        for (std::size_t t = 0; t < wave.mbps.size(); ++t) {
            std::vector<double> row{static_cast<double>(t), wave.mbps[t]};
            for (const auto& l : best->load) row.push_back(l[t]);
            csv.rows.push_back(std::move(row));
        }
        out.series["cdn_loads"] = std::move(csv);
    }

    // Share tracking on the configured vendors.
    const std::size_t requests = count_of(c, "share_requests", 100000);
    cdn::ShareTracker tracker(vendors.size());
    Rng rng(derive_seed(s.seed, 22));
    for (std::size_t k = 0; k < requests; ++k) {
        cdn::RequestState r;
        r.id = k;
        r.bytes = uniform(rng, 5e5, 4e6);
        r.buffer_s = uniform(rng, 0.0, 6.0);
        r.rebuffer_sens = uniform(rng, 0.5, 2.0);
        const auto j = cdn::schedule_request(r, vendors, tracker);
        tracker.record(j, r.bytes);
    }
    json realized = json::array();
    double worst = 0.0;
    for (std::size_t j = 0; j < vendors.size(); ++j) {
        realized.push_back(tracker.share(j));
        worst = std::max(worst, std::abs(tracker.share(j) - vendors[j].target_share));
    }

    // Edge caching under popularity hashing vs random routing.
    const auto& cc = section(c, "cache");
    const auto cat = catalog_of(s.config, s.seed);
    std::vector<cdn::FileInfo> files;
    double all_bytes = 0.0;
    for (const auto& it : cat.items) {
        const double bytes = it.duration_s * it.ladders[it.ladders.size() / 2].bytes_per_second();
        files.push_back({it.id, it.popularity_weight, bytes});
        all_bytes += bytes;
    }
    std::vector<double> cdf(files.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < files.size(); ++i) cdf[i] = acc += files[i].popularity;
    std::vector<std::size_t> stream(count_of(cc, "requests", 200000));
    Rng rr(derive_seed(s.seed, 23));
    for (auto& f : stream)
        f = std::min<std::size_t>(files.size() - 1, static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(),
                                                                                             uniform01(rr) * acc) -
                                                                            cdf.begin()));
    std::vector<cdn::VendorState> cache_vendors;
    const std::size_t cv = count_of(cc, "vendors", 3);
    if (cv == 0) throw ConfigError("cdn.cache.vendors must be >= 1");
    for (std::size_t j = 0; j < cv; ++j) {
        cdn::VendorState v;
        v.id = static_cast<int>(j);
        v.target_share = 1.0 / static_cast<double>(cv);
        v.nominal_speed_kbps = 3000.0 + 1000.0 * static_cast<double>(j);
        cache_vendors.push_back(v);
    }
    double rest = 1.0;
    for (std::size_t j = 0; j + 1 < cv; ++j) rest -= cache_vendors[j].target_share;
    cache_vendors.back().target_share = rest;
    const double cap = opt(cc, "capacity_fraction", 0.02) * all_bytes;
    const auto routing = cdn::compare_cache_routing(files, stream, cache_vendors, cap, opt(cc, "cold_fraction", 0.5),
                                                    count_of(cc, "subset", 1), derive_seed(s.seed, 24));

    double best_total = base_bill.total;
    for (const auto& p : plans) best_total = std::min(best_total, p.at("bill").at("total").get<double>());
    return {{"vendors", vendors.size()},
            {"slots", wave.mbps.size()},
            {"total_p95_mbps", cdn::percentile95(wave.mbps)},
            {"proportional_bill", bill_json(base_bill)},
            {"stagger", plans},
            {"srr", best ? best->srr : 0.0},
            {"cost", {{"proportional", base_bill.total}, {"best_staggered", best_total},
                      {"saving", base_bill.total - best_total}}},
            {"shares", {{"requests", requests}, {"realized", realized}, {"max_abs_gap", worst}}},
            {"cache",
             {{"vendors", cv},
              {"capacity_bytes", cap},
              {"hashed_hit_rate", routing.hashed.hit_rate},
              {"random_hit_rate", routing.random.hit_rate},
              {"hashed_bts_bytes", routing.hashed.bts_bytes},
              {"random_bts_bytes", routing.random.bts_bytes}}}};
}

// ---- delivery ----

json run_delivery(const Scenario& s, RunOutput& out) {
    const auto& d = section(s.config, "delivery");
    const auto cat = catalog_of(s.config, s.seed);
    const auto& ladders = cat.items.front().ladders;
    const std::size_t k = ladders.size();
    const std::size_t buckets = count_of(d, "buckets", 4);
    if (buckets == 0) throw ConfigError("delivery.buckets must be >= 1");

    // Synthetic choice history: bucket b leans towards ladder b·K/buckets.
    Rng rng(derive_seed(s.seed, 31));
    std::vector<delivery::ChoiceObservation> hist;
    const std::size_t n = count_of(d, "history", 2000);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = uniform_index(rng, buckets);
        const std::size_t centre = b * k / buckets;
        std::size_t l = centre;
        const double u = uniform01(rng);
        if (u < 0.2 && l > 0) --l;
        else if (u > 0.8 && l + 1 < k) ++l;
        hist.push_back({b, l});
    }
    const auto model = delivery::estimate_p_inductive(hist, buckets, k);
    delivery::ReplaceCostWeights rw;
    rw.quality = opt(d, "replace_quality_weight", rw.quality);
    rw.bitrate = opt(d, "replace_bitrate_weight", rw.bitrate);
    const auto replace = delivery::default_replace_cost(ladders, rw);
    const double scale = opt(d, "deliver_scale", 1e-3);
    const double dev = opt(d, "device_factor", 1.0), net = opt(d, "network_factor", 1.0);

    json decisions = json::array();
    for (std::size_t b = 0; b < buckets; ++b) {
        delivery::DeliveryProblem prob;
        prob.p = model.bucket(b);
        prob.replace = replace;
        for (const auto& l : ladders.ladders) prob.deliver_cost.push_back(delivery::deliver_cost(l.meta_bytes, dev, net, scale));
        const auto dec = delivery::optimal_delivery(prob);
        const std::uint64_t all = (std::uint64_t{1} << k) - 1;
        std::vector<int> mask;
        for (bool x : dec.deliver) mask.push_back(x ? 1 : 0);
        decisions.push_back({{"bucket", b},
                             {"p", prob.p},
                             {"deliver", mask},
                             {"expected_cost", dec.expected_cost},
                             {"deliver_all_cost", delivery::delivery_cost(prob, all)},
                             {"approximate", dec.approximate}});
    }

    // Bandwidth forecast on the generated waveform.
    const auto& f = section(d, "forecast");
    const auto wave = workload::generate_waveform(waveform_of(s.config), derive_seed(s.seed, 21));
    delivery::ForecastModel fm;
    fm.method = delivery::forecast_method_from_name(opt<std::string>(f, "method", "seasonal_naive"));
    fm.window = opt(f, "window", fm.window);
    fm.horizon = opt(f, "horizon", 12);
    fm.period = wave.slots_per_day;
    const auto fc = delivery::forecast(wave.mbps, fm);
    Csv csv;
    csv.header = {"step", "forecast_mbps", "percentile_of_day"};
    for (std::size_t i = 0; i < fc.values.size(); ++i)
        csv.rows.push_back({static_cast<double>(i + 1), fc.values[i], fc.percentile_of_day[i]});
    out.series["delivery_forecast"] = std::move(csv);
    return {{"ladders", k},
            {"history", n},
            {"decisions", decisions},
            {"forecast", {{"method", delivery::to_string(fm.method)}, {"values", fc.values},
                          {"percentile_of_day", fc.percentile_of_day}}}};
}

// ---- uiae ----

json run_uiae(const Scenario& s, RunOutput& out) {
    const auto& u = section(s.config, "uiae");
    Rng rng(derive_seed(s.seed, 41));

    // Value model on synthetic items with a planted log-linear volume.
    const std::size_t n = count_of(u, "samples", 2000);
    if (n < 20) throw ConfigError("uiae.samples must be >= 20");
    std::vector<uiae::ValueSample> samples(n);
    for (auto& v : samples) {
        v.author_activity = lognormal(rng, 2.0, 1.0);
        v.author_posts = lognormal(rng, 3.0, 1.0);
        v.author_fans = lognormal(rng, 6.0, 2.0);
        v.duration_s = uniform(rng, 5.0, 180.0);
        v.playback_volume = lognormal(rng, 5.0, 1.5);
        v.like_count = v.playback_volume * uniform(rng, 0.01, 0.1);
        v.vv_growth = uniform(rng, -0.5, 2.0);
        v.category = static_cast<int>(uniform_index(rng, uiae::kCategoryBuckets));
        v.hour = static_cast<int>(uniform_index(rng, 24));
        v.holiday = bernoulli(rng, 0.1);
        const double z = 0.3 * std::log1p(v.author_fans) + 0.6 * std::log1p(v.playback_volume) + 0.8 * v.vv_growth +
                         0.3 * standard_normal(rng);
        v.targets = {std::expm1(std::max(0.0, z))};
    }
    const std::size_t split = n * 4 / 5;
    uiae::TrainConfig tc;
    tc.loss.kind = core::loss_from_name(opt<std::string>(u, "loss", "squared"));
    tc.max_epochs = opt(u, "max_epochs", 2000);
    std::vector<uiae::HeadTrace> traces;
    const auto vm = uiae::train_value_model(std::span(samples).first(split), tc, &traces);
    const auto metrics = uiae::evaluate_value_model(vm, std::span(samples).subspan(split), 0, opt(u, "top_fraction", 0.1));

    // Transcode admission under a quota.
    const std::size_t nt = count_of(u, "tasks", 200);
    std::vector<uiae::TranscodeTask> tasks(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        tasks[i].item = i;
        tasks[i].quota = uniform(rng, 0.1, 2.0);
        tasks[i].reward = tasks[i].quota * lognormal(rng, 0.0, 0.7);
    }
    const double budget = opt(u, "budget", 50.0);
    const auto dp = uiae::allocate_transcodes(tasks, budget);
    const auto greedy = uiae::greedy_transcodes(tasks, budget);

    // Closed-loop quota control with a load step.
    uiae::QuotaController qc;
    qc.kp = opt(u, "kp", qc.kp);
    qc.ki = opt(u, "ki", qc.ki);
    qc.kd = opt(u, "kd", qc.kd);
    qc.target = opt(u, "target_utilization", qc.target);
    uiae::QuotaPlant plant;
    const int steps = opt(u, "pid_steps", 150);
    const int step_at = opt(u, "load_step_at", 75);
    const double step_load = opt(u, "load_step", 1.4);
    double q = opt(u, "initial_budget", 50.0);
    Csv pid;
    pid.header = {"step", "utilization", "budget"};
    int settled = -1;
    for (int t = 0; t < steps; ++t) {
        if (t == step_at) plant.load_per_budget = step_load;
        q = uiae::pid_quota(qc, plant.step(q), 1.0, q);
        pid.rows.push_back({static_cast<double>(t), plant.utilization, q});
        if (t >= step_at) {
            const bool inside = std::abs(plant.utilization - qc.target) <= 0.05 * qc.target;
            if (inside && settled < 0) settled = t - step_at;
            if (!inside) settled = -1;
        }
    }
    out.series["uiae_pid"] = std::move(pid);

    // Consumer clusters from noisy sensitivity pairs.
    const std::size_t consumers = count_of(u, "consumers", 1000);
    std::vector<double> pts;
    for (std::size_t i = 0; i < consumers; ++i) {
        const bool rebuf = bernoulli(rng, 0.5);
        pts.push_back((rebuf ? 3.0 : 0.3) + 0.2 * standard_normal(rng));
        pts.push_back((rebuf ? 0.3 : 3.0) + 0.2 * standard_normal(rng));
    }
    const auto cl = uiae::cluster_consumers(pts, 2, count_of(u, "clusters", 2), derive_seed(s.seed, 42));

    // Cost of the default ladder group for one hot item.
    const auto ladders = workload::CatalogSpec::defaults().buckets.front().ladders;
    playback::LadderGroup group;
    for (std::size_t i = 0; i < ladders.size(); ++i)
        group.ladders.push_back({static_cast<int>(i), ladders[i].bitrate_kbps, ladders[i].quality_score, 0.0,
                                 ladders[i].meta_bytes, ladders[i].resolution});
    uiae::ConsumptionForecast cons;
    cons.selection_share.assign(group.size(), 1.0 / static_cast<double>(group.size()));
    cons.plays = opt(u, "plays", 1e5);
    cons.mean_watch_s = opt(u, "mean_watch_s", 12.0);
    const auto costs = uiae::cost_components(group, opt(u, "duration_s", 30.0), cons,
                                             opt<std::string>(u, "preset", "medium"),
                                             uiae::resource_from_name(opt<std::string>(u, "resource", "GPU")),
                                             uiae::CalcTable::defaults());
    uiae::CostPrices prices;
    return {{"value_model",
             {{"train", split},
              {"test", n - split},
              {"epochs", traces.empty() ? 0 : traces.front().epoch_loss.size() - 1},
              {"final_loss", traces.empty() ? 0.0 : traces.front().epoch_loss.back()},
              {"rec_auc", metrics.rec_auc},
              {"mae", metrics.mae}}},
            {"allocation",
             {{"tasks", nt},
              {"budget", budget},
              {"dp_reward", dp.reward_sum},
              {"dp_quota_used", dp.quota_used},
              {"dp_exact", dp.exact},
              {"dp_accepted", dp.accepted.size()},
              {"greedy_reward", greedy.reward_sum},
              {"greedy_ratio", dp.reward_sum > 0.0 ? greedy.reward_sum / dp.reward_sum : 1.0}}},
            {"pid", {{"target", qc.target}, {"load_step", step_load}, {"settled_after_steps",
                                                                       settled >= 0 ? json(settled) : json(nullptr)},
                     {"final_utilization", plant.utilization}, {"final_budget", q}}},
            {"clusters", {{"k", cl.k}, {"reduced", cl.reduced}, {"histogram", cl.histogram}}},
            {"cost", {{"bw_bytes", costs.bw_bytes}, {"calc_s", costs.calc}, {"store_bytes", costs.store_bytes},
                      {"currency", prices.currency(costs)}}}};
}

// ---- publish ----

publish::PublishJob job_of(const json& j) {
    publish::PublishJob job;
    job.material_bytes = opt(j, "material_bytes", job.material_bytes);
    job.duration_s = opt(j, "duration_s", job.duration_s);
    job.complexity = opt(j, "complexity", job.complexity);
    job.w_quality = opt(j, "w_quality", job.w_quality);
    job.w_speed = opt(j, "w_speed", job.w_speed);
    job.alpha_ui = opt(j, "alpha_ui", job.alpha_ui);
    job.network.bandwidth_kbps = opt(j, "bandwidth_kbps", job.network.bandwidth_kbps);
    job.network.connect_latency_s = opt(j, "connect_latency_s", job.network.connect_latency_s);
    job.network.fail_scale_bytes = opt(j, "fail_scale_bytes", job.network.fail_scale_bytes);
    try {
        job.validate();
    } catch (const InvalidParameter& ex) {
        throw ConfigError(std::string("publish.job: ") + ex.what());
    }
    return job;
}

json run_publish(const Scenario& s, RunOutput&) {
    const auto& p = section(s.config, "publish");
    const auto job = job_of(section(p, "job"));

    std::vector<publish::EncodeOption> options;
    if (p.contains("modes")) {
        for (const auto& m : p.at("modes"))
            options.push_back({publish::encode_mode_from_name(opt<std::string>(m, "mode", "soft")),
                               opt(m, "output_ratio", 0.5), opt(m, "speed_x", 2.0), opt(m, "quality_delta", 0.0)});
    } else {
        options = {{publish::EncodeMode::soft, 0.35, 1.5, 0.0},
                   {publish::EncodeMode::hard, 0.45, 6.0, -2.0},
                   {publish::EncodeMode::skip, 1.0, 1e9, 0.0}};
    }
    publish::ModeConfig mc;
    mc.quality_floor = opt(p, "quality_floor", mc.quality_floor);
    const auto mode = publish::choose_encoding_mode(job, options, mc);

    std::vector<publish::EncodeParams> grid;
    for (double qp : {20.0, 23.0, 28.0})
        for (double br : {1500.0, 2500.0, 4000.0})
            for (const char* codec : {"h264", "h265", "av1"}) {
                publish::EncodeParams e;
                e.qp = qp;
                e.bitrate_kbps = br;
                e.codec = codec;
                grid.push_back(e);
            }
    publish::ParamScoreConfig psc;
    psc.economy = economy_of(s.config);
    psc.impacts = impacts_of(s);
    const auto params = publish::choose_encoding_params(job, grid, publish::ResponseSurface{}, psc);

    std::vector<publish::UploadNode> nodes;
    if (p.contains("nodes")) {
        for (const auto& n : p.at("nodes"))
            nodes.push_back({opt(n, "id", static_cast<int>(nodes.size())), opt(n, "bandwidth_kbps", 4000.0),
                             opt(n, "connect_latency_s", 0.2), opt(n, "up", true)});
    } else {
        nodes = {{0, job.network.bandwidth_kbps, 0.2, true}, {1, job.network.bandwidth_kbps * 0.8, 0.1, true}};
    }
    const auto sizes = opt<std::vector<double>>(p, "chunk_sizes", {5e5, 1e6, 2e6, 4e6});
    const auto par = opt<std::vector<int>>(p, "parallelism", {1, 2, 4});
    const auto upload = publish::plan_upload(job, sizes, par, nodes);

    const auto& pre = section(p, "preupload");
    publish::PreuploadInputs pi;
    pi.lead.kind = opt<std::string>(pre, "lead", "lognormal") == "constant" ? publish::LeadKind::constant
                                                                             : publish::LeadKind::lognormal;
    pi.lead.value = opt(pre, "lead_s", 5.0);
    pi.lead.mu = opt(pre, "lead_mu", 1.5);
    pi.lead.sigma = opt(pre, "lead_sigma", 0.8);
    pi.upload_s = upload.expected_s;
    pi.cancel_prob = opt(pre, "cancel_prob", pi.cancel_prob);
    pi.pre_bytes = job.material_bytes;
    const auto gain = publish::preupload_gain(pi);

    json priority = json::array();
    for (auto st : {publish::AppState::foreground_publish, publish::AppState::background, publish::AppState::other_page}) {
        publish::PriorityInputs in;
        in.state = st;
        in.epsilon = opt(p, "priority_epsilon", in.epsilon);
        const auto dec = publish::adapt_priority(in);
        priority.push_back({{"state", publish::to_string(st)}, {"level", dec.level},
                            {"degradation", dec.degradation}, {"suspended", dec.suspended}});
    }

    return {{"mode",
             {{"chosen", publish::to_string(mode.option.mode)},
              {"publish_s", mode.eval.publish_s},
              {"encode_s", mode.eval.encode_s},
              {"upload_s", mode.eval.upload_s}}},
            {"params",
             {{"qp", params.best.params.qp},
              {"bitrate_kbps", params.best.params.bitrate_kbps},
              {"codec", params.best.params.codec},
              {"quality", params.best.quality},
              {"publish_s", params.best.publish_s},
              {"score", params.best.score},
              {"evaluated", params.evaluated.size()},
              {"skipped", params.diagnostics.size()}}},
            {"upload",
             {{"mode", publish::to_string(upload.mode)},
              {"chunk_bytes", upload.chunk_bytes},
              {"parallelism", upload.parallelism},
              {"node", upload.node},
              {"expected_s", upload.expected_s}}},
            {"preupload",
             {{"baseline_s", gain.baseline_s},
              {"expected_perceived_s", gain.expected_perceived_s},
              {"saving_s", gain.saving_s},
              {"recommend", gain.recommend}}},
            {"priority", priority}};
}

// ---- experiment ----

json run_experiment(const Scenario& s, RunOutput& out) {
    const auto& e = section(s.config, "experiment");
    experiment::QuasiScenario q;
    q.users = count_of(e, "users", q.users);
    q.views_per_user = count_of(e, "views_per_user", q.views_per_user);
    q.catalog = count_of(e, "catalog", q.catalog);
    q.effect = opt(e, "effect", q.effect);
    q.transcode_fraction = opt(e, "transcode_fraction", q.transcode_fraction);
    q.balance_tolerance = opt(e, "balance_tolerance", q.balance_tolerance);
    const std::size_t runs = count_of(e, "runs", 1);
    if (runs == 0) throw ConfigError("experiment.runs must be >= 1");

    json estimates = json::array();
    Csv csv;
    csv.header = {"run", "delta_exact", "delta_lambda", "delta_perf", "relative_effect", "true_relative"};
    double worst = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
        q.seed = derive_seed(s.seed, 51 + r);
        const auto o = experiment::run_quasi_experiment(q);
        worst = std::max(worst, std::abs(o.relative_effect - o.true_relative));
        estimates.push_back({{"run", r},
                             {"t_c", o.inputs.t_c},
                             {"c_c", o.inputs.c_c},
                             {"t_bp", o.inputs.t_bp},
                             {"c_ap", o.inputs.c_ap},
                             {"delta_exact", o.delta_exact},
                             {"delta_lambda", o.delta_lambda},
                             {"lambda", o.inputs.lambda},
                             {"delta_perf", o.delta_perf},
                             {"relative_effect", o.relative_effect},
                             {"split_gap", o.split.max_relative_gap},
                             {"split_balanced", o.split.balanced}});
        csv.rows.push_back({static_cast<double>(r), o.delta_exact, o.delta_lambda, o.delta_perf, o.relative_effect,
                            o.true_relative});
    }
    out.series["experiment_runs"] = std::move(csv);

    const auto ratios = opt<std::vector<double>>(e, "ab_ratios", {0.5, 0.5});
    std::vector<std::size_t> counts(ratios.size(), 0);
    const std::string salt = opt<std::string>(e, "salt", "demo");
    for (std::uint64_t user = 0; user < 100000; ++user) counts[experiment::ab_assign(user, salt, ratios)]++;
    return {{"effect", q.effect},
            {"users", q.users},
            {"estimates", estimates},
            {"max_abs_error", worst},
            {"ab_assignment", {{"ratios", ratios}, {"counts", counts}}}};
}

std::string number_text(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

void diff_walk(const json& a, const json& b, const std::string& path, json& metrics, json& signs) {
    if (a.is_object() && b.is_object()) {
        std::vector<std::string> keys;
        for (const auto& [k, _] : a.items()) keys.push_back(k);
        for (const auto& [k, _] : b.items())
            if (!a.contains(k)) keys.push_back(k);
        for (const auto& k : keys) {
            const std::string p = path.empty() ? k : path + "." + k;
            if (!a.contains(k)) metrics[p] = {{"a", "absent"}, {"b", b.at(k)}};
            else if (!b.contains(k)) metrics[p] = {{"a", a.at(k)}, {"b", "absent"}};
            else diff_walk(a.at(k), b.at(k), p, metrics, signs);
        }
        return;
    }
    if (a.is_array() && b.is_array() && a.size() == b.size()) {
        for (std::size_t i = 0; i < a.size(); ++i) diff_walk(a[i], b[i], path + "." + std::to_string(i), metrics, signs);
        return;
    }
    if (a.is_number() && b.is_number() && !a.is_boolean()) {
        const double x = a.get<double>(), y = b.get<double>();
        const auto rel = core::relative_change_pct(x, y);
        metrics[path] = {{"a", x}, {"b", y}, {"delta", y - x}, {"relative_pct", rel ? json(*rel) : json(nullptr)}};
        if (path.find("profit") != std::string::npos && ((x > 0.0 && y < 0.0) || (x < 0.0 && y > 0.0)))
            signs.push_back(path);
        return;
    }
    if (a != b) metrics[path] = {{"a", a}, {"b", b}, {"changed", true}};
}

} // namespace

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string resolve_config_path(const std::string& name) {
    const char* env = std::getenv(kConfigDirEnv);
    const fs::path dir = env && *env ? fs::path(env) : fs::path("config");
    if (name.empty()) return (dir / "demo.json").string();
    if (fs::exists(name)) return name;
    const auto alt = dir / name;
    if (fs::exists(alt)) return alt.string();
    return name;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty path component in override " + key);
        const bool last = dot == std::string::npos;
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(part);
            } catch (const std::exception&) {
                throw ConfigError("override " + key + ": '" + part + "' is not an array index");
            }
            if (idx >= node->size()) throw ConfigError("override " + key + ": index out of range");
            node = &(*node)[idx];
        } else {
            if (node->is_null()) *node = json::object();
            if (!node->is_object()) throw ConfigError("override " + key + ": '" + part + "' is below a scalar");
            node = &(*node)[part];
        }
        if (last) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides,
                       std::optional<std::uint64_t> seed) {
    Scenario s;
    s.path = path;
    const std::string bytes = read_file(path);
    s.config_hash = hex64(fnv1a64(bytes));
    try {
        s.config = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!s.config.is_object()) throw ConfigError(path + ": top level must be an object");
    for (const auto& o : overrides) apply_override(s.config, o);
    if (seed) s.config["seed"] = *seed;
    if (!s.config.contains("seed") || !s.config.at("seed").is_number_unsigned())
        throw ConfigError("config needs a nonnegative integer 'seed'");
    s.seed = s.config.at("seed").get<std::uint64_t>();
    s.base_dir = fs::path(path).parent_path().string();
    s.overrides = overrides;
    s.effective_hash = hex64(fnv1a64(s.config.dump()));
    return s;
}

std::string Csv::text() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + number_text(r[i]);
        out += '\n';
    }
    return out;
}

RunOutput run_scenario(const Scenario& s, const std::string& subcommand) {
    using Fn = json (*)(const Scenario&, RunOutput&);
    const std::map<std::string, Fn> runners{{"playback", run_playback}, {"cdn", run_cdn},
                                            {"delivery", run_delivery}, {"uiae", run_uiae},
                                            {"publish", run_publish},   {"experiment", run_experiment}};
    std::vector<std::string> todo;
    if (subcommand == "full") todo = kSections;
    else if (runners.count(subcommand)) todo = {subcommand};
    else throw InvalidParameter("unknown subcommand " + subcommand);

    RunOutput out;
    out.report["schema_version"] = kSchemaVersion;
    out.report["provenance"] = {{"config", fs::path(s.path).filename().string()},
                                {"config_hash", s.config_hash},
                                {"effective_config_hash", s.effective_hash},
                                {"overrides", s.overrides},
                                {"seed", s.seed},
                                {"version", kVersion},
                                {"subcommand", subcommand}};
    json sections = json::object();
    for (const auto& name : todo) sections[name] = runners.at(name)(s, out);
    out.report["sections"] = std::move(sections);
    return out;
}

json compare_runs(const json& a, const json& b) {
    if (!a.contains("schema_version") || !b.contains("schema_version") ||
        a.at("schema_version") != b.at("schema_version"))
        throw ConfigError("reports have different schema versions");
    json metrics = json::object(), signs = json::array();
    diff_walk(a.value("sections", json::object()), b.value("sections", json::object()), "", metrics, signs);
    std::size_t nonzero = 0;
    for (const auto& [k, v] : metrics.items())
        if (!v.contains("delta") || v.at("delta").get<double>() != 0.0) ++nonzero;
    return {{"schema_version", kSchemaVersion},
            {"a", a.value("provenance", json::object())},
            {"b", b.value("provenance", json::object())},
            {"metrics", metrics},
            {"changed", nonzero},
            {"profit_sign_changes", signs}};
}

json forecast_csv(const std::string& csv_path, const std::string& method, int window, int horizon, int period) {
    std::istringstream in(read_file(csv_path));
    std::vector<double> series;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
        try {
            std::size_t used = 0;
            const double v = std::stod(cell, &used);
            series.push_back(v);
        } catch (const std::exception&) {
            if (!first) throw InvalidInput(csv_path + ": bad value '" + cell + "'");
        }
        first = false;
    }
    delivery::ForecastModel m;
    m.method = delivery::forecast_method_from_name(method);
    m.window = window;
    m.horizon = horizon;
    m.period = period;
    const auto r = delivery::forecast(series, m);
    return {{"schema_version", kSchemaVersion}, {"method", method}, {"observations", series.size()},
            {"values", r.values}, {"percentile_of_day", r.percentile_of_day}};
}

void write_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

} // namespace shortvid::app
