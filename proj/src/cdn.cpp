#include "shortvid/cdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shortvid/error.hpp"
#include "shortvid/kernels.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::cdn {

std::size_t percentile95_index(std::size_t n) {
    if (n == 0) throw InvalidInput("percentile of an empty series");
    return (95 * n + 99) / 100 - 1;
}

double percentile95(std::span<const double> series) {
    const std::size_t k = percentile95_index(series.size());
    std::vector<double> v(series.begin(), series.end());
    for (double x : v)
        if (!std::isfinite(x) || x < 0.0) throw InvalidInput("bandwidth series values must be finite and >= 0");
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

// ---- quality statistics ----

QualityStats::QualityStats(double half_life_s) : half_life_s_(half_life_s) {
    if (!(half_life_s > 0.0)) throw InvalidParameter("EWMA half-life must be > 0");
}

void QualityStats::observe(int region, int hour, double speed_kbps, double t_s) {
    if (!std::isfinite(speed_kbps) || speed_kbps < 0.0) throw InvalidInput("speed observation must be finite and >= 0");
    auto& c = cells_[{region, hour}];
    if (c.weight == 0.0) {
        c = {speed_kbps, 0.0, 1.0, t_s};
        return;
    }
    const double decay = std::exp2(-std::max(0.0, t_s - c.last_t) / half_life_s_);
    const double w = decay * c.weight + 1.0;
    const double delta = speed_kbps - c.mean;
    c.mean += delta / w;
    c.m2 = decay * c.m2 + delta * (speed_kbps - c.mean);
    c.weight = w;
    c.last_t = std::max(c.last_t, t_s);
}

std::optional<double> QualityStats::mean(int region, int hour) const {
    auto it = cells_.find({region, hour});
    if (it == cells_.end()) return std::nullopt;
    return it->second.mean;
}

std::optional<double> QualityStats::variance(int region, int hour) const {
    auto it = cells_.find({region, hour});
    if (it == cells_.end()) return std::nullopt;
    return it->second.m2 / it->second.weight;
}

// ---- vendors and billing ----

std::vector<double> VendorState::billed_series() const {
    std::vector<double> out = edge_mbps;
    if (!bts_mbps.empty()) {
        if (bts_mbps.size() != edge_mbps.size())
            throw InvalidInput("vendor " + name + ": back-to-source series length differs from edge series");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += bts_mbps[i];
    }
    return out;
}

double VendorState::predicted_speed(int region, int hour) const {
    return quality.mean(region, hour).value_or(nominal_speed_kbps);
}

void validate_vendors(std::span<const VendorState> vendors) {
    if (vendors.empty()) throw InvalidInput("no vendors");
    double sum = 0.0;
    for (const auto& v : vendors) {
        if (!(v.target_share >= 0.0 && v.target_share <= 1.0))
            throw InvalidParameter("vendor " + v.name + ": target share must lie in [0,1]");
        if (!(v.capacity_mbps > 0.0)) throw InvalidParameter("vendor " + v.name + ": capacity must be > 0");
        if (!(v.unit_price >= 0.0)) throw InvalidParameter("vendor " + v.name + ": price must be >= 0");
        sum += v.target_share;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameter("vendor target shares must sum to 1");
}

Bill cost_95peak(std::span<const VendorState> vendors) {
    if (vendors.empty()) throw InvalidInput("no vendors to bill");
    Bill b;
    for (const auto& v : vendors) {
        const auto s = v.billed_series();
        if (s.empty()) throw InvalidInput("vendor " + v.name + " has an empty bandwidth series");
        const double peak = percentile95(s);
        b.peak_mbps.push_back(peak);
        b.amount.push_back(peak * v.unit_price);
        b.total += peak * v.unit_price;
    }
    return b;
}

Bill cost_traffic(std::span<const VendorState> vendors) {
    if (vendors.empty()) throw InvalidInput("no vendors to bill");
    Bill b;
    for (const auto& v : vendors) {
        double bytes = 0.0;
        for (double x : v.traffic_bytes) {
            if (!std::isfinite(x) || x < 0.0) throw InvalidInput("traffic must be finite and >= 0");
            bytes += x;
        }
        b.peak_mbps.push_back(0.0);
        b.amount.push_back(bytes / 1e9 * v.unit_price);
        b.total += bytes / 1e9 * v.unit_price;
    }
    return b;
}

// ---- request scheduling ----

void ShareTracker::record(std::size_t vendor, double bytes) {
    if (vendor >= served.size()) throw InvalidInput("vendor index out of range");
    served[vendor] += bytes;
    total += bytes;
}

double ShareTracker::share(std::size_t vendor) const { return total > 0.0 ? served.at(vendor) / total : 0.0; }

std::size_t schedule_request(const RequestState& req, std::span<const VendorState> vendors,
                             const ShareTracker& tracker, const ScheduleConfig& cfg) {
    if (vendors.empty()) throw InvalidInput("no vendors to schedule on");
    if (tracker.served.size() != vendors.size()) throw InvalidInput("share tracker size differs from vendor count");
    if (!(cfg.slack >= 0.0)) throw InvalidParameter("share slack must be >= 0");
    const double weight = req.rebuffer_sens * req.urgency();
    const double allowance = cfg.slack * std::min(tracker.total, cfg.window_bytes);

    std::optional<std::size_t> best;
    double best_score = 0.0;
    double best_excess = 0.0;
    std::size_t most_under = 0;
    double most_under_excess = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < vendors.size(); ++j) {
        const double target = vendors[j].target_share;
        const double excess = tracker.served[j] - target * tracker.total;
        if (target > 0.0 && excess < most_under_excess) {
            most_under_excess = excess;
            most_under = j;
        }
        if (!(target > 0.0) || excess > allowance) continue;
        const double score = weight * vendors[j].predicted_speed(req.region, req.hour);
        if (!best || score > best_score || (score == best_score && excess < best_excess)) {
            best = j;
            best_score = score;
            best_excess = excess;
        }
    }
    if (best) return *best;
    if (std::isinf(most_under_excess)) throw InvalidParameter("every vendor has a zero target share");
    return most_under;
}

// ---- share allocation ----

double SpeedModel::mean(int region, int hour) const {
    if (mean_kbps.empty() || mean_kbps.front().empty()) throw InvalidInput("speed model is empty");
    const auto& row = mean_kbps[mean_kbps.size() == 1 ? 0 : static_cast<std::size_t>(region) % mean_kbps.size()];
    return row[row.size() == 1 ? 0 : static_cast<std::size_t>(hour) % row.size()];
}

core::QoPVector UtilityConfig::default_reference() {
    core::QoPVector q;
    q.first_frame_ms = 500.0;
    q.rebuffer_ratio = 0.02;
    q.rebuffer_dur_per_vv_ms = 300.0;
    q.fps = 30.0;
    q.video_quality = 70.0;
    return q;
}

ShareEvaluation evaluate_shares(std::span<const double> shares, std::span<const VendorState> vendors,
                                std::span<const SpeedModel> speeds, const UtilityConfig& cfg) {
    if (shares.size() != vendors.size() || speeds.size() != vendors.size())
        throw InvalidInput("shares, vendors and speed models must have equal length");
    if (cfg.requests < 1) throw InvalidParameter("utility simulation needs at least one request");
    if (cfg.regions < 1) throw InvalidParameter("regions must be >= 1");

    std::vector<VendorState> local(vendors.begin(), vendors.end());
    for (std::size_t j = 0; j < local.size(); ++j) {
        local[j].target_share = shares[j];
        local[j].quality = QualityStats(local[j].quality.half_life_s());
        for (int r = 0; r < cfg.regions; ++r)
            for (int h = 0; h < 24; ++h) local[j].quality.observe(r, h, speeds[j].mean(r, h), 0.0);
    }
    ShareTracker tracker(local.size());
    Rng rng(derive_seed(cfg.seed, 0x5a4e));
    const double dt = 86400.0 / cfg.requests;
    double ff_sum = 0.0, stall_ms_sum = 0.0, stall_bytes = 0.0, total_bytes = 0.0;
    for (int i = 0; i < cfg.requests; ++i) {
        RequestState req;
        req.id = static_cast<std::uint64_t>(i);
        req.region = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.regions)));
        req.hour = static_cast<int>(i * 24LL / cfg.requests);
        req.rebuffer_sens = uniform(rng, 0.5, 1.5);
        req.buffer_s = uniform(rng, 0.0, 5.0);
        req.bytes = cfg.request_bytes;
        const double z = standard_normal(rng);
        const std::size_t j = schedule_request(req, local, tracker, cfg.schedule);
        const double sigma = speeds[j].sigma;
        const double speed = speeds[j].mean(req.region, req.hour) * std::exp(sigma * z - 0.5 * sigma * sigma);
        local[j].quality.observe(req.region, req.hour, speed, i * dt);
        tracker.record(j, req.bytes);
        const double stall = std::max(0.0, 1.0 - speed / cfg.bitrate_kbps);
        ff_sum += 200000.0 * 8.0 / speed;
        stall_ms_sum += std::max(0.0, req.bytes * 8.0 / speed - req.bytes * 8.0 / cfg.bitrate_kbps);
        stall_bytes += stall * req.bytes;
        total_bytes += req.bytes;
    }
    ShareEvaluation e;
    const double n = cfg.requests;
    e.qop = cfg.reference;
    e.qop.first_frame_ms = ff_sum / n;
    e.qop.rebuffer_ratio = stall_bytes / total_bytes;
    e.qop.rebuffer_dur_per_vv_ms = stall_ms_sum / n;
    e.ltv_gain = cfg.ltv_scale * core::qop_delta_to_lt(cfg.reference, e.qop, cfg.impacts).relative_lt;
    for (std::size_t j = 0; j < local.size(); ++j) {
        e.cost += vendors[j].unit_price * shares[j] * cfg.demand_mbps;
        e.realized.push_back(tracker.share(j));
    }
    e.utility = e.ltv_gain - e.cost;
    return e;
}

std::vector<std::vector<double>> share_grid(std::span<const VendorState> vendors, int eta, double step,
                                            double demand_mbps) {
    const std::size_t n = vendors.size();
    if (n == 0) throw InvalidInput("no vendors");
    if (eta < 1 || static_cast<std::size_t>(eta) > n) throw InvalidParameter("eta must lie in [1, vendor count]");
    if (!(step > 0.0 && step <= 1.0)) throw InvalidParameter("grid step must lie in (0,1]");
    const long units = std::lround(1.0 / step);
    if (std::abs(units * step - 1.0) > 1e-9) throw InvalidParameter("grid step must divide 1");
    if (!(demand_mbps >= 0.0)) throw InvalidParameter("demand must be >= 0");

    std::vector<std::vector<double>> out;
    std::vector<long> parts(n, 0);
    // Lexicographic enumeration of compositions of `units` into n parts.
    auto rec = [&](auto& self, std::size_t i, long left) -> void {
        if (i + 1 == n) {
            parts[i] = left;
            int positive = 0;
            bool fits = true;
            std::vector<double> b(n);
            for (std::size_t j = 0; j < n; ++j) {
                b[j] = static_cast<double>(parts[j]) / static_cast<double>(units);
                positive += parts[j] > 0;
                if (b[j] * demand_mbps > vendors[j].capacity_mbps * (1.0 + 1e-12)) fits = false;
            }
            if (positive >= eta && fits) out.push_back(std::move(b));
            return;
        }
        for (long v = 0; v <= left; ++v) {
            parts[i] = v;
            self(self, i + 1, left - v);
        }
    };
    rec(rec, 0, units);
    return out;
}

AllocationResult allocate_shares(std::span<const VendorState> vendors, std::span<const SpeedModel> speeds, int eta,
                                 double step, const UtilityConfig& cfg) {
    AllocationResult r;
    const auto grid = share_grid(vendors, eta, step, cfg.demand_mbps);
    r.candidates = grid.size();
    if (grid.empty()) {
        r.diagnostic = "no share vector with >= " + std::to_string(eta) +
                       " positive entries fits the vendor capacities for the given demand";
        return r;
    }
    const auto evals = kernels::parallel_map(grid.size(), [&](std::size_t i) {
        return evaluate_shares(grid[i], vendors, speeds, cfg);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < evals.size(); ++i)
        if (evals[i].utility > evals[best].utility) best = i;
    r.feasible = true;
    r.shares = grid[best];
    r.best = evals[best];
    return r;
}

// ---- hashing and caches ----

std::vector<std::optional<std::size_t>> hash_schedule(std::span<const FileInfo> files, std::size_t vendor_count,
                                                      double cold_fraction, std::size_t subset_size,
                                                      std::uint64_t salt) {
    if (!(cold_fraction >= 0.0 && cold_fraction <= 1.0)) throw InvalidParameter("cold fraction must lie in [0,1]");
    if (subset_size < 1 || subset_size > vendor_count) throw InvalidParameter("subset size must lie in [1, vendors]");
    std::vector<std::size_t> order(files.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (files[a].popularity != files[b].popularity) return files[a].popularity < files[b].popularity;
        return files[a].id < files[b].id;
    });
    const auto cold = static_cast<std::size_t>(std::floor(cold_fraction * static_cast<double>(files.size()) + 1e-9));
    std::vector<std::optional<std::size_t>> out(files.size());
    for (std::size_t r = 0; r < cold; ++r) {
        const auto& f = files[order[r]];
        out[order[r]] = static_cast<std::size_t>(mix64(f.id ^ mix64(salt)) % subset_size);
    }
    return out;
}

LruCache::LruCache(double capacity_bytes) : capacity_(capacity_bytes) {
    if (!(capacity_bytes >= 0.0)) throw InvalidParameter("cache capacity must be >= 0");
}

void LruCache::insert(std::uint64_t file, double bytes) {
    if (bytes > capacity_) return;
    while (used_ + bytes > capacity_ && !order_.empty()) {
        used_ -= order_.back().second;
        index_.erase(order_.back().first);
        order_.pop_back();
    }
    order_.emplace_front(file, bytes);
    index_[file] = order_.begin();
    used_ += bytes;
}

bool LruCache::access(std::uint64_t file, double bytes) {
    auto it = index_.find(file);
    if (it != index_.end()) {
        order_.splice(order_.begin(), order_, it->second);
        return true;
    }
    insert(file, bytes);
    return false;
}

void LruCache::push(std::uint64_t file, double bytes) {
    auto it = index_.find(file);
    if (it != index_.end()) {
        order_.splice(order_.begin(), order_, it->second);
        return;
    }
    insert(file, bytes);
}

CacheResult simulate_edge_cache(std::span<const CacheRequest> requests, std::span<const double> capacity_bytes) {
    std::vector<LruCache> caches;
    caches.reserve(capacity_bytes.size());
    for (double c : capacity_bytes) caches.emplace_back(c);
    CacheResult r;
    r.bts_by_vendor.assign(caches.size(), 0.0);
    for (const auto& q : requests) {
        if (q.vendor >= caches.size()) throw InvalidInput("request vendor index out of range");
        if (!(q.bytes >= 0.0)) throw InvalidInput("request size must be >= 0");
        auto& cache = caches[q.vendor];
        ++r.requests;
        if (q.bytes > cache.capacity_bytes() &&
            std::find(r.oversize_files.begin(), r.oversize_files.end(), q.file) == r.oversize_files.end())
            r.oversize_files.push_back(q.file);
        if (cache.access(q.file, q.bytes)) {
            ++r.hits;
            continue;
        }
        ++r.misses;
        r.bts_bytes += q.bytes;
        r.bts_by_vendor[q.vendor] += q.bytes;
        if (q.slot >= r.bts_by_slot.size()) r.bts_by_slot.resize(q.slot + 1, 0.0);
        r.bts_by_slot[q.slot] += q.bytes;
    }
    r.hit_rate = r.requests ? static_cast<double>(r.hits) / static_cast<double>(r.requests) : 0.0;
    return r;
}

RoutingComparison compare_cache_routing(std::span<const FileInfo> files, std::span<const std::size_t> request_files,
                                        std::span<const VendorState> vendors, double capacity_bytes_per_vendor,
                                        double cold_fraction, std::size_t subset_size, std::uint64_t seed) {
    validate_vendors(vendors);
    const auto cold = hash_schedule(files, vendors.size(), cold_fraction, subset_size, seed);
    Rng rng(derive_seed(seed, 0xcac4e));
    ShareTracker tracker(vendors.size());
    ScheduleConfig sched;
    std::vector<CacheRequest> hashed, random;
    hashed.reserve(request_files.size());
    random.reserve(request_files.size());
    for (std::size_t k = 0; k < request_files.size(); ++k) {
        const std::size_t f = request_files[k];
        if (f >= files.size()) throw InvalidInput("request names an unknown file");
        std::size_t v;
        if (cold[f]) {
            v = *cold[f];
        } else {
            RequestState req;
            req.id = k;
            req.file_id = files[f].id;
            req.bytes = files[f].bytes;
            req.buffer_s = uniform(rng, 0.0, 6.0);
            v = schedule_request(req, vendors, tracker, sched);
            tracker.record(v, req.bytes);
        }
        hashed.push_back({files[f].id, files[f].bytes, v, k});
        random.push_back({files[f].id, files[f].bytes, uniform_index(rng, vendors.size()), k});
    }
    const std::vector<double> caps(vendors.size(), capacity_bytes_per_vendor);
    return {simulate_edge_cache(hashed, caps), simulate_edge_cache(random, caps)};
}

// ---- pre-caching ----

PrecachePlan precache_plan(std::span<const ForecastEntry> forecast, std::span<const CacheNode> nodes,
                           std::span<const std::vector<double>> vendor_series_mbps, const PrecacheConfig& cfg) {
    if (vendor_series_mbps.empty()) throw InvalidInput("no vendor series");
    if (!(cfg.free_fraction >= 0.0 && cfg.free_fraction <= 1.0)) throw InvalidParameter("free fraction must lie in [0,1]");
    if (!(cfg.confidence_weight >= 0.0)) throw InvalidParameter("confidence weight must be >= 0");
    if (!(cfg.slot_seconds > 0.0)) throw InvalidParameter("slot length must be > 0");
    for (const auto& n : nodes)
        if (n.vendor >= vendor_series_mbps.size()) throw InvalidInput("cache node vendor index out of range");
    if (!cfg.similarity.empty() && cfg.similarity.size() != forecast.size())
        throw InvalidInput("similarity matrix must match the forecast length");

    PrecachePlan plan;
    plan.series_after.assign(vendor_series_mbps.begin(), vendor_series_mbps.end());
    const double bytes_per_mbps_slot = cfg.slot_seconds * 1e6 / 8.0;

    std::vector<std::vector<double>> headroom(vendor_series_mbps.size());
    double total_headroom = 0.0;
    for (std::size_t v = 0; v < vendor_series_mbps.size(); ++v) {
        const auto& s = vendor_series_mbps[v];
        const double mark = percentile95(s);
        headroom[v].assign(s.size(), 0.0);
        const std::size_t to = std::min(cfg.slot_to, s.size());
        for (std::size_t t = cfg.slot_from; t < to; ++t)
            if (s[t] < mark) {
                headroom[v][t] = (mark - s[t]) * cfg.free_fraction;
                total_headroom += headroom[v][t];
            }
    }
    if (!(total_headroom > 0.0)) {
        plan.diagnostic = "no valley capacity below the 95-peak watermark";
        return plan;
    }

    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < forecast.size(); ++i)
        if (cfg.confidence_weight * forecast[i].score >= cfg.threshold && forecast[i].bytes >= 0.0) cand.push_back(i);
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
        if (forecast[a].score != forecast[b].score) return forecast[a].score > forecast[b].score;
        return forecast[a].file < forecast[b].file;
    });
    if (cand.size() > cfg.max_files) cand.resize(cfg.max_files);
    if (cand.empty()) {
        plan.diagnostic = "no file reaches the forecast threshold";
        return plan;
    }

    std::vector<std::vector<std::size_t>> on_node(nodes.size());
    for (std::size_t c : cand) {
        const auto& f = forecast[c];
        std::vector<std::size_t> region_nodes;
        for (std::size_t n = 0; n < nodes.size(); ++n)
            if (nodes[n].region == f.region) region_nodes.push_back(n);
        // Spread similar files: least accumulated similarity first, then fewest files.
        std::vector<std::pair<double, std::size_t>> pref;
        for (std::size_t n : region_nodes) {
            double conflict = 0.0;
            if (!cfg.similarity.empty())
                for (std::size_t other : on_node[n]) conflict += cfg.similarity[c][other];
            pref.emplace_back(conflict, n);
        }
        std::stable_sort(pref.begin(), pref.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            if (on_node[a.second].size() != on_node[b.second].size())
                return on_node[a.second].size() < on_node[b.second].size();
            return a.second < b.second;
        });
        bool placed = false;
        for (const auto& [conflict, n] : pref) {
            const std::size_t v = nodes[n].vendor;
            double room = 0.0;
            for (double h : headroom[v]) room += h * bytes_per_mbps_slot;
            if (room < f.bytes) continue;
            double left = f.bytes;
            for (std::size_t t = 0; t < headroom[v].size() && left > 0.0; ++t) {
                const double cap = headroom[v][t] * bytes_per_mbps_slot;
                if (!(cap > 0.0)) continue;
                const double take = std::min(cap, left);
                const double mbps = take / bytes_per_mbps_slot;
                headroom[v][t] = std::max(0.0, headroom[v][t] - mbps);
                plan.series_after[v][t] += mbps;
                plan.pushes.push_back({f.file, n, v, t, take});
                left -= take;
            }
            on_node[n].push_back(c);
            plan.placed.push_back(f.file);
            placed = true;
            break;
        }
        if (!placed) plan.skipped.push_back(f.file);
    }
    return plan;
}

// ---- peak staggering ----

double srr(std::span<const double> total, std::span<const std::vector<double>> per_vendor) {
    if (total.empty()) throw InvalidInput("empty total series");
    for (const auto& s : per_vendor)
        if (s.size() != total.size()) throw InvalidInput("vendor series length differs from the total");
    for (std::size_t t = 0; t < total.size(); ++t) {
        double sum = 0.0;
        for (const auto& s : per_vendor) sum += s[t];
        if (std::abs(sum - total[t]) > 1e-6 * std::max(1.0, std::abs(total[t])))
            throw InvalidInput("vendor series do not sum to the total at slot " + std::to_string(t));
    }
    const double t95 = percentile95(total);
    if (t95 == 0.0) throw UndefinedResult("SRR is undefined for a zero 95-peak");
    double sum = 0.0;
    for (const auto& s : per_vendor) sum += percentile95(s);
    return (t95 - sum) / t95;
}

std::string to_string(StaggerMode m) {
    switch (m) {
    case StaggerMode::phase_shift: return "phase_shift";
    case StaggerMode::complementary_shift: return "complementary_shift";
    case StaggerMode::cross_day_shift: return "cross_day_shift";
    }
    return "?";
}

StaggerMode stagger_mode_from_name(const std::string& name) {
    for (auto m : {StaggerMode::phase_shift, StaggerMode::complementary_shift, StaggerMode::cross_day_shift})
        if (to_string(m) == name) return m;
    throw InvalidParameter("unknown stagger mode: " + name);
}

namespace {

void check_capacity(std::span<const double> total, std::span<const VendorState> vendors) {
    double cap = 0.0;
    for (const auto& v : vendors) cap += v.capacity_mbps;
    for (std::size_t t = 0; t < total.size(); ++t) {
        if (!std::isfinite(total[t]) || total[t] < 0.0) throw InvalidInput("demand must be finite and >= 0");
        if (total[t] > cap * (1.0 + 1e-12))
            throw Infeasible("demand at slot " + std::to_string(t) + " exceeds total vendor capacity");
    }
}

// Non-duty vendors carry their proportional share capped at λ·b_j·T95; the
// slot's duty vendor takes the rest, spilling over in index order when full.
std::vector<std::vector<double>> loads_for_duty(std::span<const double> total, std::span<const VendorState> vendors,
                                                std::span<const int> slot_duty, double lambda, double t95) {
    const std::size_t n = vendors.size();
    std::vector<std::vector<double>> load(n, std::vector<double>(total.size(), 0.0));
    for (std::size_t t = 0; t < total.size(); ++t) {
        const auto d = static_cast<std::size_t>(slot_duty[t]);
        double rest = total[t];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == d) continue;
            const double x = std::min({vendors[j].target_share * total[t], lambda * vendors[j].target_share * t95,
                                       vendors[j].capacity_mbps});
            load[j][t] = x;
            rest -= x;
        }
        rest = std::max(0.0, rest);
        load[d][t] = std::min(rest, vendors[d].capacity_mbps);
        rest -= load[d][t];
        for (std::size_t j = 0; j < n && rest > 0.0; ++j) {
            const double add = std::min(rest, vendors[j].capacity_mbps - load[j][t]);
            if (add > 0.0) {
                load[j][t] += add;
                rest -= add;
            }
        }
        if (rest > 1e-9 * std::max(1.0, total[t])) throw Infeasible("slot demand exceeds vendor capacity");
    }
    return load;
}

double srr_unchecked(double t95, const std::vector<std::vector<double>>& load) {
    double sum = 0.0;
    for (const auto& s : load) sum += percentile95(s);
    return (t95 - sum) / t95;
}

std::vector<int> expand_days(std::span<const int> duty, std::size_t slots, int spd) {
    std::vector<int> out(slots);
    for (std::size_t t = 0; t < slots; ++t) out[t] = duty[t / static_cast<std::size_t>(spd)];
    return out;
}

} // namespace

std::vector<std::vector<double>> proportional_loads(std::span<const double> total_mbps,
                                                    std::span<const VendorState> vendors) {
    std::vector<std::vector<double>> load(vendors.size(), std::vector<double>(total_mbps.size()));
    for (std::size_t j = 0; j < vendors.size(); ++j)
        for (std::size_t t = 0; t < total_mbps.size(); ++t) load[j][t] = vendors[j].target_share * total_mbps[t];
    return load;
}

std::vector<std::vector<double>> cross_day_loads(std::span<const double> total_mbps,
                                                 std::span<const VendorState> vendors, std::span<const int> duty,
                                                 double lambda, int slots_per_day) {
    if (slots_per_day < 1) throw InvalidParameter("slots per day must be >= 1");
    const std::size_t days = (total_mbps.size() + slots_per_day - 1) / slots_per_day;
    if (duty.size() != days) throw InvalidInput("duty assignment must have one entry per day");
    for (int d : duty)
        if (d < 0 || static_cast<std::size_t>(d) >= vendors.size()) throw InvalidInput("duty vendor out of range");
    return loads_for_duty(total_mbps, vendors, expand_days(duty, total_mbps.size(), slots_per_day), lambda,
                          percentile95(total_mbps));
}

PeakPlan stagger_peaks(std::span<const double> total_mbps, std::span<const VendorState> vendors, StaggerMode mode,
                       const StaggerConfig& cfg) {
    validate_vendors(vendors);
    if (total_mbps.empty()) throw InvalidInput("empty demand waveform");
    if (cfg.lambdas.empty()) throw InvalidParameter("lambda grid is empty");
    for (double l : cfg.lambdas)
        if (!(l > 0.0 && l <= 1.0)) throw InvalidParameter("lambda values must lie in (0,1]");
    if (cfg.slots_per_day < 1) throw InvalidParameter("slots per day must be >= 1");
    check_capacity(total_mbps, vendors);
    const double t95 = percentile95(total_mbps);
    if (t95 == 0.0) throw UndefinedResult("SRR is undefined for a zero 95-peak");

    const std::size_t slots = total_mbps.size();
    const auto spd = static_cast<std::size_t>(cfg.slots_per_day);
    const std::size_t days = (slots + spd - 1) / spd;
    std::vector<int> active;
    for (std::size_t j = 0; j < vendors.size(); ++j)
        if (vendors[j].target_share > 0.0) active.push_back(static_cast<int>(j));

    PeakPlan best;
    best.mode = mode;
    best.baseline_srr = srr_unchecked(t95, proportional_loads(total_mbps, vendors));
    best.srr = -std::numeric_limits<double>::infinity();
    auto consider = [&](double lambda, std::vector<int> day_duty, const std::vector<int>& slot_duty) {
        auto load = loads_for_duty(total_mbps, vendors, slot_duty, lambda, t95);
        const double s = srr_unchecked(t95, load);
        if (s > best.srr) {
            best.srr = s;
            best.lambda = lambda;
            best.duty = std::move(day_duty);
            best.load = std::move(load);
        }
    };

    if (mode == StaggerMode::complementary_shift) {
        int fixed = active.front();
        for (int j : active)
            if (vendors[j].capacity_mbps > vendors[fixed].capacity_mbps) fixed = j;
        const std::vector<int> day_duty(days, fixed);
        const auto slot_duty = expand_days(day_duty, slots, cfg.slots_per_day);
        for (double l : cfg.lambdas) consider(l, day_duty, slot_duty);
    } else if (mode == StaggerMode::phase_shift) {
        // Each day's above-height slots are cut into contiguous blocks, one per vendor.
        for (double l : cfg.lambdas) {
            std::vector<int> slot_duty(slots, active.front());
            for (std::size_t d = 0; d < days; ++d) {
                std::vector<std::size_t> hot;
                for (std::size_t t = d * spd; t < std::min(slots, (d + 1) * spd); ++t)
                    if (total_mbps[t] > l * t95) hot.push_back(t);
                for (std::size_t i = 0; i < hot.size(); ++i)
                    slot_duty[hot[i]] = active[i * active.size() / hot.size()];
            }
            consider(l, std::vector<int>(days, -1), slot_duty);
        }
    } else {
        const auto a = active.size();
        double plans = 1.0;
        for (std::size_t d = 0; d < days; ++d) plans *= static_cast<double>(a);
        if (plans <= static_cast<double>(cfg.exhaustive_limit)) {
            // Exact search: every day assignment, best λ per assignment.
            best.exhaustive = true;
            const auto count = static_cast<std::size_t>(plans);
            auto decode = [&](std::size_t code) {
                std::vector<int> duty(days);
                for (std::size_t d = days; d-- > 0;) {
                    duty[d] = active[code % a];
                    code /= a;
                }
                return duty;
            };
            const auto scores = kernels::parallel_map(count, [&](std::size_t code) {
                const auto duty = decode(code);
                const auto slot_duty = expand_days(duty, slots, cfg.slots_per_day);
                std::pair<double, double> top{-std::numeric_limits<double>::infinity(), 1.0};
                for (double l : cfg.lambdas) {
                    const double s = srr_unchecked(t95, loads_for_duty(total_mbps, vendors, slot_duty, l, t95));
                    if (s > top.first) top = {s, l};
                }
                return top;
            });
            std::size_t arg = 0;
            for (std::size_t c = 1; c < count; ++c)
                if (scores[c].first > scores[arg].first) arg = c;
            const auto duty = decode(arg);
            consider(scores[arg].second, duty, expand_days(duty, slots, cfg.slots_per_day));
        } else {
            // Greedy: each day goes to the vendor whose count of above-height
            // slots stays lowest, which alternates identical vendors.
            for (double l : cfg.lambdas) {
                std::vector<std::size_t> used(vendors.size(), 0);
                std::vector<int> duty(days);
                for (std::size_t d = 0; d < days; ++d) {
                    std::size_t hot = 0;
                    for (std::size_t t = d * spd; t < std::min(slots, (d + 1) * spd); ++t)
                        if (total_mbps[t] > l * t95) ++hot;
                    int pick = active.front();
                    for (int j : active)
                        if (used[j] < used[pick]) pick = j;
                    duty[d] = pick;
                    used[pick] += hot;
                }
                consider(l, duty, expand_days(duty, slots, cfg.slots_per_day));
            }
        }
    }
    return best;
}

} // namespace shortvid::cdn
