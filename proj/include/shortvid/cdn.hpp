#pragma once

// Multi-CDN cost and quality machinery: 95-peak and traffic billing, share
// tracking request scheduling, share search, popularity hashing, edge caches,
// valley pre-caching and cross-vendor peak staggering.

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shortvid/core_model.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::cdn {

/// Value at index ceil(0.95 N) - 1 of the ascending-sorted series.
double percentile95(std::span<const double> series);
/// Index ceil(0.95 N) - 1, computed in integers.
std::size_t percentile95_index(std::size_t n);

/// Exponentially weighted download-speed statistics per (region, hour).
class QualityStats {
public:
    explicit QualityStats(double half_life_s = 3600.0);

    void observe(int region, int hour, double speed_kbps, double t_s);
    std::optional<double> mean(int region, int hour) const;
    std::optional<double> variance(int region, int hour) const;
    double half_life_s() const { return half_life_s_; }

private:
    struct Cell {
        double mean = 0.0;
        double m2 = 0.0;
        double weight = 0.0;
        double last_t = 0.0;
    };
    double half_life_s_;
    std::map<std::pair<int, int>, Cell> cells_;
};

struct VendorState {
    int id = 0;
    std::string name;
    double unit_price = 1.0;     ///< per Mbps of 95-peak, or per GB in traffic mode
    double target_share = 1.0;
    double capacity_mbps = 1e9;
    double nominal_speed_kbps = 4000.0; ///< speed prediction before any observation
    QualityStats quality;
    std::vector<double> edge_mbps; ///< per billing slot
    std::vector<double> bts_mbps;  ///< back-to-source per slot (may be empty)
    std::vector<double> traffic_bytes; ///< per slot, traffic billing

    std::vector<double> billed_series() const; ///< edge + back-to-source
    double predicted_speed(int region, int hour) const;
};

/// Throws InvalidParameter unless shares lie in [0,1], sum to 1 and capacities are positive.
void validate_vendors(std::span<const VendorState> vendors);

struct Bill {
    std::vector<double> peak_mbps;
    std::vector<double> amount;
    double total = 0.0;
};

Bill cost_95peak(std::span<const VendorState> vendors);
Bill cost_traffic(std::span<const VendorState> vendors);

struct RequestState {
    std::uint64_t id = 0;
    std::uint64_t file_id = 0;
    double rebuffer_sens = 1.0;
    double bytes = 1.0;
    double buffer_s = 0.0;
    int region = 0;
    int hour = 0;

    double urgency() const { return 1.0 / (1.0 + buffer_s); }
};

/// Running per-vendor byte counts for share tracking.
struct ShareTracker {
    std::vector<double> served;
    double total = 0.0;

    explicit ShareTracker(std::size_t vendors = 0) : served(vendors, 0.0) {}
    void record(std::size_t vendor, double bytes);
    double share(std::size_t vendor) const;
};

struct ScheduleConfig {
    double slack = 0.02;  ///< δ
    /// Byte window the slack applies to: vendor j is eligible while
    /// served_j - b_j·total <= δ·min(total, window). Infinite window = relative slack.
    double window_bytes = 5e8;
};

/// Argmax over eligible vendors of sens·urgency·predicted speed; ties go to the
/// vendor most under target, then the lowest index. When nobody is eligible the
/// most-under-target vendor is returned.
std::size_t schedule_request(const RequestState& req, std::span<const VendorState> vendors,
                             const ShareTracker& tracker, const ScheduleConfig& cfg = {});

// ---- share allocation -------------------------------------------------------

/// Lognormal speed model of a vendor in a (region, hour) cell.
struct SpeedModel {
    std::vector<std::vector<double>> mean_kbps; ///< [region][hour]; a single row/column broadcasts
    double sigma = 0.3;

    double mean(int region, int hour) const;
};

struct UtilityConfig {
    double demand_mbps = 1000.0;      ///< B_all
    int requests = 2000;              ///< short scheduling simulation per candidate
    int regions = 1;
    double bitrate_kbps = 2000.0;     ///< playback rate a request needs
    double request_bytes = 2e6;
    double ltv_scale = 1e6;           ///< users · arpu · lt_base
    core::ImpactTable impacts = core::ImpactTable::defaults();
    core::QoPVector reference = default_reference();
    std::uint64_t seed = 0;
    ScheduleConfig schedule{0.02, 1e308};

    static core::QoPVector default_reference();
};

struct ShareEvaluation {
    double utility = 0.0;
    double ltv_gain = 0.0;
    double cost = 0.0;
    core::QoPVector qop;
    std::vector<double> realized;
};

/// LTV(QoP(b)) - Σ p_j b_j B_all, QoP from a seeded request stream scheduled
/// under targets b.
ShareEvaluation evaluate_shares(std::span<const double> shares, std::span<const VendorState> vendors,
                                std::span<const SpeedModel> speeds, const UtilityConfig& cfg);

struct AllocationResult {
    bool feasible = false;
    std::vector<double> shares;
    ShareEvaluation best;
    std::size_t candidates = 0;
    std::string diagnostic;
};

/// Simplex grid with step `step`, at least `eta` positive entries and
/// b_j·B_all <= T_j; argmax utility, ties to the lexicographically smallest vector.
AllocationResult allocate_shares(std::span<const VendorState> vendors, std::span<const SpeedModel> speeds, int eta,
                                 double step, const UtilityConfig& cfg);

/// All grid vectors (lexicographic order) satisfying the count and capacity rules.
std::vector<std::vector<double>> share_grid(std::span<const VendorState> vendors, int eta, double step,
                                            double demand_mbps);

// ---- popularity hashing and caches ------------------------------------------

struct FileInfo {
    std::uint64_t id = 0;
    double popularity = 0.0;
    double bytes = 0.0;
};

/// Vendor for each cold file (bottom `cold_fraction` by popularity, ties by id),
/// nullopt for hot files that go through schedule_request.
std::vector<std::optional<std::size_t>> hash_schedule(std::span<const FileInfo> files, std::size_t vendor_count,
                                                      double cold_fraction, std::size_t subset_size,
                                                      std::uint64_t salt = 0);

class LruCache {
public:
    explicit LruCache(double capacity_bytes);

    /// True on hit (entry refreshed). A miss inserts the file unless it is larger than the cache.
    bool access(std::uint64_t file, double bytes);
    /// Insert or refresh without counting a request.
    void push(std::uint64_t file, double bytes);
    bool contains(std::uint64_t file) const { return index_.count(file) != 0; }
    double used_bytes() const { return used_; }
    double capacity_bytes() const { return capacity_; }
    std::size_t size() const { return order_.size(); }

private:
    void insert(std::uint64_t file, double bytes);
    double capacity_;
    double used_ = 0.0;
    std::list<std::pair<std::uint64_t, double>> order_; ///< front = most recent
    std::unordered_map<std::uint64_t, std::list<std::pair<std::uint64_t, double>>::iterator> index_;
};

struct CacheRequest {
    std::uint64_t file = 0;
    double bytes = 0.0;
    std::size_t vendor = 0;
    std::size_t slot = 0;
};

struct CacheResult {
    std::size_t requests = 0;
    std::size_t hits = 0;
    std::size_t misses = 0;
    double hit_rate = 0.0;
    double bts_bytes = 0.0;
    std::vector<double> bts_by_vendor;
    std::vector<double> bts_by_slot; ///< sized to the largest slot seen
    std::vector<std::uint64_t> oversize_files;
};

CacheResult simulate_edge_cache(std::span<const CacheRequest> requests, std::span<const double> capacity_bytes);

// ---- pre-caching -------------------------------------------------------------

struct ForecastEntry {
    std::uint64_t file = 0;
    double score = 0.0;      ///< forecast popularity
    double bytes = 0.0;
    int region = 0;
};

struct CacheNode {
    std::size_t vendor = 0;
    int region = 0;
};

struct PrecacheConfig {
    double confidence_weight = 1.0;
    double threshold = 1e-9;        ///< files need weight·score >= threshold
    std::size_t max_files = 100;
    double free_fraction = 1.0;     ///< share of valley headroom usable
    std::size_t slot_from = 0;      ///< planning window [slot_from, slot_to)
    std::size_t slot_to = static_cast<std::size_t>(-1);
    double slot_seconds = 300.0;
    std::vector<std::vector<double>> similarity; ///< file-rank x file-rank; empty = none
};

struct Push {
    std::uint64_t file = 0;
    std::size_t node = 0;
    std::size_t vendor = 0;
    std::size_t slot = 0;
    double bytes = 0.0;
};

struct PrecachePlan {
    std::vector<Push> pushes;
    std::vector<std::uint64_t> placed;  ///< files fully scheduled
    std::vector<std::uint64_t> skipped; ///< files that did not fit
    std::vector<std::vector<double>> series_after; ///< per vendor Mbps after pushes
    std::string diagnostic;
};

/// Fills valley slots (below each vendor's 95-peak watermark) with pushes of the
/// top forecast files, region by region, spreading similar files across nodes.
PrecachePlan precache_plan(std::span<const ForecastEntry> forecast, std::span<const CacheNode> nodes,
                           std::span<const std::vector<double>> vendor_series_mbps, const PrecacheConfig& cfg);

struct RoutingComparison {
    CacheResult hashed; ///< cold files hashed, hot files through schedule_request
    CacheResult random; ///< every request to a uniformly random vendor
};

/// Replays `request_files` (indices into `files`) through per-vendor LRU caches
/// of equal capacity under both routings.
RoutingComparison compare_cache_routing(std::span<const FileInfo> files, std::span<const std::size_t> request_files,
                                        std::span<const VendorState> vendors, double capacity_bytes_per_vendor,
                                        double cold_fraction, std::size_t subset_size, std::uint64_t seed);

// ---- peak staggering ---------------------------------------------------------

/// (T95 - Σ_j t95_j) / T95. Throws UndefinedResult when T95 = 0.
double srr(std::span<const double> total, std::span<const std::vector<double>> per_vendor);

enum class StaggerMode { phase_shift, complementary_shift, cross_day_shift };
std::string to_string(StaggerMode m);
StaggerMode stagger_mode_from_name(const std::string& name);

struct StaggerConfig {
    std::vector<double> lambdas{1.0, 0.97, 0.94, 0.91, 0.88, 0.85, 0.82, 0.79, 0.76, 0.73, 0.70,
                                0.66, 0.62, 0.58, 0.54, 0.50};
    int slots_per_day = 288;
    std::size_t exhaustive_limit = 4096; ///< exact day-assignment search below this many plans
};

struct PeakPlan {
    StaggerMode mode = StaggerMode::cross_day_shift;
    std::vector<int> duty;                  ///< per day (cross-day / complementary); -1 when unused
    std::vector<std::vector<double>> load;  ///< per vendor, per slot Mbps
    double lambda = 1.0;
    double srr = 0.0;
    double baseline_srr = 0.0;              ///< proportional split
    bool exhaustive = false;
};

/// Shares per slot are load/total. Throws Infeasible if Σ capacity < demand anywhere.
PeakPlan stagger_peaks(std::span<const double> total_mbps, std::span<const VendorState> vendors, StaggerMode mode,
                       const StaggerConfig& cfg = {});

/// Loads for a fixed per-day duty assignment and height factor λ (shared by the
/// search and by callers that want to score their own assignment).
std::vector<std::vector<double>> cross_day_loads(std::span<const double> total_mbps,
                                                 std::span<const VendorState> vendors, std::span<const int> duty,
                                                 double lambda, int slots_per_day);

/// Proportional split load_j = b_j · total.
std::vector<std::vector<double>> proportional_loads(std::span<const double> total_mbps,
                                                    std::span<const VendorState> vendors);

} // namespace shortvid::cdn
