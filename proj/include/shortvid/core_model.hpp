#pragma once

// Domain types shared by every module, and the economic layer that maps
// performance-experience (QoP) changes onto lifetime, ARPU and profit.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace shortvid::core {

/// Every metric carried by a QoPVector. `video_quality` is the played-quality
/// score (0-100) used by ladder and decider trade-offs.
enum class Metric : int {
    first_feed_ms,
    first_frame_ms,
    rebuffer_ratio,
    rebuffer_dur_per_vv_ms,
    frame_drop_rate,
    anr_crash_rate,
    power_avg,
    storage_pct,
    cpu_pct,
    mem_pct,
    oom_rate,
    fps,
    traffic_bytes,
    temperature_c,
    publish_success_ratio,
    video_quality,
};

inline constexpr std::size_t kMetricCount = 16;

inline constexpr std::array<Metric, kMetricCount> kAllMetrics{
    Metric::first_feed_ms,   Metric::first_frame_ms, Metric::rebuffer_ratio, Metric::rebuffer_dur_per_vv_ms,
    Metric::frame_drop_rate, Metric::anr_crash_rate, Metric::power_avg,      Metric::storage_pct,
    Metric::cpu_pct,         Metric::mem_pct,        Metric::oom_rate,       Metric::fps,
    Metric::traffic_bytes,   Metric::temperature_c,  Metric::publish_success_ratio,
    Metric::video_quality,
};

std::string_view metric_name(Metric m);
/// Inverse of metric_name; returns nullopt for unknown names.
std::optional<Metric> metric_from_name(std::string_view name);

constexpr std::size_t index(Metric m) { return static_cast<std::size_t>(m); }

/// Per-metric scalar weights (sensitivities, coefficients). Defaults to 1.
struct MetricWeights {
    std::array<double, kMetricCount> values{};

    MetricWeights() { values.fill(1.0); }
    static MetricWeights filled(double v) {
        MetricWeights w;
        w.values.fill(v);
        return w;
    }
    double& operator[](Metric m) { return values[index(m)]; }
    double operator[](Metric m) const { return values[index(m)]; }
};

/// Multi-metric performance-experience record.
struct QoPVector {
    double first_feed_ms = 0.0;
    double first_frame_ms = 0.0;
    double rebuffer_ratio = 0.0;
    double rebuffer_dur_per_vv_ms = 0.0;
    double frame_drop_rate = 0.0;
    double anr_crash_rate = 0.0;
    double power_avg = 0.0;
    double storage_pct = 0.0;
    double cpu_pct = 0.0;
    double mem_pct = 0.0;
    double oom_rate = 0.0;
    double fps = 0.0;
    double traffic_bytes = 0.0;
    double temperature_c = 0.0;
    double publish_success_ratio = 0.0;
    double video_quality = 0.0;

    double get(Metric m) const;
    void set(Metric m, double v);

    /// Throws InvalidParameter when a fraction leaves [0,1] or a duration/fps is negative.
    void validate() const;

    bool operator==(const QoPVector&) const = default;
};

/// Per-metric LT impact for a 1% relative change. `coefficient` is a fraction
/// of LT (0.00023 == 0.023%); `direction` is +1 when increasing the metric helps
/// and -1 when it hurts.
struct ImpactEntry {
    double coefficient = 0.0;
    int direction = -1;
    bool available = false;
};

struct ImpactTable {
    std::array<ImpactEntry, kMetricCount> entries{};

    ImpactEntry& operator[](Metric m) { return entries[index(m)]; }
    const ImpactEntry& operator[](Metric m) const { return entries[index(m)]; }

    /// Shipped baseline: range midpoints, lower bounds for open-ended values.
    static ImpactTable defaults();
    void validate() const;
};

struct EconomyParams {
    double lt_base = 180.0;     ///< days
    double arpu_base = 0.05;    ///< currency per day
    double roi_gamma = 1.0;     ///< launch ROI threshold
    double discount_rate = 0.0; ///< per period, in [0,1)

    void validate() const;
};

struct ProfitBreakdown {
    double delta_lt = 0.0;
    double delta_arpu = 0.0;
    double delta_cost = 0.0;
    double profit = 0.0;
    std::optional<double> roi; ///< set only when delta_cost > 0
    bool passes_gate = false;
};

/// Result of mapping a QoP change onto relative LT.
struct LtDelta {
    double relative_lt = 0.0;                             ///< ΔLT / LT
    std::array<double, kMetricCount> per_metric{};        ///< signed contribution of each metric
    std::vector<Metric> skipped;                          ///< metrics dropped for a zero baseline
};

/// Present value of `cashflows` (first flow discounted once) at rate r in [0,1).
double discounted_value(std::span<const double> cashflows, double r);

/// Relative change in percent between two metric values. The denominator is the
/// larger magnitude so that swapping the arguments negates the result exactly.
/// Returns nullopt for a zero baseline that changed.
std::optional<double> relative_change_pct(double before, double after);

LtDelta qop_delta_to_lt(const QoPVector& before, const QoPVector& after, const ImpactTable& impacts);

/// LT-equivalent of a set of relative changes (percent) already expressed per metric.
double lt_equivalent(std::span<const std::pair<Metric, double>> changes_pct, const ImpactTable& impacts);

/// Σ_m weight_m · contribution_m.
double weighted_relative_lt(const LtDelta& delta, const MetricWeights& weights);

ProfitBreakdown profit(double delta_lt, double delta_arpu, double delta_cost, const EconomyParams& params);

} // namespace shortvid::core
