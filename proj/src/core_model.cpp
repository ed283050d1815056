#include "shortvid/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shortvid/error.hpp"

namespace shortvid::core {

namespace {

using Field = double QoPVector::*;

constexpr std::array<Field, kMetricCount> kFields{
    &QoPVector::first_feed_ms,   &QoPVector::first_frame_ms, &QoPVector::rebuffer_ratio,
    &QoPVector::rebuffer_dur_per_vv_ms, &QoPVector::frame_drop_rate, &QoPVector::anr_crash_rate,
    &QoPVector::power_avg,       &QoPVector::storage_pct,    &QoPVector::cpu_pct,
    &QoPVector::mem_pct,         &QoPVector::oom_rate,       &QoPVector::fps,
    &QoPVector::traffic_bytes,   &QoPVector::temperature_c,  &QoPVector::publish_success_ratio,
    &QoPVector::video_quality,
};

constexpr std::array<std::string_view, kMetricCount> kNames{
    "first_feed_ms", "first_frame_ms", "rebuffer_ratio", "rebuffer_dur_per_vv_ms",
    "frame_drop_rate", "anr_crash_rate", "power_avg", "storage_pct",
    "cpu_pct", "mem_pct", "oom_rate", "fps",
    "traffic_bytes", "temperature_c", "publish_success_ratio", "video_quality",
};

bool is_fraction(Metric m) {
    switch (m) {
    case Metric::rebuffer_ratio:
    case Metric::frame_drop_rate:
    case Metric::anr_crash_rate:
    case Metric::storage_pct:
    case Metric::cpu_pct:
    case Metric::mem_pct:
    case Metric::oom_rate:
    case Metric::publish_success_ratio:
        return true;
    default:
        return false;
    }
}

} // namespace

std::string_view metric_name(Metric m) { return kNames[index(m)]; }

std::optional<Metric> metric_from_name(std::string_view name) {
    for (auto m : kAllMetrics)
        if (kNames[index(m)] == name) return m;
    return std::nullopt;
}

double QoPVector::get(Metric m) const { return this->*kFields[index(m)]; }

void QoPVector::set(Metric m, double v) { this->*kFields[index(m)] = v; }

void QoPVector::validate() const {
    for (auto m : kAllMetrics) {
        const double v = get(m);
        if (!std::isfinite(v) || v < 0.0)
            throw InvalidParameter("QoP metric " + std::string(metric_name(m)) + " must be finite and >= 0");
        if (is_fraction(m) && v > 1.0)
            throw InvalidParameter("QoP metric " + std::string(metric_name(m)) + " must lie in [0,1]");
    }
}

ImpactTable ImpactTable::defaults() {
    ImpactTable t;
    const auto hurt = [&](Metric m, double pct) { t[m] = {pct / 100.0, -1, true}; };
    const auto help = [&](Metric m, double pct) { t[m] = {pct / 100.0, +1, true}; };
    const auto missing = [&](Metric m, int direction) { t[m] = {0.0, direction, false}; };

    hurt(Metric::power_avg, 0.027);
    hurt(Metric::storage_pct, 0.013);
    hurt(Metric::first_feed_ms, 0.006);   // 0.005-0.007
    hurt(Metric::first_frame_ms, 0.023);
    missing(Metric::frame_drop_rate, -1);
    hurt(Metric::anr_crash_rate, 0.00575); // 0.0053-0.0062
    hurt(Metric::temperature_c, 0.183);
    hurt(Metric::cpu_pct, 0.014);          // 0.005-0.023
    hurt(Metric::oom_rate, 0.0009);
    missing(Metric::publish_success_ratio, +1);
    help(Metric::fps, 0.021);
    hurt(Metric::rebuffer_ratio, 0.015);
    hurt(Metric::rebuffer_dur_per_vv_ms, 0.015);
    hurt(Metric::mem_pct, 0.004);
    missing(Metric::traffic_bytes, -1);
    // Not part of the measured table; synthetic default for quality trade-offs.
    help(Metric::video_quality, 0.020);
    return t;
}

void ImpactTable::validate() const {
    for (auto m : kAllMetrics) {
        const auto& e = (*this)[m];
        if (!std::isfinite(e.coefficient) || e.coefficient < 0.0)
            throw InvalidParameter("impact coefficient for " + std::string(metric_name(m)) + " must be >= 0");
        if (e.direction != 1 && e.direction != -1)
            throw InvalidParameter("impact direction for " + std::string(metric_name(m)) + " must be +1 or -1");
    }
}

void EconomyParams::validate() const {
    if (!(lt_base > 0.0)) throw InvalidParameter("lt_base must be > 0");
    if (!(arpu_base >= 0.0)) throw InvalidParameter("arpu_base must be >= 0");
    if (!(roi_gamma >= 0.0)) throw InvalidParameter("roi_gamma must be >= 0");
    if (!(discount_rate >= 0.0 && discount_rate < 1.0)) throw InvalidParameter("discount_rate must lie in [0,1)");
}

double discounted_value(std::span<const double> cashflows, double r) {
    if (!(r >= 0.0 && r < 1.0)) throw InvalidParameter("discount rate must lie in [0,1)");
    double total = 0.0;
    double factor = 1.0;
    for (double d : cashflows) {
        factor *= 1.0 + r;
        total += d / factor;
    }
    return total;
}

std::optional<double> relative_change_pct(double before, double after) {
    if (before == after) return 0.0;
    if (before == 0.0) return std::nullopt;
    const double denom = std::max(std::abs(before), std::abs(after));
    return (after - before) / denom * 100.0;
}

LtDelta qop_delta_to_lt(const QoPVector& before, const QoPVector& after, const ImpactTable& impacts) {
    LtDelta out;
    for (auto m : kAllMetrics) {
        const auto& e = impacts[m];
        if (!e.available) continue;
        const auto pct = relative_change_pct(before.get(m), after.get(m));
        if (!pct) {
            out.skipped.push_back(m);
            continue;
        }
        const double c = e.direction * e.coefficient * *pct;
        out.per_metric[index(m)] = c;
        out.relative_lt += c;
    }
    return out;
}

double lt_equivalent(std::span<const std::pair<Metric, double>> changes_pct, const ImpactTable& impacts) {
    double total = 0.0;
    for (const auto& [m, pct] : changes_pct) {
        const auto& e = impacts[m];
        if (e.available) total += e.direction * e.coefficient * pct;
    }
    return total;
}

double weighted_relative_lt(const LtDelta& delta, const MetricWeights& weights) {
    double total = 0.0;
    for (std::size_t i = 0; i < kMetricCount; ++i) total += weights.values[i] * delta.per_metric[i];
    return total;
}

ProfitBreakdown profit(double delta_lt, double delta_arpu, double delta_cost, const EconomyParams& params) {
    params.validate();
    ProfitBreakdown b;
    b.delta_lt = delta_lt;
    b.delta_arpu = delta_arpu;
    b.delta_cost = delta_cost;
    b.profit = params.lt_base * delta_arpu + delta_lt * params.arpu_base - delta_cost;
    if (delta_cost > 0.0) b.roi = b.profit / delta_cost;
    b.passes_gate = b.profit > 0.0 && (delta_cost <= 0.0 || *b.roi > params.roi_gamma);
    return b;
}

} // namespace shortvid::core
