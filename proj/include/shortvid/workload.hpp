#pragma once

// Synthetic catalogs, bandwidth waveforms and user populations. Every generator
// is a pure function of (spec, seed).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shortvid/media.hpp"
#include "shortvid/network_trace.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::workload {

struct LadderTemplate {
    double bitrate_kbps = 1000.0;
    double quality_score = 70.0;
    playback::ResolutionClass resolution = playback::ResolutionClass::p720;
    double meta_bytes = 2000.0;
};

struct DurationBucket {
    double min_s = 5.0;
    double max_s = 30.0;
    double weight = 1.0;
    double stop_prob_lo = 0.03; ///< per-second stop probability range
    double stop_prob_hi = 0.10;
    std::vector<LadderTemplate> ladders;
};

struct CatalogSpec {
    std::size_t item_count = 10000;
    std::optional<double> zipf_exponent; ///< unset: solve for the target concentration
    double top_fraction = 0.01;
    double target_top_mass = 0.70;
    int categories = 8;
    std::vector<DurationBucket> buckets;

    static CatalogSpec defaults();
    void validate() const;
};

struct Catalog {
    std::vector<playback::Item> items;
    double exponent = 0.0;
    double top_mass = 0.0; ///< popularity mass held by the top `top_fraction` of items
    bool calibrated = false;
    std::vector<std::string> warnings;
};

/// Mass of the most popular ceil(fraction·n) items under Zipf(s) over n ranks.
double zipf_top_mass(std::size_t n, double s, double fraction);

/// Exponent s with zipf_top_mass(n, s, fraction) == target (bisection).
double solve_zipf_exponent(std::size_t n, double target, double fraction);

Catalog generate_catalog(const CatalogSpec& spec, std::uint64_t seed);

/// Geometric watch time truncated at the item duration (residual mass at full watch).
double sample_watch_time(const playback::Item& item, Rng& rng);

struct WaveformSpec {
    int days = 30;
    int slots_per_day = 288;
    double slot_seconds = 300.0;
    double base_mbps = 1000.0;    ///< peak-of-shape demand
    std::vector<double> daily_shape; ///< length slots_per_day; empty uses diurnal_shape()
    double valley_ratio = 0.25;
    double peak_hour = 21.0;
    double peak_width_h = 1.5;
    double noise = 0.03; ///< multiplicative, uniform in [1-noise, 1+noise]

    void validate() const;
};

struct BandwidthWaveform {
    int days = 0;
    int slots_per_day = 0;
    double slot_seconds = 300.0;
    std::vector<double> mbps;

    std::size_t slot_count() const { return mbps.size(); }
};

/// Smooth evening-peak profile in [valley_ratio, 1] with a Gaussian bump.
std::vector<double> diurnal_shape(int slots_per_day, double valley_ratio, double peak_hour, double peak_width_h);

BandwidthWaveform generate_waveform(const WaveformSpec& spec, std::uint64_t seed);

struct PortraitClass {
    std::string name;
    double weight = 1.0;
    core::MetricWeights sensitivity;
};

struct PopulationSpec {
    std::size_t user_count = 1000;
    double device_lo = 0.2;
    double device_hi = 1.0;
    std::vector<PortraitClass> portraits;
    std::array<double, 3> network_mix{0.2, 0.5, 0.3}; ///< poor, fair, good

    /// Two sensitivity clusters: rebuffer-sensitive and quality-sensitive.
    static PopulationSpec defaults();
    void validate() const;
};

/// Users carry portrait "sensitivity" = index of their portrait class.
std::vector<playback::UserState> generate_population(const PopulationSpec& spec, std::uint64_t seed);

struct NetworkTraceSpec {
    double duration_s = 600.0;
    double step_s = 1.0;
    std::array<double, 3> mean_kbps{1200.0, 3000.0, 8000.0}; ///< poor, fair, good
    double log_sigma = 0.5;   ///< stationary spread of log bandwidth
    double ar = 0.8;          ///< AR(1) coefficient of log bandwidth per step
    std::array<double, 3> outage_prob{0.01, 0.003, 0.0}; ///< per step
    double outage_s = 3.0;
    double outage_kbps = 50.0;

    void validate() const;
};

/// AR(1) log-normal bandwidth with occasional outages; the stationary mean is
/// the class mean (outages aside).
playback::NetworkTrace generate_network_trace(playback::NetworkClass cls, const NetworkTraceSpec& spec,
                                              std::uint64_t seed);

} // namespace shortvid::workload
