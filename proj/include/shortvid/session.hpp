#pragma once

// Fixed-step fluid session simulator: one user swiping through a feed while
// the decider drives downloads.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "shortvid/core_model.hpp"
#include "shortvid/decider.hpp"
#include "shortvid/media.hpp"
#include "shortvid/network_trace.hpp"
#include "shortvid/playback_models.hpp"

namespace shortvid::playback {

struct SessionConfig {
    double clock_step_ms = 100.0;
    double startup_bytes = 200000.0; ///< first frame needs min(startup_bytes, startup_media_s of media)
    double startup_media_s = 1.0;
    double render_startup_ms = 0.0;  ///< added to first frame when pre-render is off
    double max_wait_s = 8.0;         ///< user swipes after waiting this long (startup or stall)
    std::uint64_t seed = 0;
    const PlaytimeModel* playtime = nullptr; ///< null: geometric watch time from the item
    std::vector<double> fixed_playtimes_s;  ///< per position; overrides sampling
    std::optional<double> traffic_cap_bytes; ///< global cap, off by default
    double max_session_s = std::numeric_limits<double>::infinity();
    double ewma_weight = 0.3;        ///< bandwidth estimator weight on the newest slot
    std::optional<double> initial_kbps; ///< prior estimate; default by network class
    bool record_slots = true;
};

struct SlotRecord {
    double t_ms = 0.0; ///< slot start
    std::size_t position = 0;
    double buffer_s = 0.0;          ///< playing item's buffer at slot end
    double downloaded_bytes = 0.0;  ///< all items
    double downloaded_media_s = 0.0; ///< playing item, seconds of media
    double played_s = 0.0;
    double stall_s = 0.0;
    int depth = 0;
    double cap_bytes = 0.0;
    bool prerender = true;
    bool first_frame = false;
};

struct ItemRecord {
    std::size_t position = 0;
    std::uint64_t item_id = 0;
    std::optional<std::size_t> ladder;
    double start_ms = 0.0;
    double end_ms = 0.0;
    std::optional<double> first_frame_ms;
    double target_playtime_s = 0.0;
    double played_s = 0.0;
    double stall_s = 0.0;
    int stall_events = 0;
    double bytes = 0.0; ///< downloaded during the session
    double quality = 0.0;
    bool viewed = false; ///< became the playing item
    bool abandoned = false;
    // state when the ladder was chosen
    double decision_buffer_s = 0.0;
    NetworkClass decision_network = NetworkClass::fair;
    int decision_portrait = 0;
    core::QoPVector qop;
};

struct SessionTrace {
    std::vector<SlotRecord> slots;
    std::vector<ItemRecord> items;
    double traffic_bytes = 0.0;
    bool truncated = false; ///< trace ran out before the feed ended
    int fallbacks = 0;
    core::QoPVector qop;
};

/// Runs Algorithm-style slot loop: user events, state update, decide, execute.
SessionTrace run_session(const Decider& decider, const UserState& u, std::span<const Item> itl,
                         const NetworkTrace& net, const SessionConfig& cfg);

/// Session aggregation: PCT50 first frame over viewed items, stall/(stall+play),
/// stall ms per view, summed traffic, play-weighted quality.
core::QoPVector aggregate_qop(std::span<const ItemRecord> items, double traffic_bytes);

/// Lower median: sorted[ceil(n/2) - 1].
double pct50(std::vector<double> v);

struct EstProfitConfig {
    core::ImpactTable impacts = core::ImpactTable::defaults();
    core::EconomyParams economy;
    core::QoPVector reference = default_reference();
    double traffic_price_per_gb = 0.0;

    static core::QoPVector default_reference();
};

/// arpu·lt_base·Σ_m sens_m·contribution_m(reference → qop) − traffic price.
double est_profit(const core::QoPVector& qop, const core::MetricWeights& sens, const EstProfitConfig& cfg);

struct Episode {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    bool terminal = false;
};

/// One tuple per item with a ladder decision; reward is the item's EstProfit.
std::vector<Episode> episodes_from_trace(const SessionTrace& trace, const UserState& u,
                                         const StateBucketing& bucketing, const EstProfitConfig& cfg);

void write_trace_jsonl(std::ostream& out, const SessionTrace& trace);
void write_episodes_jsonl(std::ostream& out, std::span<const Episode> episodes);
std::vector<Episode> read_episodes_jsonl(std::istream& in);

} // namespace shortvid::playback
