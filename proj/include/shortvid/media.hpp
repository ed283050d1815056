#pragma once

// Items, ladders and users: the records the playback simulator and the server
// side optimizers exchange.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shortvid/core_model.hpp"

namespace shortvid::playback {

enum class ResolutionClass { p360, p540, p720, p1080 };
enum class NetworkClass { poor, fair, good };
enum class Page { feed, profile, publish, other };

std::string_view to_string(ResolutionClass r);
std::string_view to_string(NetworkClass n);

struct Ladder {
    int index = 0;
    double bitrate_kbps = 0.0;
    double quality_score = 0.0; ///< 0-100
    double file_bytes = 0.0;
    double meta_bytes = 0.0;
    ResolutionClass resolution = ResolutionClass::p720;

    double bytes_per_second() const { return bitrate_kbps * 1000.0 / 8.0; }

    bool operator==(const Ladder&) const = default;
};

/// Renditions of one item, ordered by strictly increasing bitrate.
struct LadderGroup {
    std::vector<Ladder> ladders;

    std::size_t size() const { return ladders.size(); }
    bool empty() const { return ladders.empty(); }
    const Ladder& operator[](std::size_t i) const { return ladders[i]; }

    /// Index of the highest-bitrate ladder not above `kbps` (0 if none fits).
    std::size_t highest_at_most(double kbps) const;
    double mean_quality() const;
    double mean_bitrate() const;

    /// Throws InvalidInput unless bitrates strictly increase and quality never decreases.
    void validate() const;

    bool operator==(const LadderGroup&) const = default;
};

struct Item {
    std::uint64_t id = 0;
    double duration_s = 0.0;
    LadderGroup ladders;
    double popularity_weight = 0.0;
    double value_score = 0.0;
    double stop_prob = 0.1; ///< per-second stop probability of the geometric watch-time model
    int category = 0;
    int duration_bucket = 0;

    void validate() const;
};

struct UserContext {
    Page page = Page::feed;
    int hour = 20;
    NetworkClass network = NetworkClass::fair;
};

struct UserState {
    std::uint64_t id = 0;
    double device_score = 0.5; ///< [0,1]
    double buffer_s = 0.0;     ///< media already buffered for the first item
    std::map<std::string, int> portraits;
    core::MetricWeights qop_sens;
    std::string network_trace_id;
    UserContext context;

    int portrait(const std::string& name, int fallback = 0) const;
    void validate() const;
};

} // namespace shortvid::playback
