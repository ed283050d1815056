#include "shortvid/media.hpp"

#include <cmath>

#include "shortvid/error.hpp"

namespace shortvid::playback {

std::string_view to_string(ResolutionClass r) {
    switch (r) {
    case ResolutionClass::p360: return "360p";
    case ResolutionClass::p540: return "540p";
    case ResolutionClass::p720: return "720p";
    case ResolutionClass::p1080: return "1080p";
    }
    return "?";
}

std::string_view to_string(NetworkClass n) {
    switch (n) {
    case NetworkClass::poor: return "poor";
    case NetworkClass::fair: return "fair";
    case NetworkClass::good: return "good";
    }
    return "?";
}

std::size_t LadderGroup::highest_at_most(double kbps) const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < ladders.size(); ++i)
        if (ladders[i].bitrate_kbps <= kbps) best = i;
    return best;
}

double LadderGroup::mean_quality() const {
    if (ladders.empty()) return 0.0;
    double s = 0.0;
    for (const auto& l : ladders) s += l.quality_score;
    return s / static_cast<double>(ladders.size());
}

double LadderGroup::mean_bitrate() const {
    if (ladders.empty()) return 0.0;
    double s = 0.0;
    for (const auto& l : ladders) s += l.bitrate_kbps;
    return s / static_cast<double>(ladders.size());
}

void LadderGroup::validate() const {
    if (ladders.empty()) throw InvalidInput("ladder group is empty");
    for (std::size_t i = 0; i < ladders.size(); ++i) {
        const auto& l = ladders[i];
        if (!(l.bitrate_kbps > 0.0)) throw InvalidInput("ladder bitrate must be > 0");
        if (l.quality_score < 0.0 || l.quality_score > 100.0) throw InvalidInput("ladder quality must lie in [0,100]");
        if (i > 0) {
            if (!(l.bitrate_kbps > ladders[i - 1].bitrate_kbps))
                throw InvalidInput("ladder bitrates must strictly increase");
            if (l.quality_score < ladders[i - 1].quality_score)
                throw InvalidInput("ladder quality must not decrease with bitrate");
        }
    }
}

void Item::validate() const {
    if (!(duration_s > 0.0)) throw InvalidInput("item duration must be > 0");
    ladders.validate();
    if (!(stop_prob > 0.0 && stop_prob <= 1.0)) throw InvalidInput("item stop probability must lie in (0,1]");
}

int UserState::portrait(const std::string& name, int fallback) const {
    auto it = portraits.find(name);
    return it == portraits.end() ? fallback : it->second;
}

void UserState::validate() const {
    if (!(device_score >= 0.0 && device_score <= 1.0)) throw InvalidInput("device score must lie in [0,1]");
    if (!(buffer_s >= 0.0)) throw InvalidInput("buffer must be >= 0");
    for (double w : qop_sens.values)
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("sensitivity weights must be >= 0");
}

} // namespace shortvid::playback
