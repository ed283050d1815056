#pragma once

// Cumulative-curve oracle for a single-item, single-ladder session: bytes
// delivered by time t integrate the trace piecewise; playback is the lower
// envelope of (time since first frame, media delivered, target).

#include <algorithm>
#include <vector>

#include "shortvid/network_trace.hpp"

namespace oracle {

struct Expected {
    std::vector<double> buffer_s;
    std::vector<double> stall_s;
    double first_frame_ms = -1.0;
};

inline double delivered_bytes(const shortvid::playback::NetworkTrace& tr, double t_ms) {
    double bytes = 0.0;
    for (std::size_t i = 0; i < tr.t_ms.size(); ++i) {
        const double a = tr.t_ms[i];
        const double b = i + 1 < tr.t_ms.size() ? tr.t_ms[i + 1] : tr.horizon_ms;
        if (t_ms <= a) break;
        bytes += tr.kbps[i] * 125.0 * (std::min(b, t_ms) - a) / 1000.0;
    }
    return bytes;
}

/// rate_Bps: ladder bytes per second, file = rate*duration, prefix bytes to first frame.
inline Expected fluid(const shortvid::playback::NetworkTrace& tr, double rate_Bps, double duration_s, double target_s,
                      double prefix, double step_ms, int slots) {
    Expected e;
    const double file = rate_Bps * duration_s;
    double played = 0.0;
    bool started = false;
    for (int k = 0; k < slots; ++k) {
        const double end = (k + 1) * step_ms;
        const double media = std::min(file, delivered_bytes(tr, end)) / rate_Bps;
        double stall = 0.0;
        if (!started) {
            if (std::min(file, delivered_bytes(tr, end)) >= prefix) {
                started = true;
                e.first_frame_ms = end;
            }
        } else {
            const double next = std::min({played + step_ms / 1000.0, media, target_s});
            if (next < played + step_ms / 1000.0 - 1e-9 && next < target_s - 1e-9) stall = step_ms / 1000.0 - (next - played);
            played = next;
        }
        e.buffer_s.push_back(media - played);
        e.stall_s.push_back(stall);
        if (started && played >= target_s - 1e-9) break;
    }
    return e;
}

} // namespace oracle
