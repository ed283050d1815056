#pragma once

// Piecewise-constant bandwidth trace. Row i holds from t_ms[i] until t_ms[i+1];
// the last row holds until horizon_ms.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace shortvid::playback {

struct NetworkTrace {
    std::vector<double> t_ms;
    std::vector<double> kbps; ///< may be +infinity
    double horizon_ms = 0.0;

    static NetworkTrace constant(double kbps, double horizon_ms);
    /// Rows (t, kbps); the horizon extends the last row by the previous gap (1 s for a single row).
    static NetworkTrace from_rows(std::vector<double> t_ms, std::vector<double> kbps);

    double kbps_at(double t) const;
    /// Bytes deliverable in [t0, t1), integrating across row boundaries.
    double bytes_between(double t0_ms, double t1_ms) const;
    void validate() const;
    NetworkTrace scaled(double factor) const;
};

/// `t_ms,bandwidth_kbps` with a header line.
NetworkTrace read_trace_csv(std::istream& in);
NetworkTrace load_trace_csv(const std::string& path);
void write_trace_csv(std::ostream& out, const NetworkTrace& trace);

} // namespace shortvid::playback
