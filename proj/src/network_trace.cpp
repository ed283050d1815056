#include "shortvid/network_trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "shortvid/error.hpp"

namespace shortvid::playback {

NetworkTrace NetworkTrace::constant(double kbps, double horizon_ms) {
    NetworkTrace t;
    t.t_ms = {0.0};
    t.kbps = {kbps};
    t.horizon_ms = horizon_ms;
    t.validate();
    return t;
}

NetworkTrace NetworkTrace::from_rows(std::vector<double> t_ms, std::vector<double> kbps) {
    NetworkTrace t;
    if (t_ms.empty()) throw InvalidInput("network trace has no rows");
    const double gap = t_ms.size() > 1 ? t_ms.back() - t_ms[t_ms.size() - 2] : 1000.0;
    t.horizon_ms = t_ms.back() + gap;
    t.t_ms = std::move(t_ms);
    t.kbps = std::move(kbps);
    t.validate();
    return t;
}

void NetworkTrace::validate() const {
    if (t_ms.empty() || t_ms.size() != kbps.size()) throw InvalidInput("network trace rows are empty or ragged");
    if (t_ms.front() != 0.0) throw InvalidInput("network trace must start at t=0");
    for (std::size_t i = 0; i < t_ms.size(); ++i) {
        if (i > 0 && !(t_ms[i] > t_ms[i - 1])) throw InvalidInput("network trace times must strictly increase");
        if (!(kbps[i] >= 0.0)) throw InvalidInput("network trace bandwidth must be >= 0");
    }
    if (!(horizon_ms > t_ms.back())) throw InvalidInput("network trace horizon must follow the last row");
}

double NetworkTrace::kbps_at(double t) const {
    if (t < 0.0 || t >= horizon_ms) return 0.0;
    const auto it = std::upper_bound(t_ms.begin(), t_ms.end(), t);
    return kbps[static_cast<std::size_t>(it - t_ms.begin()) - 1];
}

double NetworkTrace::bytes_between(double t0, double t1) const {
    t0 = std::max(t0, 0.0);
    t1 = std::min(t1, horizon_ms);
    if (!(t1 > t0)) return 0.0;
    auto i = static_cast<std::size_t>(std::upper_bound(t_ms.begin(), t_ms.end(), t0) - t_ms.begin()) - 1;
    double bytes = 0.0;
    double t = t0;
    while (t < t1) {
        const double end = std::min(t1, i + 1 < t_ms.size() ? t_ms[i + 1] : horizon_ms);
        if (kbps[i] > 0.0) {
            if (std::isinf(kbps[i])) return std::numeric_limits<double>::infinity();
            bytes += kbps[i] * 1000.0 / 8.0 * (end - t) / 1000.0;
        }
        t = end;
        ++i;
    }
    return bytes;
}

NetworkTrace NetworkTrace::scaled(double factor) const {
    NetworkTrace out = *this;
    for (auto& k : out.kbps) k *= factor;
    return out;
}

NetworkTrace read_trace_csv(std::istream& in) {
    std::string line;
    std::vector<double> ts;
    std::vector<double> bw;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.find("t_ms") != std::string::npos) continue;
        std::istringstream row(line);
        std::string a;
        std::string b;
        if (!std::getline(row, a, ',') || !std::getline(row, b))
            throw InvalidInput("network trace line " + std::to_string(lineno) + ": expected t_ms,bandwidth_kbps");
        try {
            ts.push_back(std::stod(a));
            bw.push_back(b == "inf" ? std::numeric_limits<double>::infinity() : std::stod(b));
        } catch (const std::logic_error&) {
            throw InvalidInput("network trace line " + std::to_string(lineno) + ": not a number");
        }
    }
    return NetworkTrace::from_rows(std::move(ts), std::move(bw));
}

NetworkTrace load_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open network trace " + path);
    return read_trace_csv(in);
}

void write_trace_csv(std::ostream& out, const NetworkTrace& trace) {
    out << "t_ms,bandwidth_kbps\n";
    out.precision(17);
    for (std::size_t i = 0; i < trace.t_ms.size(); ++i) out << trace.t_ms[i] << ',' << trace.kbps[i] << '\n';
}

} // namespace shortvid::playback
