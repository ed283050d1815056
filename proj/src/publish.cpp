#include "shortvid/publish.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shortvid/error.hpp"

namespace shortvid::publish {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace

double NetworkModel::p_fail(double chunk_bytes) const {
    if (fail_constant) return *fail_constant;
    return 1.0 - std::exp(-chunk_bytes / fail_scale_bytes);
}

void NetworkModel::validate() const {
    if (!(bandwidth_kbps > 0.0)) throw InvalidParameter("bandwidth must be > 0");
    if (!(connect_latency_s >= 0.0)) throw InvalidParameter("connect latency must be >= 0");
    if (!(fail_scale_bytes > 0.0)) throw InvalidParameter("failure scale must be > 0");
    if (fail_constant && !(*fail_constant >= 0.0 && *fail_constant < 1.0))
        throw InvalidParameter("failure probability must lie in [0,1)");
}

void PublishJob::validate() const {
    if (!(material_bytes > 0.0)) throw InvalidParameter("material size must be > 0");
    if (!(duration_s > 0.0)) throw InvalidParameter("content duration must be > 0");
    if (!(alpha_ui >= 0.0)) throw InvalidParameter("alpha_ui must be >= 0");
    if (!(w_quality >= 0.0 && w_speed >= 0.0)) throw InvalidParameter("author weights must be >= 0");
    network.validate();
}

std::string to_string(EncodeMode m) {
    switch (m) {
    case EncodeMode::soft: return "soft";
    case EncodeMode::hard: return "hard";
    case EncodeMode::skip: return "skip";
    }
    return "?";
}

EncodeMode encode_mode_from_name(const std::string& name) {
    for (auto m : {EncodeMode::soft, EncodeMode::hard, EncodeMode::skip})
        if (to_string(m) == name) return m;
    throw InvalidParameter("unknown encoding mode: " + name);
}

double EncodeOption::output_bytes(const PublishJob& job) const {
    return mode == EncodeMode::skip ? job.material_bytes : job.material_bytes * output_ratio;
}

double EncodeOption::encode_s(const PublishJob& job) const {
    if (mode == EncodeMode::skip) return 0.0;
    if (!(speed_x > 0.0)) throw InvalidParameter("encoder speed must be > 0");
    return job.duration_s / speed_x;
}

double upload_seconds(const PublishJob& job, double bytes) {
    if (std::isinf(job.network.bandwidth_kbps)) return 0.0;
    return bytes * 8.0 / (job.network.bandwidth_kbps * 1000.0);
}

ModeEvaluation evaluate_mode(const PublishJob& job, const EncodeOption& option, const ModeConfig& cfg) {
    if (!(cfg.lambda >= 0.0)) throw InvalidParameter("lambda must be >= 0");
    ModeEvaluation e;
    e.encode_s = option.encode_s(job);
    e.fixed_encode_s = e.encode_s / (1.0 + cfg.lambda * job.alpha_ui);
    e.upload_s = upload_seconds(job, option.output_bytes(job));
    e.publish_s = std::max(e.upload_s, e.fixed_encode_s);
    e.allowed = option.quality_delta >= cfg.quality_floor;
    return e;
}

ModeChoice choose_encoding_mode(const PublishJob& job, std::span<const EncodeOption> options, const ModeConfig& cfg) {
    job.validate();
    if (options.empty()) throw InvalidInput("no encoding options");
    ModeChoice c;
    std::optional<std::size_t> best;
    std::string violations;
    for (std::size_t i = 0; i < options.size(); ++i) {
        const auto e = evaluate_mode(job, options[i], cfg);
        c.all.push_back(e);
        if (!e.allowed) {
            violations += (violations.empty() ? "" : ", ") + to_string(options[i].mode) + " (quality delta " +
                          std::to_string(options[i].quality_delta) + ")";
            continue;
        }
        if (!best || e.publish_s < c.all[*best].publish_s ||
            (e.publish_s == c.all[*best].publish_s && options[i].quality_delta > options[*best].quality_delta))
            best = i;
    }
    if (!best) throw Infeasible("no encoding option meets the quality floor: " + violations);
    c.index = *best;
    c.option = options[*best];
    c.eval = c.all[*best];
    return c;
}

bool ResponseSurface::in_domain(const EncodeParams& p, std::string* why) const {
    auto fail = [&](const std::string& m) {
        if (why) *why = m;
        return false;
    };
    if (!(p.qp >= 0.0 && p.qp <= 51.0)) return fail("qp outside [0,51]");
    if (!(p.fps >= 1.0 && p.fps <= 120.0)) return fail("fps outside [1,120]");
    if (!(p.bitrate_kbps > 0.0)) return fail("bitrate must be > 0");
    if (!codec_quality.count(p.codec) || !codec_cost.count(p.codec)) return fail("unknown codec " + p.codec);
    if (p.audio_channels < 1 || p.audio_channels > 8) return fail("audio channels outside [1,8]");
    return true;
}

double ResponseSurface::quality(const EncodeParams& p, const PublishJob& job) const {
    const double q = base_quality - quality_per_qp * (p.qp - qp_ref) +
                     quality_per_bitrate_doubling * std::log2(p.bitrate_kbps / bitrate_ref) -
                     quality_per_complexity * job.complexity + codec_quality.at(p.codec) + (p.hdr ? hdr_bonus : 0.0) +
                     std::log2(p.fps / 30.0);
    return std::clamp(q, 0.0, 100.0);
}

double ResponseSurface::output_bytes(const EncodeParams& p, const PublishJob& job) const {
    return (p.bitrate_kbps + audio_kbps_per_channel * p.audio_channels) * 125.0 * job.duration_s;
}

double ResponseSurface::encode_s(const EncodeParams& p, const PublishJob& job) const {
    return job.duration_s * codec_cost.at(p.codec) * (p.fps / 30.0) * (1.0 + job.complexity) * (p.hdr ? 1.2 : 1.0) /
           device_speed_x;
}

ParamEvaluation evaluate_params(const PublishJob& job, const EncodeParams& p, const ResponseSurface& surface,
                                const ParamScoreConfig& cfg) {
    std::string why;
    if (!surface.in_domain(p, &why)) throw InvalidParameter(why);
    ParamEvaluation e;
    e.params = p;
    e.quality = surface.quality(p, job);
    const double upload = upload_seconds(job, surface.output_bytes(p, job));
    e.publish_s = std::max(upload, surface.encode_s(p, job) / (1.0 + cfg.lambda * job.alpha_ui));
    const double scale = cfg.economy.arpu_base * cfg.economy.lt_base;
    const auto& qi = cfg.impacts[core::Metric::video_quality];
    e.ltv_quality =
        scale * job.w_quality * qi.direction * qi.coefficient * core::relative_change_pct(cfg.quality_ref, e.quality).value_or(0.0);
    e.ltv_duration = -scale * job.w_speed * cfg.duration_coefficient *
                     core::relative_change_pct(cfg.publish_ref_s, e.publish_s).value_or(0.0);
    e.score = e.ltv_quality + e.ltv_duration;
    return e;
}

ParamChoice choose_encoding_params(const PublishJob& job, std::span<const EncodeParams> grid,
                                   const ResponseSurface& surface, const ParamScoreConfig& cfg) {
    job.validate();
    if (grid.empty()) throw InvalidInput("encoding parameter grid is empty");
    ParamChoice c;
    c.content_score = job.complexity;
    c.w_quality = job.w_quality;
    c.w_speed = job.w_speed;
    c.alpha_ui = job.alpha_ui;
    bool any = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::string why;
        if (!surface.in_domain(grid[i], &why)) {
            c.diagnostics.push_back("grid point " + std::to_string(i) + " skipped: " + why);
            continue;
        }
        const auto e = evaluate_params(job, grid[i], surface, cfg);
        c.evaluated.push_back(e);
        if (!any || e.score > c.best.score) {
            c.best = e;
            any = true;
        }
    }
    if (!any) throw InvalidInput("no encoding grid point lies inside the response-surface domain");
    return c;
}

std::string to_string(UploadMode m) { return m == UploadMode::chunk ? "chunk" : "streaming"; }

ChunkPlan evaluate_chunking(const PublishJob& job, const UploadNode& node, double chunk_bytes, int parallelism) {
    if (!(chunk_bytes > 0.0)) throw InvalidParameter("chunk size must be > 0");
    if (parallelism < 1) throw InvalidParameter("parallelism must be >= 1");
    if (!(node.bandwidth_kbps > 0.0)) throw InvalidParameter("node bandwidth must be > 0");
    ChunkPlan p;
    p.mode = UploadMode::chunk;
    p.chunk_bytes = chunk_bytes;
    p.parallelism = parallelism;
    p.node = node.id;
    p.chunks = static_cast<std::size_t>(std::ceil(job.material_bytes / chunk_bytes - 1e-12));
    p.expected_repeat = 1.0 / (1.0 - job.network.p_fail(std::min(chunk_bytes, job.material_bytes)));
    double sum = 0.0;
    double left = job.material_bytes;
    for (std::size_t c = 0; c < p.chunks; ++c) {
        const double size = std::min(chunk_bytes, left);
        left -= size;
        const double t = std::isinf(node.bandwidth_kbps) ? 0.0 : size * 8.0 / (node.bandwidth_kbps * 1000.0);
        sum += t / (1.0 - job.network.p_fail(size));
    }
    const auto groups = (p.chunks + static_cast<std::size_t>(parallelism) - 1) / static_cast<std::size_t>(parallelism);
    p.expected_s = sum / parallelism + static_cast<double>(groups) * node.connect_latency_s;
    return p;
}

ChunkPlan evaluate_streaming(const PublishJob& job, const UploadNode& node) {
    ChunkPlan p;
    p.mode = UploadMode::streaming;
    p.chunk_bytes = job.material_bytes;
    p.node = node.id;
    p.expected_repeat = 1.0 / (1.0 - job.network.p_fail(job.material_bytes));
    const double t = std::isinf(node.bandwidth_kbps) ? 0.0 : job.material_bytes * 8.0 / (node.bandwidth_kbps * 1000.0);
    p.expected_s = t * (1.0 + (p.expected_repeat - 1.0) / 2.0) + node.connect_latency_s;
    return p;
}

ChunkPlan plan_upload(const PublishJob& job, std::span<const double> chunk_sizes, std::span<const int> parallelism,
                      std::span<const UploadNode> nodes, bool include_streaming) {
    job.validate();
    if (chunk_sizes.empty() || parallelism.empty() || nodes.empty())
        throw InvalidInput("upload planning needs at least one chunk size, parallelism and node");
    std::optional<ChunkPlan> best;
    auto better = [](const ChunkPlan& a, const ChunkPlan& b) {
        if (a.expected_s != b.expected_s) return a.expected_s < b.expected_s;
        if (a.chunk_bytes != b.chunk_bytes) return a.chunk_bytes > b.chunk_bytes;
        if (a.parallelism != b.parallelism) return a.parallelism > b.parallelism;
        if (a.node != b.node) return a.node < b.node;
        return a.mode == UploadMode::chunk && b.mode == UploadMode::streaming;
    };
    for (const auto& node : nodes) {
        if (!node.up) continue;
        for (double size : chunk_sizes)
            for (int par : parallelism) {
                auto p = evaluate_chunking(job, node, size, par);
                if (!best || better(p, *best)) best = p;
            }
        if (include_streaming) {
            auto p = evaluate_streaming(job, node);
            if (!best || better(p, *best)) best = p;
        }
    }
    if (!best) throw Infeasible("every upload node is down");
    return *best;
}

PreuploadResult preupload_gain(const PreuploadInputs& in) {
    if (!(in.cancel_prob >= 0.0 && in.cancel_prob <= 1.0)) throw InvalidParameter("cancel probability must lie in [0,1]");
    if (!(in.encrypt_s >= 0.0 && in.upload_s >= 0.0 && in.pre_bytes >= 0.0))
        throw InvalidParameter("durations and sizes must be >= 0");
    const double c = in.upload_s + in.encrypt_s;
    PreuploadResult r;
    r.baseline_s = in.upload_s;
    if (in.lead.kind == LeadKind::constant) {
        if (!(in.lead.value >= 0.0)) throw InvalidParameter("lead time must be >= 0");
        r.expected_perceived_s = std::max(0.0, c - in.lead.value);
    } else {
        if (!(in.lead.sigma > 0.0)) throw InvalidParameter("lognormal sigma must be > 0");
        if (c > 0.0) {
            const double d = (std::log(c) - in.lead.mu) / in.lead.sigma;
            r.expected_perceived_s = c * normal_cdf(d) -
                                     std::exp(in.lead.mu + 0.5 * in.lead.sigma * in.lead.sigma) * normal_cdf(d - in.lead.sigma);
            r.expected_perceived_s = std::max(0.0, r.expected_perceived_s);
        }
    }
    r.saving_s = r.baseline_s - r.expected_perceived_s;
    r.expected_waste_bytes = in.cancel_prob * in.pre_bytes;
    r.recommend = r.saving_s * in.value_per_s > r.expected_waste_bytes * in.cost_per_byte;
    return r;
}

std::string to_string(AppState s) {
    switch (s) {
    case AppState::foreground_publish: return "foreground_publish";
    case AppState::background: return "background";
    case AppState::other_page: return "other_page";
    }
    return "?";
}

AppState app_state_from_name(const std::string& name) {
    for (auto s : {AppState::foreground_publish, AppState::background, AppState::other_page})
        if (to_string(s) == name) return s;
    throw InvalidParameter("unknown app state: " + name);
}

double PiecewiseLinear::operator()(double x) const {
    if (points.empty()) return 0.0;
    if (x <= points.front().first) return points.front().second;
    if (x >= points.back().first) return points.back().second;
    for (std::size_t i = 1; i < points.size(); ++i)
        if (x <= points[i].first) {
            const auto [x0, y0] = points[i - 1];
            const auto [x1, y1] = points[i];
            return x1 == x0 ? y1 : y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    return points.back().second;
}

PriorityDecision adapt_priority(const PriorityInputs& in) {
    if (in.levels.empty()) throw InvalidInput("priority ladder is empty");
    if (!(in.epsilon >= 0.0)) throw InvalidParameter("epsilon must be >= 0");
    if (!std::is_sorted(in.levels.begin(), in.levels.end())) throw InvalidInput("priority levels must ascend");
    for (std::size_t i = in.levels.size(); i-- > 0;) {
        const double level = in.levels[i];
        const double deg = in.state == AppState::other_page ? in.degradation(level) : 0.0;
        const bool quota_ok = level * in.quota_per_level + in.consume_quota <= in.max_quota;
        if (deg <= in.epsilon && quota_ok) return {i, level, deg, false};
    }
    const double deg = in.state == AppState::other_page ? in.degradation(in.levels.front()) : 0.0;
    return {0, in.levels.front(), deg, true};
}

} // namespace shortvid::publish
