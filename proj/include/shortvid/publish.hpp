#pragma once

// Publishing-side planners: encoding mode and parameters, upload chunking,
// pre-upload and upload priority.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shortvid/core_model.hpp"

namespace shortvid::publish {

struct NetworkModel {
    double bandwidth_kbps = 4000.0;       ///< may be +inf
    double connect_latency_s = 0.2;
    double fail_scale_bytes = 8e6;        ///< β in p_fail = 1 - exp(-bytes/β)
    std::optional<double> fail_constant;  ///< overrides the size model

    double p_fail(double chunk_bytes) const;
    void validate() const;
};

struct PublishJob {
    double material_bytes = 20e6;
    double duration_s = 30.0;
    double complexity = 0.5;  ///< content analysis score in [0,1]
    double w_quality = 0.5;   ///< author expectation
    double w_speed = 0.5;
    double alpha_ui = 0.0;    ///< consumption-value coefficient
    NetworkModel network;

    void validate() const;
};

enum class EncodeMode { soft, hard, skip };
std::string to_string(EncodeMode m);
EncodeMode encode_mode_from_name(const std::string& name);

struct EncodeOption {
    EncodeMode mode = EncodeMode::soft;
    double output_ratio = 0.5;   ///< output bytes / material bytes
    double speed_x = 2.0;        ///< content seconds encoded per wall second
    double quality_delta = 0.0;

    double output_bytes(const PublishJob& job) const;
    double encode_s(const PublishJob& job) const;
};

struct ModeEvaluation {
    double encode_s = 0.0;
    double fixed_encode_s = 0.0;
    double upload_s = 0.0;
    double publish_s = 0.0;
    bool allowed = false;
};

struct ModeChoice {
    std::size_t index = 0;
    EncodeOption option;
    ModeEvaluation eval;
    std::vector<ModeEvaluation> all;
};

struct ModeConfig {
    double lambda = 1.0;          ///< Fix(enc) = enc / (1 + λ·α_ui)
    double quality_floor = -1e300;
};

/// Transfer time of `bytes` at the job's bandwidth (0 for infinite bandwidth).
double upload_seconds(const PublishJob& job, double bytes);

ModeEvaluation evaluate_mode(const PublishJob& job, const EncodeOption& option, const ModeConfig& cfg);

/// argmin publish duration = max(upload, Fix(encode)) over options meeting the
/// quality floor; ties go to higher quality. Throws Infeasible listing violations.
ModeChoice choose_encoding_mode(const PublishJob& job, std::span<const EncodeOption> options,
                                const ModeConfig& cfg = {});

struct EncodeParams {
    double qp = 23.0;
    double fps = 30.0;
    double bitrate_kbps = 2500.0;
    std::string codec = "h264";
    int audio_channels = 2;
    bool hdr = false;
};

/// Configurable quality / size / speed response to encoding parameters.
struct ResponseSurface {
    double base_quality = 80.0;
    double qp_ref = 23.0;
    double quality_per_qp = 1.2;
    double quality_per_bitrate_doubling = 4.0;
    double bitrate_ref = 2500.0;
    double quality_per_complexity = 10.0;
    double hdr_bonus = 2.0;
    std::map<std::string, double> codec_quality{{"h264", 0.0}, {"h265", 3.0}, {"av1", 4.5}};
    std::map<std::string, double> codec_cost{{"h264", 1.0}, {"h265", 1.8}, {"av1", 3.0}};
    double device_speed_x = 3.0; ///< h264 at 30 fps, content s per wall s
    double audio_kbps_per_channel = 64.0;

    bool in_domain(const EncodeParams& p, std::string* why = nullptr) const;
    double quality(const EncodeParams& p, const PublishJob& job) const;
    double output_bytes(const EncodeParams& p, const PublishJob& job) const;
    double encode_s(const EncodeParams& p, const PublishJob& job) const;
};

struct ParamScoreConfig {
    double quality_ref = 80.0;
    double publish_ref_s = 10.0;
    double duration_coefficient = 0.0001; ///< relative LT per 1% publish-duration change
    core::ImpactTable impacts = core::ImpactTable::defaults(); ///< video_quality coefficient
    core::EconomyParams economy;
    double lambda = 1.0;
};

struct ParamEvaluation {
    EncodeParams params;
    double quality = 0.0;
    double publish_s = 0.0;
    double ltv_quality = 0.0;
    double ltv_duration = 0.0;
    double score = 0.0;
};

struct ParamChoice {
    ParamEvaluation best;
    std::vector<ParamEvaluation> evaluated;
    std::vector<std::string> diagnostics; ///< skipped grid points
    double content_score = 0.0;
    double w_quality = 0.0;
    double w_speed = 0.0;
    double alpha_ui = 0.0;
};

ParamEvaluation evaluate_params(const PublishJob& job, const EncodeParams& p, const ResponseSurface& surface,
                                const ParamScoreConfig& cfg);

/// argmax ΔLTV(quality) + ΔLTV(publish duration); ties go to the first grid point.
ParamChoice choose_encoding_params(const PublishJob& job, std::span<const EncodeParams> grid,
                                   const ResponseSurface& surface, const ParamScoreConfig& cfg = {});

struct UploadNode {
    int id = 0;
    double bandwidth_kbps = 4000.0;
    double connect_latency_s = 0.2;
    bool up = true;
};

enum class UploadMode { chunk, streaming };
std::string to_string(UploadMode m);

struct ChunkPlan {
    UploadMode mode = UploadMode::chunk;
    double chunk_bytes = 0.0;
    int parallelism = 1;
    int node = 0;
    double expected_s = 0.0;
    double expected_repeat = 1.0;
    std::size_t chunks = 1;
};

/// (1/P)·Σ_chunks t_c·E[R_c] + ceil(n/P)·latency with E[R] = 1/(1-p_fail).
ChunkPlan evaluate_chunking(const PublishJob& job, const UploadNode& node, double chunk_bytes, int parallelism);
/// One logical chunk, resumed at the failure offset: t·(1 + (E[R]-1)/2) + latency.
ChunkPlan evaluate_streaming(const PublishJob& job, const UploadNode& node);

/// argmin over sizes x parallelism x nodes (plus streaming per node); ties go to
/// larger chunks, then higher parallelism, then lower node id.
ChunkPlan plan_upload(const PublishJob& job, std::span<const double> chunk_sizes, std::span<const int> parallelism,
                      std::span<const UploadNode> nodes, bool include_streaming = true);

enum class LeadKind { constant, lognormal };

struct LeadDistribution {
    LeadKind kind = LeadKind::constant;
    double value = 0.0; ///< constant lead, s
    double mu = 0.0;    ///< lognormal log-mean
    double sigma = 1.0;
};

struct PreuploadInputs {
    LeadDistribution lead;
    double encrypt_s = 0.5;
    double upload_s = 5.0;
    double cancel_prob = 0.1;
    double pre_bytes = 10e6;
    double value_per_s = 1.0;
    double cost_per_byte = 1e-8;
};

struct PreuploadResult {
    double baseline_s = 0.0;
    double expected_perceived_s = 0.0;
    double saving_s = 0.0;
    double expected_waste_bytes = 0.0;
    bool recommend = false;
};

/// E[max(0, c - L)] with c = upload + encrypt; closed form for lognormal leads.
PreuploadResult preupload_gain(const PreuploadInputs& in);

enum class AppState { foreground_publish, background, other_page };
std::string to_string(AppState s);
AppState app_state_from_name(const std::string& name);

/// Piecewise-linear y(x) through sorted points, flat beyond the ends.
struct PiecewiseLinear {
    std::vector<std::pair<double, double>> points;
    double operator()(double x) const;
};

struct PriorityInputs {
    AppState state = AppState::other_page;
    std::vector<double> levels{1, 2, 3, 4, 5}; ///< ascending
    PiecewiseLinear degradation{{{1, 0.0}, {5, 0.02}}}; ///< consume-QoP loss vs priority
    double epsilon = 0.005;
    double quota_per_level = 10.0;
    double consume_quota = 50.0;
    double max_quota = 100.0;
};

struct PriorityDecision {
    std::size_t index = 0;
    double level = 0.0;
    double degradation = 0.0;
    bool suspended = false;
};

/// Highest level with degradation <= ε and quota within MaxQuota; background and
/// the publish page itself carry no consume-side degradation.
PriorityDecision adapt_priority(const PriorityInputs& in);

} // namespace shortvid::publish
