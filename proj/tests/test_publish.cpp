#include <doctest.h>

#include <cmath>
#include <limits>

#include "shortvid/error.hpp"
#include "shortvid/publish.hpp"
#include "shortvid/rng.hpp"

using namespace shortvid;
using namespace shortvid::publish;

namespace {

std::vector<EncodeOption> three_modes() {
    return {{EncodeMode::soft, 0.4, 1.5, 0.0}, {EncodeMode::hard, 0.6, 4.0, -1.0}, {EncodeMode::skip, 1.0, 1.0, -5.0}};
}

} // namespace

TEST_CASE("infinite bandwidth picks the fastest encoder and skip wins when allowed") {
    PublishJob job;
    job.network.bandwidth_kbps = std::numeric_limits<double>::infinity();
    auto c = choose_encoding_mode(job, three_modes());
    CHECK(c.option.mode == EncodeMode::skip);
    CHECK(c.eval.publish_s == 0.0);
    ModeConfig floor;
    floor.quality_floor = -2.0;
    c = choose_encoding_mode(job, three_modes(), floor);
    CHECK(c.option.mode == EncodeMode::hard);
}

TEST_CASE("equal quality, faster hardware encoder wins once skip is forbidden") {
    PublishJob job;
    std::vector<EncodeOption> opts{{EncodeMode::soft, 0.5, 1.0, 0.0}, {EncodeMode::hard, 0.5, 3.0, 0.0},
                                   {EncodeMode::skip, 1.0, 1.0, -3.0}};
    ModeConfig cfg;
    cfg.quality_floor = 0.0;
    job.network.bandwidth_kbps = 1e6;
    CHECK(choose_encoding_mode(job, opts, cfg).option.mode == EncodeMode::hard);
    cfg.quality_floor = 1.0;
    CHECK_THROWS_AS(choose_encoding_mode(job, opts, cfg), Infeasible);
}

TEST_CASE("encoding mode choice matches enumerate-and-evaluate") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        PublishJob job;
        job.material_bytes = uniform(rng, 1e6, 50e6);
        job.duration_s = uniform(rng, 5, 120);
        job.alpha_ui = uniform(rng, 0, 2);
        job.network.bandwidth_kbps = uniform(rng, 500, 20000);
        auto opts = three_modes();
        for (auto& o : opts) {
            o.output_ratio = uniform(rng, 0.2, 0.9);
            o.speed_x = uniform(rng, 0.5, 6);
        }
        ModeConfig cfg;
        cfg.lambda = 0.7;
        cfg.quality_floor = -1.5;
        std::size_t arg = 99;
        double best = 1e300;
        for (std::size_t i = 0; i < opts.size(); ++i) {
            if (opts[i].quality_delta < cfg.quality_floor) continue;
            const double out = opts[i].mode == EncodeMode::skip ? job.material_bytes : job.material_bytes * opts[i].output_ratio;
            const double enc = opts[i].mode == EncodeMode::skip ? 0.0 : job.duration_s / opts[i].speed_x;
            const double d = std::max(out * 8 / (job.network.bandwidth_kbps * 1000), enc / (1 + 0.7 * job.alpha_ui));
            if (d < best) {
                best = d;
                arg = i;
            }
        }
        const auto c = choose_encoding_mode(job, opts, cfg);
        CHECK(c.index == arg);
        CHECK(c.eval.publish_s == doctest::Approx(best));
        CHECK(c.option.quality_delta >= cfg.quality_floor);
    }
}

TEST_CASE("encoding parameters: speed-only author, dominance and exhaustive grid") {
    PublishJob job;
    job.network.bandwidth_kbps = 8000;
    ResponseSurface surf;
    std::vector<EncodeParams> grid;
    for (double qp : {20.0, 26.0, 32.0})
        for (double br : {1000.0, 2500.0, 5000.0})
            for (std::string codec : {"h264", "h265", "av1"}) grid.push_back({qp, 30.0, br, codec, 2, false});
    REQUIRE(grid.size() == 27);

    job.w_quality = 0.0;
    job.w_speed = 1.0;
    auto c = choose_encoding_params(job, grid, surf);
    double fastest = 1e300;
    for (const auto& p : grid) fastest = std::min(fastest, evaluate_params(job, p, surf, {}).publish_s);
    CHECK(c.best.publish_s == fastest);

    job.w_quality = 0.6;
    job.w_speed = 0.4;
    job.alpha_ui = 0.5;
    c = choose_encoding_params(job, grid, surf);
    double best = -1e300;
    for (const auto& p : grid) best = std::max(best, evaluate_params(job, p, surf, {}).score);
    CHECK(c.best.score == best);
    CHECK(c.alpha_ui == 0.5);
    CHECK(c.evaluated.size() == 27);

    // A dominates B: same codec, better quality from lower qp, same size and speed.
    std::vector<EncodeParams> two{{30.0, 30.0, 2500.0, "h264", 2, false}, {22.0, 30.0, 2500.0, "h264", 2, false}};
    CHECK(choose_encoding_params(job, two, surf).best.params.qp == 22.0);

    std::vector<EncodeParams> bad{{60.0, 30.0, 2500.0, "h264", 2, false}, {22.0, 30.0, 2500.0, "vp9", 2, false},
                                  {22.0, 30.0, 2500.0, "h264", 2, false}};
    c = choose_encoding_params(job, bad, surf);
    CHECK(c.diagnostics.size() == 2);
    CHECK(c.evaluated.size() == 1);
}

TEST_CASE("overhead-free upload uses the largest chunks and full parallelism") {
    PublishJob job;
    job.network.fail_constant = 0.0;
    const std::vector<double> sizes{1e6, 4e6, 16e6};
    const std::vector<int> par{1, 2, 4};
    const std::vector<UploadNode> nodes{{0, 4000, 0.0, true}};
    const auto p = plan_upload(job, sizes, par, nodes);
    CHECK(p.mode == UploadMode::chunk);
    CHECK(p.chunk_bytes == 16e6);
    CHECK(p.parallelism == 4);
}

TEST_CASE("constant failure 0.5 doubles the expected attempts") {
    PublishJob job;
    job.network.fail_constant = 0.5;
    const auto p = evaluate_chunking(job, {0, 4000, 0.0, true}, 1e6, 1);
    CHECK(p.expected_repeat == 2.0);
    CHECK(p.expected_s == doctest::Approx(2.0 * job.material_bytes * 8 / 4e6));
}

TEST_CASE("upload plan matches the exhaustive expected-duration oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        PublishJob job;
        job.material_bytes = uniform(rng, 5e6, 60e6);
        job.network.fail_scale_bytes = uniform(rng, 5e6, 50e6);
        const std::vector<double> sizes{0.5e6, 2e6, 8e6, 32e6};
        const std::vector<int> par{1, 3, 6};
        const std::vector<UploadNode> nodes{{0, uniform(rng, 1000, 8000), uniform(rng, 0.05, 0.5), true},
                                            {1, uniform(rng, 1000, 8000), uniform(rng, 0.05, 0.5), true}};
        double best = 1e300;
        for (const auto& n : nodes)
            for (double s : sizes)
                for (int P : par) {
                    double sum = 0.0, left = job.material_bytes;
                    int chunks = 0;
                    while (left > 1e-9) {
                        const double c = std::min(s, left);
                        left -= c;
                        ++chunks;
                        sum += c * 8 / (n.bandwidth_kbps * 1000) / std::exp(-c / job.network.fail_scale_bytes);
                    }
                    best = std::min(best, sum / P + std::ceil(static_cast<double>(chunks) / P) * n.connect_latency_s);
                }
        const auto p = plan_upload(job, sizes, par, nodes, false);
        CHECK(p.expected_s == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("upload duration is monotone in bandwidth and failure probability") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        PublishJob job;
        job.network.fail_constant = uniform(rng, 0, 0.8);
        const double bw = uniform(rng, 500, 10000);
        const double s = uniform(rng, 1e5, 2e7);
        const int par = 1 + static_cast<int>(uniform_index(rng, 6));
        const double slow = evaluate_chunking(job, {0, bw, 0.2, true}, s, par).expected_s;
        const double fast = evaluate_chunking(job, {0, bw * uniform(rng, 1, 3), 0.2, true}, s, par).expected_s;
        CHECK(fast <= slow);
        PublishJob worse = job;
        worse.network.fail_constant = std::min(0.95, *job.network.fail_constant + uniform(rng, 0, 0.2));
        CHECK(evaluate_chunking(worse, {0, bw, 0.2, true}, s, par).expected_s >= slow);
    }
    PublishJob job;
    std::vector<UploadNode> down{{0, 1000, 0.1, false}};
    CHECK_THROWS_AS(plan_upload(job, std::vector<double>{1e6}, std::vector<int>{1}, down), Infeasible);
}

TEST_CASE("pre-upload gain") {
    PreuploadInputs in;
    in.lead = {LeadKind::constant, 0.0};
    auto r = preupload_gain(in);
    CHECK(r.saving_s <= 0.0);
    CHECK(r.saving_s == doctest::Approx(-in.encrypt_s));
    in.encrypt_s = 0.0;
    CHECK(preupload_gain(in).saving_s == 0.0);
    in.lead.value = 100.0;
    in.encrypt_s = 0.5;
    r = preupload_gain(in);
    CHECK(r.expected_perceived_s == 0.0);
    CHECK(r.saving_s == in.upload_s);
    CHECK(r.expected_waste_bytes == doctest::Approx(in.cancel_prob * in.pre_bytes));

    in.lead = {LeadKind::lognormal, 0.0, 1.4, 0.6};
    r = preupload_gain(in);
    Rng rng(4);
    double mc = 0.0;
    const int n = 1000000;
    const double c = in.upload_s + in.encrypt_s;
    for (int i = 0; i < n; ++i) mc += std::max(0.0, c - lognormal(rng, 1.4, 0.6));
    mc /= n;
    CHECK(std::abs(r.expected_perceived_s - mc) <= 0.01 * mc);
}

TEST_CASE("priority adaptation") {
    PriorityInputs in;
    in.state = AppState::background;
    in.max_quota = 1e9;
    auto d = adapt_priority(in);
    CHECK(d.level == 5);
    CHECK_FALSE(d.suspended);

    in.state = AppState::other_page;
    in.epsilon = 0.0;
    in.degradation = {{{1, 0.001}, {5, 0.02}}};
    d = adapt_priority(in);
    CHECK(d.index == 0);
    CHECK(d.suspended);

    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        in.degradation = {{{1, uniform(rng, 0, 0.005)}, {3, uniform(rng, 0.005, 0.01)}, {5, uniform(rng, 0.01, 0.03)}}};
        in.epsilon = uniform(rng, 0, 0.03);
        in.max_quota = uniform(rng, 60, 110);
        int oracle = -1;
        for (int i = 0; i < 5; ++i)
            if (in.degradation(in.levels[i]) <= in.epsilon && in.levels[i] * in.quota_per_level + in.consume_quota <= in.max_quota)
                oracle = i;
        d = adapt_priority(in);
        CHECK(static_cast<int>(d.index) == std::max(oracle, 0));
        CHECK(d.suspended == (oracle < 0));
        PriorityInputs more = in;
        more.epsilon += uniform(rng, 0, 0.01);
        CHECK(adapt_priority(more).level >= d.level);
    }
}
