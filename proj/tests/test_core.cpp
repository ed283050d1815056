#include <doctest.h>

#include <cmath>
#include <random>

#include "shortvid/core_model.hpp"
#include "shortvid/error.hpp"

using namespace shortvid;
using namespace shortvid::core;

TEST_CASE("discounted value") {
    const std::vector<double> one{100.0};
    CHECK(discounted_value(one, 0.0) == 100.0);
    const std::vector<double> grow{110.0};
    CHECK(discounted_value(grow, 0.10) == doctest::Approx(100.0).epsilon(1e-14));

    const std::vector<double> flows{50.0, 50.0, 50.0};
    double oracle = 0.0;
    for (int t = 1; t <= 3; ++t) oracle += 50.0 / std::pow(1.05, t);
    CHECK(discounted_value(flows, 0.05) == doctest::Approx(oracle).epsilon(1e-14));

    CHECK_THROWS_AS(discounted_value(flows, 1.0), InvalidParameter);
    CHECK_THROWS_AS(discounted_value(flows, -0.01), InvalidParameter);
}

TEST_CASE("discounting at zero is the plain sum and decreases in r") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> pos(0.1, 100.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> f(1 + gen() % 12);
        double sum = 0.0;
        for (auto& x : f) sum += x = pos(gen);
        CHECK(discounted_value(f, 0.0) == doctest::Approx(sum).epsilon(1e-12));
        double prev = discounted_value(f, 0.0);
        for (double r = 0.05; r < 1.0; r += 0.1) {
            const double v = discounted_value(f, r);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("shipped impact table matches the measured magnitudes") {
    const auto t = ImpactTable::defaults();
    CHECK(t[Metric::power_avg].coefficient == doctest::Approx(0.00027));
    CHECK(t[Metric::storage_pct].coefficient == doctest::Approx(0.00013));
    CHECK(t[Metric::first_feed_ms].coefficient == doctest::Approx(0.00006));
    CHECK(t[Metric::first_frame_ms].coefficient == doctest::Approx(0.00023));
    CHECK(t[Metric::anr_crash_rate].coefficient == doctest::Approx(0.0000575));
    CHECK(t[Metric::temperature_c].coefficient == doctest::Approx(0.00183));
    CHECK(t[Metric::cpu_pct].coefficient == doctest::Approx(0.00014));
    CHECK(t[Metric::oom_rate].coefficient == doctest::Approx(0.000009));
    CHECK(t[Metric::fps].coefficient == doctest::Approx(0.00021));
    CHECK(t[Metric::rebuffer_ratio].coefficient == doctest::Approx(0.00015));
    CHECK(t[Metric::rebuffer_dur_per_vv_ms].coefficient == doctest::Approx(0.00015));
    CHECK(t[Metric::mem_pct].coefficient == doctest::Approx(0.00004));
    CHECK_FALSE(t[Metric::frame_drop_rate].available);
    CHECK_FALSE(t[Metric::traffic_bytes].available);
    CHECK_FALSE(t[Metric::publish_success_ratio].available);
    CHECK(t[Metric::fps].direction == 1);
    CHECK(t[Metric::rebuffer_ratio].direction == -1);
    CHECK_NOTHROW(t.validate());
}

TEST_CASE("qop delta to lifetime") {
    const auto t = ImpactTable::defaults();
    QoPVector a;
    a.first_frame_ms = 200.0;
    a.fps = 30.0;
    a.rebuffer_ratio = 0.02;
    CHECK(qop_delta_to_lt(a, a, t).relative_lt == 0.0);

    QoPVector b = a;
    b.first_frame_ms = 198.0; // 1% faster
    CHECK(qop_delta_to_lt(a, b, t).relative_lt == doctest::Approx(0.00023).epsilon(1e-12));

    b.fps = 29.7; // 1% fewer frames
    // +0.023% from first frame, -0.021% from fps
    CHECK(qop_delta_to_lt(a, b, t).relative_lt == doctest::Approx(0.00002).epsilon(1e-9));
}

TEST_CASE("zero baselines are skipped and reported") {
    const auto t = ImpactTable::defaults();
    QoPVector a;
    QoPVector b;
    b.cpu_pct = 0.2;
    b.first_frame_ms = 0.0;
    const auto d = qop_delta_to_lt(a, b, t);
    CHECK(d.relative_lt == 0.0);
    REQUIRE(d.skipped.size() == 1);
    CHECK(d.skipped[0] == Metric::cpu_pct);
}

TEST_CASE("qop delta is antisymmetric") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    const auto t = ImpactTable::defaults();
    for (int rep = 0; rep < 200; ++rep) {
        QoPVector a;
        QoPVector b;
        for (auto m : kAllMetrics) {
            a.set(m, u(gen));
            b.set(m, u(gen));
        }
        CHECK(qop_delta_to_lt(a, b, t).relative_lt == doctest::Approx(-qop_delta_to_lt(b, a, t).relative_lt).epsilon(1e-12));
    }
}

TEST_CASE("profit and the launch gate") {
    EconomyParams p;
    auto b = profit(0, 0, 0, p);
    CHECK(b.profit == 0.0);
    CHECK_FALSE(b.passes_gate);
    CHECK_FALSE(b.roi.has_value());

    b = profit(0, 0, -10, p);
    CHECK(b.profit == 10.0);
    CHECK(b.passes_gate);

    // one extra day of lifetime for half a day of revenue
    const double cost = p.arpu_base / 2;
    b = profit(1.0, 0.0, cost, p);
    CHECK(b.profit == doctest::Approx(p.arpu_base - cost));
    REQUIRE(b.roi.has_value());
    CHECK(*b.roi == doctest::Approx((p.arpu_base * 1.0 - cost) / cost));
    CHECK(*b.roi == doctest::Approx(1.0));
    CHECK_FALSE(b.passes_gate); // roi must exceed gamma = 1
    p.roi_gamma = 0.5;
    CHECK(profit(1.0, 0.0, cost, p).passes_gate);
}

TEST_CASE("profit is linear in each delta") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    EconomyParams p;
    for (int rep = 0; rep < 100; ++rep) {
        const double l1 = u(gen), a1 = u(gen), c1 = u(gen);
        const double l2 = u(gen), a2 = u(gen), c2 = u(gen);
        const double k = u(gen);
        const double lhs = profit(l1 + k * l2, a1 + k * a2, c1 + k * c2, p).profit;
        const double rhs = profit(l1, a1, c1, p).profit + k * profit(l2, a2, c2, p).profit;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("validation") {
    QoPVector q;
    q.rebuffer_ratio = 1.5;
    CHECK_THROWS_AS(q.validate(), InvalidParameter);
    q.rebuffer_ratio = 0.1;
    q.first_frame_ms = -1;
    CHECK_THROWS_AS(q.validate(), InvalidParameter);
    EconomyParams p;
    p.lt_base = 0;
    CHECK_THROWS_AS(profit(0, 0, 0, p), InvalidParameter);
    CHECK(metric_from_name("first_frame_ms") == Metric::first_frame_ms);
    CHECK_FALSE(metric_from_name("nope").has_value());
}
