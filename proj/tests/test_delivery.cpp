#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "shortvid/delivery.hpp"
#include "shortvid/error.hpp"
#include "shortvid/rng.hpp"

using namespace shortvid;
using namespace shortvid::delivery;

namespace {

DeliveryProblem random_problem(std::size_t k, Rng& rng, double deliver_scale = 3.0) {
    DeliveryProblem p;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        p.p.push_back(uniform(rng, 0.01, 1.0));
        s += p.p.back();
    }
    for (double& x : p.p) x /= s;
    p.replace.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (i != j) p.replace[i * k + j] = uniform(rng, 0.0, 20.0);
    for (std::size_t i = 0; i < k; ++i) p.deliver_cost.push_back(uniform(rng, 0.0, deliver_scale));
    return p;
}

// Independent cost: explicit bit vector, no masks.
double cost_of(const DeliveryProblem& p, const std::vector<int>& d) {
    const std::size_t k = p.size();
    double c = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j)
            if (d[j]) best = std::min(best, p.replace[i * k + j]);
        c += p.p[i] * best + (d[i] ? p.deliver_cost[i] : 0.0);
    }
    return c;
}

} // namespace

TEST_CASE("free delivery sends every ladder") {
    Rng rng(1);
    auto p = random_problem(6, rng);
    p.deliver_cost.assign(6, 0.0);
    const auto d = optimal_delivery(p);
    CHECK(d.count() == 6);
    CHECK(d.expected_cost == 0.0);
}

TEST_CASE("a single ladder is always delivered") {
    DeliveryProblem p{{1.0}, {0.0}, {5.0}};
    const auto d = optimal_delivery(p);
    CHECK(d.deliver == std::vector<bool>{true});
    CHECK(d.expected_cost == 5.0);
}

TEST_CASE("branch and bound equals brute force on random 8-ladder instances") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_problem(8, rng, trial % 2 ? 3.0 : 0.5);
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> arg;
        for (int code = 1; code < 256; ++code) {
            std::vector<int> d(8);
            for (int j = 0; j < 8; ++j) d[j] = code >> j & 1;
            const double c = cost_of(p, d);
            if (c < best - 1e-12) {
                best = c;
                arg = d;
            }
        }
        const auto bb = optimal_delivery(p);
        CHECK(bb.expected_cost == doctest::Approx(best).epsilon(1e-12));
        for (int j = 0; j < 8; ++j) CHECK(bb.deliver[j] == (arg[j] == 1));
        DeliveryOptions ex;
        ex.method = DeliveryOptions::Method::exhaustive;
        CHECK(optimal_delivery(p, ex).mask() == bb.mask());
        ex.backend = kernels::Backend::serial;
        CHECK(optimal_delivery(p, ex).mask() == bb.mask());
    }
}

TEST_CASE("optimum never loses to deliver-all or any single ladder") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = random_problem(7, rng);
        const auto d = optimal_delivery(p);
        CHECK(d.expected_cost <= cost_of(p, std::vector<int>(7, 1)) + 1e-12);
        for (int j = 0; j < 7; ++j) {
            std::vector<int> one(7, 0);
            one[j] = 1;
            CHECK(d.expected_cost <= cost_of(p, one) + 1e-12);
        }
    }
}

TEST_CASE("adding a free ladder never raises the optimum") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = random_problem(6, rng);
        DeliveryProblem q;
        q.p = p.p;
        q.p.push_back(0.0);
        q.replace.assign(49, 0.0);
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j)
                q.replace[i * 7 + j] = (i < 6 && j < 6) ? p.replace[i * 6 + j] : (i == j ? 0.0 : uniform(rng, 0.0, 9.0));
        q.deliver_cost = p.deliver_cost;
        q.deliver_cost.push_back(0.0);
        CHECK(optimal_delivery(q).expected_cost <= optimal_delivery(p).expected_cost + 1e-12);
    }
}

TEST_CASE("ties prefer fewer ladders, then lower indices") {
    DeliveryProblem p{{0.5, 0.5}, {0.0, 1.0, 1.0, 0.0}, {1.0, 1.0}};
    // {0}: 0.5 + 1, {1}: 0.5 + 1, {0,1}: 2
    CHECK(optimal_delivery(p).mask() == 1);
    DeliveryProblem q{{1.0 / 3, 1.0 / 3, 1.0 / 3}, std::vector<double>(9, 0.0), {0.0, 0.0, 0.0}};
    CHECK(optimal_delivery(q).mask() == 1);
}

TEST_CASE("large ladder sets fall back to a flagged greedy result") {
    Rng rng(5);
    const auto p = random_problem(34, rng);
    const auto d = optimal_delivery(p);
    CHECK(d.approximate);
    CHECK(d.count() >= 1);
    CHECK(d.expected_cost == doctest::Approx(delivery_cost(p, d.mask())));
    const auto small = random_problem(10, rng);
    CHECK(optimal_delivery(small).expected_cost <= greedy_delivery(small).expected_cost + 1e-12);
}

TEST_CASE("delivery problems are validated") {
    DeliveryProblem bad{{0.5, 0.5}, {0.0, 1.0, 1.0, 0.1}, {1.0, 1.0}};
    CHECK_THROWS_AS(optimal_delivery(bad), InvalidParameter);
    bad.replace[3] = 0.0;
    bad.p = {0.5, 0.6};
    CHECK_THROWS_AS(optimal_delivery(bad), InvalidParameter);
    bad.p = {0.5, 0.5};
    bad.deliver_cost[0] = -1.0;
    CHECK_THROWS_AS(optimal_delivery(bad), InvalidParameter);
    CHECK_THROWS_AS(delivery_cost(DeliveryProblem{{1.0}, {0.0}, {1.0}}, 0), InvalidParameter);
}

TEST_CASE("deliver cost follows the meta-size formula") {
    CHECK(deliver_cost(1000, 1, 1, 0.01) == doctest::Approx(10.0));
    CHECK(deliver_cost(1000, 1, 2) == doctest::Approx(deliver_cost(1000, 1, 1) / 2));
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        const double m = uniform(rng, 0, 5000), a = uniform(rng, 0.1, 2), b = uniform(rng, 0.1, 2);
        CHECK(deliver_cost(m, a, b, 3.0) == doctest::Approx(3.0 * m / (a * b)));
    }
    CHECK_THROWS_AS(deliver_cost(1, 0, 1), InvalidParameter);
    CHECK_THROWS_AS(deliver_cost(1, 1, -1), InvalidParameter);
}

TEST_CASE("default replace cost has a zero diagonal and grows with the gap") {
    playback::LadderGroup g;
    g.ladders = {{0, 500, 55, 0, 0}, {1, 1000, 70, 0, 0}, {2, 2000, 85, 0, 0}};
    const auto r = default_replace_cost(g);
    for (int i = 0; i < 3; ++i) CHECK(r[i * 3 + i] == 0.0);
    CHECK(r[0 * 3 + 2] > r[0 * 3 + 1]);
    CHECK(r[1 * 3 + 0] == doctest::Approx(15.0 + 0.1 * 5.0));
}

TEST_CASE("inductive estimate smooths with add-one counts") {
    std::vector<ChoiceObservation> h(100, ChoiceObservation{0, 1});
    auto m = estimate_p_inductive(h, 1, 3);
    CHECK(m.p[0][0] == doctest::Approx(1.0 / 103));
    CHECK(m.p[0][1] == doctest::Approx(101.0 / 103));
    m = estimate_p_inductive({}, 2, 4);
    for (const auto& row : m.p)
        for (double x : row) CHECK(x == doctest::Approx(0.25));
    m.validate();
}

TEST_CASE("inductive estimate recovers a known multinomial within 2%") {
    const std::vector<std::vector<double>> truth{{0.1, 0.6, 0.3}, {0.5, 0.2, 0.3}, {0.05, 0.15, 0.8}};
    Rng rng(7);
    std::vector<ChoiceObservation> h;
    for (std::size_t b = 0; b < truth.size(); ++b)
        for (int n = 0; n < 10000; ++n) {
            const double u = uniform01(rng);
            double acc = 0.0;
            std::size_t pick = 2;
            for (std::size_t i = 0; i < 3; ++i) {
                acc += truth[b][i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            h.push_back({b, pick});
        }
    const auto m = estimate_p_inductive(h, 3, 3);
    m.validate();
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(m.p[b][i] - truth[b][i]) <= 0.02);
}

TEST_CASE("deductive stub yields distributions ordered by profit") {
    const auto m = estimate_p_deductive({{1.0, 3.0, 2.0}}, 0.5);
    m.validate();
    CHECK(m.p[0][1] > m.p[0][2]);
    CHECK(m.p[0][2] > m.p[0][0]);
}

TEST_CASE("moving-average forecast") {
    std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    ForecastModel m;
    m.window = 5;
    m.horizon = 1;
    m.period = 10;
    auto r = forecast(s, m);
    CHECK(r.values == std::vector<double>{8.0});
    CHECK(r.percentile_of_day[0] == doctest::Approx(75.0));
    for (double& x : s) x += 2.5;
    CHECK(forecast(s, m).values[0] == doctest::Approx(10.5));
    m.window = 11;
    CHECK_THROWS_AS(forecast(s, m), InvalidInput);
}

TEST_CASE("constant series forecasts the constant at percentile 50") {
    const std::vector<double> s(600, 42.0);
    for (auto method : {ForecastMethod::moving_average, ForecastMethod::seasonal_naive}) {
        ForecastModel m;
        m.method = method;
        m.horizon = 3;
        const auto r = forecast(s, m);
        for (std::size_t h = 0; h < 3; ++h) {
            CHECK(r.values[h] == 42.0);
            CHECK(r.percentile_of_day[h] == 50.0);
        }
    }
}

TEST_CASE("seasonal-naive beats moving average on a daily sinusoid") {
    const int period = 288;
    Rng rng(8);
    std::vector<double> truth;
    for (int t = 0; t < 3 * period; ++t)
        truth.push_back(500.0 + 300.0 * std::sin(2.0 * std::numbers::pi * t / period) + uniform(rng, -10.0, 10.0));
    double mae_ma = 0.0, mae_sn = 0.0;
    int n = 0;
    for (int t = 2 * period; t < 3 * period; ++t) {
        std::span<const double> hist(truth.data(), static_cast<std::size_t>(t));
        ForecastModel ma;
        ma.window = 12;
        ForecastModel sn = ma;
        sn.method = ForecastMethod::seasonal_naive;
        mae_ma += std::abs(forecast(hist, ma).values[0] - truth[t]);
        mae_sn += std::abs(forecast(hist, sn).values[0] - truth[t]);
        ++n;
    }
    CHECK(mae_sn / n <= mae_ma / n);
}
