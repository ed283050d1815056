#include "shortvid/delivery.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "shortvid/error.hpp"

namespace shortvid::delivery {

std::uint64_t DeliveryDecision::mask() const {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < deliver.size() && i < 64; ++i)
        if (deliver[i]) m |= std::uint64_t{1} << i;
    return m;
}

std::size_t DeliveryDecision::count() const {
    return static_cast<std::size_t>(std::count(deliver.begin(), deliver.end(), true));
}

void DeliveryProblem::validate() const {
    const std::size_t k = p.size();
    if (k == 0) throw InvalidInput("delivery problem has no ladders");
    if (replace.size() != k * k) throw InvalidParameter("replace cost matrix must be K x K");
    if (deliver_cost.size() != k) throw InvalidParameter("deliver cost vector must have K entries");
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0)) throw InvalidParameter("ladder probabilities must be >= 0");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameter("ladder probabilities must sum to 1");
    for (std::size_t i = 0; i < k; ++i) {
        if (replace_cost(i, i) != 0.0) throw InvalidParameter("replace_cost_i(i) must be 0");
        if (!(deliver_cost[i] >= 0.0) || !std::isfinite(deliver_cost[i]))
            throw InvalidParameter("deliver costs must be finite and >= 0");
        for (std::size_t j = 0; j < k; ++j)
            if (!(replace_cost(i, j) >= 0.0) || !std::isfinite(replace_cost(i, j)))
                throw InvalidParameter("replace costs must be finite and >= 0");
    }
}

double delivery_cost(const DeliveryProblem& prob, std::uint64_t mask) {
    const std::size_t k = prob.size();
    if (mask == 0) throw InvalidParameter("a delivery decision must send at least one ladder");
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j)
            if (mask >> j & 1) best = std::min(best, prob.replace_cost(i, j));
        total += prob.p[i] * best;
    }
    for (std::size_t i = 0; i < k; ++i)
        if (mask >> i & 1) total += prob.deliver_cost[i];
    return total;
}

namespace {

DeliveryDecision decision_of(const DeliveryProblem& prob, std::uint64_t mask, bool approximate) {
    DeliveryDecision d;
    d.deliver.resize(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i) d.deliver[i] = (mask >> i & 1) != 0;
    d.expected_cost = delivery_cost(prob, mask);
    d.approximate = approximate;
    return d;
}

struct BranchAndBound {
    const DeliveryProblem& prob;
    std::size_t k;
    std::uint64_t best_mask = 0;
    double best_cost = std::numeric_limits<double>::infinity();

    void offer(std::uint64_t mask) {
        const double c = delivery_cost(prob, mask);
        if (c < best_cost || (c == best_cost && kernels::subset_tie_preferred(mask, best_mask))) {
            best_cost = c;
            best_mask = mask;
        }
    }

    // Lower bound for every completion of `mask` with ladders from `open`:
    // more ladders only lower the replace term, delivery costs are >= 0.
    double lower_bound(std::uint64_t mask, std::uint64_t open, double partial_deliver) const {
        const std::uint64_t reach = mask | open;
        double lb = partial_deliver;
        for (std::size_t i = 0; i < k; ++i) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j)
                if (reach >> j & 1) m = std::min(m, prob.replace_cost(i, j));
            lb += prob.p[i] * m;
        }
        return lb;
    }

    void search(std::size_t i, std::uint64_t mask, double partial_deliver) {
        if (i == k) {
            if (mask) offer(mask);
            return;
        }
        const std::uint64_t open = (k == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1) & ~((std::uint64_t{1} << i) - 1);
        if (mask | open) {
            if (lower_bound(mask, open, partial_deliver) > best_cost) return;
        }
        search(i + 1, mask | std::uint64_t{1} << i, partial_deliver + prob.deliver_cost[i]);
        search(i + 1, mask, partial_deliver);
    }
};

} // namespace

DeliveryDecision greedy_delivery(const DeliveryProblem& prob) {
    prob.validate();
    const std::size_t k = prob.size();
    if (k > 64) throw InvalidParameter("at most 64 ladders are supported");
    std::uint64_t mask = 0;
    double cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        const double c = delivery_cost(prob, std::uint64_t{1} << i);
        if (c < cost) {
            cost = c;
            mask = std::uint64_t{1} << i;
        }
    }
    for (;;) {
        std::size_t pick = k;
        double next = cost;
        for (std::size_t i = 0; i < k; ++i) {
            if (mask >> i & 1) continue;
            const double c = delivery_cost(prob, mask | std::uint64_t{1} << i);
            if (c < next) {
                next = c;
                pick = i;
            }
        }
        if (pick == k) break;
        mask |= std::uint64_t{1} << pick;
        cost = next;
    }
    return decision_of(prob, mask, true);
}

DeliveryDecision optimal_delivery(const DeliveryProblem& prob, const DeliveryOptions& opts) {
    prob.validate();
    const std::size_t k = prob.size();
    if (static_cast<int>(k) > opts.exact_cap || k > 40) return greedy_delivery(prob);
    if (opts.method == DeliveryOptions::Method::exhaustive) {
        auto cost = [&](std::uint64_t m) { return delivery_cost(prob, m); };
        const auto best = opts.backend == kernels::Backend::serial ? kernels::min_subset_serial(static_cast<int>(k), cost)
                                                                   : kernels::min_subset_omp(static_cast<int>(k), cost);
        return decision_of(prob, best.mask, false);
    }
    BranchAndBound bb{prob, k};
    bb.search(0, 0, 0.0);
    return decision_of(prob, bb.best_mask, false);
}

std::vector<double> default_replace_cost(const playback::LadderGroup& ladders, const ReplaceCostWeights& w) {
    if (!(w.quality >= 0.0 && w.bitrate >= 0.0)) throw InvalidParameter("replace cost weights must be >= 0");
    const std::size_t k = ladders.size();
    std::vector<double> r(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (i != j)
                r[i * k + j] = w.quality * std::abs(ladders[i].quality_score - ladders[j].quality_score) +
                               w.bitrate * std::abs(ladders[i].bitrate_kbps - ladders[j].bitrate_kbps) / 100.0;
    return r;
}

double deliver_cost(double meta_bytes, double device_factor, double network_factor, double scale) {
    if (!(device_factor > 0.0) || !(network_factor > 0.0))
        throw InvalidParameter("device and network factors must be > 0");
    if (!(meta_bytes >= 0.0) || !(scale >= 0.0)) throw InvalidParameter("meta size and scale must be >= 0");
    return meta_bytes / device_factor / network_factor * scale;
}

const std::vector<double>& LadderChoiceModel::bucket(std::size_t b) const {
    if (b >= p.size()) throw InvalidInput("state bucket out of range");
    return p[b];
}

void LadderChoiceModel::validate() const {
    for (const auto& row : p) {
        if (row.size() != ladders) throw InvalidParameter("probability row length differs from ladder count");
        double s = 0.0;
        for (double x : row) {
            if (!(x >= 0.0)) throw InvalidParameter("probabilities must be >= 0");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-9) throw InvalidParameter("probabilities must sum to 1");
    }
}

LadderChoiceModel estimate_p_inductive(std::span<const ChoiceObservation> history, std::size_t buckets,
                                       std::size_t ladders) {
    if (buckets == 0 || ladders == 0) throw InvalidParameter("need at least one bucket and one ladder");
    std::vector<std::vector<double>> counts(buckets, std::vector<double>(ladders, 1.0));
    for (const auto& o : history) {
        if (o.bucket >= buckets || o.ladder >= ladders) throw InvalidInput("observation out of range");
        counts[o.bucket][o.ladder] += 1.0;
    }
    LadderChoiceModel m;
    m.ladders = ladders;
    for (auto& row : counts) {
        double s = 0.0;
        for (double c : row) s += c;
        for (double& c : row) c /= s;
    }
    m.p = std::move(counts);
    return m;
}

LadderChoiceModel estimate_p_deductive(const std::vector<std::vector<double>>& profit, double temperature) {
    if (!(temperature > 0.0)) throw InvalidParameter("temperature must be > 0");
    if (profit.empty() || profit.front().empty()) throw InvalidInput("no profit estimates");
    LadderChoiceModel m;
    m.ladders = profit.front().size();
    for (const auto& row : profit) {
        if (row.size() != m.ladders) throw InvalidInput("profit rows must have equal length");
        const double top = *std::max_element(row.begin(), row.end());
        std::vector<double> e(row.size());
        double s = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) s += e[i] = std::exp((row[i] - top) / temperature);
        for (double& x : e) x /= s;
        m.p.push_back(std::move(e));
    }
    return m;
}

std::string to_string(ForecastMethod m) {
    return m == ForecastMethod::moving_average ? "moving_average" : "seasonal_naive";
}

ForecastMethod forecast_method_from_name(const std::string& name) {
    if (name == "moving_average" || name == "moving-average") return ForecastMethod::moving_average;
    if (name == "seasonal_naive" || name == "seasonal-naive") return ForecastMethod::seasonal_naive;
    throw InvalidParameter("unknown forecast method: " + name);
}

void ForecastModel::validate() const {
    if (window < 1) throw InvalidParameter("forecast window must be >= 1");
    if (horizon < 1) throw InvalidParameter("forecast horizon must be >= 1");
    if (period < 1) throw InvalidParameter("forecast period must be >= 1");
}

double percentile_rank(std::span<const double> profile, double value) {
    if (profile.empty()) throw InvalidInput("empty profile");
    double below = 0.0, equal = 0.0;
    for (double x : profile) {
        if (x < value) below += 1.0;
        else if (x == value) equal += 1.0;
    }
    return 100.0 * (below + 0.5 * equal) / static_cast<double>(profile.size());
}

ForecastResult forecast(std::span<const double> series, const ForecastModel& model) {
    model.validate();
    const auto n = series.size();
    if (n < static_cast<std::size_t>(model.window)) throw InvalidInput("series is shorter than the forecast window");
    for (double x : series)
        if (!std::isfinite(x)) throw InvalidInput("series values must be finite");
    const auto period = static_cast<std::size_t>(model.period);
    ForecastResult r;
    if (model.method == ForecastMethod::moving_average) {
        double s = 0.0;
        for (std::size_t i = n - static_cast<std::size_t>(model.window); i < n; ++i) s += series[i];
        r.values.assign(static_cast<std::size_t>(model.horizon), s / model.window);
    } else {
        if (n < period) throw InvalidInput("seasonal-naive forecast needs at least one full period");
        for (int h = 1; h <= model.horizon; ++h) {
            const std::size_t back = period - (static_cast<std::size_t>(h) - 1) % period;
            r.values.push_back(series[n - back]);
        }
    }
    const auto day = series.subspan(n - std::min(n, period));
    for (double v : r.values) r.percentile_of_day.push_back(percentile_rank(day, v));
    return r;
}

} // namespace shortvid::delivery
