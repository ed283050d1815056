#include "shortvid/uiae.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "shortvid/error.hpp"
#include "shortvid/rng.hpp"

namespace shortvid::uiae {

// ---- value model ----

void ValueSample::validate() const {
    for (double v : {author_activity, author_posts, author_fans, duration_s, playback_volume, like_count})
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("value sample counts must be finite and >= 0");
    for (double y : targets)
        if (!(y >= 0.0) || !std::isfinite(y)) throw InvalidInput("value sample targets must be finite and >= 0");
}

std::vector<double> value_features(const ValueSample& s) {
    const double angle = 2.0 * std::numbers::pi * (s.hour % 24) / 24.0;
    std::vector<double> x{1.0,
                          std::log1p(s.author_activity),
                          std::log1p(s.author_posts),
                          std::log1p(s.author_fans),
                          std::log1p(s.duration_s),
                          std::log1p(s.playback_volume),
                          std::log1p(s.like_count),
                          s.vv_growth,
                          std::sin(angle),
                          std::cos(angle),
                          s.holiday ? 1.0 : 0.0};
    for (std::size_t c = 0; c < kCategoryBuckets; ++c)
        x.push_back(static_cast<std::size_t>(std::abs(s.category)) % kCategoryBuckets == c ? 1.0 : 0.0);
    return x;
}

double ValueModel::raw(std::span<const double> x, std::size_t head) const {
    const auto& w = heads.at(head).weights;
    if (w.size() != x.size()) throw InvalidInput("feature length differs from the model");
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) z += w[i] * x[i];
    return z;
}

double ValueModel::predict_scaled(std::span<const double> x, std::size_t head) const {
    return loss.predict(raw(x, head));
}

double ValueModel::predict(const ValueSample& s, std::size_t head) const {
    const double v = predict_scaled(value_features(s), head);
    return log_target ? std::expm1(v) : v;
}

namespace {

double mean_loss(const std::vector<std::vector<double>>& z, std::span<const double> w, std::span<const double> y,
                 const core::Loss& loss) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double o = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) o += w[j] * z[i][j];
        s += loss.value(o, y[i]);
    }
    return s / static_cast<double>(z.size());
}

// Largest eigenvalue of ZᵀZ/n by power iteration.
double top_eigenvalue(const std::vector<std::vector<double>>& z, std::size_t d) {
    std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d))), next(d);
    double lambda = 0.0;
    for (int it = 0; it < 300; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (const auto& row : z) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += row[j] * v[j];
            for (std::size_t j = 0; j < d; ++j) next[j] += dot * row[j];
        }
        double norm = 0.0;
        for (double& x : next) {
            x /= static_cast<double>(z.size());
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        lambda = norm;
        for (std::size_t j = 0; j < d; ++j) v[j] = next[j] / norm;
    }
    return lambda;
}

} // namespace

LinearHead train_linear_head(const std::vector<std::vector<double>>& x, std::span<const double> y,
                             const core::Loss& loss, const TrainConfig& cfg, HeadTrace* trace) {
    if (x.empty() || x.size() != y.size()) throw InvalidInput("training needs matching, nonempty features and targets");
    if (loss.kind == core::LossKind::huber && !(loss.delta > 0.0)) throw InvalidParameter("Huber delta must be > 0");
    const std::size_t d = x.front().size();
    const auto n = static_cast<double>(x.size());
    for (const auto& row : x) {
        if (row.size() != d) throw InvalidInput("feature rows differ in length");
        if (row[0] != 1.0) throw InvalidInput("feature column 0 must be the constant 1");
    }

    LinearHead head;
    head.weights.assign(d, 0.0);
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
        head.constant = true;
        head.weights[0] = loss.kind == core::LossKind::weighted_log ? std::log(std::max(y[0], 1e-12)) : y[0];
        if (trace) trace->epoch_loss = {0.0};
        return head;
    }

    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    for (const auto& row : x)
        for (std::size_t j = 0; j < d; ++j) mu[j] += row[j] / n;
    for (const auto& row : x)
        for (std::size_t j = 0; j < d; ++j) sd[j] += (row[j] - mu[j]) * (row[j] - mu[j]) / n;
    for (double& s : sd) s = std::sqrt(s);
    std::vector<std::vector<double>> z(x.size(), std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
        z[i][0] = 1.0;
        for (std::size_t j = 1; j < d; ++j) z[i][j] = sd[j] > 0.0 ? (x[i][j] - mu[j]) / sd[j] : 0.0;
    }

    double curvature = 1.0;
    if (loss.kind == core::LossKind::weighted_log)
        curvature = (1.0 + *std::max_element(y.begin(), y.end())) / 4.0;
    const double lr = 1.0 / (1.1 * curvature * std::max(top_eigenvalue(z, d), 1e-12));

    std::vector<double> w(d, 0.0), g(d);
    double prev = mean_loss(z, w, y, loss);
    if (trace) trace->epoch_loss = {prev};
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < z.size(); ++i) {
            double o = 0.0;
            for (std::size_t j = 0; j < d; ++j) o += w[j] * z[i][j];
            const double gi = loss.grad(o, y[i]) / n;
            for (std::size_t j = 0; j < d; ++j) g[j] += gi * z[i][j];
        }
        for (std::size_t j = 0; j < d; ++j) w[j] -= lr * g[j];
        const double cur = mean_loss(z, w, y, loss);
        if (trace) trace->epoch_loss.push_back(cur);
        if (prev - cur < cfg.tolerance * std::max(1.0, std::abs(prev))) break;
        prev = cur;
    }

    head.weights[0] = w[0];
    for (std::size_t j = 1; j < d; ++j)
        if (sd[j] > 0.0) {
            head.weights[j] = w[j] / sd[j];
            head.weights[0] -= w[j] * mu[j] / sd[j];
        }
    return head;
}

ValueModel train_value_model(std::span<const ValueSample> samples, const TrainConfig& cfg,
                             std::vector<HeadTrace>* traces) {
    if (samples.empty()) throw InvalidInput("no training samples");
    const std::size_t heads = samples.front().targets.size();
    if (heads == 0) throw InvalidInput("samples carry no targets");
    std::vector<std::vector<double>> x;
    for (const auto& s : samples) {
        s.validate();
        if (s.targets.size() != heads) throw InvalidInput("samples differ in target count");
        x.push_back(value_features(s));
    }
    ValueModel m;
    m.loss = cfg.loss;
    m.log_target = cfg.log_target;
    if (traces) traces->assign(heads, {});
    for (std::size_t h = 0; h < heads; ++h) {
        std::vector<double> y;
        for (const auto& s : samples) y.push_back(cfg.log_target ? std::log1p(s.targets[h]) : s.targets[h]);
        m.heads.push_back(train_linear_head(x, y, cfg.loss, cfg, traces ? &(*traces)[h] : nullptr));
    }
    return m;
}

double rec_auc(std::span<const double> scores, std::span<const double> truth, double top_fraction) {
    if (scores.empty() || scores.size() != truth.size()) throw InvalidInput("AUC needs matching, nonempty inputs");
    if (!(top_fraction > 0.0 && top_fraction < 1.0)) throw InvalidParameter("top fraction must lie in (0,1)");
    const std::size_t n = scores.size();
    std::vector<std::size_t> by_truth(n);
    std::iota(by_truth.begin(), by_truth.end(), 0);
    std::stable_sort(by_truth.begin(), by_truth.end(), [&](auto a, auto b) { return truth[a] > truth[b]; });
    const auto pos_count = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-9));
    std::vector<bool> positive(n, false);
    for (std::size_t r = 0; r < pos_count; ++r) positive[by_truth[r]] = true;
    const auto p = static_cast<double>(pos_count);
    const auto q = static_cast<double>(n - pos_count);
    if (p == 0.0 || q == 0.0) throw UndefinedResult("AUC is undefined with a single class");

    std::vector<std::size_t> by_score(n);
    std::iota(by_score.begin(), by_score.end(), 0);
    std::sort(by_score.begin(), by_score.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[by_score[j]] == scores[by_score[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (positive[by_score[t]]) rank_sum += avg;
        i = j;
    }
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

ValueMetrics evaluate_value_model(const ValueModel& model, std::span<const ValueSample> test, std::size_t head,
                                  double top_fraction) {
    if (test.empty()) throw InvalidInput("no test samples");
    std::vector<double> pred, truth;
    double abs_err = 0.0;
    for (const auto& s : test) {
        const double p = model.predict_scaled(value_features(s), head);
        const double y = model.log_target ? std::log1p(s.targets.at(head)) : s.targets.at(head);
        pred.push_back(p);
        truth.push_back(y);
        abs_err += std::abs(p - y);
    }
    return {rec_auc(pred, truth, top_fraction), abs_err / static_cast<double>(test.size())};
}

// ---- costs and reward ----

std::string to_string(Resource r) {
    switch (r) {
    case Resource::cpu: return "CPU";
    case Resource::fpga: return "FPGA";
    case Resource::gpu: return "GPU";
    }
    return "?";
}

Resource resource_from_name(const std::string& name) {
    std::string up;
    for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    for (auto r : {Resource::cpu, Resource::fpga, Resource::gpu})
        if (to_string(r) == up) return r;
    throw InvalidParameter("unknown resource type: " + name);
}

CalcTable CalcTable::defaults() {
    CalcTable t;
    const std::pair<const char*, std::array<double, 3>> rows[] = {
        {"fast", {1.0, 0.3, 0.4}}, {"medium", {2.0, 0.6, 0.8}}, {"slow", {4.0, 1.2, 1.6}}};
    for (const auto& [preset, v] : rows) {
        t.entries[{preset, Resource::cpu}] = v[0];
        t.entries[{preset, Resource::fpga}] = v[1];
        t.entries[{preset, Resource::gpu}] = v[2];
    }
    return t;
}

double CalcTable::at(const std::string& preset, Resource r) const {
    auto it = entries.find({preset, r});
    if (it == entries.end())
        throw InvalidInput("no encoder cost entry for (" + preset + ", " + to_string(r) + ")");
    return it->second;
}

CostComponents cost_components(const playback::LadderGroup& ladders, double duration_s,
                               const ConsumptionForecast& consumption, const std::string& preset, Resource resource,
                               const CalcTable& table) {
    if (!(consumption.plays >= 0.0)) throw InvalidParameter("forecast plays must be >= 0");
    if (!(duration_s >= 0.0) || !(consumption.mean_watch_s >= 0.0)) throw InvalidParameter("durations must be >= 0");
    if (consumption.selection_share.size() != ladders.size())
        throw InvalidInput("selection shares must match the ladder count");
    double share_sum = 0.0;
    for (double s : consumption.selection_share) {
        if (!(s >= 0.0)) throw InvalidInput("selection shares must be >= 0");
        share_sum += s;
    }
    if (std::abs(share_sum - 1.0) > 1e-9) throw InvalidInput("selection shares must sum to 1");
    CostComponents c;
    for (std::size_t l = 0; l < ladders.size(); ++l) {
        const double bps = ladders[l].bytes_per_second();
        c.bw_bytes += consumption.selection_share[l] * consumption.plays * bps * consumption.mean_watch_s;
        c.store_bytes += bps * duration_s;
    }
    c.calc = table.at(preset, resource) * duration_s * static_cast<double>(ladders.size());
    return c;
}

double CostPrices::currency(const CostComponents& c) const {
    return c.bw_bytes / 1e9 * per_gb_bandwidth + c.store_bytes / 1e9 * per_gb_storage + c.calc * per_calc_second;
}

double reward(const RewardInputs& in) {
    if (in.ug.size() != in.clusters.size()) throw InvalidInput("cluster histogram and profiles differ in length");
    double mass = 0.0;
    for (double u : in.ug) {
        if (!(u >= 0.0)) throw InvalidInput("cluster histogram entries must be >= 0");
        mass += u;
    }
    if (std::abs(mass - 1.0) > 1e-9) throw InvalidInput("cluster histogram must sum to 1");
    double ltv = 0.0;
    for (std::size_t g = 0; g < in.clusters.size(); ++g) {
        if (in.ug[g] == 0.0) continue;
        const auto delta = core::qop_delta_to_lt(in.baseline, in.clusters[g].qop, in.impacts);
        const double rel = core::weighted_relative_lt(delta, in.clusters[g].sensitivity);
        ltv += in.ug[g] * in.users * core::profit(in.economy.lt_base * rel, 0.0, 0.0, in.economy).profit;
    }
    return ltv - in.prices.currency(in.delta_cost);
}

// ---- windowed ladder update ----

void WindowRecord::validate() const {
    if (!(qd_prob >= 0.0 && qd_prob <= 1.0) || !(fd_prob >= 0.0 && fd_prob <= 1.0))
        throw InvalidInput("preference probabilities must lie in [0,1]");
    double s = 0.0;
    for (double u : ug) {
        if (!(u >= 0.0)) throw InvalidInput("cluster histogram entries must be >= 0");
        s += u;
    }
    if (!ug.empty() && std::abs(s - 1.0) > 1e-9) throw InvalidInput("cluster histogram must sum to 1");
}

double smooth(std::span<const double> xs, double alpha) {
    if (xs.empty()) throw InvalidInput("nothing to smooth");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidParameter("smoothing factor must lie in (0,1]");
    double s = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) s = alpha * xs[i] + (1.0 - alpha) * s;
    return s;
}

LadderUpdate update_ladder(std::span<const WindowRecord> history, double value_score,
                           std::span<const playback::LadderGroup> candidates, const RewardFn& reward_fn,
                           const UpdateConfig& cfg) {
    if (history.empty()) throw InvalidInput("window history is empty");
    if (candidates.empty()) throw InvalidInput("ladder parameter space is empty");
    for (const auto& w : history) w.validate();
    const auto& last = history.back();
    LadderUpdate out;
    out.ladder = last.ladder;
    if (value_score < cfg.score_th) {
        out.withdrawn = true;
        return out;
    }

    std::vector<double> qd, fd;
    for (const auto& w : history) {
        qd.push_back(w.qd_prob);
        fd.push_back(w.fd_prob);
        if (w.ug.size() != last.ug.size()) throw InvalidInput("cluster histograms differ in length across windows");
    }
    out.qd_forecast = smooth(qd, cfg.smoothing);
    out.fd_forecast = smooth(fd, cfg.smoothing);
    for (std::size_t g = 0; g < last.ug.size(); ++g) {
        std::vector<double> col;
        for (const auto& w : history) col.push_back(w.ug[g]);
        out.ug_forecast.push_back(smooth(col, cfg.smoothing));
    }

    // Direction from the change of the smoothed preferences over the last window.
    double trend = 0.0;
    if (history.size() > 1) {
        const std::span<const double> qd_prev(qd.data(), qd.size() - 1), fd_prev(fd.data(), fd.size() - 1);
        trend = (out.qd_forecast - smooth(qd_prev, cfg.smoothing)) - (out.fd_forecast - smooth(fd_prev, cfg.smoothing));
    }
    out.direction = trend > 0.0 || (trend == 0.0 && out.qd_forecast >= out.fd_forecast) ? Direction::quality
                                                                                         : Direction::fluency;
    const double q0 = last.ladder.mean_quality();
    const double b0 = last.ladder.mean_bitrate();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const bool ok = out.direction == Direction::quality ? c.mean_quality() >= q0 : c.mean_bitrate() <= b0;
        if (!ok) continue;
        const double r = reward_fn(c, out.ug_forecast);
        out.evaluated.push_back(i);
        out.rewards.push_back(r);
        if (r > best) {
            best = r;
            out.ladder = c;
        }
    }
    if (out.evaluated.empty()) out.kept = true;
    return out;
}

// ---- transcode allocation ----

namespace {

void check_tasks(std::span<const TranscodeTask> tasks, double budget) {
    if (!(budget > 0.0)) throw InvalidParameter("transcode budget must be > 0");
    for (const auto& t : tasks)
        if (!(t.quota > 0.0) || !std::isfinite(t.reward)) throw InvalidInput("tasks need a positive quota and finite reward");
}

TranscodeAllocation summarize(std::span<const TranscodeTask> tasks, std::vector<std::size_t> chosen, bool exact) {
    std::sort(chosen.begin(), chosen.end());
    TranscodeAllocation a;
    a.exact = exact;
    for (std::size_t i : chosen) {
        a.quota_used += tasks[i].quota;
        a.reward_sum += tasks[i].reward;
    }
    a.accepted = std::move(chosen);
    return a;
}

} // namespace

TranscodeAllocation greedy_transcodes(std::span<const TranscodeTask> tasks, double budget) {
    check_tasks(tasks, budget);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].reward > 0.0 && tasks[i].quota <= budget) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return tasks[a].reward / tasks[a].quota > tasks[b].reward / tasks[b].quota;
    });
    std::vector<bool> in(tasks.size(), false);
    double used = 0.0, value = 0.0;
    for (std::size_t i : order)
        if (used + tasks[i].quota <= budget) {
            in[i] = true;
            used += tasks[i].quota;
            value += tasks[i].reward;
        }
    std::size_t single = tasks.size();
    for (std::size_t i : order)
        if (single == tasks.size() || tasks[i].reward > tasks[single].reward) single = i;
    if (single != tasks.size() && tasks[single].reward > value) {
        std::fill(in.begin(), in.end(), false);
        in[single] = true;
        used = tasks[single].quota;
        value = tasks[single].reward;
    }
    // Single swaps (one out, one in), then refill, while the reward rises.
    for (bool improved = true; improved;) {
        improved = false;
        double gain = 0.0;
        std::size_t out_i = 0, in_i = 0;
        for (std::size_t a = 0; a < tasks.size(); ++a) {
            if (!in[a]) continue;
            for (std::size_t b : order) {
                if (in[b]) continue;
                const double g = tasks[b].reward - tasks[a].reward;
                if (g > gain && used - tasks[a].quota + tasks[b].quota <= budget) {
                    gain = g;
                    out_i = a;
                    in_i = b;
                }
            }
        }
        if (gain > 0.0) {
            in[out_i] = false;
            in[in_i] = true;
            used += tasks[in_i].quota - tasks[out_i].quota;
            improved = true;
        }
        for (std::size_t i : order)
            if (!in[i] && used + tasks[i].quota <= budget) {
                in[i] = true;
                used += tasks[i].quota;
                improved = true;
            }
    }
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (in[i]) chosen.push_back(i);
    return summarize(tasks, std::move(chosen), false);
}

TranscodeAllocation allocate_transcodes(std::span<const TranscodeTask> tasks, double budget,
                                        const AllocationConfig& cfg) {
    check_tasks(tasks, budget);
    if (!(cfg.granularity > 0.0)) throw InvalidParameter("quota granularity must be > 0");
    const double cap_units = std::floor(budget / cfg.granularity + 1e-9);
    const double cells = (static_cast<double>(tasks.size()) + 1.0) * (cap_units + 1.0);
    if (cells > static_cast<double>(cfg.dp_cell_limit)) return greedy_transcodes(tasks, budget);

    std::vector<std::size_t> idx;
    std::vector<std::int64_t> w;
    std::vector<double> v;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!(tasks[i].reward > 0.0)) continue;
        idx.push_back(i);
        w.push_back(static_cast<std::int64_t>(std::ceil(tasks[i].quota / cfg.granularity - 1e-9)));
        v.push_back(tasks[i].reward);
    }
    const auto cap = static_cast<std::int64_t>(cap_units);
    const auto sol = cfg.backend == kernels::Backend::serial ? kernels::knapsack_dp_serial(w, v, cap)
                                                             : kernels::knapsack_dp_omp(w, v, cap);
    std::vector<std::size_t> chosen;
    for (std::size_t c : sol.chosen) chosen.push_back(idx[c]);
    return summarize(tasks, std::move(chosen), true);
}

// ---- quota control ----

void QuotaController::validate() const {
    if (!(kp >= 0.0 && ki >= 0.0 && kd >= 0.0)) throw InvalidParameter("PID gains must be >= 0");
    if (!(scale > 0.0) || !(max_budget >= 0.0)) throw InvalidParameter("PID scale must be > 0 and max budget >= 0");
}

double pid_quota(QuotaController& c, double measured, double dt, double budget) {
    c.validate();
    if (!(dt > 0.0)) throw InvalidParameter("PID time step must be > 0");
    const double e = c.target - measured;
    c.integral += e * dt;
    const double deriv = c.has_last ? (e - c.last_error) / dt : 0.0;
    c.last_error = e;
    c.has_last = true;
    const double u = c.kp * e + c.ki * c.integral + c.kd * deriv;
    return std::clamp(budget + c.scale * u, 0.0, c.max_budget);
}

double QuotaPlant::step(double budget) {
    utilization += lag * (load_per_budget * budget / cores - utilization);
    utilization = std::clamp(utilization, 0.0, 1.5);
    return utilization;
}

// ---- consumer clustering ----

Clustering cluster_consumers(std::span<const double> points, std::size_t dim, std::size_t k, std::uint64_t seed,
                             int max_iter, kernels::Backend backend) {
    if (dim == 0 || points.size() % dim != 0) throw InvalidInput("points must be a whole number of rows");
    const std::size_t n = points.size() / dim;
    if (k < 1 || k > n) throw InvalidParameter("k must lie in [1, number of points]");
    auto dist2 = [&](std::size_t i, const double* c) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) s += (points[i * dim + d] - c[d]) * (points[i * dim + d] - c[d]);
        return s;
    };

    Rng rng(derive_seed(seed, 0x6b6d));
    Clustering out;
    std::vector<double> centers;
    const std::size_t first = uniform_index(rng, n);
    centers.insert(centers.end(), points.begin() + static_cast<long>(first * dim),
                   points.begin() + static_cast<long>((first + 1) * dim));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = dist2(i, centers.data());
    while (centers.size() / dim < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        if (!(total > 0.0)) {
            out.reduced = true;
            break;
        }
        const double u = uniform01(rng) * total;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            pick = i;
            if (u < acc) break;
        }
        const std::size_t base = centers.size();
        centers.insert(centers.end(), points.begin() + static_cast<long>(pick * dim),
                       points.begin() + static_cast<long>((pick + 1) * dim));
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], dist2(i, centers.data() + base));
    }

    std::vector<std::size_t> assign;
    for (int it = 0; it < max_iter; ++it) {
        auto next = backend == kernels::Backend::serial ? kernels::assign_nearest_serial(points, centers, dim)
                                                        : kernels::assign_nearest_omp(points, centers, dim);
        const bool same = next == assign;
        assign = std::move(next);
        if (same) break;
        const std::size_t kk = centers.size() / dim;
        std::vector<double> sum(kk * dim, 0.0);
        std::vector<std::size_t> cnt(kk, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++cnt[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) sum[assign[i] * dim + d] += points[i * dim + d];
        }
        for (std::size_t c = 0; c < kk; ++c)
            if (cnt[c] > 0)
                for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] = sum[c * dim + d] / cnt[c];
    }

    // Drop empty clusters and renumber.
    const std::size_t kk = centers.size() / dim;
    std::vector<std::size_t> cnt(kk, 0), remap(kk, 0);
    for (std::size_t a : assign) ++cnt[a];
    for (std::size_t c = 0; c < kk; ++c) {
        if (cnt[c] == 0) {
            out.reduced = true;
            continue;
        }
        remap[c] = out.k++;
        out.centers.insert(out.centers.end(), centers.begin() + static_cast<long>(c * dim),
                           centers.begin() + static_cast<long>((c + 1) * dim));
        out.histogram.push_back(static_cast<double>(cnt[c]) / static_cast<double>(n));
    }
    for (std::size_t a : assign) out.assignment.push_back(remap[a]);
    return out;
}

} // namespace shortvid::uiae
