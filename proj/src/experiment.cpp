#include "shortvid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shortvid/error.hpp"
#include "shortvid/rng.hpp"
#include "shortvid/workload.hpp"

namespace shortvid::experiment {

std::size_t ab_assign(std::uint64_t user, const std::string& salt, std::span<const double> ratios) {
    if (ratios.empty()) throw InvalidParameter("no arms");
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw InvalidParameter("arm ratios must be >= 0");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameter("arm ratios must sum to 1");
    const double u = static_cast<double>(mix64(fnv1a64(salt) ^ mix64(user)) >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        acc += ratios[i];
        if (u < acc) return i;
    }
    for (std::size_t i = ratios.size(); i-- > 0;)
        if (ratios[i] > 0.0) return i;
    return 0;
}

std::string to_string(Tag t) { return t == Tag::treatment ? "T" : "C"; }

InterleaveMode interleave_mode_from_name(const std::string& name) {
    if (name == "alternate") return InterleaveMode::alternate;
    if (name == "random") return InterleaveMode::random;
    throw InvalidParameter("unknown interleave mode: " + name);
}

std::vector<Tag> interleave(std::size_t items, InterleaveMode mode, std::uint64_t session, std::uint64_t seed) {
    std::vector<Tag> tags(items);
    if (mode == InterleaveMode::alternate) {
        for (std::size_t i = 0; i < items; ++i) tags[i] = (i + session) % 2 == 0 ? Tag::treatment : Tag::control;
        return tags;
    }
    Rng rng(derive_seed(seed, session));
    for (auto& t : tags) t = bernoulli(rng, 0.5) ? Tag::treatment : Tag::control;
    return tags;
}

LabelResolver::LabelResolver(std::vector<LabeledOutput> outputs) : outputs_(std::move(outputs)) {
    for (std::size_t i = 0; i < outputs_.size(); ++i) index_[{outputs_[i].item, outputs_[i].group}].push_back(i);
}

std::optional<LabeledOutput> LabelResolver::resolve(std::uint64_t item, const std::string& group, double t) const {
    auto it = index_.find({item, group});
    if (it == index_.end()) return std::nullopt;
    std::optional<std::size_t> best;
    for (std::size_t i : it->second) {
        const auto& o = outputs_[i];
        if (t >= o.start && t < o.end && (!best || o.start > outputs_[*best].start)) best = i;
    }
    if (!best) return std::nullopt;
    return outputs_[*best];
}

std::map<std::string, long> partition_pool(std::span<const PoolShare> pools, long total) {
    std::map<std::string, long> out;
    if (pools.empty()) return out;
    if (total < 0) throw InvalidParameter("pool size must be >= 0");
    double sum = 0.0;
    for (const auto& p : pools) {
        if (!(p.fraction >= 0.0)) throw InvalidParameter("pool fractions must be >= 0");
        sum += p.fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameter("pool fractions must sum to 1");
    std::vector<std::pair<double, std::size_t>> rem;
    long used = 0;
    for (std::size_t i = 0; i < pools.size(); ++i) {
        const double exact = pools[i].fraction * static_cast<double>(total);
        const auto base = static_cast<long>(std::floor(exact));
        out[pools[i].strategy] += base;
        used += base;
        rem.emplace_back(exact - static_cast<double>(base), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; used < total; ++k, ++used) out[pools[rem[k % rem.size()].second].strategy] += 1;
    return out;
}

LabelResult label_outputs(std::span<const TranscodeOutput> outputs, std::span<const StrategyWindow> windows,
                          std::span<const PoolShare> pools, long pool_total) {
    for (const auto& w : windows)
        if (!(w.end > w.start)) throw InvalidParameter("strategy window must have end > start");
    LabelResult r;
    for (const auto& o : outputs) {
        bool found = false;
        for (const auto& w : windows)
            if (w.strategy == o.strategy) {
                r.labeled.push_back({o.item, o.strategy, w.group, w.start, w.end});
                found = true;
            }
        if (!found) throw InvalidInput("output of item " + std::to_string(o.item) + " names unknown strategy " + o.strategy);
    }
    r.resolver = LabelResolver(r.labeled);
    r.pool_units = partition_pool(pools, pool_total);
    return r;
}

double quasi_delta(const QuasiInputs& in) {
    for (double v : {in.t_c, in.c_c, in.t_bp, in.c_ap})
        if (!std::isfinite(v)) throw InvalidInput("quasi-experiment totals must be finite");
    if (in.sizes) {
        const auto& s = *in.sizes;
        if (!(s.b_prime > 0.0) || !(s.a_prime > 0.0)) throw InvalidParameter("adjusted subsets must be nonempty");
        return in.t_c - in.c_c + in.t_bp * s.a_plus_b / s.b_prime - in.c_ap * s.a_plus_b / s.a_prime;
    }
    if (!(in.lambda > 0.0)) throw InvalidParameter("lambda must be > 0");
    return in.t_c - in.c_c + (in.t_bp - in.c_ap) * in.lambda;
}

double quasi_delta_perf(double t_c_plus_bp, double c_c_plus_ap) { return t_c_plus_bp - c_c_plus_ap; }

namespace {

std::vector<double> means(std::span<const VideoCovariates> v, std::span<const std::size_t> idx, std::size_t dims) {
    std::vector<double> m(dims, 0.0);
    for (std::size_t i : idx)
        for (std::size_t d = 0; d < dims; ++d) m[d] += v[i].values[d];
    for (double& x : m) x /= static_cast<double>(std::max<std::size_t>(1, idx.size()));
    return m;
}

double gap(double a, double b) {
    const double den = std::max(std::abs(a), std::abs(b));
    return den == 0.0 ? 0.0 : std::abs(a - b) / den;
}

// E[min(K, D)] for K geometric failures: sum_{k<=floor D} q^k + (D - floor D) q^(floor D + 1).
double expected_watch(const playback::Item& it) {
    const double q = 1.0 - it.stop_prob;
    const double f = std::floor(it.duration_s);
    return q * (1.0 - std::pow(q, f)) / (1.0 - q) + (it.duration_s - f) * std::pow(q, f + 1.0);
}

} // namespace

double max_relative_gap(std::span<const VideoCovariates> videos, std::span<const std::size_t> a,
                        std::span<const std::size_t> b) {
    const std::size_t dims = videos.empty() ? 0 : videos.front().values.size();
    const auto ma = means(videos, a, dims), mb = means(videos, b, dims);
    double g = 0.0;
    for (std::size_t d = 0; d < dims; ++d) g = std::max(g, gap(ma[d], mb[d]));
    return g;
}

VideoSplit balance_video_split(std::span<const VideoCovariates> videos, std::uint64_t seed, double tolerance,
                               int max_iter) {
    if (videos.size() < 2) throw InvalidInput("need at least two videos to split");
    const std::size_t dims = videos.front().values.size();
    for (const auto& v : videos)
        if (v.values.size() != dims) throw InvalidInput("videos differ in covariate count");
    Rng rng(derive_seed(seed, 0xab));
    std::vector<std::size_t> order(videos.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    VideoSplit s;
    s.a.assign(order.begin(), order.begin() + static_cast<long>(order.size() / 2));
    s.b.assign(order.begin() + static_cast<long>(order.size() / 2), order.end());

    // Work with sums so a swap updates in O(dims).
    std::vector<double> sa(dims, 0.0), sb(dims, 0.0);
    for (std::size_t i : s.a)
        for (std::size_t d = 0; d < dims; ++d) sa[d] += videos[i].values[d];
    for (std::size_t i : s.b)
        for (std::size_t d = 0; d < dims; ++d) sb[d] += videos[i].values[d];
    const double na = static_cast<double>(s.a.size()), nb = static_cast<double>(s.b.size());
    auto objective = [&](const std::vector<double>& xa, const std::vector<double>& xb, double* worst) {
        double obj = 0.0, w = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
            const double g = gap(xa[d] / na, xb[d] / nb);
            obj += g * g;
            w = std::max(w, g);
        }
        if (worst) *worst = w;
        return obj;
    };
    double worst = 0.0;
    double obj = objective(sa, sb, &worst);
    std::vector<double> ta(dims), tb(dims);
    for (; s.iterations < max_iter && worst > tolerance; ++s.iterations) {
        double best_obj = obj;
        std::size_t bi = 0, bj = 0;
        for (int trial = 0; trial < 64; ++trial) {
            const std::size_t i = uniform_index(rng, s.a.size()), j = uniform_index(rng, s.b.size());
            for (std::size_t d = 0; d < dims; ++d) {
                const double delta = videos[s.b[j]].values[d] - videos[s.a[i]].values[d];
                ta[d] = sa[d] + delta;
                tb[d] = sb[d] - delta;
            }
            const double o = objective(ta, tb, nullptr);
            if (o < best_obj) {
                best_obj = o;
                bi = i;
                bj = j;
            }
        }
        if (best_obj < obj) {
            for (std::size_t d = 0; d < dims; ++d) {
                const double delta = videos[s.b[bj]].values[d] - videos[s.a[bi]].values[d];
                sa[d] += delta;
                sb[d] -= delta;
            }
            std::swap(s.a[bi], s.b[bj]);
            obj = objective(sa, sb, &worst);
        }
    }
    std::sort(s.a.begin(), s.a.end());
    std::sort(s.b.begin(), s.b.end());
    s.max_relative_gap = max_relative_gap(videos, s.a, s.b);
    s.balanced = s.max_relative_gap <= tolerance;
    return s;
}

QuasiOutcome run_quasi_experiment(const QuasiScenario& sc) {
    if (sc.users < 2 || sc.views_per_user < 1) throw InvalidParameter("scenario needs users and views");
    if (!(sc.transcode_fraction > 0.0 && sc.transcode_fraction <= 1.0))
        throw InvalidParameter("transcode fraction must lie in (0,1]");
    auto spec = workload::CatalogSpec::defaults();
    spec.item_count = sc.catalog;
    const auto cat = workload::generate_catalog(spec, derive_seed(sc.seed, 1));
    const auto& items = cat.items;

    // Transcode set: a seeded random subset; the rest is the untouched set C.
    Rng rng(derive_seed(sc.seed, 2));
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    const auto n_trans = std::max<std::size_t>(2, static_cast<std::size_t>(sc.transcode_fraction * items.size()));
    std::vector<VideoCovariates> cov;
    for (std::size_t k = 0; k < n_trans; ++k) {
        const auto& it = items[order[k]];
        cov.push_back({it.id, {it.popularity_weight * expected_watch(it), it.duration_s,
                               static_cast<double>(it.category)}});
    }
    QuasiOutcome out;
    out.split = balance_video_split(cov, derive_seed(sc.seed, 3), sc.balance_tolerance);

    enum Set : unsigned char { in_c, in_a, in_b };
    std::vector<Set> set_of(items.size(), in_c);
    double mass_a = 0.0, mass_b = 0.0;
    for (std::size_t i : out.split.a) {
        set_of[order[i]] = in_a;
        mass_a += cov[i].values[0];
    }
    for (std::size_t i : out.split.b) {
        set_of[order[i]] = in_b;
        mass_b += cov[i].values[0];
    }

    std::vector<double> cdf(items.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) cdf[i] = acc += items[i].popularity_weight;

    const std::vector<double> arms{0.5, 0.5};
    double t_c = 0, c_c = 0, t_bp = 0, c_ap = 0;
    Rng views(derive_seed(sc.seed, 4));
    const std::string salt = "quasi-" + std::to_string(sc.seed);
    for (std::size_t u = 0; u < sc.users; ++u) {
        const bool treated = ab_assign(u, salt, arms) == 0;
        (treated ? out.treatment_users : out.control_users) += 1;
        for (std::size_t v = 0; v < sc.views_per_user; ++v) {
            const double x = uniform01(views) * acc;
            const auto idx = std::min<std::size_t>(
                items.size() - 1, static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin()));
            double play = workload::sample_watch_time(items[idx], views);
            const Set s = set_of[idx];
            if (treated && s == in_b) play *= 1.0 + sc.effect;
            // History adjustment: treatment views of A and control views of B are filtered out.
            if ((treated && s == in_a) || (!treated && s == in_b)) {
                ++out.dropped_views;
                continue;
            }
            if (s == in_c) (treated ? t_c : c_c) += play;
            else if (s == in_b) t_bp += play;
            else c_ap += play;
        }
    }
    if (out.treatment_users == 0 || out.control_users == 0) throw InvalidInput("an experiment arm is empty");
    const double nt = static_cast<double>(out.treatment_users), nc = static_cast<double>(out.control_users);
    out.inputs = {t_c / nt, c_c / nc, t_bp / nt, c_ap / nc, SetSizes{mass_a + mass_b, mass_b, mass_a}, 2.5};
    out.delta_exact = quasi_delta(out.inputs);
    auto approx = out.inputs;
    approx.sizes.reset();
    out.delta_lambda = quasi_delta(approx);
    out.delta_perf = quasi_delta_perf(out.inputs.t_c + out.inputs.t_bp, out.inputs.c_c + out.inputs.c_ap);
    const double baseline = out.inputs.c_ap * (mass_a + mass_b) / mass_a;
    out.relative_effect = out.delta_exact / baseline;
    out.true_relative = sc.effect;
    return out;
}

} // namespace shortvid::experiment
