#include "compforest/discrete_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "compforest/errors.hpp"

namespace compforest {

namespace {

void guard(std::uint64_t events, const SimOptions& opts) {
    if (events >= opts.max_events) {
        std::ostringstream os;
        os << "simulation stopped after " << events << " events; the model is likely mis-specified";
        throw ExplosionGuard(os.str());
    }
}

// Fills samples for all sample times in [t_from, t_to) with `size`.
void fill_samples(const SimOptions& opts, std::size_t& next, double t_to, std::int64_t size, Trajectory& out) {
    while (next < opts.sample_times.size() && opts.sample_times[next] < t_to) {
        out.samples.push_back(static_cast<double>(size));
        ++next;
    }
}

}  // namespace

Trajectory simulate_single(std::size_t m, const BdRates& rates, Rng& rng, const SimOptions& opts) {
    if (m < 1) throw InvalidArgument("initial size must be at least 1");
    if (!(opts.t_max >= 0.0)) throw InvalidArgument("t_max must be non-negative");
    Trajectory out;
    std::int64_t n = static_cast<std::int64_t>(m);
    double t = 0.0;
    std::size_t next_sample = 0;
    if (opts.record) {
        out.times.push_back(0.0);
        out.values.push_back(n);
    }
    while (true) {
        const double b = rates.birth(static_cast<std::size_t>(n));
        const double d = rates.death(static_cast<std::size_t>(n));
        const double total = b + d;
        const double dt = rng.exponential(total);
        if (t + dt > opts.t_max) {
            fill_samples(opts, next_sample, opts.t_max, n, out);
            out.L += static_cast<double>(n) * (opts.t_max - t);
            out.censored = true;
            out.H = opts.t_max;
            break;
        }
        fill_samples(opts, next_sample, t + dt, n, out);
        out.L += static_cast<double>(n) * dt;
        t += dt;
        n += rng.uniform() * total < b ? 1 : -1;
        ++out.events;
        if (opts.record) {
            out.times.push_back(t);
            out.values.push_back(n);
        }
        if (n == 0) {
            out.absorbed = true;
            out.H = t;
            break;
        }
        guard(out.events, opts);
    }
    fill_samples(opts, next_sample, std::numeric_limits<double>::infinity(), n, out);
    return out;
}

// ---------------------------------------------------------------------------

PlanarForest::PlanarForest(std::size_t ancestors)
    : n_(ancestors), top_bit_(1), counts_(ancestors + 1, 0), tree_(ancestors + 1, 0) {
    if (ancestors < 1) throw InvalidArgument("the forest needs at least one ancestor");
    while (top_bit_ * 2 <= n_) top_bit_ *= 2;
    for (std::size_t j = 1; j <= n_; ++j) {
        counts_[j] = 1;
        tree_[j] += 1;
        const std::size_t parent = j + (j & (~j + 1));
        if (parent <= n_) tree_[parent] += tree_[j];
    }
    total_ = static_cast<std::int64_t>(n_);
}

std::int64_t PlanarForest::prefix(std::size_t j) const {
    std::int64_t s = 0;
    for (j = std::min(j, n_); j > 0; j &= j - 1) s += tree_[j];
    return s;
}

std::size_t PlanarForest::ancestor_at(std::int64_t l) const {
    std::size_t pos = 0;
    for (std::size_t step = top_bit_; step > 0; step >>= 1) {
        const std::size_t next = pos + step;
        if (next <= n_ && tree_[next] < l) {
            pos = next;
            l -= tree_[next];
        }
    }
    return pos + 1;
}

void PlanarForest::add(std::size_t j, std::int64_t delta) {
    counts_[j] += delta;
    total_ += delta;
    for (std::size_t i = j; i <= n_; i += i & (~i + 1)) tree_[i] += delta;
}

PlanarResult simulate_planar(std::size_t M, const BdRates& rates, Rng& rng, std::vector<std::size_t> query_ms,
                             const PlanarOptions& opts) {
    if (query_ms.empty()) throw InvalidArgument("no queried m");
    std::sort(query_ms.begin(), query_ms.end());
    query_ms.erase(std::unique(query_ms.begin(), query_ms.end()), query_ms.end());
    if (query_ms.front() < 1 || query_ms.back() > M) throw InvalidArgument("queried m must lie in 1..M");
    if (rates.is_time_changed()) throw InvalidArgument("the planar coupling needs untransformed rates");

    const SimOptions& sim = opts.sim;
    const RateSums& sums = rates.sums();
    const double lambda = rates.lambda(), mu = rates.mu();

    PlanarResult res;
    res.ms = query_ms;
    const std::size_t Q = query_ms.size();
    res.paths.resize(Q);
    std::vector<std::int64_t> x(Q);
    std::vector<std::size_t> next_sample(Q, 0);
    for (std::size_t i = 0; i < Q; ++i) {
        x[i] = static_cast<std::int64_t>(query_ms[i]);
        if (sim.record) {
            res.paths[i].times.push_back(0.0);
            res.paths[i].values.push_back(x[i]);
        }
    }
    std::size_t alive_from = 0;  // queried indices below this are absorbed

    PlanarForest forest(M);
    double t = 0.0;
    while (alive_from < Q) {
        const auto k = static_cast<std::size_t>(forest.total());
        const double kd = static_cast<double>(k);
        const double fp = sums.fplus(k), fm = sums.fminus(k);
        const double B = lambda * kd + fp, D = mu * kd + fm;

        if (opts.audit) {
            double bsum = 0.0, dsum = 0.0;
            for (std::size_t l = 1; l <= k; ++l) {
                bsum += lambda + sums.inc_plus(l);
                dsum += mu + sums.inc_minus(l);
            }
            res.audit_error = std::max(res.audit_error, std::abs(bsum - B) / B);
            res.audit_error = std::max(res.audit_error, std::abs(dsum - D) / D);
        }

        const double dt = rng.exponential(B + D);
        const double t_next = t + dt;
        if (t_next > sim.t_max) {
            for (std::size_t i = alive_from; i < Q; ++i) {
                Trajectory& p = res.paths[i];
                fill_samples(sim, next_sample[i], sim.t_max, x[i], p);
                p.L += static_cast<double>(x[i]) * (sim.t_max - t);
                p.censored = true;
                p.H = sim.t_max;
            }
            break;
        }
        for (std::size_t i = alive_from; i < Q; ++i) {
            fill_samples(sim, next_sample[i], t_next, x[i], res.paths[i]);
            res.paths[i].L += static_cast<double>(x[i]) * dt;
        }
        t = t_next;

        // Event type, then the position l of the individual it happens to.
        const bool birth = rng.uniform() * (B + D) < B;
        std::int64_t l;
        if (birth) {
            const double u = rng.uniform() * B;
            if (u < lambda * kd) l = 1 + std::min<std::int64_t>(static_cast<std::int64_t>(u / lambda), k - 1);
            else l = static_cast<std::int64_t>(sums.select_plus(std::min(u - lambda * kd, fp * (1.0 - 1e-16)), k));
        } else {
            const double u = rng.uniform() * D;
            if (u < mu * kd) l = 1 + std::min<std::int64_t>(static_cast<std::int64_t>(u / mu), k - 1);
            else l = static_cast<std::int64_t>(sums.select_minus(std::min(u - mu * kd, fm * (1.0 - 1e-16)), k));
        }
        const std::size_t j = forest.ancestor_at(l);
        const std::int8_t delta = birth ? 1 : -1;
        forest.add(j, delta);
        ++res.events;
        if (opts.event_log) res.log.push_back({t, static_cast<std::uint32_t>(j), delta});

        // X^m changes for every queried m >= j.
        const auto first = static_cast<std::size_t>(std::lower_bound(query_ms.begin(), query_ms.end(), j) -
                                                    query_ms.begin());
        for (std::size_t i = std::max(first, alive_from); i < Q; ++i) {
            Trajectory& p = res.paths[i];
            x[i] += delta;
            ++p.events;
            if (sim.record) {
                p.times.push_back(t);
                p.values.push_back(x[i]);
            }
        }
        for (std::size_t i = alive_from; i + 1 < Q; ++i)
            if (x[i] > x[i + 1]) {
                ++res.order_violations;
                break;
            }
        while (alive_from < Q && x[alive_from] == 0) {
            Trajectory& p = res.paths[alive_from];
            p.absorbed = true;
            p.H = t;
            fill_samples(sim, next_sample[alive_from], std::numeric_limits<double>::infinity(), 0, p);
            ++alive_from;
        }
        guard(res.events, sim);
    }
    for (std::size_t i = 0; i < Q; ++i)
        fill_samples(sim, next_sample[i], std::numeric_limits<double>::infinity(), x[i], res.paths[i]);
    return res;
}

// ---------------------------------------------------------------------------

Trajectory time_change_discrete(const Trajectory& path) {
    if (!path.absorbed) throw CensoredInput("time change needs an absorbed path");
    if (path.times.empty() || path.times.size() != path.values.size())
        throw InvalidArgument("time change needs a recorded path");
    Trajectory out;
    out.absorbed = true;
    out.events = path.events;
    out.times.reserve(path.times.size());
    out.values = path.values;
    // A is linear with slope X on each holding interval. The clock values are
    // accumulated in the same order as L so that the final one equals L.
    double clock = 0.0;
    out.times.push_back(0.0);
    for (std::size_t i = 1; i < path.times.size(); ++i) {
        const double dt = path.times[i] - path.times[i - 1];
        const double x = static_cast<double>(path.values[i - 1]);
        clock += x * dt;
        out.times.push_back(clock);
        // U holds the value x during a clock interval of length x dt.
        out.L += x * (x * dt);
    }
    out.H = clock;
    return out;
}

double clock_inverse(const Trajectory& path, double s) {
    if (path.times.size() < 2) throw InvalidArgument("clock inverse needs a recorded path");
    if (s <= 0.0) return 0.0;
    double clock = 0.0;
    for (std::size_t i = 1; i < path.times.size(); ++i) {
        const double dt = path.times[i] - path.times[i - 1];
        const double x = static_cast<double>(path.values[i - 1]);
        if (x > 0.0 && clock + x * dt >= s) return path.times[i - 1] + (s - clock) / x;
        clock += x * dt;
    }
    return path.times.back();
}

double pure_death_mean(std::size_t m, double mu, const RateSums& sums) {
    if (m < 1) throw InvalidArgument("m must be at least 1");
    double total = 0.0;
    for (std::size_t n = 1; n <= m; ++n) total += 1.0 / (mu * static_cast<double>(n) + sums.fminus(n));
    return total;
}

BdRates scaled_rates(double N, const InteractionModel& model) {
    if (!(N >= 1.0)) throw InvalidArgument("N must be at least 1");
    const InteractionModel scaled = model.scaled(N);
    return BdRates(2.0 * N, 2.0 * N, rate_sums(scaled, static_cast<std::size_t>(4.0 * N) + 16));
}

std::vector<double> scaled_ensemble(double N, double x, const BdRates& scaled, const std::vector<double>& t_grid,
                                    Rng& rng) {
    if (!(x > 0.0)) throw InvalidArgument("x must be positive");
    const auto m = static_cast<std::size_t>(std::floor(N * x));
    std::vector<double> z(t_grid.size(), 0.0);
    if (m == 0) return z;
    SimOptions opts;
    opts.sample_times = t_grid;
    opts.t_max = t_grid.empty() ? 0.0 : t_grid.back();
    Trajectory p = simulate_single(m, scaled, rng, opts);
    for (std::size_t i = 0; i < t_grid.size(); ++i) z[i] = p.samples[i] / N;
    return z;
}

std::vector<double> scaled_ensemble(double N, double x, const InteractionModel& model,
                                    const std::vector<double>& t_grid, Rng& rng) {
    return scaled_ensemble(N, x, scaled_rates(N, model), t_grid, rng);
}

}  // namespace compforest
