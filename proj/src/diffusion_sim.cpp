#include "compforest/diffusion_sim.hpp"

#include <algorithm>
#include <cmath>

#include "compforest/errors.hpp"

namespace compforest {

namespace {

// Drift increment q dt, tamed so that one step moves by less than half of
// 1 + v. Stable for superlinear drifts, and a path started near infinity
// comes down in O(log v) steps. v + incr(v) stays increasing in v for drifts
// up to about -v^3 on the height route, which the shared-noise ordering
// relies on.
constexpr double kTameFraction = 0.5;

double tamed(double q, double dt, double v) {
    return q * dt / (1.0 + dt * std::abs(q) / (kTameFraction * (1.0 + std::abs(v))));
}

struct Kernel {
    Target target;
    const InteractionModel* model;
    double eps;

    double initial(double x) const {
        switch (target) {
            case Target::HEIGHT: return std::sqrt(x);
            case Target::MASS: return 0.5 * x;
            default: return x;
        }
    }

    // One step from v with the normal draw xi.
    double step(double v, double dt, double sqdt, double xi) const {
        switch (target) {
            case Target::HEIGHT: {
                const double y = std::max(v, eps);
                const double q = ((*model)(y * y) - 1.0) / (2.0 * y);
                return v + tamed(q, dt, v) + sqdt * xi;
            }
            case Target::MASS: {
                const double u = std::max(v, eps);
                const double q = (*model)(2.0 * u) / (4.0 * u);
                return v + tamed(q, dt, v) + sqdt * xi;
            }
            default: {
                const double inc = tamed((*model)(v), dt, v);
                // Unreflected: a step that crosses eps_abs is absorbed by the
                // caller, so |.| of the symmetrized scheme never acts.
                return v + inc + 2.0 * std::sqrt(std::max(v, 0.0)) * sqdt * xi;
            }
        }
    }
};

struct Walker {
    const Kernel& kernel;
    const SdeConfig& cfg;
    DiffusionPath path;
    double v;
    double t = 0.0;
    std::size_t next_sample = 0;
    bool done = false;

    Walker(const Kernel& k, const SdeConfig& c, double x) : kernel(k), cfg(c), v(k.initial(x)) {
        if (cfg.record) {
            path.times.push_back(0.0);
            path.values.push_back(v);
        }
    }

    void sample_until(double t_to, double value) {
        while (next_sample < cfg.sample_times.size() && cfg.sample_times[next_sample] < t_to) {
            path.samples.push_back(value);
            ++next_sample;
        }
    }

    void record(double value) {
        if (cfg.record && path.steps % cfg.record_every == 0) {
            path.times.push_back(t);
            path.values.push_back(value);
        }
    }

    // Advances by one step; absorbed and censored walkers just keep the clock.
    void advance(double sqdt, double xi) {
        if (done) {
            ++path.steps;
            t += cfg.dt;
            record(0.0);
            return;
        }
        const double dt = cfg.dt;
        const double nv = kernel.step(v, dt, sqdt, xi);
        ++path.steps;
        if (nv <= kernel.eps) {
            const double frac = v > kernel.eps ? std::clamp((v - kernel.eps) / (v - nv), 0.0, 1.0) : 0.0;
            const double th = t + frac * dt;
            sample_until(th, v);
            if (kernel.target == Target::Z) path.S += 0.5 * (v + kernel.eps) * (th - t);
            path.absorbed = true;
            path.T = th;
            if (kernel.target == Target::MASS) path.S = th;
            t += dt;
            v = 0.0;
            done = true;
            record(0.0);
            return;
        }
        sample_until(t + dt, v);
        if (kernel.target == Target::Z) path.S += 0.5 * (v + nv) * dt;
        t += dt;
        v = nv;
        record(v);
        if (t >= cfg.t_max) {
            path.censored = true;
            path.T = cfg.t_max;
            if (kernel.target == Target::MASS) path.S = cfg.t_max;
            done = true;
        }
    }

    DiffusionPath finish() {
        sample_until(std::numeric_limits<double>::infinity(), done && path.absorbed ? 0.0 : v);
        return std::move(path);
    }
};

DiffusionPath run_one(double x, const InteractionModel& model, const SdeConfig& cfg, Rng& rng, Target target) {
    if (!(x > 0.0)) throw InvalidArgument("initial value must be positive");
    validate(cfg);
    const Kernel kernel{target, &model, cfg.eps_abs};
    Walker w(kernel, cfg, x);
    const double sqdt = std::sqrt(cfg.dt);
    if (w.v <= cfg.eps_abs) {
        w.path.absorbed = true;
        w.done = true;
        return w.finish();
    }
    while (!w.done) w.advance(sqdt, rng.normal());
    return w.finish();
}

}  // namespace

std::string to_string(Target t) {
    switch (t) {
        case Target::HEIGHT: return "height";
        case Target::MASS: return "mass";
        case Target::Z: return "z";
    }
    return "?";
}

Target parse_target(const std::string& name) {
    if (name == "height") return Target::HEIGHT;
    if (name == "mass") return Target::MASS;
    if (name == "z") return Target::Z;
    throw InvalidArgument("unknown target '" + name + "' (expected height, mass or z)");
}

void validate(const SdeConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(cfg.eps_abs > 0.0)) throw InvalidArgument("eps_abs must be positive");
    if (!(cfg.t_max > 0.0)) throw InvalidArgument("t_max must be positive");
    if (cfg.record_every == 0) throw InvalidArgument("record_every must be positive");
    if (!std::is_sorted(cfg.sample_times.begin(), cfg.sample_times.end()))
        throw InvalidArgument("sample times must be increasing");
}

DiffusionPath simulate_height(double x, const InteractionModel& model, const SdeConfig& cfg, Rng& rng) {
    return run_one(x, model, cfg, rng, Target::HEIGHT);
}

DiffusionPath simulate_mass(double x, const InteractionModel& model, const SdeConfig& cfg, Rng& rng) {
    return run_one(x, model, cfg, rng, Target::MASS);
}

DiffusionPath simulate_Z(double x, const InteractionModel& model, const SdeConfig& cfg, Rng& rng) {
    return run_one(x, model, cfg, rng, Target::Z);
}

std::vector<DiffusionPath> shared_noise_ensemble(const std::vector<double>& xs, const InteractionModel& model,
                                                 const SdeConfig& cfg, Rng& rng, Target target) {
    if (xs.empty()) throw InvalidArgument("empty x list");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0)) throw InvalidArgument("x values must be positive");
        if (i > 0 && !(xs[i] > xs[i - 1])) throw InvalidArgument("x values must be strictly increasing");
    }
    validate(cfg);
    const Kernel kernel{target, &model, cfg.eps_abs};
    std::vector<Walker> walkers;
    walkers.reserve(xs.size());
    for (double x : xs) {
        walkers.emplace_back(kernel, cfg, x);
        Walker& w = walkers.back();
        if (w.v <= cfg.eps_abs) {
            w.path.absorbed = true;
            w.done = true;
        }
    }
    const double sqdt = std::sqrt(cfg.dt);
    while (true) {
        bool all_done = true;
        for (const Walker& w : walkers) all_done = all_done && w.done;
        if (all_done) break;
        const double xi = rng.normal();
        for (Walker& w : walkers) w.advance(sqdt, xi);
    }
    std::vector<DiffusionPath> out;
    out.reserve(walkers.size());
    for (Walker& w : walkers) out.push_back(w.finish());
    // Pad recorded grids so every path covers the same times.
    if (cfg.record) {
        std::size_t len = 0;
        for (const auto& p : out) len = std::max(len, p.values.size());
        for (auto& p : out) {
            while (p.values.size() < len) {
                p.times.push_back(p.times.back() + cfg.dt * static_cast<double>(cfg.record_every));
                p.values.push_back(0.0);
            }
        }
    }
    return out;
}

std::size_t ordering_violations(const std::vector<DiffusionPath>& paths) {
    std::size_t bad = 0;
    for (std::size_t i = 1; i < paths.size(); ++i) {
        const auto& lo = paths[i - 1].values;
        const auto& hi = paths[i].values;
        const std::size_t n = std::min(lo.size(), hi.size());
        for (std::size_t k = 0; k < n; ++k)
            if (hi[k] < lo[k]) ++bad;
    }
    return bad;
}

double feller_extinction_cdf(double x, double t) {
    if (!(t > 0.0)) return 0.0;
    return std::exp(-x / (2.0 * t));
}

double brownian_hitting_cdf(double a, double t) {
    if (!(t > 0.0)) return 0.0;
    return std::erfc(a / std::sqrt(2.0 * t));
}

}  // namespace compforest
