#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "compforest/config.hpp"
#include "compforest/criteria.hpp"
#include "compforest/diffusion_sim.hpp"
#include "compforest/discrete_sim.hpp"
#include "compforest/errors.hpp"
#include "compforest/expression.hpp"
#include "compforest/interaction.hpp"
#include "compforest/runner.hpp"
#include "compforest/stats.hpp"

using namespace compforest;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> body;
};

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("compforest_acceptance_" + name);
    std::filesystem::remove_all(p);
    return p.string();
}

H3Verdict as_h3(Convergence c) {
    if (c == Convergence::CONVERGES) return H3Verdict::HOLDS;
    if (c == Convergence::DIVERGES) return H3Verdict::FAILS;
    return H3Verdict::INCONCLUSIVE;
}

Outcome logistic_example() {
    const auto r = classify(build_model(Logistic{1.0, 1.0}), 1.0, 1.0);
    const bool integral = r.height.integral.verdict == Convergence::CONVERGES &&
                          r.mass.integral.verdict == Convergence::DIVERGES;
    const bool series = r.height.series && r.mass.series &&
                        r.height.series->verdict == EntranceVerdict::ENTRANCE &&
                        r.mass.series->verdict == EntranceVerdict::NOT_ENTRANCE;
    const bool verdicts = r.height.verdict == Verdict::FINITE_EXP_MOMENT && r.mass.verdict == Verdict::DIVERGES;
    return {integral && series && verdicts, "height " + to_string(r.height.verdict) + ", mass " +
                                                to_string(r.mass.verdict) + (integral ? ", integral ok" : ", integral off") +
                                                (series ? ", series ok" : ", series off")};
}

Outcome powerlog_grid() {
    int matches = 0, cells = 0;
    std::string misses;
    for (double a : {0.5, 1.0, 1.5, 2.0, 2.5})
        for (double g : {0.0, 0.5, 1.0, 1.5}) {
            const bool height = a > 1.0 || (a == 1.0 && g > 1.0);
            const bool mass = a > 2.0 || (a == 2.0 && g > 1.0);
            const auto r = classify(build_model(PowerLog{a, g}), 1.0, 1.0);
            const auto expect = [](bool finite) { return finite ? Verdict::FINITE_EXP_MOMENT : Verdict::DIVERGES; };
            ++cells;
            if (r.height.verdict == expect(height) && r.mass.verdict == expect(mass)) ++matches;
            else misses += fmt(" (%g,%g)", a, g);
        }
    return {matches == cells, std::to_string(matches) + "/" + std::to_string(cells) + " cells" + misses};
}

Outcome pure_death() {
    const auto rates = bd_rates(build_model(ZeroFn{}), 0.0, 1.0);
    const auto run = run_replicas<double>(100000, derive_seed(kSeed, 3), threads(),
                                          [&](Rng& rng, std::size_t) { return simulate_single(10, rates, rng).H; });
    std::vector<Sample> s;
    for (double h : run.successes()) s.push_back({h, false});
    const auto sum = summarize(s);
    double harmonic = 0.0;
    for (int n = 1; n <= 10; ++n) harmonic += 1.0 / n;
    const double z = std::abs(sum.mean - harmonic) / sum.std_err;
    return {s.size() == 100000 && z <= 3.0, fmt("mean %.5f, target %.5f, %.2f SE", sum.mean, harmonic, z)};
}

Outcome coupling_order() {
    const auto rates = bd_rates(build_model(Logistic{1.0, 1.0}), 1.0, 1.0);
    std::vector<std::size_t> ms(50);
    for (std::size_t i = 0; i < ms.size(); ++i) ms[i] = i + 1;
    const auto run = run_replicas<std::uint64_t>(1000, derive_seed(kSeed, 4), threads(), [&](Rng& rng, std::size_t) {
        return simulate_planar(50, rates, rng, ms).order_violations;
    });
    std::uint64_t violations = 0;
    for (auto v : run.successes()) violations += v;
    return {run.errors.empty() && violations == 0,
            std::to_string(violations) + " violations over " + std::to_string(run.successes().size()) + " replicas"};
}

Outcome marginal_law() {
    const auto rates = bd_rates(build_model(Logistic{1.0, 1.0}), 1.0, 1.0);
    const auto planar = run_replicas<double>(10000, derive_seed(kSeed, 50), threads(), [&](Rng& rng, std::size_t) {
        return simulate_planar(50, rates, rng, {5, 50}).paths[0].H;
    });
    const auto single = run_replicas<double>(10000, derive_seed(kSeed, 51), threads(),
                                             [&](Rng& rng, std::size_t) { return simulate_single(5, rates, rng).H; });
    const auto ks = ks_two_sample(planar.successes(), single.successes());
    return {planar.errors.empty() && single.errors.empty() && ks.p_value >= 0.01,
            fmt("D = %.4f, p = %.3f", ks.distance, ks.p_value)};
}

Outcome time_change() {
    const auto rates = bd_rates(build_model(Logistic{1.0, 1.0}), 1.0, 1.0);
    const auto run = run_replicas<double>(1000, derive_seed(kSeed, 6), threads(), [&](Rng& rng, std::size_t i) {
        SimOptions opts;
        opts.record = true;
        const auto p = simulate_single(1 + i % 100, rates, rng, opts);
        if (!p.absorbed) return -1.0;
        const auto u = time_change_discrete(p);
        return std::abs(u.H - p.L) / (1.0 + p.L);
    });
    std::size_t absorbed = 0;
    double worst = 0.0;
    for (double e : run.successes())
        if (e >= 0.0) {
            ++absorbed;
            worst = std::max(worst, e);
        }
    return {run.errors.empty() && absorbed == 1000 && worst <= 1e-9,
            std::to_string(absorbed) + " absorbed paths, worst " + fmt("%.2e", worst) + " of 1e-9(1+L)"};
}

Outcome j_generator() {
    const auto rates = bd_rates(build_model(Logistic{0.0, 1.0}), 1.0, 1.0);
    const auto j = j_function(rates, 1.0, 500);
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t n = j.n_a() + 1; n < j.n_trunc(); ++n) {
        worst = std::max(worst, std::abs(j.generator(n) + 1.0));
        ++checked;
    }
    return {checked > 0 && worst <= 1e-8,
            std::to_string(checked) + " states from n_a = " + std::to_string(j.n_a()) + ", worst " + fmt("%.2e", worst)};
}

Outcome feller() {
    const auto model = build_model(ZeroFn{});
    SdeConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_max = 0.5;
    const auto run = run_replicas<int>(10000, derive_seed(kSeed, 8), threads(), [&](Rng& rng, std::size_t) {
        const auto p = simulate_height(1.0, model, cfg, rng);
        return p.absorbed && p.T <= 0.5 ? 1 : 0;
    });
    const auto hits = run.successes();
    double p = 0.0;
    for (int h : hits) p += h;
    p /= static_cast<double>(hits.size());
    return {hits.size() == 10000 && p >= 0.348 && p <= 0.388,
            fmt("P(T <= 0.5) = %.4f, exact %.4f", p, feller_extinction_cdf(1.0, 0.5))};
}

ExperimentConfig base_config(Family family) {
    ExperimentConfig cfg;
    cfg.model.family = family;
    cfg.seed = kSeed;
    cfg.threads = threads();
    return cfg;
}

std::string trend_text(const FunctionalSamples& f) {
    std::ostringstream os;
    os << f.name << " " << to_string(f.trend.verdict) << " [";
    for (std::size_t i = 0; i < f.trend.medians.size(); ++i) os << (i ? " " : "") << fmt("%.3g", f.trend.medians[i]);
    os << "]";
    return os.str();
}

Outcome diffusion_dichotomy() {
    bool pass = true;
    std::string detail;
    const std::vector<std::pair<Family, std::pair<TrendVerdict, TrendVerdict>>> cases{
        {Logistic{1.0, 1.0}, {TrendVerdict::PLATEAU, TrendVerdict::GROWING}},
        {PowerLog{2.5, 0.0}, {TrendVerdict::PLATEAU, TrendVerdict::PLATEAU}}};
    for (const auto& [family, expect] : cases) {
        auto cfg = base_config(family);
        cfg.x_list = {1, 10, 100, 1000};
        cfg.replicas = 2000;
        cfg.sde.dt = 1e-4;
        const auto c = run_diffusion(cfg, {Target::HEIGHT, Target::MASS});
        const auto& t = c.functionals.at(0);
        const auto& s = c.functionals.at(1);
        pass = pass && t.name == "T" && s.name == "S" && t.trend.verdict == expect.first &&
               s.trend.verdict == expect.second;
        detail += (detail.empty() ? "" : "; ") + cfg.model.describe() + ": " + trend_text(t) + ", " + trend_text(s);
    }
    return {pass, detail};
}

Outcome discrete_dichotomy() {
    bool pass = true;
    std::string detail;
    const std::vector<std::pair<Family, std::size_t>> cases{{Logistic{1.0, 1.0}, 1000}, {PowerLog{0.5, 0.0}, 400}};
    for (std::size_t k = 0; k < cases.size(); ++k) {
        auto cfg = base_config(cases[k].first);
        cfg.mode = Mode::DICHOTOMY;
        cfg.engine = Engine::DISCRETE;
        cfg.m_list = {10, 100, 1000, 10000};
        cfg.replicas = cases[k].second;
        cfg.out_dir = scratch("dichotomy" + std::to_string(k));
        std::ostringstream log;
        const auto out = run(cfg, log);
        pass = pass && out.exit_code == kExitOk;
        detail += (detail.empty() ? "" : "; ") + cfg.model.describe() + ": exit " + std::to_string(out.exit_code);
        for (const auto& c : out.report["comparisons"]) {
            const std::string status = c["status"];
            pass = pass && status == "AGREE";
            detail += " " + c["functional"].get<std::string>() + " " + status;
        }
    }
    return {pass, detail};
}

Outcome tail_signature() {
    const auto rates = bd_rates(build_model(Logistic{1.0, 1.0}), 1.0, 1.0);
    std::vector<TailRate> rates_m;
    std::string detail;
    std::uint64_t stream = 110;
    for (std::size_t m : {100, 1000, 10000}) {
        const auto run = run_replicas<double>(4000, derive_seed(kSeed, stream++), threads(),
                                              [&](Rng& rng, std::size_t) { return simulate_single(m, rates, rng).H; });
        const auto tr = tail_rate(run.successes());
        rates_m.push_back(tr);
    }
    bool pass = true;
    const std::vector<double> ms{100, 1000, 10000};
    for (std::size_t i = 0; i < rates_m.size(); ++i) {
        pass = pass && rates_m[i].c_hat > 0.0;
        detail += (i ? "; " : "") + fmt("m=%g: %.3f +- %.3f", ms[i], rates_m[i].c_hat, rates_m[i].std_err);
        for (std::size_t j = 0; j < i; ++j) {
            const double se = std::hypot(rates_m[i].std_err, rates_m[j].std_err);
            pass = pass && std::abs(rates_m[i].c_hat - rates_m[j].c_hat) <= 2.0 * se;
        }
    }
    return {pass, detail};
}

Outcome scaling_probe() {
    auto cfg = base_config(Logistic{1.0, 1.0});
    cfg.n_list = {20, 50, 100};
    cfg.scaling_x = 1.0;
    cfg.scaling_t = 0.5;
    cfg.replicas = 10000;
    cfg.sde.dt = 1e-4;
    const auto table = run_scaling(cfg);
    std::string detail = fmt("SDE %.4f;", table.sde.mean);
    for (const auto& r : table.rows) detail += fmt(" N=%g gap %.4f (ci %.4f)", r.N, r.gap, r.ci_halfwidth);
    detail += table.gaps_nonincreasing ? "; gaps non-increasing" : "; gaps not monotone";
    detail += table.last_within_ci ? ", last within CI" : ", last outside CI";
    return {table.gaps_nonincreasing && table.last_within_ci, detail};
}

std::size_t lemma_violations(const InteractionModel& model) {
    const double theta = model.theta();
    const auto s = rate_sums(model, 10001);
    std::size_t bad = 0;
    std::optional<double> theta1;
    try {
        theta1 = over_x(model).theta();
    } catch (const H1Violation&) {
    }
    for (std::size_t n = 1; n <= 10000; ++n) {
        const double f = model(static_cast<double>(n));
        const double nd = static_cast<double>(n);
        const double tol = 1e-9 * (1.0 + std::abs(f) + s->fminus(n));
        bool ok = std::abs(s->fminus(n) - s->fplus(n) + f) <= tol && s->fplus(n) <= theta * nd + tol &&
                  -f <= s->fminus(n) + tol && s->fminus(n) <= theta * nd - f + tol &&
                  s->fplus(n) >= s->fplus(n - 1) && s->fminus(n) >= s->fminus(n - 1);
        if (theta1)
            ok = ok && s->fplus(n) <= 2.0 * *theta1 * nd * nd + tol &&
                 s->fminus(n) <= 2.0 * *theta1 * nd * nd - f + tol;
        if (!ok) ++bad;
    }
    return bad;
}

InteractionModel random_piecewise(std::mt19937_64& gen, int trial) {
    std::uniform_real_distribution<double> slope(-3.0, 1.0), gap(0.5, 40.0);
    std::vector<Expression> pieces;
    std::vector<double> knots;
    double x0 = 0.0, y0 = 0.0;
    const int n_pieces = 2 + trial % 4;
    for (int i = 0; i < n_pieces; ++i) {
        const double s = i + 1 == n_pieces ? -1.0 - 2.0 * (slope(gen) + 3.0) / 4.0 : slope(gen);
        std::ostringstream os;
        os.precision(17);
        os << "(" << y0 << ") + (" << s << ")*(x - (" << x0 << "))";
        pieces.push_back(Expression::parse(os.str()));
        if (i + 1 < n_pieces) {
            const double x1 = x0 + gap(gen);
            y0 += s * (x1 - x0);
            x0 = x1;
            knots.push_back(x1);
        }
    }
    return build_model(Custom{std::make_shared<const PiecewiseExpression>(std::move(pieces), std::move(knots))});
}

Outcome property_suites() {
    std::vector<InteractionModel> builtins{build_model(Logistic{1.0, 1.0}), build_model(Logistic{3.0, 0.5}),
                                           build_model(Linear{-1.0}), build_model(Linear{2.0}),
                                           build_model(ZeroFn{})};
    for (double a : {0.5, 1.0, 1.5, 2.0, 2.5})
        for (double g : {0.0, 0.5, 1.0, 1.5}) builtins.push_back(build_model(PowerLog{a, g}));
    std::size_t lemma_bad = 0, models = 0;
    for (const auto& m : builtins) {
        lemma_bad += lemma_violations(m);
        ++models;
    }
    std::mt19937_64 gen(kSeed);
    for (int trial = 0; trial < 20; ++trial) {
        lemma_bad += lemma_violations(random_piecewise(gen, trial));
        ++models;
    }

    std::size_t tonelli_bad = 0, drifts = 0;
    for (const auto& model : builtins) {
        double a0 = 0.0;
        try {
            a0 = model.require_a0();
        } catch (const NoSignStabilization&) {
            continue;
        }
        const auto d = diffusion_drifts(model);
        for (const auto& [q, x0] : {std::pair{d.q_height, std::sqrt(a0)}, std::pair{d.q_mass, a0}}) {
            H3Diagnostics h;
            try {
                h = h3_check(q, x0);
            } catch (const H2Violation&) {
                continue;
            }
            ++drifts;
            if (as_h3(h3_tonelli(q).verdict) != h.numeric_verdict) ++tonelli_bad;
        }
    }

    std::size_t alpha_bad = 0;
    for (double alpha : {0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 3.0}) {
        const auto h = h3_check([alpha](double x) { return -std::pow(x, alpha); }, 1.0);
        if (h.verdict != (alpha > 1.0 ? H3Verdict::HOLDS : H3Verdict::FAILS)) ++alpha_bad;
    }
    return {lemma_bad == 0 && tonelli_bad == 0 && alpha_bad == 0 && drifts > 0,
            std::to_string(models) + " models with " + std::to_string(lemma_bad) + " rate-bound violations, " +
                std::to_string(tonelli_bad) + "/" + std::to_string(drifts) + " Tonelli mismatches, " +
                std::to_string(alpha_bad) + " alpha-threshold mismatches"};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "logistic example classification", 1.0, logistic_example},
        {2, "powerlog threshold grid", 5.0, powerlog_grid},
        {3, "pure-death mean height", 10.0, pure_death},
        {4, "planar coupling order", 30.0, coupling_order},
        {5, "planar vs single marginal law", 60.0, marginal_law},
        {6, "time-change identity", 10.0, time_change},
        {7, "J generator identity", 1.0, j_generator},
        {8, "Feller calibration", 60.0, feller},
        {9, "continuous dichotomy", 600.0, diffusion_dichotomy},
        {10, "discrete dichotomy", 600.0, discrete_dichotomy},
        {11, "exponential tail signature", 300.0, tail_signature},
        {12, "scaling probe", 600.0, scaling_probe},
        {13, "property suites", 60.0, property_suites},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("%s %2d %s: %s; %.2f s (limit %g s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : " over time");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
