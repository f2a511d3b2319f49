#include "compforest/runner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "compforest/diffusion_sim.hpp"
#include "compforest/discrete_sim.hpp"
#include "compforest/errors.hpp"

namespace compforest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string level_label(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content, std::vector<std::string>& artifacts) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw Error("write failed for '" + path.string() + "'");
    artifacts.push_back(path.string());
}

json number(double v) { return std::isfinite(v) ? json(v) : json(std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf")); }

}  // namespace

json to_json(const LadderTrace& t) {
    json rungs = json::array();
    for (const auto& r : t.rungs) rungs.push_back({number(r.upper), number(r.increment), number(r.cumulative)});
    json j{{"lower", t.lower},
           {"verdict", to_string(t.verdict)},
           {"last_relative", number(t.last_relative)},
           {"rungs", rungs}};
    if (!t.note.empty()) j["note"] = t.note;
    return j;
}

json to_json(const SeriesDiagnostics& s) {
    return {{"n_trunc", s.n_trunc},
            {"log_A", number(s.log_A)},
            {"log_A_half", number(s.log_A_half)},
            {"log_S", number(s.log_S)},
            {"log_S_half", number(s.log_S_half)},
            {"saturation_A", number(s.saturation_A)},
            {"saturation_S", number(s.saturation_S)},
            {"log_tail_remainder", number(s.log_tail_remainder)},
            {"verdict", to_string(s.verdict)}};
}

json to_json(const H3Diagnostics& h) {
    const auto& b = h.branches;
    return {{"verdict", to_string(h.verdict)},
            {"numeric_verdict", to_string(h.numeric_verdict)},
            {"x0", h.x0},
            {"provenance", h.provenance},
            {"numeric", to_json(h.numeric)},
            {"branches",
             {{"inverse_integral", to_string(b.inverse_integral)},
              {"limsup_ratio", number(b.limsup_ratio)},
              {"liminf_ratio", number(b.liminf_ratio)},
              {"liminf_margin", number(b.liminf_margin)},
              {"q0", number(b.q0)},
              {"q_bounded_away", b.q_bounded_away},
              {"q_nonincreasing", b.q_nonincreasing},
              {"branch1", b.branch1},
              {"branch2", b.branch2},
              {"branch3", b.branch3}}}};
}

namespace {

json route_json(const RouteReport& r) {
    json j{{"verdict", to_string(r.verdict)},
           {"provenance", r.provenance},
           {"notes", r.notes},
           {"integral",
            {{"kind", to_string(r.integral.kind)},
             {"verdict", to_string(r.integral.verdict)},
             {"numeric_verdict", to_string(r.integral.numeric_verdict)},
             {"provenance", r.integral.provenance},
             {"trace", to_json(r.integral.trace)}}}};
    j["series"] = r.series ? to_json(*r.series) : json(nullptr);
    j["h3"] = r.h3 ? to_json(*r.h3) : json(nullptr);
    return j;
}

}  // namespace

json to_json(const ClassificationReport& r) {
    return {{"model", r.model},  {"lambda", r.lambda},         {"mu", r.mu},
            {"theta", r.theta},  {"a0", r.a0},                 {"height", route_json(r.height)},
            {"mass", route_json(r.mass)}};
}

// ---------------------------------------------------------------------------

namespace {

void finish_functional(FunctionalSamples& fs, std::size_t failed, const ExperimentConfig& cfg) {
    std::vector<double> medians;
    for (const auto& s : fs.samples) {
        fs.summaries.push_back(summarize(s, failed));
        medians.push_back(fs.summaries.back().median());
    }
    if (fs.levels.size() >= 3) fs.trend = trend(fs.levels, medians, {cfg.plateau_below, cfg.growing_above});
    else {
        fs.trend.levels = fs.levels;
        fs.trend.medians = medians;
    }
}

template <class Obs>
void collect(Campaign& c, const ReplicaRun<std::vector<Obs>>& run, std::size_t n_levels) {
    c.failed_replicas = run.errors.size();
    for (const auto& e : run.errors) c.errors.push_back("replica " + std::to_string(e.replica) + ": " + e.message);
    for (auto& f : c.functionals) f.samples.assign(n_levels, {});
    c.events.assign(n_levels, {});
    for (const auto& r : run.results) {
        if (!r) continue;
        for (std::size_t l = 0; l < n_levels; ++l) {
            const auto& obs = (*r)[l];
            for (std::size_t k = 0; k < c.functionals.size(); ++k)
                c.functionals[k].samples[l].push_back({obs.values[k], obs.censored});
            if constexpr (requires { obs.events; }) c.events[l].push_back(obs.events);
        }
    }
}

struct DiscreteObs {
    std::array<double, 2> values{};  // H, L
    bool censored = false;
    std::uint64_t events = 0;
};

struct DiffusionObs {
    std::vector<double> values;  // one per functional
    bool censored = false;
};

}  // namespace

Campaign run_discrete(const ExperimentConfig& cfg) {
    const InteractionModel model = cfg.model.build();
    std::vector<std::size_t> ms;
    for (double m : cfg.m_list) ms.push_back(static_cast<std::size_t>(m));
    const std::size_t M = ms.back();
    const BdRates rates = bd_rates(model, cfg.lambda, cfg.mu);
    rates.sums().reserve(M + 1);
    PlanarOptions popts;
    popts.sim.t_max = cfg.discrete_t_max;
    popts.sim.max_events = cfg.max_events;

    auto run = run_replicas<std::vector<DiscreteObs>>(
        cfg.replicas, *cfg.seed, cfg.threads, [&](Rng& rng, std::size_t) {
            std::vector<DiscreteObs> out;
            const auto push = [&](const Trajectory& p) {
                out.push_back({{p.H, p.L}, p.censored, p.events});
            };
            if (cfg.coupled) {
                const PlanarResult r = simulate_planar(M, rates, rng, ms, popts);
                if (r.order_violations) throw OrderingViolation("planar coupling lost its ordering", 0);
                for (const auto& p : r.paths) push(p);
            } else {
                for (std::size_t m : ms) push(simulate_single(m, rates, rng, popts.sim));
            }
            return out;
        });

    Campaign c;
    c.level_name = "m";
    c.functionals = {{"H", cfg.m_list, {}, {}, {}}, {"L", cfg.m_list, {}, {}, {}}};
    collect(c, run, ms.size());
    for (auto& f : c.functionals) finish_functional(f, c.failed_replicas, cfg);
    return c;
}

Campaign run_diffusion(const ExperimentConfig& cfg, const std::vector<Target>& targets) {
    const InteractionModel model = cfg.model.build();
    Campaign c;
    c.level_name = "x";
    bool want_T = false, want_S = false;
    for (Target t : targets) {
        want_T = want_T || t != Target::MASS;
        want_S = want_S || t != Target::HEIGHT;
    }
    if (want_T) c.functionals.push_back({"T", cfg.x_list, {}, {}, {}});
    if (want_S) c.functionals.push_back({"S", cfg.x_list, {}, {}, {}});

    auto run = run_replicas<std::vector<DiffusionObs>>(
        cfg.replicas, *cfg.seed, cfg.threads, [&](Rng& rng, std::size_t) {
            std::vector<DiffusionObs> out(cfg.x_list.size());
            for (Target t : targets) {
                const auto paths = shared_noise_ensemble(cfg.x_list, model, cfg.sde, rng, t);
                for (std::size_t l = 0; l < paths.size(); ++l) {
                    const auto& p = paths[l];
                    if (t != Target::MASS) out[l].values.push_back(p.T);
                    if (t != Target::HEIGHT) out[l].values.push_back(p.S);
                    out[l].censored = out[l].censored || p.censored;
                }
            }
            return out;
        });
    collect(c, run, cfg.x_list.size());
    for (auto& f : c.functionals) finish_functional(f, c.failed_replicas, cfg);
    return c;
}

std::string to_string(Agreement a) {
    switch (a) {
        case Agreement::AGREE: return "AGREE";
        case Agreement::CONTRADICTION: return "CONTRADICTION";
        case Agreement::UNTESTED: return "UNTESTED";
        case Agreement::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "?";
}

Agreement compare(Verdict classifier, TrendVerdict t) {
    if (classifier == Verdict::INCONCLUSIVE) return Agreement::UNTESTED;
    if (t == TrendVerdict::INCONCLUSIVE) return Agreement::INCONCLUSIVE;
    const TrendVerdict expected = classifier == Verdict::DIVERGES ? TrendVerdict::GROWING : TrendVerdict::PLATEAU;
    return t == expected ? Agreement::AGREE : Agreement::CONTRADICTION;
}

ScalingTable run_scaling(const ExperimentConfig& cfg) {
    const InteractionModel model = cfg.model.build();
    const double t = cfg.scaling_t, x = cfg.scaling_x;
    ScalingTable table;

    SdeConfig sde = cfg.sde;
    sde.sample_times = {t};
    sde.t_max = t + 2.0 * sde.dt;
    sde.record = false;
    auto sde_run = mc_run(cfg.replicas, derive_seed(*cfg.seed, 0), cfg.threads, [&](Rng& rng, std::size_t) {
        return Sample{simulate_Z(x, model, sde, rng).samples.at(0), false};
    });
    table.sde = sde_run.summary;

    for (std::size_t k = 0; k < cfg.n_list.size(); ++k) {
        const double N = cfg.n_list[k];
        const BdRates rates = scaled_rates(N, model);
        auto disc = mc_run(cfg.replicas, derive_seed(*cfg.seed, k + 1), cfg.threads, [&](Rng& rng, std::size_t) {
            return Sample{scaled_ensemble(N, x, rates, {t}, rng).at(0), false};
        });
        ScalingRow row;
        row.N = N;
        row.discrete = disc.summary;
        row.gap = std::abs(disc.summary.mean - table.sde.mean);
        row.ci_halfwidth =
            1.96 * std::sqrt(disc.summary.std_err * disc.summary.std_err + table.sde.std_err * table.sde.std_err);
        table.rows.push_back(row);
    }
    table.gaps_nonincreasing = true;
    for (std::size_t k = 1; k < table.rows.size(); ++k)
        if (table.rows[k].gap > table.rows[k - 1].gap) table.gaps_nonincreasing = false;
    table.last_within_ci = !table.rows.empty() && table.rows.back().gap <= table.rows.back().ci_halfwidth;
    return table;
}

// ---------------------------------------------------------------------------

namespace {

json summary_entry(const ExperimentConfig& cfg, const FunctionalSamples& f, std::size_t l, const std::string& lvl) {
    json j = to_json(f.summaries[l]);
    j["spec"] = cfg.model.describe();
    j["seed"] = *cfg.seed;
    j["functional"] = f.name;
    j[lvl] = f.levels[l];
    j["trend"] = f.levels.size() >= 3 ? json(to_string(f.trend.verdict)) : json(nullptr);
    return j;
}

json campaign_json(const ExperimentConfig& cfg, const Campaign& c) {
    json results = json::array();
    json trends = json::object();
    json names = json::array();
    for (const auto& f : c.functionals) {
        names.push_back(f.name);
        for (std::size_t l = 0; l < f.levels.size(); ++l) results.push_back(summary_entry(cfg, f, l, c.level_name));
        trends[f.name] = to_json(f.trend);
    }
    return {{"spec", cfg.model.describe()},
            {"seed", *cfg.seed},
            {"lambda", cfg.lambda},
            {"mu", cfg.mu},
            {"replicas", cfg.replicas},
            {"failed_replicas", c.failed_replicas},
            {"level_name", c.level_name},
            {"functionals", names},
            {"results", results},
            {"trends", trends}};
}

std::string campaign_csv(const Campaign& c, bool discrete, const std::vector<Target>& targets) {
    std::ostringstream os;
    const std::size_t n_levels = c.functionals.front().levels.size();
    const std::size_t n_rep = c.functionals.front().samples.front().size();
    if (discrete) {
        os << "replica,m,H,H_censored,L,events\n";
        for (std::size_t i = 0; i < n_rep; ++i)
            for (std::size_t l = 0; l < n_levels; ++l) {
                const auto& h = c.functionals[0].samples[l][i];
                os << i << ',' << level_label(c.functionals[0].levels[l]) << ',' << fmt(h.value) << ','
                   << (h.censored ? 1 : 0) << ',' << fmt(c.functionals[1].samples[l][i].value) << ','
                   << c.events[l][i] << '\n';
            }
        return os.str();
    }
    (void)targets;
    os << "replica,x,T,S,censored\n";
    const FunctionalSamples* T = nullptr;
    const FunctionalSamples* S = nullptr;
    for (const auto& f : c.functionals) (f.name == "T" ? T : S) = &f;
    for (std::size_t i = 0; i < n_rep; ++i)
        for (std::size_t l = 0; l < n_levels; ++l) {
            const Sample& first = (T ? T : S)->samples[l][i];
            os << i << ',' << level_label(c.functionals[0].levels[l]) << ','
               << (T ? fmt(T->samples[l][i].value) : "nan") << ',' << (S ? fmt(S->samples[l][i].value) : "nan")
               << ',' << (first.censored ? 1 : 0) << '\n';
        }
    return os.str();
}

}  // namespace

RunOutcome run(const ExperimentConfig& cfg, std::ostream& log) {
    validate(cfg);
    RunOutcome out;
    const fs::path dir(cfg.out_dir);
    const auto dump = [](const json& j) { return j.dump(2) + "\n"; };

    switch (cfg.mode) {
        case Mode::CLASSIFY: {
            if (!cfg.grid_alpha.empty()) {
                std::ostringstream csv;
                csv << "alpha,gamma,height,mass,closed_form_height,closed_form_mass\n";
                json cells = json::array();
                const auto expected = [](const Family& f, IntegralKind k) {
                    const auto c = closed_form_verdict(f, k);
                    if (!c) return std::string("INCONCLUSIVE");
                    return to_string(*c == Convergence::CONVERGES ? Verdict::FINITE_EXP_MOMENT : Verdict::DIVERGES);
                };
                for (double a : cfg.grid_alpha)
                    for (double g : cfg.grid_gamma) {
                        const Family fam = PowerLog{a, g};
                        const auto r = classify(build_model(fam), cfg.lambda, cfg.mu);
                        const std::string eh = expected(fam, IntegralKind::HEIGHT);
                        const std::string em = expected(fam, IntegralKind::MASS);
                        csv << level_label(a) << ',' << level_label(g) << ',' << to_string(r.height.verdict) << ','
                            << to_string(r.mass.verdict) << ',' << eh << ',' << em << '\n';
                        cells.push_back({{"alpha", a},
                                         {"gamma", g},
                                         {"height", to_string(r.height.verdict)},
                                         {"mass", to_string(r.mass.verdict)},
                                         {"closed_form_height", eh},
                                         {"closed_form_mass", em},
                                         {"report", to_json(r)}});
                        log << "alpha=" << a << " gamma=" << g << ": height " << to_string(r.height.verdict)
                            << ", mass " << to_string(r.mass.verdict) << "\n";
                    }
                out.report = {{"lambda", cfg.lambda}, {"mu", cfg.mu}, {"cells", cells}};
                write_file(dir / "classification_grid.json", dump(out.report), out.artifacts);
                write_file(dir / "classification_grid.csv", csv.str(), out.artifacts);
                return out;
            }
            const auto report = classify(cfg.model.build(), cfg.lambda, cfg.mu);
            out.report = to_json(report);
            write_file(dir / "classification.json", dump(out.report), out.artifacts);
            if (cfg.write_trace) {
                std::ostringstream os;
                os << "route,source,rung,upper,increment,cumulative\n";
                const auto rows = [&](const std::string& route, const std::string& src, const LadderTrace& t) {
                    for (std::size_t k = 0; k < t.rungs.size(); ++k)
                        os << route << ',' << src << ',' << k << ',' << fmt(t.rungs[k].upper) << ','
                           << fmt(t.rungs[k].increment) << ',' << fmt(t.rungs[k].cumulative) << '\n';
                };
                for (const auto* r : {&report.height, &report.mass}) {
                    const std::string route = r == &report.height ? "height" : "mass";
                    rows(route, "integral", r->integral.trace);
                    if (r->h3) rows(route, "h3", r->h3->numeric);
                }
                write_file(dir / "classification_trace.csv", os.str(), out.artifacts);
            }
            log << "height: " << to_string(report.height.verdict) << "\nmass: " << to_string(report.mass.verdict)
                << "\n";
            return out;
        }
        case Mode::DISCRETE:
        case Mode::DIFFUSION:
        case Mode::DICHOTOMY: {
            const bool discrete = cfg.mode == Mode::DISCRETE ||
                                  (cfg.mode == Mode::DICHOTOMY && cfg.engine == Engine::DISCRETE);
            const std::vector<Target> targets =
                cfg.mode == Mode::DIFFUSION ? std::vector<Target>{cfg.target}
                                            : std::vector<Target>{Target::HEIGHT, Target::MASS};
            const Campaign c = discrete ? run_discrete(cfg) : run_diffusion(cfg, targets);
            for (const auto& e : c.errors) log << "warning: " << e << "\n";
            out.report = campaign_json(cfg, c);
            write_file(dir / "summary.json", dump(out.report), out.artifacts);
            if (cfg.write_samples) write_file(dir / "samples.csv", campaign_csv(c, discrete, targets), out.artifacts);
            for (const auto& f : c.functionals)
                log << f.name << " medians:" << [&] {
                    std::ostringstream os;
                    for (double m : f.trend.medians) os << ' ' << m;
                    return os.str();
                }() << (f.levels.size() >= 3 ? " -> " + to_string(f.trend.verdict) : std::string()) << "\n";
            if (cfg.mode != Mode::DICHOTOMY) return out;

            const auto report = classify(cfg.model.build(), cfg.lambda, cfg.mu);
            json items = json::array();
            bool contradiction = false;
            for (std::size_t k = 0; k < c.functionals.size(); ++k) {
                const auto& f = c.functionals[k];
                DichotomyItem it;
                it.route = k == 0 ? "height" : "mass";
                it.functional = f.name;
                it.classifier = k == 0 ? report.height.verdict : report.mass.verdict;
                it.trend = f.trend.verdict;
                it.status = compare(it.classifier, it.trend);
                contradiction = contradiction || it.status == Agreement::CONTRADICTION;
                items.push_back({{"route", it.route},
                                 {"functional", it.functional},
                                 {"classifier", to_string(it.classifier)},
                                 {"trend", to_json(f.trend)},
                                 {"status", to_string(it.status)}});
                log << it.route << ": classifier " << to_string(it.classifier) << ", trend "
                    << to_string(it.trend) << " -> " << to_string(it.status) << "\n";
            }
            out.exit_code = contradiction ? kExitContradiction : kExitOk;
            json d{{"spec", cfg.model.describe()},
                   {"seed", *cfg.seed},
                   {"engine", to_string(discrete ? Engine::DISCRETE : Engine::DIFFUSION)},
                   {"comparisons", items},
                   {"exit_code", out.exit_code}};
            write_file(dir / "dichotomy.json", dump(d), out.artifacts);
            out.report = d;
            return out;
        }
        case Mode::SCALING: {
            const ScalingTable t = run_scaling(cfg);
            std::ostringstream csv;
            csv << "N,mean_ZN,std_err_ZN,mean_Z,std_err_Z,gap,ci_halfwidth\n";
            json rows = json::array();
            for (const auto& r : t.rows) {
                csv << level_label(r.N) << ',' << fmt(r.discrete.mean) << ',' << fmt(r.discrete.std_err) << ','
                    << fmt(t.sde.mean) << ',' << fmt(t.sde.std_err) << ',' << fmt(r.gap) << ','
                    << fmt(r.ci_halfwidth) << '\n';
                rows.push_back({{"N", r.N}, {"discrete", to_json(r.discrete)}, {"gap", r.gap},
                                {"ci_halfwidth", r.ci_halfwidth}});
                log << "N=" << r.N << " mean=" << r.discrete.mean << " gap=" << r.gap << " (95% "
                    << r.ci_halfwidth << ")\n";
            }
            out.report = {{"spec", cfg.model.describe()},
                          {"seed", *cfg.seed},
                          {"x", cfg.scaling_x},
                          {"t", cfg.scaling_t},
                          {"sde", to_json(t.sde)},
                          {"rows", rows},
                          {"gaps_nonincreasing", t.gaps_nonincreasing},
                          {"last_within_ci", t.last_within_ci}};
            write_file(dir / "scaling.csv", csv.str(), out.artifacts);
            write_file(dir / "scaling.json", dump(out.report), out.artifacts);
            return out;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    return out;
}

}  // namespace

std::vector<std::string> emit_plotdata(const std::string& out_dir) {
    const fs::path dir(out_dir);
    std::ifstream sf(dir / "summary.json");
    if (!sf) throw Error("no summary.json in '" + out_dir + "'; run a discrete, diffusion or dichotomy mode first");
    json summary;
    try {
        sf >> summary;
    } catch (const json::exception& e) {
        throw Error("cannot read summary.json: " + std::string(e.what()));
    }
    std::vector<std::string> written;
    const auto names = summary.at("functionals").get<std::vector<std::string>>();
    for (const auto& name : names) {
        const auto& tr = summary.at("trends").at(name);
        const auto levels = tr.at("levels").get<std::vector<double>>();
        const auto medians = tr.at("medians").get<std::vector<double>>();
        std::ostringstream os;
        for (std::size_t i = 0; i < levels.size(); ++i) os << fmt(levels[i]) << ' ' << fmt(medians[i]) << '\n';
        write_file(dir / ("trend_" + name + ".dat"), os.str(), written);
    }

    std::ifstream cf(dir / "samples.csv");
    if (!cf) throw Error("no samples.csv in '" + out_dir + "'; enable output.samples and rerun");
    std::string line;
    std::getline(cf, line);
    const auto header = split(line, ',');
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    const std::string level_name = summary.at("level_name").get<std::string>();
    if (!col.count(level_name)) throw Error("samples.csv has no '" + level_name + "' column");
    // functional -> level label -> values
    std::map<std::string, std::map<std::string, std::vector<double>>> data;
    std::vector<std::string> level_order;
    while (std::getline(cf, line)) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size()) throw Error("malformed row in samples.csv: " + line);
        const std::string& lvl = cells[col[level_name]];
        if (std::find(level_order.begin(), level_order.end(), lvl) == level_order.end()) level_order.push_back(lvl);
        for (const auto& name : names) {
            if (!col.count(name)) continue;
            data[name][lvl].push_back(std::stod(cells[col[name]]));
        }
    }
    for (const auto& name : names) {
        for (const auto& lvl : level_order) {
            auto v = data[name][lvl];
            v.erase(std::remove_if(v.begin(), v.end(), [](double d) { return std::isnan(d); }), v.end());
            if (v.empty()) continue;
            std::sort(v.begin(), v.end());
            std::ostringstream os;
            const double n = static_cast<double>(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
                os << fmt(v[i]) << ' ' << fmt(static_cast<double>(v.size() - i - 1) / n) << '\n';
            }
            write_file(dir / ("survival_" + name + "_" + lvl + ".dat"), os.str(), written);
        }
    }
    return written;
}

}  // namespace compforest
