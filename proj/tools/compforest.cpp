#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "compforest/config.hpp"
#include "compforest/errors.hpp"
#include "compforest/runner.hpp"

using namespace compforest;

namespace {

struct Overrides {
    std::optional<std::string> model;
    std::optional<double> theta, a0, lambda, mu;
    std::optional<std::size_t> replicas;
    std::vector<double> m_list, x_list, n_list;
    std::optional<double> t_max, dt, eps_abs, x, t;
    std::optional<std::string> target, engine, out;
    bool uncoupled = false;
    bool trace = false;
};

void model_options(CLI::App* sub, Overrides& o) {
    sub->add_option("--model", o.model, "model spec, e.g. logistic:a=1,b=1 or custom:-x^2");
    sub->add_option("--theta", o.theta, "(H1) constant, estimated when omitted");
    sub->add_option("--a0", o.a0, "sign threshold, detected when omitted");
    sub->add_option("--lambda", o.lambda, "per-individual birth rate");
    sub->add_option("--mu", o.mu, "per-individual death rate");
}

void replica_option(CLI::App* sub, Overrides& o) {
    sub->add_option("--replicas", o.replicas, "Monte Carlo replicas")->check(CLI::PositiveNumber);
}

void sde_options(CLI::App* sub, Overrides& o) {
    sub->add_option("--dt", o.dt, "Euler step");
    sub->add_option("--eps-abs", o.eps_abs, "absorption floor");
}

void apply(const Overrides& o, ExperimentConfig& cfg) {
    if (o.model) {
        const ModelSpec spec = parse_model_spec(*o.model);
        cfg.model.family = spec.family;
        cfg.model.theta = spec.theta;
        cfg.model.a0 = spec.a0;
    }
    if (o.theta) cfg.model.theta = o.theta;
    if (o.a0) cfg.model.a0 = o.a0;
    if (o.lambda) cfg.lambda = *o.lambda;
    if (o.mu) cfg.mu = *o.mu;
    if (o.replicas) cfg.replicas = *o.replicas;
    if (!o.m_list.empty()) cfg.m_list = o.m_list;
    if (!o.x_list.empty()) cfg.x_list = o.x_list;
    if (!o.n_list.empty()) cfg.n_list = o.n_list;
    if (o.dt) cfg.sde.dt = *o.dt;
    if (o.eps_abs) cfg.sde.eps_abs = *o.eps_abs;
    if (o.x) cfg.scaling_x = *o.x;
    if (o.t) cfg.scaling_t = *o.t;
    if (o.target) {
        try {
            cfg.target = parse_target(*o.target);
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
    if (o.engine) {
        if (*o.engine == "discrete") cfg.engine = Engine::DISCRETE;
        else if (*o.engine == "diffusion") cfg.engine = Engine::DIFFUSION;
        else throw ConfigError("--engine must be discrete or diffusion");
    }
    if (o.uncoupled) cfg.coupled = false;
    if (o.trace) cfg.write_trace = true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interacting birth-death forests: classification and simulation"};
    app.require_subcommand(1);
    std::optional<std::string> config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    app.add_option("--config", config_path, "experiment config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out-dir", out_dir, "artifact directory");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.fallthrough();

    Overrides o;
    std::optional<double> m, xval;

    auto* classify = app.add_subcommand("classify", "height and mass verdicts as JSON");
    model_options(classify, o);
    classify->add_flag("--trace", o.trace, "also write the partial-integral ladders as CSV");

    auto* discrete = app.add_subcommand("simulate-discrete", "H and L samples of the birth-death chain");
    model_options(discrete, o);
    replica_option(discrete, o);
    discrete->add_option("--m", m, "single initial size");
    discrete->add_option("--m-list", o.m_list, "initial sizes")->delimiter(',');
    discrete->add_option("--t-max", o.t_max, "censoring horizon");
    discrete->add_option("--out", o.out, "copy of the samples CSV");
    discrete->add_flag("--uncoupled", o.uncoupled, "independent chains instead of the planar coupling");

    auto* diffusion = app.add_subcommand("simulate-diffusion", "T and S samples of the diffusions");
    model_options(diffusion, o);
    replica_option(diffusion, o);
    sde_options(diffusion, o);
    diffusion->add_option("--x", xval, "single initial mass");
    diffusion->add_option("--x-list", o.x_list, "initial masses")->delimiter(',');
    diffusion->add_option("--target", o.target, "height, mass or z");
    diffusion->add_option("--t-max", o.t_max, "censoring horizon");
    diffusion->add_option("--out", o.out, "copy of the samples CSV");

    auto* dichotomy = app.add_subcommand("dichotomy", "compare simulated trends with the classifier");
    model_options(dichotomy, o);
    replica_option(dichotomy, o);
    sde_options(dichotomy, o);
    dichotomy->add_option("--engine", o.engine, "discrete or diffusion");
    dichotomy->add_option("--m-list", o.m_list, "initial sizes")->delimiter(',');
    dichotomy->add_option("--x-list", o.x_list, "initial masses")->delimiter(',');
    dichotomy->add_option("--t-max", o.t_max, "censoring horizon");

    auto* scaling = app.add_subcommand("scaling", "distance between the rescaled chain and the diffusion");
    model_options(scaling, o);
    replica_option(scaling, o);
    sde_options(scaling, o);
    scaling->add_option("--n-list", o.n_list, "scaling parameters N")->delimiter(',');
    scaling->add_option("--x", o.x, "initial mass");
    scaling->add_option("--t", o.t, "observation time");

    auto* plot = app.add_subcommand("emit-plotdata", "plot files from a previous run in --out-dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitFailure;
    }

    try {
        ExperimentConfig cfg;
        if (config_path) cfg = config_from_document(load_config_file(*config_path));
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out_dir = *out_dir;
        if (threads) cfg.threads = *threads;

        if (plot->parsed()) {
            for (const auto& f : emit_plotdata(cfg.out_dir)) std::cout << f << "\n";
            return kExitOk;
        }
        if (m) o.m_list = {*m};
        if (xval) o.x_list = {*xval};
        apply(o, cfg);
        if (classify->parsed()) {
            cfg.mode = Mode::CLASSIFY;
        } else if (discrete->parsed()) {
            cfg.mode = Mode::DISCRETE;
            if (o.t_max) cfg.discrete_t_max = *o.t_max;
        } else if (diffusion->parsed()) {
            cfg.mode = Mode::DIFFUSION;
            if (o.t_max) cfg.sde.t_max = *o.t_max;
        } else if (dichotomy->parsed()) {
            cfg.mode = Mode::DICHOTOMY;
            if (o.t_max) (cfg.engine == Engine::DISCRETE ? cfg.discrete_t_max : cfg.sde.t_max) = *o.t_max;
        } else {
            cfg.mode = Mode::SCALING;
        }
        if (o.out) cfg.write_samples = true;

        const RunOutcome outcome = run(cfg, std::cerr);
        if (o.out) {
            std::filesystem::copy_file(std::filesystem::path(cfg.out_dir) / "samples.csv", *o.out,
                                       std::filesystem::copy_options::overwrite_existing);
            std::cerr << "samples: " << *o.out << "\n";
        }
        for (const auto& a : outcome.artifacts) std::cout << a << "\n";
        return outcome.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return kExitFailure;
}
