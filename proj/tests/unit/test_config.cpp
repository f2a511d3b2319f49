#include <filesystem>
#include <fstream>
#include <sstream>

#include "compforest/config.hpp"
#include "compforest/errors.hpp"
#include "compforest/runner.hpp"
#include "doctest.h"

using namespace compforest;

namespace {

std::string temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("compforest_test_" + name);
    std::filesystem::remove_all(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t error_line(const std::string& text) {
    try {
        config_from_document(parse_config(text));
    } catch (const ConfigError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("config grammar") {
    const auto doc = parse_config(R"(# comment
mode = "discrete"   # trailing comment
seed = 42
lambda = 1.5e0

[discrete]
m_list = [10, 100, 1_000,]
coupled = false
[model]
family = "custom"
pieces = ["-x", "-x^2 + 2*x - 4"]
knots = [2]
)");
    CHECK(doc.sections.at("").at("seed").number("seed") == 42.0);
    CHECK(doc.sections.at("discrete").at("m_list").line == 7);
    const auto cfg = config_from_document(doc);
    CHECK(cfg.mode == Mode::DISCRETE);
    CHECK(*cfg.seed == 42);
    CHECK(cfg.lambda == 1.5);
    CHECK(cfg.m_list == std::vector<double>{10, 100, 1000});
    CHECK_FALSE(cfg.coupled);
    const auto model = cfg.model.build();
    CHECK(model(1.0) == doctest::Approx(-1.0));
    CHECK(model(3.0) == doctest::Approx(-9.0 + 6.0 - 4.0));
}

TEST_CASE("config errors carry the line") {
    CHECK(error_line("seed = 1\nmode = classify\n") == 2);
    CHECK(error_line("seed = 1\n\n[model]\nfamily = \"logistic\"\nalpha = 2\n") == 5);
    CHECK(error_line("seed = 1\n[nonsense]\n") == 2);
    CHECK(error_line("seed = 1\nseed = 2\n") == 2);
    CHECK(error_line("[sde]\nx_list = [1, 2\n") == 2);
    CHECK(error_line("[sde]\ndt = \"small\"\n") == 2);
    CHECK(error_line("[model]\nfamily = \"custom\"\nf = \"x +* 2\"\n") == 3);
    CHECK(error_line("[model]\nfamily = \"custom\"\npieces = [\"-x\", \"-x\"]\nknots = [-1]\n") == 3);
    CHECK(error_line("key without value\n") == 1);
    CHECK(error_line("name = \"open\n") == 1);
}

TEST_CASE("model spec strings") {
    const auto l = parse_model_spec("logistic:a=2,b=0.5");
    REQUIRE(std::holds_alternative<Logistic>(l.family));
    CHECK(std::get<Logistic>(l.family).a == 2.0);
    CHECK(std::get<Logistic>(l.family).b == 0.5);
    const auto p = parse_model_spec("powerlog:alpha=2.5,gamma=1,a0=3");
    CHECK(std::get<PowerLog>(p.family).alpha == 2.5);
    CHECK(*p.a0 == 3.0);
    CHECK(std::holds_alternative<ZeroFn>(parse_model_spec("zero").family));
    const auto c = parse_model_spec("custom:-x; 2; -x^2 + x");
    CHECK(c.build()(3.0) == doctest::Approx(-6.0));
    CHECK_THROWS_AS(parse_model_spec("cubic:a=1"), ConfigError);
    CHECK_THROWS_AS(parse_model_spec("logistic:c=1"), ConfigError);
    CHECK_THROWS_AS(parse_model_spec("logistic:a"), ConfigError);
    CHECK_THROWS_AS(parse_model_spec("custom:-x;two;-x"), ConfigError);
}

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    cfg.out_dir = temp_dir("validate");
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("seed"), ConfigError);
    cfg.seed = 1;
    CHECK_NOTHROW(validate(cfg));
    cfg.mode = Mode::DISCRETE;
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("m_list must not be empty"), ConfigError);
    cfg.m_list = {10, 5};
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("increasing"), ConfigError);
    cfg.m_list = {1.5};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.m_list = {5, 10};
    CHECK_NOTHROW(validate(cfg));
    cfg.mode = Mode::DICHOTOMY;
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("at least 3"), ConfigError);
    cfg.mode = Mode::DIFFUSION;
    cfg.x_list = {1.0};
    cfg.sde.dt = 0.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.sde.dt = 1e-3;
    cfg.mu = 0.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.mu = 1.0;
    cfg.out_dir = "/proc/compforest_cannot_exist";
    CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("bundled configs load") {
    for (const char* name : {"logistic.toml", "powerlog_grid.toml"}) {
        const auto cfg = config_from_document(load_config_file(std::string(CONFIG_DIR) + "/" + name));
        CHECK(cfg.seed.has_value());
    }
    const auto grid = config_from_document(load_config_file(std::string(CONFIG_DIR) + "/powerlog_grid.toml"));
    CHECK(grid.grid_alpha.size() * grid.grid_gamma.size() == 20);
}

TEST_CASE("agreement mapping") {
    CHECK(compare(Verdict::DIVERGES, TrendVerdict::GROWING) == Agreement::AGREE);
    CHECK(compare(Verdict::FINITE_EXP_MOMENT, TrendVerdict::PLATEAU) == Agreement::AGREE);
    CHECK(compare(Verdict::DIVERGES, TrendVerdict::PLATEAU) == Agreement::CONTRADICTION);
    CHECK(compare(Verdict::FINITE_EXP_MOMENT, TrendVerdict::GROWING) == Agreement::CONTRADICTION);
    CHECK(compare(Verdict::FINITE_EXP_MOMENT, TrendVerdict::INCONCLUSIVE) == Agreement::INCONCLUSIVE);
    for (auto t : {TrendVerdict::PLATEAU, TrendVerdict::GROWING, TrendVerdict::INCONCLUSIVE})
        CHECK(compare(Verdict::INCONCLUSIVE, t) == Agreement::UNTESTED);
}

TEST_CASE("runs are deterministic and plot data is well formed") {
    ExperimentConfig cfg;
    cfg.seed = 7;
    cfg.mode = Mode::DISCRETE;
    cfg.m_list = {1, 10, 100, 1000};
    cfg.replicas = 300;
    std::ostringstream log;

    const std::string dir = temp_dir("det1"), other = temp_dir("det2");
    cfg.out_dir = dir;
    cfg.threads = 1;
    CHECK(run(cfg, log).exit_code == kExitOk);
    cfg.out_dir = other;
    cfg.threads = 3;
    run(cfg, log);
    for (const char* f : {"/summary.json", "/samples.csv"}) CHECK(slurp(dir + f) == slurp(other + f));

    CHECK_THROWS_AS(emit_plotdata(temp_dir("empty")), Error);
    const auto files = emit_plotdata(dir);
    CHECK(files.size() == 2 + 2 * 4);
    const std::string trend = slurp(dir + "/trend_H.dat");
    CHECK(std::count(trend.begin(), trend.end(), '\n') == 4);
    std::ifstream surv(dir + "/survival_L_1000.dat");
    double t, s, prev_t = -1.0, prev_s = 2.0;
    std::size_t lines = 0;
    while (surv >> t >> s) {
        CHECK(t > prev_t);
        CHECK(s <= prev_s);
        prev_t = t;
        prev_s = s;
        ++lines;
    }
    CHECK(lines > 100);
    CHECK(prev_s == 0.0);
    const std::string before = slurp(dir + "/survival_H_10.dat");
    emit_plotdata(dir);
    CHECK(slurp(dir + "/survival_H_10.dat") == before);
}

TEST_CASE("classify mode writes a report") {
    ExperimentConfig cfg;
    cfg.seed = 1;
    cfg.out_dir = temp_dir("classify");
    cfg.write_trace = true;
    std::ostringstream log;
    const auto out = run(cfg, log);
    CHECK(out.exit_code == kExitOk);
    CHECK(out.report["height"]["verdict"] == "FINITE_EXP_MOMENT");
    CHECK(out.report["mass"]["verdict"] == "DIVERGES");
    CHECK(out.artifacts.size() == 2);

    cfg.model.family = ZeroFn{};
    CHECK_THROWS_AS(run(cfg, log), NoSignStabilization);
}

TEST_CASE("diffusion dichotomy agrees for the logistic model") {
    ExperimentConfig cfg;
    cfg.seed = 3;
    cfg.mode = Mode::DICHOTOMY;
    cfg.engine = Engine::DIFFUSION;
    cfg.x_list = {1, 10, 100};
    cfg.replicas = 200;
    cfg.out_dir = temp_dir("dich");
    std::ostringstream log;
    const auto out = run(cfg, log);
    CHECK(out.exit_code == kExitOk);
    CHECK(out.report["comparisons"][0]["status"] == "AGREE");
    CHECK(out.report["comparisons"][1]["status"] == "AGREE");
}
