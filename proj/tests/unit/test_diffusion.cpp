#include <algorithm>
#include <cmath>

#include "compforest/diffusion_sim.hpp"
#include "compforest/errors.hpp"
#include "doctest.h"

using namespace compforest;

namespace {

double fraction_absorbed_by(Target target, double x, double t, int n, double dt) {
    const auto model = build_model(ZeroFn{});
    SdeConfig cfg;
    cfg.dt = dt;
    cfg.t_max = t;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        Rng rng(77, i);
        DiffusionPath p;
        if (target == Target::HEIGHT) p = simulate_height(x, model, cfg, rng);
        else if (target == Target::MASS) p = simulate_mass(x, model, cfg, rng);
        else p = simulate_Z(x, model, cfg, rng);
        hits += p.absorbed && p.T <= t;
    }
    return static_cast<double>(hits) / n;
}

}  // namespace

TEST_CASE("closed-form oracles") {
    CHECK(feller_extinction_cdf(1.0, 0.5) == doctest::Approx(std::exp(-1.0)));
    CHECK(brownian_hitting_cdf(0.5, 1.0) == doctest::Approx(0.6170750774519738));
}

TEST_CASE("Feller extinction through Y and Z") {
    const double target = std::exp(-1.0);
    CHECK(std::abs(fraction_absorbed_by(Target::HEIGHT, 1.0, 0.5, 4000, 1e-3) - target) < 0.03);
    CHECK(std::abs(fraction_absorbed_by(Target::Z, 1.0, 0.5, 4000, 1e-3) - target) < 0.03);
}

TEST_CASE("Brownian hitting through U") {
    CHECK(std::abs(fraction_absorbed_by(Target::MASS, 1.0, 1.0, 4000, 1e-3) - 0.6170750774519738) < 0.03);
}

TEST_CASE("tiny initial mass dies at once") {
    const auto model = build_model(ZeroFn{});
    SdeConfig cfg;
    std::vector<double> ts;
    for (int i = 0; i < 101; ++i) {
        Rng rng(3, i);
        ts.push_back(simulate_height(1e-6, model, cfg, rng).T);
    }
    std::nth_element(ts.begin(), ts.begin() + 50, ts.end());
    CHECK(ts[50] < 0.01);
}

TEST_CASE("paths are non-negative and absorption is permanent") {
    const auto model = build_model(Logistic{1.0, 1.0});
    SdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.record = true;
    cfg.sample_times = {0.1, 0.2, 5.0, 50.0};
    Rng rng(12);
    const auto p = simulate_Z(2.0, model, cfg, rng);
    REQUIRE(p.absorbed);
    for (double v : p.values) CHECK(v >= 0.0);
    CHECK(p.values.back() == 0.0);
    CHECK(p.samples.size() == 4);
    CHECK(p.samples.back() == 0.0);
    CHECK(p.S > 0.0);
}

TEST_CASE("shared noise keeps the order") {
    const auto model = build_model(Logistic{1.0, 1.0});
    SdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.record = true;
    for (const auto& m : {model, build_model(PowerLog{2.5, 0.0})}) {
        for (Target target : {Target::HEIGHT, Target::MASS}) {
            for (int i = 0; i < 20; ++i) {
                Rng rng(21, i);
                const auto paths =
                    shared_noise_ensemble({0.5, 1.0, 10.0, 100.0, 1000.0, 1e4}, m, cfg, rng, target);
                CHECK(ordering_violations(paths) == 0);
                for (std::size_t k = 1; k < paths.size(); ++k) CHECK(paths[k].T >= paths[k - 1].T);
            }
        }
    }
    Rng rng(1);
    CHECK_THROWS_AS(shared_noise_ensemble({2.0, 1.0}, model, cfg, rng, Target::HEIGHT), InvalidArgument);

    // a single x reproduces the plain simulator
    SdeConfig plain;
    plain.dt = 1e-3;
    Rng a(5), b(5);
    const auto single = shared_noise_ensemble({3.0}, model, plain, a, Target::HEIGHT);
    CHECK(single[0].T == simulate_height(3.0, model, plain, b).T);
}

TEST_CASE("mean of Z is flat without interaction") {
    const auto model = build_model(ZeroFn{});
    SdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 1.0;
    cfg.sample_times = {0.25, 0.5, 1.0};
    const int n = 4000;
    std::vector<double> sum(3, 0.0), sum2(3, 0.0);
    for (int i = 0; i < n; ++i) {
        Rng rng(31, i);
        const auto p = simulate_Z(1.0, model, cfg, rng);
        for (int k = 0; k < 3; ++k) {
            sum[k] += p.samples[k];
            sum2[k] += p.samples[k] * p.samples[k];
        }
    }
    for (int k = 0; k < 3; ++k) {
        const double mean = sum[k] / n, se = std::sqrt((sum2[k] / n - mean * mean) / n);
        CHECK(std::abs(mean - 1.0) < 2.5 * se);
    }
}
