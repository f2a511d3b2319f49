#include <cmath>
#include <random>
#include <sstream>

#include "compforest/errors.hpp"
#include "compforest/interaction.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace compforest;

TEST_CASE("expression parser") {
    CHECK(Expression::parse("x - x^2")(3.0) == doctest::Approx(-6.0));
    CHECK(Expression::parse("-x^2")(3.0) == doctest::Approx(-9.0));
    CHECK(Expression::parse("2^3^2")(0.0) == doctest::Approx(512.0));
    CHECK(Expression::parse("-x*log(x)")(std::exp(1.0)) == doctest::Approx(-std::exp(1.0)));
    CHECK(Expression::parse("max(x, 2) + min(1, x)")(0.5) == doctest::Approx(2.5));
    CHECK(Expression::parse("pow(x, 0.5) + sqrt(x) + abs(-x)")(4.0) == doctest::Approx(8.0));
    CHECK_THROWS_AS(Expression::parse("x +"), ConfigError);
    CHECK_THROWS_AS(Expression::parse("foo(x)"), ConfigError);
    CHECK_THROWS_AS(Expression::parse("(x"), ConfigError);
}

TEST_CASE("piecewise expression") {
    PiecewiseExpression p({Expression::parse("x"), Expression::parse("2 - x")}, {1.0});
    CHECK(p(0.5) == doctest::Approx(0.5));
    CHECK(p(1.5) == doctest::Approx(0.5));
    CHECK_THROWS_AS(PiecewiseExpression({Expression::parse("x")}, {1.0}), ConfigError);
    CHECK_THROWS_AS(PiecewiseExpression({Expression::parse("x"), Expression::parse("x"), Expression::parse("x")},
                                        {2.0, 1.0}),
                    ConfigError);
}

TEST_CASE("built-in models") {
    const auto logistic = build_model(Logistic{1.0, 1.0});
    CHECK(logistic(2.0) == doctest::Approx(-2.0));
    CHECK(logistic.theta() == doctest::Approx(1.0));
    CHECK(logistic.require_a0() == doctest::Approx(1.0));

    const auto power = build_model(PowerLog{1.0, 1.0});
    CHECK(power.require_a0() == doctest::Approx(2.0));
    CHECK(power(10.0) == doctest::Approx(-10.0 * std::log(10.0)));
    CHECK(power(0.0) == 0.0);

    const auto zero = build_model(ZeroFn{});
    CHECK(zero.theta() == 0.0);
    CHECK_FALSE(zero.a0().has_value());
    CHECK_THROWS_AS(zero.require_a0(), NoSignStabilization);
}

TEST_CASE("custom model validation") {
    const auto m = testing::custom_model("x - x^2");
    CHECK(m.theta() >= 1.0);
    CHECK(m.theta() <= 1.1);
    CHECK(m.require_a0() > 1.0);
    CHECK(m.require_a0() < 1.01);

    CHECK_THROWS_AS(build_model(testing::custom("1 + x")), InvalidArgument);
    CHECK_THROWS_AS(build_model(testing::custom("x^2"), 1.0), H1Violation);
    CHECK_THROWS_AS(build_model(testing::custom("0*x")), NoSignStabilization);
}

TEST_CASE("rate sums examples") {
    auto neg = rate_sums(build_model(Linear{-1.0}), 16);
    CHECK(neg->fplus(5) == 0.0);
    CHECK(neg->fminus(5) == doctest::Approx(5.0));

    auto pos = rate_sums(build_model(Linear{1.0}), 16);
    CHECK(pos->fplus(7) == doctest::Approx(7.0));
    CHECK(pos->fminus(7) == 0.0);

    auto logi = rate_sums(build_model(Logistic{1.0, 1.0}), 4);
    // increments 0, -2, -4
    CHECK(logi->fplus(3) == 0.0);
    CHECK(logi->fminus(3) == doctest::Approx(6.0));
    // lazy extension past n_max
    CHECK(logi->fminus(100) == doctest::Approx(100.0 * 100.0 - 100.0));
    CHECK(logi->size() > 100);

    auto sq = rate_sums_over_x(testing::custom_model("-x^2"), 8);
    CHECK(sq->fplus(4) == 0.0);
    CHECK(sq->fminus(4) == doctest::Approx(4.0));

    auto lx = rate_sums_over_x(build_model(Logistic{1.0, 1.0}), 8);
    CHECK(lx->fminus(3) == doctest::Approx(2.0));

    auto ix = rate_sums_over_x(build_model(Linear{1.0}), 8);
    CHECK(ix->fplus(5) == doctest::Approx(1.0));
    CHECK(ix->fminus(5) == 0.0);
}

TEST_CASE("rate sums select") {
    auto s = rate_sums(testing::custom_model("x - x^2"), 64);
    // F-(k): 0, 2, 6, 12, ...; select_minus(u, k) = smallest l with F-(l) > u
    CHECK(s->select_minus(0.0, 10) == 2);
    CHECK(s->select_minus(1.99, 10) == 2);
    CHECK(s->select_minus(2.0, 10) == 3);
    CHECK(s->select_minus(11.5, 10) == 4);
}

namespace {

void check_lemmas(const InteractionModel& model, const std::string& name) {
    INFO(name);
    const double theta = model.theta();
    auto s = rate_sums(model, 10001);
    for (std::size_t n = 1; n <= 10000; ++n) {
        const double f = model(static_cast<double>(n));
        const double tol = 1e-9 * (1.0 + std::abs(f) + s->fminus(n));
        REQUIRE(std::abs(s->fminus(n) - s->fplus(n) + f) <= tol);
        REQUIRE(s->fplus(n) <= theta * n + tol);
        REQUIRE(-f <= s->fminus(n) + tol);
        REQUIRE(s->fminus(n) <= theta * n - f + tol);
        REQUIRE(s->fplus(n) >= s->fplus(n - 1));
        REQUIRE(s->fminus(n) >= s->fminus(n - 1));
    }
    double theta1 = 0.0;
    try {
        theta1 = over_x(model).theta();
    } catch (const H1Violation&) {
        return;  // f/x outside (H1): the quadratic bounds do not apply
    }
    for (std::size_t n = 1; n <= 10000; ++n) {
        const double f = model(static_cast<double>(n));
        const double nn = static_cast<double>(n) * n;
        const double tol = 1e-9 * (1.0 + std::abs(f) + s->fminus(n));
        REQUIRE(s->fplus(n) <= 2.0 * theta1 * nn + tol);
        REQUIRE(s->fminus(n) <= 2.0 * theta1 * nn - f + tol);
    }
}

}  // namespace

TEST_CASE("rate sum bounds on built-ins") {
    check_lemmas(build_model(Logistic{1.0, 1.0}), "logistic 1 1");
    check_lemmas(build_model(Logistic{3.0, 0.5}), "logistic 3 0.5");
    check_lemmas(build_model(Linear{-1.0}), "linear -1");
    check_lemmas(build_model(Linear{2.0}), "linear 2");
    check_lemmas(build_model(ZeroFn{}), "zero");
    for (double a : {0.5, 1.0, 1.5, 2.0, 2.5})
        for (double g : {0.0, 0.5, 1.0, 1.5}) check_lemmas(build_model(PowerLog{a, g}), "powerlog");
}

TEST_CASE("rate sum bounds on random piecewise-linear models") {
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> slope(-3.0, 1.0), gap(0.5, 40.0);
    for (int trial = 0; trial < 20; ++trial) {
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
        Custom c{std::make_shared<const PiecewiseExpression>(std::move(pieces), std::move(knots))};
        check_lemmas(build_model(c), "random piecewise #" + std::to_string(trial));
    }
}
