#include "compforest/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "compforest/errors.hpp"

namespace compforest {

std::string to_string(Convergence c) {
    switch (c) {
        case Convergence::CONVERGES: return "CONVERGES";
        case Convergence::DIVERGES: return "DIVERGES";
        case Convergence::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "?";
}

double integrate(const RealFn& g, double a, double b, double rel_tol, unsigned max_depth) {
    if (a == b) return 0.0;
    double err = 0.0;
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, max_depth, rel_tol, &err);
    if (!std::isfinite(v)) throw QuadratureError("quadrature produced a non-finite value");
    return v;
}

Convergence saturation_verdict(const std::vector<double>& inc, const SaturationRule& rule) {
    if (inc.empty()) return Convergence::INCONCLUSIVE;
    double total = 0.0;
    std::vector<double> cumulative;
    cumulative.reserve(inc.size());
    for (double v : inc) {
        if (!std::isfinite(v)) return Convergence::DIVERGES;
        total += v;
        cumulative.push_back(total);
    }
    if (!std::isfinite(total)) return Convergence::DIVERGES;
    if (total <= 0.0) return Convergence::CONVERGES;
    const std::size_t n = inc.size();
    if (inc.back() / total < rule.converge_rel) return Convergence::CONVERGES;
    if (n >= rule.window + 1) {
        bool all_large = true, non_decreasing = true;
        for (std::size_t i = n - rule.window; i < n; ++i) {
            if (inc[i] / cumulative[i] <= rule.diverge_rel) all_large = false;
            if (inc[i] < inc[i - 1] * (1.0 - rule.stay_tol)) non_decreasing = false;
        }
        if (all_large || non_decreasing) return Convergence::DIVERGES;
    }
    return Convergence::INCONCLUSIVE;
}

LadderTrace ladder_integral(const RealFn& g, double lower, const LadderOptions& opts) {
    if (!(lower > 0.0)) throw InvalidArgument("ladder lower limit must be positive");
    LadderTrace trace;
    trace.lower = lower;
    std::vector<double> inc;
    double lo = lower, total = 0.0;
    std::size_t saturated_streak = 0;
    for (std::size_t k = 1; k <= opts.rungs; ++k) {
        const double hi = lo * 2.0;
        double v;
        try {
            v = integrate(g, lo, hi, opts.rel_tol, opts.max_depth);
        } catch (const QuadratureError&) {
            v = std::numeric_limits<double>::infinity();
        }
        inc.push_back(v);
        total += v;
        trace.rungs.push_back({hi, v, total});
        if (!std::isfinite(v)) {
            trace.note = "rung integral is infinite";
            break;
        }
        if (opts.early_stop && k >= opts.min_rungs) {
            saturated_streak = (total > 0.0 && v / total < opts.rule.converge_rel) ? saturated_streak + 1 : 0;
            if (saturated_streak >= 2) break;
        }
        lo = hi;
    }
    trace.verdict = saturation_verdict(inc, opts.rule);
    trace.last_relative = total > 0.0 && std::isfinite(total) ? inc.back() / total : 0.0;
    return trace;
}

}  // namespace compforest
