#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace compforest {

using RealFn = std::function<double(double)>;

/// Three-valued outcome of a numeric convergence test for an improper
/// integral or a series.
enum class Convergence { CONVERGES, DIVERGES, INCONCLUSIVE };

std::string to_string(Convergence c);

/// Adaptive Gauss-Kronrod on [a, b] with at most 2^max_depth subintervals.
/// Throws QuadratureError on a non-finite result.
double integrate(const RealFn& g, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 15);

/// Thresholds of the last-doubling saturation test.
struct SaturationRule {
    double converge_rel = 1e-3;  // last rung adds less than this fraction: CONVERGES
    double diverge_rel = 0.05;   // last `window` rungs all add more: DIVERGES
    std::size_t window = 3;
    double stay_tol = 1e-3;      // increments non-decreasing up to this slack: DIVERGES
};

Convergence saturation_verdict(const std::vector<double>& increments, const SaturationRule& rule = {});

struct LadderRung {
    double upper = 0.0;
    double increment = 0.0;
    double cumulative = 0.0;
};

/// Partial integrals of a non-negative integrand over the cutoff ladder
/// M_k = lower * 2^k.
struct LadderTrace {
    double lower = 0.0;
    std::vector<LadderRung> rungs;
    Convergence verdict = Convergence::INCONCLUSIVE;
    /// Last rung's increment divided by the cumulative total.
    double last_relative = 0.0;
    std::string note;
};

struct LadderOptions {
    std::size_t rungs = 60;
    /// Stop once the CONVERGES condition has held for two consecutive rungs.
    bool early_stop = false;
    std::size_t min_rungs = 8;
    double rel_tol = 1e-9;
    /// Bisection depth per rung; keep it small for integrands that are
    /// themselves computed numerically and carry jitter.
    unsigned max_depth = 15;
    SaturationRule rule;
};

/// Integrates g over [lower, lower * 2^rungs] rung by rung and applies the
/// saturation rule. An infinite rung value is reported as DIVERGES.
LadderTrace ladder_integral(const RealFn& g, double lower, const LadderOptions& opts = {});

}  // namespace compforest
