#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compforest/interaction.hpp"
#include "compforest/quadrature.hpp"

namespace compforest {

/// Classification of sup over initial sizes of the height or the mass.
enum class Verdict { DIVERGES, FINITE_EXP_MOMENT, INCONCLUSIVE };
enum class EntranceVerdict { ENTRANCE, NOT_ENTRANCE, INCONCLUSIVE };
enum class H3Verdict { HOLDS, FAILS, INCONCLUSIVE };
enum class IntegralKind { HEIGHT, MASS };

std::string to_string(Verdict v);
std::string to_string(EntranceVerdict v);
std::string to_string(H3Verdict v);
std::string to_string(IntegralKind k);

/// Birth and death rates of the population in state n:
///   birth(n) = lambda n + F+(n),  death(n) = mu n + F-(n).
/// The time-changed variant divides both by n (the process run on the clock
/// int X dt), which turns the length of the forest into a height.
class BdRates {
public:
    BdRates(double lambda, double mu, std::shared_ptr<const RateSums> sums, bool time_changed = false);

    double birth(std::size_t n) const {
        const double r = lambda_ * static_cast<double>(n) + sums_->fplus(n);
        return time_changed_ ? r / static_cast<double>(n) : r;
    }
    double death(std::size_t n) const {
        const double r = mu_ * static_cast<double>(n) + sums_->fminus(n);
        return time_changed_ ? r / static_cast<double>(n) : r;
    }

    double lambda() const { return lambda_; }
    double mu() const { return mu_; }
    bool is_time_changed() const { return time_changed_; }
    const RateSums& sums() const { return *sums_; }
    const std::shared_ptr<const RateSums>& sums_ptr() const { return sums_; }

    BdRates time_changed() const { return BdRates(lambda_, mu_, sums_, true); }

private:
    double lambda_, mu_;
    std::shared_ptr<const RateSums> sums_;
    bool time_changed_;
};

/// lambda >= 0 (0 gives the pure-death chain), mu > 0.
BdRates bd_rates(const InteractionModel& model, double lambda, double mu);
BdRates bd_rates(std::shared_ptr<const RateSums> sums, double lambda, double mu);

struct SeriesOptions {
    std::size_t n_trunc = 16384;
    double saturated_below = 1e-3;
    double growing_above = 0.05;
};

/// Potential coefficients and the partial sums of
///   A = sum_n 1/pi_n,   S = sum_n (1/pi_n) sum_{k>n} pi_k / lambda_k,
/// with pi_1 = 1 and pi_n = lambda_1...lambda_n / (mu_2...mu_n) for n >= 2.
/// A and S are kept as logarithms because they overflow for competitive f.
struct SeriesDiagnostics {
    std::vector<double> log_pi;  // index n, entry 0 unused
    std::size_t n_trunc = 0;
    double log_A = 0.0, log_A_half = 0.0;
    double log_S = 0.0, log_S_half = 0.0;
    /// (X(N) - X(N/2)) / X(N): the share contributed by the last block.
    double saturation_A = 0.0, saturation_S = 0.0;
    /// log of the last inner term pi_N / lambda_N relative to the full inner tail from n = 2.
    double log_tail_remainder = 0.0;
    EntranceVerdict verdict = EntranceVerdict::INCONCLUSIVE;
};

/// Throws InvalidArgument for n_trunc < 10 or a vanishing birth rate.
SeriesDiagnostics series_criterion(const BdRates& rates, const SeriesOptions& opts = {});

/// J(m) = sum_{n=n_a}^{m-1} (1/pi_n) sum_{k>n} pi_k/lambda_k, the bounded
/// increasing solution of A J = -1 above n_a.
class JFunction {
public:
    std::size_t n_a() const { return n_a_; }
    std::size_t n_trunc() const { return n_trunc_; }
    /// Defined for n_a <= m <= n_trunc.
    double operator()(std::size_t m) const;
    /// lambda_n (J(n+1) - J(n)) + mu_n (J(n-1) - J(n)), for n_a < n < n_trunc.
    double generator(std::size_t n) const;
    double bound() const { return 1.0 / a_; }

private:
    friend JFunction j_function(const BdRates&, double, std::size_t);
    JFunction(const BdRates& rates) : rates_(rates) {}

    BdRates rates_;
    double a_ = 1.0;
    std::size_t n_a_ = 0, n_trunc_ = 0;
    std::vector<double> values_;  // values_[m - n_a]
};

/// Throws NoEntranceBoundary when the series criterion is not ENTRANCE.
JFunction j_function(const BdRates& rates, double a, std::size_t n_trunc);

struct IntegralResult {
    IntegralKind kind = IntegralKind::HEIGHT;
    Convergence verdict = Convergence::INCONCLUSIVE;
    /// Numeric saturation verdict; equals `verdict` for custom f.
    Convergence numeric_verdict = Convergence::INCONCLUSIVE;
    LadderTrace trace;
    std::string provenance;
};

/// Convergence of int_{a0}^inf dx/|f| (HEIGHT) or x dx/|f| (MASS).
/// Throws NoSignStabilization (no a0) or ZeroCrossing (f vanishes on the ladder).
IntegralResult integral_criterion(const InteractionModel& model, IntegralKind kind,
                                  const LadderOptions& opts = {});

/// Same heuristic for an arbitrary positive integrand over [lower, inf).
LadderTrace integral_to_infinity(const RealFn& integrand, double lower, const LadderOptions& opts = {});

/// Q(y) = 2 int_1^y q.
double kolmogorov_Q(const RealFn& q, double y);

struct BranchReport {
    Convergence inverse_integral = Convergence::INCONCLUSIVE;  // int_{x0}^inf 1/|q|
    double limsup_ratio = 0.0;   // estimate of limsup q'/q^2
    double liminf_ratio = 0.0;   // estimate of liminf q'/q^2
    double liminf_margin = 0.0;  // liminf_ratio + 2
    double q0 = 0.0;             // sampled sup of q beyond x0
    bool q_bounded_away = false;
    bool q_nonincreasing = false;
    bool branch1 = false, branch2 = false, branch3 = false;
};

struct H3Diagnostics {
    H3Verdict verdict = H3Verdict::INCONCLUSIVE;
    LadderTrace numeric;  // int_1^M e^{-Q(y)} int_y^inf e^{Q(z)} dz dy
    H3Verdict numeric_verdict = H3Verdict::INCONCLUSIVE;
    BranchReport branches;
    double x0 = 1.0;
    std::string provenance;
};

struct H3Options {
    LadderOptions outer{40, true, 8, 1e-6, 3, {}};
    std::size_t branch_rungs = 40;
    double fd_rel_step = 1e-4;
    double liminf_margin = 0.05;
};

/// Checks (H3) for the drifted Brownian motion dX = q(X) dt + dB killed at 0.
/// Throws H2Violation when q is not negative beyond x0 or blows up to +inf at 0+.
H3Diagnostics h3_check(const RealFn& q, double x0, const H3Options& opts = {});

/// The Tonelli-swapped form int_1^M e^{Q(y)} int_1^y e^{-Q(z)} dz dy.
LadderTrace h3_tonelli(const RealFn& q, const H3Options& opts = {});

/// log of int_y^inf e^{Q(z) - Q(y)} dz (upward) or int_1^y e^{Q(y) - Q(z)} dz
/// (downward). +inf when the upward integral does not settle.
double log_window_integral(const RealFn& q, double y, bool upward);

struct Drifts {
    RealFn q_height;  // (f(y^2) - 1) / (2y)
    RealFn q_mass;    // f(2u) / (4u)
};

Drifts diffusion_drifts(const InteractionModel& model);

struct ClassifyOptions {
    SeriesOptions series;
    LadderOptions integral;
    H3Options h3;
};

struct RouteReport {
    Verdict verdict = Verdict::INCONCLUSIVE;
    IntegralResult integral;
    std::optional<SeriesDiagnostics> series;
    std::optional<H3Diagnostics> h3;
    std::vector<std::string> notes;
    std::string provenance;
};

struct ClassificationReport {
    std::string model;
    double lambda = 1.0, mu = 1.0;
    double theta = 0.0, a0 = 0.0;
    RouteReport height, mass;
};

ClassificationReport classify(const InteractionModel& model, double lambda, double mu,
                              const ClassifyOptions& opts = {});

/// Closed-form verdict of the built-in catalog; empty for custom f.
std::optional<Convergence> closed_form_verdict(const Family& family, IntegralKind kind);

}  // namespace compforest
