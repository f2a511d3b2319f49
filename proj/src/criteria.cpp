#include "compforest/criteria.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <array>
#include <cmath>
#include <numbers>
#include <limits>
#include <sstream>

#include "compforest/errors.hpp"

namespace compforest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow.
double log_add(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct LogSums {
    double log_A;
    double log_S;
    double log_tail_first;  // log sum_{k=2}^{L} pi_k / lambda_k
};

// Partial sums of A and S truncated at level L (outer and inner sums alike).
LogSums partial_sums(const std::vector<double>& log_pi, const std::vector<double>& log_birth, std::size_t L) {
    LogSums out{-kInf, -kInf, -kInf};
    for (std::size_t n = 1; n <= L; ++n) out.log_A = log_add(out.log_A, -log_pi[n]);
    // tail(n) = sum_{k=n}^{L} pi_k / lambda_k, built backward.
    double tail = -kInf;
    for (std::size_t n = L; n >= 2; --n) {
        tail = log_add(tail, log_pi[n] - log_birth[n]);
        // tail now equals tail(n); it multiplies 1/pi_{n-1}.
        out.log_S = log_add(out.log_S, tail - log_pi[n - 1]);
    }
    out.log_tail_first = tail;
    return out;
}

Convergence as_convergence(EntranceVerdict v) {
    switch (v) {
        case EntranceVerdict::ENTRANCE: return Convergence::CONVERGES;
        case EntranceVerdict::NOT_ENTRANCE: return Convergence::DIVERGES;
        default: return Convergence::INCONCLUSIVE;
    }
}

Convergence as_convergence(H3Verdict v) {
    switch (v) {
        case H3Verdict::HOLDS: return Convergence::CONVERGES;
        case H3Verdict::FAILS: return Convergence::DIVERGES;
        default: return Convergence::INCONCLUSIVE;
    }
}

Verdict as_verdict(Convergence c) {
    switch (c) {
        case Convergence::CONVERGES: return Verdict::FINITE_EXP_MOMENT;
        case Convergence::DIVERGES: return Verdict::DIVERGES;
        default: return Verdict::INCONCLUSIVE;
    }
}

double central_difference(const RealFn& q, double x, double rel_step) {
    const double h = rel_step * (1.0 + std::abs(x));
    return (q(x + h) - q(x - h)) / (2.0 * h);
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::DIVERGES: return "DIVERGES";
        case Verdict::FINITE_EXP_MOMENT: return "FINITE_EXP_MOMENT";
        case Verdict::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "?";
}

std::string to_string(EntranceVerdict v) {
    switch (v) {
        case EntranceVerdict::ENTRANCE: return "ENTRANCE";
        case EntranceVerdict::NOT_ENTRANCE: return "NOT_ENTRANCE";
        case EntranceVerdict::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "?";
}

std::string to_string(H3Verdict v) {
    switch (v) {
        case H3Verdict::HOLDS: return "HOLDS";
        case H3Verdict::FAILS: return "FAILS";
        case H3Verdict::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "?";
}

std::string to_string(IntegralKind k) { return k == IntegralKind::HEIGHT ? "HEIGHT" : "MASS"; }

BdRates::BdRates(double lambda, double mu, std::shared_ptr<const RateSums> sums, bool time_changed)
    : lambda_(lambda), mu_(mu), sums_(std::move(sums)), time_changed_(time_changed) {
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
    if (!(mu > 0.0)) throw InvalidArgument("mu must be positive");
    if (!sums_) throw InvalidArgument("missing rate sums");
}

BdRates bd_rates(const InteractionModel& model, double lambda, double mu) {
    return BdRates(lambda, mu, rate_sums(model, 1024));
}

BdRates bd_rates(std::shared_ptr<const RateSums> sums, double lambda, double mu) {
    return BdRates(lambda, mu, std::move(sums));
}

// ---------------------------------------------------------------------------
// Birth-death series

SeriesDiagnostics series_criterion(const BdRates& rates, const SeriesOptions& opts) {
    const std::size_t N = opts.n_trunc;
    if (N < 10) throw InvalidArgument("series truncation must be at least 10");
    rates.sums().reserve(N + 2);

    std::vector<double> log_birth(N + 1), log_death(N + 1);
    for (std::size_t n = 1; n <= N; ++n) {
        const double b = rates.birth(n), d = rates.death(n);
        if (!(b > 0.0)) throw InvalidArgument("series criterion needs positive birth rates");
        log_birth[n] = std::log(b);
        log_death[n] = std::log(d);
    }

    SeriesDiagnostics out;
    out.n_trunc = N;
    out.log_pi.assign(N + 1, 0.0);
    out.log_pi[1] = 0.0;
    out.log_pi[2] = log_birth[1] + log_birth[2] - log_death[2];
    for (std::size_t n = 3; n <= N; ++n) out.log_pi[n] = out.log_pi[n - 1] + log_birth[n] - log_death[n];

    const LogSums full = partial_sums(out.log_pi, log_birth, N);
    const LogSums half = partial_sums(out.log_pi, log_birth, N / 2);
    out.log_A = full.log_A;
    out.log_A_half = half.log_A;
    out.log_S = full.log_S;
    out.log_S_half = half.log_S;
    out.saturation_A = std::max(0.0, -std::expm1(half.log_A - full.log_A));
    out.saturation_S = std::max(0.0, -std::expm1(half.log_S - full.log_S));
    out.log_tail_remainder = (out.log_pi[N] - log_birth[N]) - full.log_tail_first;

    const bool a_growing = out.saturation_A > opts.growing_above;
    const bool s_saturated = out.saturation_S < opts.saturated_below;
    const bool s_growing = out.saturation_S > opts.growing_above;
    if (s_growing) out.verdict = EntranceVerdict::NOT_ENTRANCE;
    else if (a_growing && s_saturated) out.verdict = EntranceVerdict::ENTRANCE;
    else out.verdict = EntranceVerdict::INCONCLUSIVE;
    return out;
}

// ---------------------------------------------------------------------------
// J function

double JFunction::operator()(std::size_t m) const {
    if (m < n_a_ || m > n_trunc_) throw InvalidArgument("J evaluated outside its index range");
    return values_[m - n_a_];
}

double JFunction::generator(std::size_t n) const {
    if (n <= n_a_ || n >= n_trunc_) throw InvalidArgument("generator evaluated outside the valid range");
    const double j = (*this)(n);
    return rates_.birth(n) * ((*this)(n + 1) - j) + rates_.death(n) * ((*this)(n - 1) - j);
}

JFunction j_function(const BdRates& rates, double a, std::size_t n_trunc) {
    if (!(a > 0.0)) throw InvalidArgument("a must be positive");
    SeriesOptions check;
    check.n_trunc = std::max(n_trunc, check.n_trunc);
    if (series_criterion(rates, check).verdict != EntranceVerdict::ENTRANCE)
        throw NoEntranceBoundary("the inner tail sums do not saturate: infinity is not an entrance boundary");

    SeriesOptions local;
    local.n_trunc = n_trunc;
    const SeriesDiagnostics diag = series_criterion(rates, local);
    const std::size_t N = n_trunc;
    const auto& log_pi = diag.log_pi;

    // w[n] = (1/pi_n) sum_{k=n+1}^{N} pi_k / lambda_k, for 1 <= n < N.
    std::vector<double> w(N + 1, 0.0);
    double tail = -kInf;
    for (std::size_t n = N; n >= 2; --n) {
        tail = log_add(tail, log_pi[n] - std::log(rates.birth(n)));
        w[n - 1] = std::exp(tail - log_pi[n - 1]);
    }

    // n_a: smallest n >= 2 whose remaining sum is at most 1/a.
    std::vector<double> suffix(N + 1, 0.0);
    for (std::size_t n = N - 1; n >= 1; --n) suffix[n] = suffix[n + 1] + w[n];
    std::size_t n_a = 0;
    for (std::size_t n = 2; n < N; ++n) {
        if (suffix[n] <= 1.0 / a) {
            n_a = n;
            break;
        }
    }
    if (n_a == 0 || n_a + 2 >= N)
        throw NoEntranceBoundary("no index n_a within the truncation has tail sum below 1/a");

    JFunction J(rates);
    J.a_ = a;
    J.n_a_ = n_a;
    J.n_trunc_ = N;
    J.values_.assign(N - n_a + 1, 0.0);
    for (std::size_t m = n_a + 1; m <= N; ++m) J.values_[m - n_a] = J.values_[m - 1 - n_a] + w[m - 1];
    return J;
}

// ---------------------------------------------------------------------------
// Integral criteria

std::optional<Convergence> closed_form_verdict(const Family& family, IntegralKind kind) {
    const bool height = kind == IntegralKind::HEIGHT;
    return std::visit(
        overloaded{
            [&](const Logistic& p) -> std::optional<Convergence> {
                if (p.b == 0.0 && p.a == 0.0) return std::nullopt;
                if (height && p.b > 0.0) return Convergence::CONVERGES;
                return Convergence::DIVERGES;
            },
            [&](const PowerLog& p) -> std::optional<Convergence> {
                const double edge = height ? 1.0 : 2.0;
                const bool finite = p.alpha > edge || (p.alpha == edge && p.gamma > 1.0);
                return finite ? Convergence::CONVERGES : Convergence::DIVERGES;
            },
            [&](const Linear& p) -> std::optional<Convergence> {
                if (p.a == 0.0) return std::nullopt;
                return Convergence::DIVERGES;
            },
            [&](const ZeroFn&) -> std::optional<Convergence> { return std::nullopt; },
            [&](const Custom&) -> std::optional<Convergence> { return std::nullopt; },
        },
        family);
}

LadderTrace integral_to_infinity(const RealFn& integrand, double lower, const LadderOptions& opts) {
    return ladder_integral(integrand, lower, opts);
}

IntegralResult integral_criterion(const InteractionModel& model, IntegralKind kind, const LadderOptions& opts) {
    const double a0 = model.require_a0();
    const double lower = std::max(2.0 * a0, 1.0);
    const double upper = lower * std::ldexp(1.0, static_cast<int>(opts.rungs));

    // f must keep one strict sign on (a0, upper].
    const std::vector<double> probe = geometric_grid(a0 * (1.0 + 1e-9), upper, 16 * opts.rungs + 64, false);
    const double f_first = model(probe.front());
    for (double x : probe) {
        const double v = model(x);
        if (v == 0.0 || (v > 0.0) != (f_first > 0.0)) {
            std::ostringstream os;
            os << model.describe() << " vanishes or changes sign at x=" << x << " beyond a0=" << a0;
            throw ZeroCrossing(os.str(), x);
        }
    }

    const bool height = kind == IntegralKind::HEIGHT;
    IntegralResult r;
    r.kind = kind;
    r.trace = ladder_integral(
        [&model, height](double x) { return (height ? 1.0 : x) / std::abs(model(x)); }, lower, opts);
    r.numeric_verdict = r.trace.verdict;
    if (auto closed = closed_form_verdict(model.family(), kind)) {
        r.verdict = *closed;
        r.provenance = "closed-form table for " + family_name(model.family());
    } else {
        r.verdict = r.numeric_verdict;
        r.provenance = "numeric cutoff ladder";
    }
    return r;
}

// ---------------------------------------------------------------------------
// Kolmogorov diffusion: (H2), (H3)

double kolmogorov_Q(const RealFn& q, double y) {
    if (!(y > 0.0)) throw InvalidArgument("Q is defined for y > 0");
    return 2.0 * integrate(q, 1.0, y, 1e-10);
}

namespace {

// Antiderivative of a Chebyshev interpolant of g on [a, b], zero at a.
class ChebAntiderivative {
public:
    static constexpr int kNodes = 12;

    template <class G>
    ChebAntiderivative(const G& g, double a, double b) : a_(a), b_(b) {
        std::array<double, kNodes> v{};
        for (int j = 0; j < kNodes; ++j) {
            const double t = std::cos(std::numbers::pi * (j + 0.5) / kNodes);
            v[j] = g(0.5 * (a + b) + 0.5 * (b - a) * t);
        }
        std::array<double, kNodes + 2> c{};
        for (int k = 0; k < kNodes; ++k) {
            double sum = 0.0;
            for (int j = 0; j < kNodes; ++j) sum += v[j] * std::cos(std::numbers::pi * k * (j + 0.5) / kNodes);
            c[k] = 2.0 * sum / kNodes;
        }
        c[0] *= 0.5;
        // F' = g on [-1, 1]: C_k = (c_{k-1} - c_{k+1}) / (2k), with c_0 doubled in the k = 1 term.
        const double half = 0.5 * (b - a);
        for (int k = 1; k <= kNodes; ++k) {
            const double prev = k == 1 ? 2.0 * c[0] : c[k - 1];
            C_[k] = half * (prev - c[k + 1]) / (2.0 * k);
        }
        C_[0] = 0.0;
        C_[0] = -eval_t(-1.0);
    }

    double operator()(double s) const { return eval_t((2.0 * s - a_ - b_) / (b_ - a_)); }

private:
    double eval_t(double t) const {
        double b1 = 0.0, b2 = 0.0;
        for (int k = kNodes; k >= 1; --k) {
            const double b0 = 2.0 * t * b1 - b2 + C_[k];
            b2 = b1;
            b1 = b0;
        }
        return t * b1 - b2 + C_[0];
    }

    double a_, b_;
    std::array<double, kNodes + 1> C_{};
};

}  // namespace

double log_window_integral(const RealFn& q, double y, bool upward) {
    using Outer = boost::math::quadrature::gauss<double, 10>;
    constexpr double kDrop = 40.0;
    // Work in the offset s = |z - y| so that steps far below the spacing of
    // doubles near y still make progress.
    const double dir = upward ? 1.0 : -1.0;
    const double s_end = upward ? 1e12 * std::max(1.0, y) : y - 1.0;
    if (!(s_end > 0.0)) return -kInf;
    auto p = [&](double s) { return q(y + dir * s); };

    double s0 = 0.0;
    double log_w = 0.0;  // exponent at the current segment start
    double log_total = -kInf;
    double h = 1.0 / (1.0 + 2.0 * std::abs(p(0.0)));
    for (int seg = 0; seg < 20000; ++seg) {
        const double s1 = std::min(s0 + h, s_end);
        const ChebAntiderivative P(p, s0, s1);
        const double seg_integral = Outer::integrate([&](double s) { return std::exp(2.0 * P(s)); }, s0, s1);
        const double dq = 2.0 * P(s1);
        if (seg_integral > 0.0) log_total = log_add(log_total, log_w + std::log(seg_integral));
        log_w += dq;
        s0 = s1;
        if (!std::isfinite(log_total)) return kInf;
        if (s0 >= s_end) return upward ? kInf : log_total;
        const double qs = p(s0);
        if (log_w < log_total - kDrop && qs < 0.0) return log_total;
        h = std::min(2.0 * h, 4.0 / (std::abs(qs) + 1e-300));
    }
    return upward ? kInf : log_total;
}

H3Diagnostics h3_check(const RealFn& q, double x0, const H3Options& opts) {
    if (!(x0 > 0.0)) throw InvalidArgument("x0 must be positive");
    H3Diagnostics d;
    d.x0 = x0;
    const double lower = std::max(x0, 1.0);
    const std::size_t K = opts.branch_rungs;
    const double upper = lower * std::ldexp(1.0, static_cast<int>(K));

    // (H2)
    const std::vector<double> grid = geometric_grid(x0, upper, 40 * K, false);
    std::vector<double> qs(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        qs[i] = q(grid[i]);
        if (!(qs[i] < 0.0)) {
            std::ostringstream os;
            os << "(H2) fails: q(" << grid[i] << ") = " << qs[i] << " is not negative beyond x0=" << x0;
            throw H2Violation(os.str());
        }
    }
    for (int k = 1; k <= 12; ++k) {
        const double v = q(std::pow(10.0, -k));
        if (v > 1e8 || std::isnan(v)) throw H2Violation("(H2) fails: q is unbounded above near 0");
    }

    // Sufficient conditions on q and q'/q^2.
    BranchReport& br = d.branches;
    LadderOptions inv;
    inv.rungs = K;
    br.inverse_integral = ladder_integral([&q](double x) { return 1.0 / std::abs(q(x)); }, lower, inv).verdict;

    br.limsup_ratio = -kInf;
    br.liminf_ratio = kInf;
    for (std::size_t k = K / 2; k <= K; ++k) {
        const double x = lower * std::ldexp(1.0, static_cast<int>(k));
        const double qx = q(x);
        const double r = central_difference(q, x, opts.fd_rel_step) / (qx * qx);
        br.limsup_ratio = std::max(br.limsup_ratio, r);
        br.liminf_ratio = std::min(br.liminf_ratio, r);
    }
    br.liminf_margin = br.liminf_ratio + 2.0;

    const std::size_t mid = grid.size() / 2;
    const double lower_half_max = *std::max_element(qs.begin(), qs.begin() + static_cast<long>(mid));
    const double upper_half_max = *std::max_element(qs.begin() + static_cast<long>(mid), qs.end());
    br.q0 = std::max(lower_half_max, upper_half_max);
    br.q_bounded_away = br.q0 < 0.0 && upper_half_max <= lower_half_max;

    br.q_nonincreasing = true;
    for (std::size_t i = 0; i < grid.size(); i += 4) {
        const double d1 = central_difference(q, grid[i], opts.fd_rel_step);
        if (d1 > 1e-9 * std::abs(qs[i])) {
            br.q_nonincreasing = false;
            break;
        }
    }

    br.branch1 = br.inverse_integral == Convergence::DIVERGES && std::isfinite(br.limsup_ratio) &&
                 br.limsup_ratio < 1e6;
    br.branch2 = br.q_bounded_away && br.inverse_integral == Convergence::CONVERGES &&
                 br.liminf_margin > opts.liminf_margin;
    br.branch3 = br.inverse_integral == Convergence::CONVERGES && br.q_nonincreasing;

    // Direct evaluation of the double integral.
    d.numeric = ladder_integral(
        [&q](double y) { return std::exp(log_window_integral(q, y, true)); }, 1.0, opts.outer);
    switch (d.numeric.verdict) {
        case Convergence::CONVERGES: d.numeric_verdict = H3Verdict::HOLDS; break;
        case Convergence::DIVERGES: d.numeric_verdict = H3Verdict::FAILS; break;
        default: d.numeric_verdict = H3Verdict::INCONCLUSIVE;
    }

    const bool holds = br.branch2 || br.branch3;
    if (br.branch1 && !holds) {
        d.verdict = H3Verdict::FAILS;
        d.provenance = "sufficient condition: int 1/q = -inf and limsup q'/q^2 < inf";
    } else if (holds && !br.branch1) {
        d.verdict = H3Verdict::HOLDS;
        d.provenance = br.branch3 ? "sufficient condition: int 1/q > -inf and q' <= 0"
                                  : "sufficient condition: q <= q0 < 0, int 1/q > -inf, liminf q'/q^2 > -2";
    } else {
        d.verdict = d.numeric_verdict;
        d.provenance = "numeric double integral on a cutoff ladder";
    }
    return d;
}

LadderTrace h3_tonelli(const RealFn& q, const H3Options& opts) {
    return ladder_integral([&q](double y) { return std::exp(log_window_integral(q, y, false)); }, 1.0,
                           opts.outer);
}

Drifts diffusion_drifts(const InteractionModel& model) {
    Drifts d;
    d.q_height = [model](double y) { return (model(y * y) - 1.0) / (2.0 * y); };
    d.q_mass = [model](double u) { return model(2.0 * u) / (4.0 * u); };
    return d;
}

// ---------------------------------------------------------------------------
// Combined classification

namespace {

void corroborate(RouteReport& route, const std::string& name, Convergence c) {
    if (c == Convergence::INCONCLUSIVE) {
        route.notes.push_back(name + ": inconclusive");
        return;
    }
    const Verdict v = as_verdict(c);
    if (route.verdict != Verdict::INCONCLUSIVE && v != route.verdict) {
        route.notes.push_back(name + " disagrees (" + to_string(v) + " vs " + to_string(route.verdict) +
                              "); verdict downgraded");
        route.verdict = Verdict::INCONCLUSIVE;
        route.provenance += "; downgraded on disagreement with " + name;
    } else {
        route.notes.push_back(name + ": " + to_string(v));
    }
}

RouteReport classify_route(const InteractionModel& model, IntegralKind kind, const BdRates& rates,
                           const RealFn& drift, double x0, const ClassifyOptions& opts) {
    RouteReport route;
    route.integral = integral_criterion(model, kind, opts.integral);
    route.verdict = as_verdict(route.integral.verdict);
    route.provenance = "integral criterion (" + route.integral.provenance + ")";

    if (route.integral.numeric_verdict != route.integral.verdict)
        corroborate(route, "numeric integral", route.integral.numeric_verdict);

    route.series = series_criterion(rates, opts.series);
    corroborate(route, "birth-death series", as_convergence(route.series->verdict));

    try {
        route.h3 = h3_check(drift, x0, opts.h3);
        corroborate(route, "diffusion (H3)", as_convergence(route.h3->verdict));
    } catch (const H2Violation& e) {
        route.notes.push_back(std::string("diffusion (H3) not applicable: ") + e.what());
    }
    return route;
}

}  // namespace

ClassificationReport classify(const InteractionModel& model, double lambda, double mu, const ClassifyOptions& opts) {
    if (!(lambda > 0.0)) throw InvalidArgument("classification needs lambda > 0");
    ClassificationReport rep;
    rep.model = model.describe();
    rep.lambda = lambda;
    rep.mu = mu;
    rep.theta = model.theta();
    rep.a0 = model.require_a0();

    const BdRates rates = bd_rates(rate_sums(model, opts.series.n_trunc + 2), lambda, mu);
    const Drifts drifts = diffusion_drifts(model);

    rep.height = classify_route(model, IntegralKind::HEIGHT, rates, drifts.q_height, std::sqrt(rep.a0), opts);

    bool mass_ok = true;
    std::string mass_note;
    try {
        (void)over_x(model);
    } catch (const H1Violation& e) {
        mass_ok = false;
        mass_note = std::string("f(x)/x fails (H1): ") + e.what();
    }
    rep.mass = classify_route(model, IntegralKind::MASS, rates.time_changed(), drifts.q_mass, rep.a0, opts);
    if (!mass_ok) {
        rep.mass.verdict = Verdict::INCONCLUSIVE;
        rep.mass.notes.push_back(mass_note);
        rep.mass.provenance += "; hypothesis on f/x not met";
    }
    return rep;
}

}  // namespace compforest
