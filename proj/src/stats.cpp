#include "compforest/stats.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace compforest {

double quantile_sorted(const std::vector<double>& v, double p) {
    if (v.empty()) throw TooFewSamples("quantile of an empty sample");
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

McSummary summarize(const std::vector<Sample>& samples, std::size_t failed) {
    McSummary s;
    s.n = samples.size();
    s.failed = failed;
    if (s.n == 0) return s;
    std::vector<double> values;
    values.reserve(s.n);
    std::size_t censored = 0;
    double sum = 0.0;
    for (const auto& x : samples) {
        values.push_back(x.value);
        censored += x.censored;
        sum += x.value;
    }
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    if (s.n > 1) s.std_err = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
    std::sort(values.begin(), values.end());
    for (std::size_t i = 0; i < kSummaryLevels.size(); ++i) s.quantiles[i] = quantile_sorted(values, kSummaryLevels[i]);
    s.censored_fraction = static_cast<double>(censored) / static_cast<double>(s.n);

    if (s.censored_fraction >= 0.5) {
        s.tail_note = "not estimated: half or more of the replicas are censored";
        return s;
    }
    std::vector<double> uncensored;
    std::optional<double> level;
    for (const auto& x : samples) {
        if (x.censored) level = level ? std::min(*level, x.value) : x.value;
        uncensored.push_back(x.value);
    }
    try {
        s.tail_rate = tail_rate(uncensored, level);
    } catch (const InsufficientTail& e) {
        s.tail_note = e.what();
    }
    return s;
}

// ---------------------------------------------------------------------------

double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double t = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == t) ++i;
        while (j < b.size() && b[j] == t) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double kolmogorov_survival(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 0.2) return 1.0;  // 1 - Q(x) < 1e-12 here
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 20 || b.size() < 20) throw TooFewSamples("KS test needs at least 20 samples on each side");
    KsResult r;
    r.distance = ks_distance(a, b);
    const double ne = static_cast<double>(a.size()) * b.size() / static_cast<double>(a.size() + b.size());
    const double sq = std::sqrt(ne);
    r.p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * r.distance);
    return r;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kGridPoints = 200;
constexpr std::size_t kLastCount = 5;

// Minus the OLS slope of the log empirical survival on t, sampled on an even
// grid from `start` up to the point where only kLastCount samples remain
// (or the censoring level). Returns the number of samples inside the window.
std::optional<double> survival_slope(const std::vector<double>& sorted, double start, std::optional<double> censor,
                                     std::size_t min_points, std::size_t* used) {
    const std::size_t n = sorted.size();
    const auto first = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), start) - sorted.begin());
    double end = n > kLastCount ? sorted[n - kLastCount] : sorted.back();
    if (censor) end = std::min(end, *censor);
    const auto last = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), end) - sorted.begin());
    const std::size_t k = last > first ? last - first : 0;
    if (used) *used = k;
    if (k < min_points || !(end > start)) return std::nullopt;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double nd = static_cast<double>(n);
    for (std::size_t g = 0; g < kGridPoints; ++g) {
        const double t = std::min(end, start + (end - start) * static_cast<double>(g) / (kGridPoints - 1));
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        const double y = std::log((nd - static_cast<double>(below)) / nd);
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
    }
    const double kd = static_cast<double>(kGridPoints);
    const double den = sxx - sx * sx / kd;
    if (!(den > 0.0)) return std::nullopt;
    return -(sxy - sx * sy / kd) / den;
}

}  // namespace

TailRate tail_rate(const std::vector<double>& samples, std::optional<double> censor_level, const TailOptions& opts) {
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty()) throw InsufficientTail("no samples");
    const double start = quantile_sorted(sorted, opts.window_quantile);
    std::size_t used = 0;
    const auto c = survival_slope(sorted, start, censor_level, opts.min_points, &used);
    if (!c) {
        std::ostringstream os;
        os << "tail regression needs at least " << opts.min_points << " samples above the "
           << opts.window_quantile << " quantile, found " << used;
        throw InsufficientTail(os.str());
    }
    TailRate r;
    r.c_hat = *c;
    r.points = used;
    // Bootstrap the whole estimator, window included.
    Rng rng(opts.bootstrap_seed);
    std::vector<double> est, resample(sorted.size());
    for (std::size_t b = 0; b < opts.bootstrap; ++b) {
        for (auto& v : resample) v = sorted[rng.next_u64() % sorted.size()];
        std::sort(resample.begin(), resample.end());
        const auto cb = survival_slope(resample, quantile_sorted(resample, opts.window_quantile), censor_level, 2,
                                       nullptr);
        if (cb) est.push_back(*cb);
    }
    if (est.size() > 1) {
        const double m = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
        double ss = 0.0;
        for (double v : est) ss += (v - m) * (v - m);
        r.std_err = std::sqrt(ss / static_cast<double>(est.size() - 1));
    }
    return r;
}

// ---------------------------------------------------------------------------

std::string to_string(TrendVerdict v) {
    switch (v) {
        case TrendVerdict::PLATEAU: return "PLATEAU";
        case TrendVerdict::GROWING: return "GROWING";
        case TrendVerdict::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "?";
}

TrendReport trend(const std::vector<double>& levels, const std::vector<double>& medians, const TrendOptions& opts) {
    if (levels.size() != medians.size()) throw InvalidArgument("one median per level is required");
    if (levels.size() < 3) throw InvalidArgument("a trend needs at least 3 levels");
    TrendReport r;
    r.levels = levels;
    r.medians = medians;
    const double prev = medians[medians.size() - 2], last = medians.back();
    r.last_relative_increment = prev > 0.0 ? (last - prev) / prev : (last > 0.0 ? INFINITY : 0.0);
    if (r.last_relative_increment < opts.plateau_below) r.verdict = TrendVerdict::PLATEAU;
    else if (r.last_relative_increment > opts.growing_above) r.verdict = TrendVerdict::GROWING;
    else r.verdict = TrendVerdict::INCONCLUSIVE;
    return r;
}

DominanceReport dominance_check(const std::vector<double>& lo, const std::vector<double>& hi, bool coupled,
                                double alpha) {
    DominanceReport r;
    r.coupled = coupled;
    if (coupled) {
        if (lo.size() != hi.size()) throw InvalidArgument("coupled dominance needs equal replica counts");
        r.pairs = lo.size();
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (hi[i] < lo[i]) {
                std::ostringstream os;
                os << "replica " << i << ": " << hi[i] << " < " << lo[i];
                throw OrderingViolation(os.str(), i);
            }
        }
        return r;
    }
    if (lo.empty() || hi.empty()) throw TooFewSamples("dominance check needs samples on both sides");
    std::vector<double> a = lo, b = hi;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double t = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == t) ++i;
        while (j < b.size() && b[j] == t) ++j;
        r.d_plus = std::max(r.d_plus, static_cast<double>(j) / nb - static_cast<double>(i) / na);
    }
    r.pairs = std::min(a.size(), b.size());
    const double ne = na * nb / (na + nb);
    r.p_value = std::exp(-2.0 * ne * r.d_plus * r.d_plus);
    r.holds = r.p_value >= alpha;
    return r;
}

nlohmann::json to_json(const McSummary& s) {
    nlohmann::json j;
    j["n"] = s.n;
    j["failed"] = s.failed;
    j["mean"] = s.mean;
    j["std_err"] = s.std_err;
    nlohmann::json q = nlohmann::json::object();
    for (std::size_t i = 0; i < kSummaryLevels.size(); ++i) {
        std::ostringstream key;
        key << kSummaryLevels[i];
        q[key.str()] = s.quantiles[i];
    }
    j["quantiles"] = q;
    j["censored_fraction"] = s.censored_fraction;
    if (s.tail_rate) j["tail_rate"] = {{"c_hat", s.tail_rate->c_hat}, {"std_err", s.tail_rate->std_err},
                                       {"points", s.tail_rate->points}};
    else j["tail_rate"] = nullptr;
    if (!s.tail_note.empty()) j["tail_note"] = s.tail_note;
    return j;
}

nlohmann::json to_json(const TrendReport& t) {
    return {{"levels", t.levels},
            {"medians", t.medians},
            {"last_relative_increment", t.last_relative_increment},
            {"verdict", to_string(t.verdict)}};
}

}  // namespace compforest
