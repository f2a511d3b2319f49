#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "compforest/errors.hpp"
#include "compforest/rng.hpp"
#include "json.hpp"

namespace compforest {

/// One Monte Carlo observation; censored values are lower bounds.
struct Sample {
    double value = 0.0;
    bool censored = false;
};

struct TailRate {
    double c_hat = 0.0;
    double std_err = 0.0;
    std::size_t points = 0;
};

inline constexpr std::array<double, 5> kSummaryLevels{0.1, 0.25, 0.5, 0.75, 0.9};

struct McSummary {
    std::size_t n = 0;
    std::size_t failed = 0;
    double mean = 0.0;
    double std_err = 0.0;
    std::array<double, 5> quantiles{};  // at kSummaryLevels
    double censored_fraction = 0.0;
    std::optional<TailRate> tail_rate;
    std::string tail_note;

    double median() const { return quantiles[2]; }
    /// Normal-approximation confidence interval for the mean.
    std::pair<double, double> ci(double z = 1.96) const { return {mean - z * std_err, mean + z * std_err}; }
};

/// Linear interpolation between order statistics (sorted input).
double quantile_sorted(const std::vector<double>& sorted, double p);

McSummary summarize(const std::vector<Sample>& samples, std::size_t failed = 0);

struct ReplicaError {
    std::size_t replica;
    std::string message;
};

template <class T>
struct ReplicaRun {
    /// Indexed by replica; empty where the replica raised.
    std::vector<std::optional<T>> results;
    std::vector<ReplicaError> errors;

    std::vector<T> successes() const {
        std::vector<T> out;
        for (const auto& r : results)
            if (r) out.push_back(*r);
        return out;
    }
};

/// Runs fn(rng, replica) for replica = 0..n-1 with rng seeded from
/// (seed, replica), so results do not depend on scheduling. Errors are
/// recorded per replica; throws only when every replica fails.
template <class T, class Fn>
ReplicaRun<T> run_replicas(std::size_t n, std::uint64_t seed, unsigned threads, Fn&& fn) {
    ReplicaRun<T> run;
    run.results.resize(n);
    std::vector<std::optional<std::string>> messages(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            Rng rng(seed, i);
            try {
                run.results[i] = fn(rng, i);
            } catch (const std::exception& e) {
                messages[i] = e.what();
            }
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n; ++i)
        if (messages[i]) run.errors.push_back({i, *messages[i]});
    if (n > 0 && run.errors.size() == n)
        throw Error("all " + std::to_string(n) + " replicas failed; first error: " + run.errors.front().message);
    return run;
}

struct McRun {
    std::vector<Sample> samples;  // successful replicas, in replica order
    std::vector<ReplicaError> errors;
    McSummary summary;
};

/// Scalar Monte Carlo: fn(rng, replica) returns a Sample. Needs replicas >= 2.
template <class Fn>
McRun mc_run(std::size_t replicas, std::uint64_t seed, unsigned threads, Fn&& fn) {
    if (replicas < 2) throw InvalidArgument("mc_run needs at least 2 replicas");
    auto run = run_replicas<Sample>(replicas, seed, threads, std::forward<Fn>(fn));
    McRun out;
    out.samples = run.successes();
    out.errors = std::move(run.errors);
    out.summary = summarize(out.samples, out.errors.size());
    return out;
}

struct KsResult {
    double distance = 0.0;
    double p_value = 1.0;
};

/// sup |F_a - F_b| of the empirical CDFs.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// p-value. Throws TooFewSamples below 20 points per side.
KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

/// Survival function of the Kolmogorov distribution, 2 sum (-1)^(k-1) e^{-2k^2 x^2}.
double kolmogorov_survival(double x);

struct TailOptions {
    double window_quantile = 0.75;
    std::size_t min_points = 100;
    std::size_t bootstrap = 200;
    std::uint64_t bootstrap_seed = 0x5eed;
};

/// Exponential tail rate: minus the least-squares slope of the log empirical
/// survival against t, on an even t grid from the window quantile to the
/// fifth largest sample (or censor_level, if lower). The standard error is a
/// bootstrap estimate. Throws InsufficientTail.
TailRate tail_rate(const std::vector<double>& samples, std::optional<double> censor_level = std::nullopt,
                   const TailOptions& opts = {});

enum class TrendVerdict { PLATEAU, GROWING, INCONCLUSIVE };
std::string to_string(TrendVerdict v);

struct TrendOptions {
    double plateau_below = 0.10;
    double growing_above = 0.25;
};

struct TrendReport {
    std::vector<double> levels;
    std::vector<double> medians;
    double last_relative_increment = 0.0;
    TrendVerdict verdict = TrendVerdict::INCONCLUSIVE;
};

/// Needs at least 3 levels.
TrendReport trend(const std::vector<double>& levels, const std::vector<double>& medians,
                  const TrendOptions& opts = {});

struct DominanceReport {
    bool coupled = false;
    bool holds = true;
    std::size_t pairs = 0;
    /// Uncoupled mode: sup (F_hi - F_lo) and its one-sided p-value.
    double d_plus = 0.0;
    double p_value = 1.0;
};

/// Does `hi` dominate `lo`? Coupled mode requires hi[i] >= lo[i] for every
/// replica and throws OrderingViolation otherwise; uncoupled mode runs a
/// one-sided KS test and reports dominance unless rejected at `alpha`.
DominanceReport dominance_check(const std::vector<double>& lo, const std::vector<double>& hi, bool coupled,
                                double alpha = 0.01);

nlohmann::json to_json(const McSummary& s);
nlohmann::json to_json(const TrendReport& t);

}  // namespace compforest
