#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "compforest/criteria.hpp"
#include "compforest/interaction.hpp"
#include "compforest/rng.hpp"

namespace compforest {

struct SimOptions {
    double t_max = std::numeric_limits<double>::infinity();
    /// Keep the full event path (times and sizes).
    bool record = false;
    /// Population sizes are also reported at these (increasing) times.
    std::vector<double> sample_times;
    std::uint64_t max_events = 100'000'000;
};

/// One path of a population size process. H is the extinction time when
/// absorbed; otherwise the path was censored at t_max and H = t_max.
struct Trajectory {
    std::vector<double> times;        // event times, starting with 0 (when recorded)
    std::vector<std::int64_t> values;  // size after each event
    std::vector<double> samples;       // size at SimOptions::sample_times
    bool absorbed = false;
    bool censored = false;
    double H = 0.0;
    double L = 0.0;  // integral of the size up to H
    std::uint64_t events = 0;
};

/// Gillespie simulation of the birth-death chain with total rates `rates`,
/// started from m.
Trajectory simulate_single(std::size_t m, const BdRates& rates, Rng& rng, const SimOptions& opts = {});

/// Fenwick tree over per-ancestor alive counts. Ancestor j (1-based) owns
/// the contiguous block of positions prefix(j-1)+1 .. prefix(j).
class PlanarForest {
public:
    explicit PlanarForest(std::size_t ancestors);

    std::size_t ancestors() const { return n_; }
    std::int64_t total() const { return total_; }
    std::int64_t count(std::size_t j) const { return counts_[j]; }
    /// Sum of the counts of ancestors 1..j.
    std::int64_t prefix(std::size_t j) const;
    /// Ancestor owning position l (1 <= l <= total()).
    std::size_t ancestor_at(std::int64_t l) const;
    void add(std::size_t j, std::int64_t delta);

private:
    std::size_t n_;
    std::size_t top_bit_;
    std::int64_t total_ = 0;
    std::vector<std::int64_t> counts_;  // 1-based
    std::vector<std::int64_t> tree_;    // 1-based
};

struct PlanarEvent {
    double t;
    std::uint32_t ancestor;
    std::int8_t delta;
};

struct PlanarOptions {
    SimOptions sim;
    /// Keep the (time, ancestor, +-1) log of every event.
    bool event_log = false;
    /// Recompute the per-position rates at every event and compare with the
    /// totals (O(k) per event).
    bool audit = false;
};

struct PlanarResult {
    std::vector<std::size_t> ms;       // queried ancestor counts, increasing
    std::vector<Trajectory> paths;      // X^m for each queried m
    std::vector<PlanarEvent> log;
    std::uint64_t events = 0;
    /// Events after which X^m > X^m' for some queried m < m'.
    std::uint64_t order_violations = 0;
    /// Largest relative discrepancy seen by the rate audit.
    double audit_error = 0.0;
};

/// All X^m, m in query_ms, on one probability space through the planar
/// left/right order. Stops when the largest queried X^m dies out or at t_max.
PlanarResult simulate_planar(std::size_t M, const BdRates& rates, Rng& rng, std::vector<std::size_t> query_ms,
                             const PlanarOptions& opts = {});

/// The path of U = X o eta where eta inverts A_t = int_0^t X. Needs a
/// recorded, absorbed trajectory; the result's H equals the input's L.
Trajectory time_change_discrete(const Trajectory& path);

/// eta(s): the time at which int_0^t X reaches s, for 0 <= s <= L.
double clock_inverse(const Trajectory& path, double s);

/// sum_{n=1}^m 1 / (mu n + F-(n)): the mean extinction time without births.
double pure_death_mean(std::size_t m, double mu, const RateSums& sums);

/// Z^N_t = X_t / N at the times of t_grid, for the chain with lambda = mu = 2N,
/// interaction N f(x/N), started from floor(N x).
std::vector<double> scaled_ensemble(double N, double x, const InteractionModel& model,
                                    const std::vector<double>& t_grid, Rng& rng);

/// Rates of the scaled chain, cached so that replicas can share them.
BdRates scaled_rates(double N, const InteractionModel& model);
std::vector<double> scaled_ensemble(double N, double x, const BdRates& scaled,
                                    const std::vector<double>& t_grid, Rng& rng);

}  // namespace compforest
