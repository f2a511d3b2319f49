#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "compforest/expression.hpp"

namespace compforest {

/// f(x) = a x - b x^2.
struct Logistic {
    double a = 1.0;
    double b = 1.0;
};

/// f(x) = -x^alpha (log x)^gamma for x >= 2, continued linearly through the
/// origin on [0, 2].
struct PowerLog {
    double alpha = 1.0;
    double gamma = 0.0;
};

/// f(x) = a x.
struct Linear {
    double a = -1.0;
};

struct ZeroFn {};

/// User-supplied f, optionally piecewise.
struct Custom {
    std::shared_ptr<const PiecewiseExpression> expr;
};

using Family = std::variant<Logistic, PowerLog, Linear, ZeroFn, Custom>;

std::string family_name(const Family& family);
std::string describe(const Family& family);

/// Sampling grid used for the (H1) check, the theta estimate and the sign scan.
struct ValidationOptions {
    double grid_max = 1e6;
    std::size_t grid_points = 200;
    double rel_tol = 1e-8;
    double scan_cutoff = 1e6;
    std::size_t scan_points = 4000;
    double theta_safety = 1.05;
};

/// Outcome of the sampled (H1) check. margin is min over the grid of
/// theta*x - (f(x+y) - f(y)); it is negative only within tolerance.
struct H1Report {
    double theta = 0.0;
    bool theta_estimated = false;
    double margin = 0.0;
    double worst_x = 0.0;
    double worst_y = 0.0;
    std::size_t pairs_checked = 0;
};

/// The interaction function together with its (H1) constant and sign
/// threshold. Immutable once built; copies share the underlying function.
class InteractionModel {
public:
    using Fn = std::function<double(double)>;

    double operator()(double x) const { return (*fn_)(x); }
    const Fn& fn() const { return *fn_; }

    double theta() const { return h1_.theta; }
    const H1Report& h1() const { return h1_; }

    /// Empty when f never settles on a sign (only possible for ZeroFn).
    std::optional<double> a0() const { return a0_; }
    /// Throws NoSignStabilization when a0 is absent.
    double require_a0() const;

    const Family& family() const { return family_; }
    bool is_builtin() const { return !std::holds_alternative<Custom>(family_); }
    std::string describe() const;

    /// f_N(x) = N f(x / N). (H1) holds with the same theta.
    InteractionModel scaled(double n) const;

private:
    friend InteractionModel build_model(const Family&, std::optional<double>, std::optional<double>,
                                        const ValidationOptions&);
    friend InteractionModel over_x(const InteractionModel&, const ValidationOptions&);

    std::shared_ptr<const Fn> fn_;
    Family family_;
    H1Report h1_;
    std::optional<double> a0_;
    std::string label_;
};

/// Builds and validates a model. theta and a0 are computed when omitted
/// (closed form for the built-in families, grid estimates otherwise).
/// Throws InvalidArgument if f(0) != 0, H1Violation, or NoSignStabilization.
InteractionModel build_model(const Family& family, std::optional<double> theta = std::nullopt,
                             std::optional<double> a0 = std::nullopt,
                             const ValidationOptions& opts = {});

/// The model x -> f(x)/x with value 0 at the origin, validated for (H1) on
/// x > 0 and on integer pairs anchored at 0. Throws H1Violation.
InteractionModel over_x(const InteractionModel& model, const ValidationOptions& opts = {});

/// Geometric grid {0} U [lo, hi] with `points` entries in total.
std::vector<double> geometric_grid(double lo, double hi, std::size_t points, bool with_zero);

/// Cumulative positive and negative parts of the integer increments of f:
/// F+(n) = sum_{l<=n} (f(l) - f(l-1))^+, F-(n) likewise with the negative part.
///
/// Values are cached for n = 0..size()-1 and the cache grows on demand when a
/// larger n is queried. Reads below the published size are lock-free and
/// extension is serialized, so one instance can be shared by concurrent
/// simulations.
class RateSums {
public:
    explicit RateSums(InteractionModel::Fn f, std::size_t n_max = 1024);
    ~RateSums();
    RateSums(const RateSums&) = delete;
    RateSums& operator=(const RateSums&) = delete;

    double fplus(std::size_t n) const { return entry(n).fplus; }
    double fminus(std::size_t n) const { return entry(n).fminus; }
    double f(std::size_t n) const { return entry(n).f; }
    /// (f(n) - f(n-1))^+ and ^-, for n >= 1.
    double inc_plus(std::size_t n) const { return fplus(n) - fplus(n - 1); }
    double inc_minus(std::size_t n) const { return fminus(n) - fminus(n - 1); }

    std::size_t size() const { return size_.load(std::memory_order_acquire); }
    void reserve(std::size_t n) const;

    /// Smallest l in [1, k] with F+(l) > u, for 0 <= u < F+(k). Binary search.
    std::size_t select_plus(double u, std::size_t k) const;
    std::size_t select_minus(double u, std::size_t k) const;

private:
    struct Entry {
        double fplus;
        double fminus;
        double f;
    };
    static constexpr std::size_t kBlockBits = 12;
    static constexpr std::size_t kBlockSize = std::size_t{1} << kBlockBits;
    static constexpr std::size_t kMaxBlocks = std::size_t{1} << 18;

    const Entry& entry(std::size_t n) const {
        if (n >= size_.load(std::memory_order_acquire)) reserve(n + 1);
        return blocks_[n >> kBlockBits].load(std::memory_order_relaxed)[n & (kBlockSize - 1)];
    }

    InteractionModel::Fn fn_;
    std::unique_ptr<std::atomic<Entry*>[]> blocks_;
    mutable std::atomic<std::size_t> size_{0};
    mutable std::mutex mu_;
    // Neumaier compensation terms of the running sums; guarded by mu_.
    mutable double comp_plus_ = 0.0, comp_minus_ = 0.0;
    mutable double fplus_raw_ = 0.0, fminus_raw_ = 0.0;
};

/// F+/F- of f.
std::shared_ptr<const RateSums> rate_sums(const InteractionModel& model, std::size_t n_max);
/// F1+/F1- of f(x)/x. Throws H1Violation if f/x fails the sampled check.
std::shared_ptr<const RateSums> rate_sums_over_x(const InteractionModel& model, std::size_t n_max,
                                                 const ValidationOptions& opts = {});

}  // namespace compforest
