#include "compforest/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "compforest/errors.hpp"

namespace compforest {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

InteractionModel::Fn make_fn(const Family& family) {
    return std::visit(
        overloaded{
            [](const Logistic& p) -> InteractionModel::Fn {
                return [a = p.a, b = p.b](double x) { return a * x - b * x * x; };
            },
            [](const PowerLog& p) -> InteractionModel::Fn {
                const double alpha = p.alpha, gamma = p.gamma;
                const double f2 = -std::pow(2.0, alpha) * std::pow(std::log(2.0), gamma);
                return [alpha, gamma, f2](double x) {
                    if (x < 2.0) return 0.5 * f2 * x;
                    return -std::pow(x, alpha) * std::pow(std::log(x), gamma);
                };
            },
            [](const Linear& p) -> InteractionModel::Fn {
                return [a = p.a](double x) { return a * x; };
            },
            [](const ZeroFn&) -> InteractionModel::Fn { return [](double) { return 0.0; }; },
            [](const Custom& c) -> InteractionModel::Fn {
                if (!c.expr) throw InvalidArgument("custom model without an expression");
                return [e = c.expr](double x) { return (*e)(x); };
            },
        },
        family);
}

std::optional<double> builtin_theta(const Family& family) {
    return std::visit(overloaded{
                          [](const Logistic& p) -> std::optional<double> { return std::max(p.a, 0.0); },
                          [](const PowerLog&) -> std::optional<double> { return 0.0; },
                          [](const Linear& p) -> std::optional<double> { return std::max(p.a, 0.0); },
                          [](const ZeroFn&) -> std::optional<double> { return 0.0; },
                          [](const Custom&) -> std::optional<double> { return std::nullopt; },
                      },
                      family);
}

// Returns {known, a0}. known == false means "scan numerically".
std::pair<bool, std::optional<double>> builtin_a0(const Family& family) {
    using R = std::pair<bool, std::optional<double>>;
    return std::visit(overloaded{
                          [](const Logistic& p) -> R {
                              if (p.b > 0.0) return {true, p.a > 0.0 ? p.a / p.b : 1.0};
                              if (p.a != 0.0) return {true, 1.0};
                              return {true, std::nullopt};
                          },
                          [](const PowerLog&) -> R { return {true, 2.0}; },
                          [](const Linear& p) -> R {
                              if (p.a != 0.0) return {true, 1.0};
                              return {true, std::nullopt};
                          },
                          [](const ZeroFn&) -> R { return {true, std::nullopt}; },
                          [](const Custom&) -> R { return {false, std::nullopt}; },
                      },
                      family);
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

double h1_tolerance(double theta, double x, double fxy, double fy, double rel_tol) {
    return rel_tol * (1.0 + theta * x) + 8.0 * kEps * (std::abs(fxy) + std::abs(fy));
}

// Sup of (f(x+y) - f(y)) / x over the grid pairs, plus consecutive-point slopes.
double estimate_theta(const InteractionModel::Fn& f, const std::vector<double>& xs,
                      const std::vector<double>& ys, const std::vector<double>& scan) {
    double best = 0.0;
    for (double x : xs) {
        if (x <= 0.0) continue;
        for (double y : ys) best = std::max(best, (f(x + y) - f(y)) / x);
    }
    for (std::size_t i = 0; i + 1 < scan.size(); ++i)
        best = std::max(best, (f(scan[i + 1]) - f(scan[i])) / (scan[i + 1] - scan[i]));
    return best;
}

void check_pairs(const InteractionModel::Fn& f, double theta, const std::vector<double>& xs,
                 const std::vector<double>& ys, double rel_tol, H1Report& report,
                 const std::string& what) {
    for (double x : xs) {
        for (double y : ys) {
            const double fxy = f(x + y), fy = f(y);
            const double excess = (fxy - fy) - theta * x;
            ++report.pairs_checked;
            if (-excess < report.margin) {
                report.margin = -excess;
                report.worst_x = x;
                report.worst_y = y;
            }
            if (excess > h1_tolerance(theta, x, fxy, fy, rel_tol)) {
                std::ostringstream os;
                os << what << ": f(x+y) - f(y) exceeds theta*x by " << excess << " at x=" << x
                   << ", y=" << y << " (theta=" << theta << ")";
                throw H1Violation(os.str(), x, y, excess);
            }
        }
    }
}

std::optional<double> scan_a0(const InteractionModel::Fn& f, const ValidationOptions& opts) {
    const std::vector<double> grid = geometric_grid(1e-3, opts.scan_cutoff, opts.scan_points, false);
    std::vector<int> s(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) s[i] = sign_of(f(grid[i]));
    std::optional<std::size_t> last;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (s[i] == 0 || s[i] != s[i + 1]) last = i;
    if (s.back() == 0) last = grid.size() - 1;
    if (!last) return grid.front();
    if (*last + 2 >= grid.size())
        throw NoSignStabilization("f still changes sign (or vanishes) at the scan cutoff " +
                                  std::to_string(opts.scan_cutoff) + "; supply a0 explicitly");
    return grid[*last + 1];
}

void verify_a0(const InteractionModel::Fn& f, double a0, const ValidationOptions& opts) {
    const double hi = std::max(opts.scan_cutoff, 1e3 * a0);
    const std::vector<double> grid = geometric_grid(a0, hi, opts.scan_points, false);
    const int s0 = sign_of(f(grid[1]));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const int s = sign_of(f(grid[i]));
        if (s == 0 || s != s0) {
            std::ostringstream os;
            os << "f vanishes or changes sign at x=" << grid[i] << " beyond a0=" << a0;
            throw NoSignStabilization(os.str());
        }
    }
}

}  // namespace

std::vector<double> geometric_grid(double lo, double hi, std::size_t points, bool with_zero) {
    std::vector<double> g;
    if (points == 0) return g;
    g.reserve(points);
    std::size_t n = points;
    if (with_zero) {
        g.push_back(0.0);
        --n;
    }
    if (n == 1) {
        g.push_back(lo);
        return g;
    }
    const double ratio = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g.push_back(lo * std::exp(ratio * static_cast<double>(i)));
    g.back() = hi;
    return g;
}

std::string family_name(const Family& family) {
    return std::visit(overloaded{
                          [](const Logistic&) { return std::string("logistic"); },
                          [](const PowerLog&) { return std::string("powerlog"); },
                          [](const Linear&) { return std::string("linear"); },
                          [](const ZeroFn&) { return std::string("zero"); },
                          [](const Custom&) { return std::string("custom"); },
                      },
                      family);
}

std::string describe(const Family& family) {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const Logistic& p) { os << "logistic(a=" << p.a << ", b=" << p.b << ")"; },
                   [&](const PowerLog& p) {
                       os << "powerlog(alpha=" << p.alpha << ", gamma=" << p.gamma << ")";
                   },
                   [&](const Linear& p) { os << "linear(a=" << p.a << ")"; },
                   [&](const ZeroFn&) { os << "zero"; },
                   [&](const Custom& c) { os << "custom(" << (c.expr ? c.expr->describe() : "?") << ")"; },
               },
               family);
    return os.str();
}

double InteractionModel::require_a0() const {
    if (!a0_) throw NoSignStabilization(describe() + " has no sign threshold a0 (f never settles on a sign)");
    return *a0_;
}

std::string InteractionModel::describe() const { return label_; }

InteractionModel InteractionModel::scaled(double n) const {
    if (!(n > 0.0)) throw InvalidArgument("scaling factor must be positive");
    InteractionModel m = *this;
    m.fn_ = std::make_shared<const Fn>([base = fn_, n](double x) { return n * (*base)(x / n); });
    m.family_ = Custom{};
    if (a0_) m.a0_ = *a0_ * n;
    std::ostringstream os;
    os << label_ << " scaled by N=" << n;
    m.label_ = os.str();
    return m;
}

InteractionModel build_model(const Family& family, std::optional<double> theta, std::optional<double> a0,
                             const ValidationOptions& opts) {
    InteractionModel m;
    m.family_ = family;
    m.fn_ = std::make_shared<const InteractionModel::Fn>(make_fn(family));
    m.label_ = compforest::describe(family);
    const auto& f = *m.fn_;

    if (std::abs(f(0.0)) > 1e-12) throw InvalidArgument(m.label_ + ": f(0) must be 0");
    if (theta && *theta < 0.0) throw InvalidArgument("theta must be non-negative");
    if (a0 && !(*a0 > 0.0)) throw InvalidArgument("a0 must be positive");

    const std::vector<double> xs = geometric_grid(1e-4, opts.grid_max, opts.grid_points, true);
    const std::vector<double>& ys = xs;

    if (!theta) theta = builtin_theta(family);
    if (!theta) {
        const std::vector<double> scan = geometric_grid(1e-4, opts.grid_max, opts.scan_points, true);
        theta = opts.theta_safety * estimate_theta(f, xs, ys, scan);
        m.h1_.theta_estimated = true;
    }
    m.h1_.theta = *theta;
    m.h1_.margin = std::numeric_limits<double>::infinity();
    check_pairs(f, *theta, xs, ys, opts.rel_tol, m.h1_, m.label_);

    if (a0) {
        verify_a0(f, *a0, opts);
        m.a0_ = a0;
    } else {
        auto [known, value] = builtin_a0(family);
        m.a0_ = known ? value : scan_a0(f, opts);
    }
    return m;
}

InteractionModel over_x(const InteractionModel& model, const ValidationOptions& opts) {
    InteractionModel m;
    m.family_ = Custom{};
    m.label_ = model.describe() + " divided by x";
    m.a0_ = model.a0();
    m.fn_ = std::make_shared<const InteractionModel::Fn>([base = model.fn_](double x) {
        return x == 0.0 ? 0.0 : (*base)(x) / x;
    });
    const auto& g = *m.fn_;

    // The value 0 at the origin is a convention, not the limit of f(x)/x, so
    // pairs anchored at y = 0 are only checked at integers, where they matter.
    const std::vector<double> xs = geometric_grid(1e-4, opts.grid_max, opts.grid_points, true);
    const std::vector<double> ys = geometric_grid(1e-4, opts.grid_max, opts.grid_points, false);
    std::vector<double> ints;
    for (double n = 1.0; n <= 1e4; n = n < 100.0 ? n + 1.0 : std::ceil(n * 1.05)) ints.push_back(n);

    double theta = 0.0;
    for (double x : xs) {
        if (x <= 0.0) continue;
        for (double y : ys) theta = std::max(theta, (g(x + y) - g(y)) / x);
    }
    for (double n : ints) theta = std::max(theta, g(n) / n);
    m.h1_.theta = opts.theta_safety * theta;
    m.h1_.theta_estimated = true;
    m.h1_.margin = std::numeric_limits<double>::infinity();
    check_pairs(g, m.h1_.theta, xs, ys, opts.rel_tol, m.h1_, m.label_);
    check_pairs(g, m.h1_.theta, ints, {0.0}, opts.rel_tol, m.h1_, m.label_);
    return m;
}

RateSums::RateSums(InteractionModel::Fn f, std::size_t n_max)
    : fn_(std::move(f)), blocks_(new std::atomic<Entry*>[kMaxBlocks]) {
    for (std::size_t i = 0; i < kMaxBlocks; ++i) blocks_[i].store(nullptr, std::memory_order_relaxed);
    reserve(n_max + 1);
}

RateSums::~RateSums() {
    for (std::size_t i = 0; i < kMaxBlocks; ++i) {
        Entry* b = blocks_[i].load(std::memory_order_relaxed);
        if (!b) break;
        delete[] b;
    }
}

void RateSums::reserve(std::size_t n) const {
    if (n <= size_.load(std::memory_order_acquire)) return;
    std::lock_guard lock(mu_);
    std::size_t have = size_.load(std::memory_order_relaxed);
    if (n <= have) return;
    // Grow geometrically so that a random walk upward costs amortized O(1).
    std::size_t target = std::max(n, have + have / 2 + 64);
    if (target > kMaxBlocks * kBlockSize) {
        if (n > kMaxBlocks * kBlockSize)
            throw ExplosionGuard("population size exceeds the rate table capacity");
        target = kMaxBlocks * kBlockSize;
    }
    double raw_plus = have ? fplus_raw_ : 0.0;
    double raw_minus = have ? fminus_raw_ : 0.0;
    double prev = have ? blocks_[(have - 1) >> kBlockBits].load(std::memory_order_relaxed)[(have - 1) & (kBlockSize - 1)].f
                       : 0.0;
    auto neumaier = [](double& sum, double& comp, double v) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    };
    for (std::size_t i = have; i < target; ++i) {
        const std::size_t b = i >> kBlockBits;
        Entry* block = blocks_[b].load(std::memory_order_relaxed);
        if (!block) {
            block = new Entry[kBlockSize];
            blocks_[b].store(block, std::memory_order_relaxed);
        }
        Entry& e = block[i & (kBlockSize - 1)];
        if (i == 0) {
            e = {0.0, 0.0, fn_(0.0)};
            prev = e.f;
            continue;
        }
        const double fi = fn_(static_cast<double>(i));
        const double d = fi - prev;
        if (d > 0.0) neumaier(raw_plus, comp_plus_, d);
        else if (d < 0.0) neumaier(raw_minus, comp_minus_, -d);
        e = {raw_plus + comp_plus_, raw_minus + comp_minus_, fi};
        prev = fi;
    }
    fplus_raw_ = raw_plus;
    fminus_raw_ = raw_minus;
    size_.store(target, std::memory_order_release);
}

std::size_t RateSums::select_plus(double u, std::size_t k) const {
    std::size_t lo = 1, hi = k;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (fplus(mid) > u) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

std::size_t RateSums::select_minus(double u, std::size_t k) const {
    std::size_t lo = 1, hi = k;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (fminus(mid) > u) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

std::shared_ptr<const RateSums> rate_sums(const InteractionModel& model, std::size_t n_max) {
    if (n_max < 1) throw InvalidArgument("n_max must be at least 1");
    return std::make_shared<const RateSums>(model.fn(), n_max);
}

std::shared_ptr<const RateSums> rate_sums_over_x(const InteractionModel& model, std::size_t n_max,
                                                 const ValidationOptions& opts) {
    if (n_max < 1) throw InvalidArgument("n_max must be at least 1");
    return std::make_shared<const RateSums>(over_x(model, opts).fn(), n_max);
}

}  // namespace compforest
