#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compforest/interaction.hpp"
#include "compforest/rng.hpp"

namespace compforest {

enum class Target { HEIGHT, MASS, Z };

std::string to_string(Target t);
Target parse_target(const std::string& name);

struct SdeConfig {
    double dt = 1e-4;
    double eps_abs = 1e-4;
    double t_max = 1e3;
    /// Store the state after every `record_every` steps.
    bool record = false;
    std::size_t record_every = 1;
    /// The state is also reported at these increasing times (0 after absorption).
    std::vector<double> sample_times;
};

void validate(const SdeConfig& cfg);

struct DiffusionPath {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> samples;
    bool absorbed = false;
    bool censored = false;
    /// Hitting time of 0, or t_max when censored.
    double T = 0.0;
    /// Total mass int_0^T Z dt (Z route), or the hitting time of U (mass route).
    double S = 0.0;
    std::uint64_t steps = 0;
};

/// Y = sqrt(Z): dY = (f(Y^2) - 1)/(2Y) dt + dW, Y_0 = sqrt(x).
DiffusionPath simulate_height(double x, const InteractionModel& model, const SdeConfig& cfg, Rng& rng);

/// dU = f(2U)/(4U) dt + dW, U_0 = x/2. The hitting time of 0 is reported as
/// both T and S, since it equals the total mass of Z started from x.
DiffusionPath simulate_mass(double x, const InteractionModel& model, const SdeConfig& cfg, Rng& rng);

/// dZ = f(Z) dt + 2 sqrt(Z) dW by Euler steps, absorbed on the first step
/// that crosses eps_abs; S by the trapezoidal rule up to T.
DiffusionPath simulate_Z(double x, const InteractionModel& model, const SdeConfig& cfg, Rng& rng);

/// One path per x, all driven by the same Gaussian increments. Recorded
/// values share one time grid and absorbed paths stay at 0.
std::vector<DiffusionPath> shared_noise_ensemble(const std::vector<double>& xs, const InteractionModel& model,
                                                 const SdeConfig& cfg, Rng& rng, Target target);

/// Number of grid times at which a path with a larger x sits strictly below a
/// path with a smaller x.
std::size_t ordering_violations(const std::vector<DiffusionPath>& paths);

/// P(T <= t) for dZ = 2 sqrt(Z) dW from x: exp(-x / (2t)).
double feller_extinction_cdf(double x, double t);

/// P(tau <= t) for Brownian motion from a > 0 hitting 0: 2 Phi(-a / sqrt(t)).
double brownian_hitting_cdf(double a, double t);

}  // namespace compforest
