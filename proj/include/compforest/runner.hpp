#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "compforest/config.hpp"
#include "compforest/criteria.hpp"
#include "compforest/stats.hpp"
#include "json.hpp"

namespace compforest {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitContradiction = 2;

nlohmann::json to_json(const LadderTrace& t);
nlohmann::json to_json(const SeriesDiagnostics& s);
nlohmann::json to_json(const H3Diagnostics& h);
nlohmann::json to_json(const ClassificationReport& r);

/// Samples of one functional (H, L, T or S) at each ladder level.
struct FunctionalSamples {
    std::string name;
    std::vector<double> levels;
    std::vector<std::vector<Sample>> samples;  // [level][replica]
    std::vector<McSummary> summaries;
    TrendReport trend;
};

struct Campaign {
    std::string level_name;  // "m" or "x"
    std::vector<FunctionalSamples> functionals;
    /// Events per level and replica (discrete campaigns only).
    std::vector<std::vector<std::uint64_t>> events;
    std::size_t failed_replicas = 0;
    std::vector<std::string> errors;
};

/// H^m and L^m for every m in cfg.m_list: one coupled planar run per replica,
/// or independent single-chain runs when cfg.coupled is false.
Campaign run_discrete(const ExperimentConfig& cfg);

/// Hitting times and masses for every x in cfg.x_list, all levels of one
/// replica sharing their Gaussian increments. The targets decide which of
/// T (height or Z route) and S (mass or Z route) are produced.
Campaign run_diffusion(const ExperimentConfig& cfg, const std::vector<Target>& targets);

enum class Agreement { AGREE, CONTRADICTION, UNTESTED, INCONCLUSIVE };
std::string to_string(Agreement a);

struct DichotomyItem {
    std::string route;       // "height" or "mass"
    std::string functional;  // H, L, T or S
    Verdict classifier = Verdict::INCONCLUSIVE;
    TrendVerdict trend = TrendVerdict::INCONCLUSIVE;
    Agreement status = Agreement::UNTESTED;
};

/// DIVERGES must come with a GROWING trend and FINITE_EXP_MOMENT with a
/// PLATEAU; the opposite definite trend is a contradiction.
Agreement compare(Verdict classifier, TrendVerdict trend);

struct ScalingRow {
    double N = 0.0;
    McSummary discrete;
    double gap = 0.0;
    double ci_halfwidth = 0.0;  // 1.96 times the combined standard error
};

struct ScalingTable {
    McSummary sde;
    std::vector<ScalingRow> rows;
    bool gaps_nonincreasing = false;
    bool last_within_ci = false;
};

ScalingTable run_scaling(const ExperimentConfig& cfg);

struct RunOutcome {
    int exit_code = kExitOk;
    nlohmann::json report;
    std::vector<std::string> artifacts;
};

/// Validates cfg and runs its mode, writing artifacts under cfg.out_dir.
/// Throws on configuration or runtime failures; a classifier/simulation
/// contradiction is reported through exit_code instead.
RunOutcome run(const ExperimentConfig& cfg, std::ostream& log);

/// Writes whitespace-separated plot files from the summary and samples of a
/// previous discrete, diffusion or dichotomy run in out_dir: one
/// trend_<F>.dat (level, median) per functional and one
/// survival_<F>_<level>.dat (t, empirical survival) per functional and level.
/// Throws Error when the artifacts are missing.
std::vector<std::string> emit_plotdata(const std::string& out_dir);

}  // namespace compforest
