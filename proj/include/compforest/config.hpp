#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "compforest/diffusion_sim.hpp"
#include "compforest/interaction.hpp"

namespace compforest {

/// A value of the configuration grammar: number, string, boolean or a
/// one-line array of numbers or strings.
struct ConfigValue {
    using Array = std::vector<std::variant<double, std::string>>;
    std::variant<double, std::string, bool, Array> value;
    std::size_t line = 0;

    double number(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    const std::string& string(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<std::string> strings(const std::string& key) const;
};

/// Parsed file: section name ("" for the top level) -> key -> value.
/// Grammar, one item per line:
///   # comment            [section]            key = value
/// with value one of 1.5e3, "text", true/false, [1, 2, 3] or ["a", "b"].
struct ConfigDocument {
    std::map<std::string, std::map<std::string, ConfigValue>> sections;
    std::map<std::string, std::size_t> section_lines;
};

/// Throws ConfigError with the offending line.
ConfigDocument parse_config(const std::string& text);
ConfigDocument load_config_file(const std::string& path);

/// Model description used by the runner; the model itself is built on demand.
struct ModelSpec {
    Family family = Logistic{};
    std::optional<double> theta;
    std::optional<double> a0;

    InteractionModel build() const;
    std::string describe() const;
};

/// Parses "logistic:a=1,b=1", "powerlog:alpha=2,gamma=0.5", "linear:a=-1",
/// "zero" or "custom:<expr>[;<knot>;<expr>...]". Throws ConfigError.
ModelSpec parse_model_spec(const std::string& text);

enum class Mode { CLASSIFY, DISCRETE, DIFFUSION, DICHOTOMY, SCALING };
std::string to_string(Mode m);
Mode parse_mode(const std::string& name);

enum class Engine { DISCRETE, DIFFUSION };
std::string to_string(Engine e);

struct ExperimentConfig {
    ModelSpec model;
    double lambda = 1.0, mu = 1.0;
    Mode mode = Mode::CLASSIFY;
    std::optional<std::uint64_t> seed;
    std::size_t replicas = 1000;
    unsigned threads = 1;

    // discrete
    std::vector<double> m_list;
    double discrete_t_max = 1e6;
    bool coupled = true;
    std::uint64_t max_events = 100'000'000;

    // diffusion
    std::vector<double> x_list;
    Target target = Target::HEIGHT;
    SdeConfig sde{1e-3, 1e-4, 1e3, false, 1, {}};

    // dichotomy
    Engine engine = Engine::DISCRETE;
    double plateau_below = 0.10, growing_above = 0.25;

    // scaling
    std::vector<double> n_list;
    double scaling_x = 1.0;
    double scaling_t = 0.5;

    // classify over a PowerLog (alpha, gamma) grid instead of one model
    std::vector<double> grid_alpha, grid_gamma;

    std::string out_dir = "out";
    bool write_samples = true;
    bool write_trace = false;
};

/// Reads the document into a config, starting from the defaults above.
/// Unknown sections and keys are errors.
ExperimentConfig config_from_document(const ConfigDocument& doc);

/// Checks what the selected mode needs: seed present, ladders non-empty and
/// strictly increasing, positive parameters, writable output directory.
/// Throws ConfigError.
void validate(const ExperimentConfig& cfg);

}  // namespace compforest
