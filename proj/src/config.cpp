#include "compforest/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "compforest/errors.hpp"

namespace compforest {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

bool is_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

std::optional<double> to_number(std::string_view s) {
    std::string t;
    for (char c : s)
        if (c != '_') t += c;
    if (t.empty()) return std::nullopt;
    if (t == "inf" || t == "+inf") return INFINITY;
    double v = 0.0;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
    return v;
}

class LineParser {
public:
    LineParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(msg, line_); }

    void ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }
    bool done() {
        ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }

    std::string quoted() {
        ++pos_;  // opening quote
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) fail("unterminated escape");
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(std::string("unknown escape \\") + e);
                }
            }
            out += c;
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    std::string bare() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != ',' &&
               s_[pos_] != ']' && s_[pos_] != '#')
            ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    std::variant<double, std::string> scalar_item() {
        ws();
        if (pos_ < s_.size() && s_[pos_] == '"') return quoted();
        const std::string b = bare();
        const auto v = to_number(b);
        if (!v) fail("expected a number or a quoted string, found '" + b + "'");
        return *v;
    }

    ConfigValue value() {
        ConfigValue out;
        out.line = line_;
        ws();
        if (pos_ >= s_.size()) fail("missing value");
        if (s_[pos_] == '"') {
            out.value = quoted();
        } else if (s_[pos_] == '[') {
            ++pos_;
            ConfigValue::Array arr;
            ws();
            if (pos_ < s_.size() && s_[pos_] == ']') {
                ++pos_;
            } else {
                while (true) {
                    arr.push_back(scalar_item());
                    ws();
                    if (pos_ < s_.size() && s_[pos_] == ',') {
                        ++pos_;
                        ws();
                        if (pos_ < s_.size() && s_[pos_] == ']') {
                            ++pos_;
                            break;
                        }
                        continue;
                    }
                    if (pos_ < s_.size() && s_[pos_] == ']') {
                        ++pos_;
                        break;
                    }
                    fail("expected ',' or ']' in array");
                }
            }
            out.value = std::move(arr);
        } else {
            const std::string b = bare();
            if (b == "true") out.value = true;
            else if (b == "false") out.value = false;
            else if (const auto v = to_number(b)) out.value = *v;
            else fail("cannot read value '" + b + "' (strings need double quotes)");
        }
        if (!done()) fail("unexpected text after value");
        return out;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_;
};

std::string type_error(const std::string& key, const char* want) { return "'" + key + "' must be " + want; }

}  // namespace

double ConfigValue::number(const std::string& key) const {
    if (const auto* d = std::get_if<double>(&value)) return *d;
    throw ConfigError(type_error(key, "a number"), line);
}

std::int64_t ConfigValue::integer(const std::string& key) const {
    const double d = number(key);
    if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError(type_error(key, "an integer"), line);
    return static_cast<std::int64_t>(d);
}

const std::string& ConfigValue::string(const std::string& key) const {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    throw ConfigError(type_error(key, "a quoted string"), line);
}

bool ConfigValue::boolean(const std::string& key) const {
    if (const auto* b = std::get_if<bool>(&value)) return *b;
    throw ConfigError(type_error(key, "true or false"), line);
}

std::vector<double> ConfigValue::numbers(const std::string& key) const {
    const auto* a = std::get_if<Array>(&value);
    if (!a) throw ConfigError(type_error(key, "an array of numbers"), line);
    std::vector<double> out;
    for (const auto& item : *a) {
        const auto* d = std::get_if<double>(&item);
        if (!d) throw ConfigError(type_error(key, "an array of numbers"), line);
        out.push_back(*d);
    }
    return out;
}

std::vector<std::string> ConfigValue::strings(const std::string& key) const {
    const auto* a = std::get_if<Array>(&value);
    if (!a) throw ConfigError(type_error(key, "an array of strings"), line);
    std::vector<std::string> out;
    for (const auto& item : *a) {
        const auto* s = std::get_if<std::string>(&item);
        if (!s) throw ConfigError(type_error(key, "an array of strings"), line);
        out.push_back(*s);
    }
    return out;
}

ConfigDocument parse_config(const std::string& text) {
    ConfigDocument doc;
    doc.sections[""];
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        LineParser p(raw, line);
        if (p.done()) continue;
        if (raw[p.pos_] == '[') {
            const auto close = raw.find(']', p.pos_);
            if (close == std::string::npos) p.fail("missing ']' in section header");
            const std::string name = trim(std::string_view(raw).substr(p.pos_ + 1, close - p.pos_ - 1));
            if (name.empty() || !std::all_of(name.begin(), name.end(), is_key_char))
                p.fail("bad section name '" + name + "'");
            if (doc.section_lines.count(name)) p.fail("section [" + name + "] appears twice");
            p.pos_ = close + 1;
            if (!p.done()) p.fail("unexpected text after section header");
            section = name;
            doc.sections[section];
            doc.section_lines[section] = line;
            continue;
        }
        const auto eq = raw.find('=', p.pos_);
        if (eq == std::string::npos) p.fail("expected 'key = value'");
        const std::string key = trim(std::string_view(raw).substr(p.pos_, eq - p.pos_));
        if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char)) p.fail("bad key '" + key + "'");
        p.pos_ = eq + 1;
        ConfigValue v = p.value();
        auto& sec = doc.sections[section];
        if (sec.count(key)) p.fail("duplicate key '" + key + "'");
        sec.emplace(key, std::move(v));
    }
    return doc;
}

ConfigDocument load_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

InteractionModel ModelSpec::build() const { return build_model(family, theta, a0); }

std::string ModelSpec::describe() const {
    std::ostringstream os;
    os << compforest::describe(family);
    if (theta) os << " theta=" << *theta;
    if (a0) os << " a0=" << *a0;
    return os.str();
}

namespace {

Custom make_custom(const std::vector<std::string>& pieces, const std::vector<double>& knots, std::size_t line) {
    if (pieces.empty()) throw ConfigError("custom model needs at least one piece", line);
    if (pieces.size() != knots.size() + 1)
        throw ConfigError("custom model needs exactly one knot between consecutive pieces", line);
    std::vector<Expression> exprs;
    for (const auto& p : pieces) {
        try {
            exprs.push_back(Expression::parse(p));
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), line);
        }
    }
    try {
        return Custom{std::make_shared<const PiecewiseExpression>(std::move(exprs), knots)};
    } catch (const ConfigError& e) {
        throw ConfigError(e.what(), line);
    }
}

std::map<std::string, double> parse_params(const std::string& text, const std::string& spec) {
    std::map<std::string, double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        const auto v = eq == std::string::npos ? std::nullopt : to_number(trim(item.substr(eq + 1)));
        if (!v) throw ConfigError("model '" + spec + "': expected name=value, found '" + item + "'");
        out[trim(item.substr(0, eq))] = *v;
    }
    return out;
}

double take(std::map<std::string, double>& params, const std::string& name, double fallback) {
    const auto it = params.find(name);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
}

}  // namespace

ModelSpec parse_model_spec(const std::string& text) {
    const auto colon = text.find(':');
    std::string name = trim(text.substr(0, colon));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    ModelSpec spec;
    if (name == "custom") {
        std::vector<std::string> pieces;
        std::vector<double> knots;
        std::istringstream in(rest);
        std::string part;
        for (std::size_t i = 0; std::getline(in, part, ';'); ++i) {
            if (i % 2 == 0) {
                pieces.push_back(trim(part));
            } else {
                const auto k = to_number(trim(part));
                if (!k) throw ConfigError("model '" + text + "': bad knot '" + trim(part) + "'");
                knots.push_back(*k);
            }
        }
        spec.family = make_custom(pieces, knots, 0);
        return spec;
    }
    auto params = parse_params(rest, text);
    spec.theta = params.count("theta") ? std::optional(take(params, "theta", 0)) : std::nullopt;
    spec.a0 = params.count("a0") ? std::optional(take(params, "a0", 0)) : std::nullopt;
    if (name == "logistic") {
        spec.family = Logistic{take(params, "a", 1.0), take(params, "b", 1.0)};
    } else if (name == "powerlog") {
        spec.family = PowerLog{take(params, "alpha", 1.0), take(params, "gamma", 0.0)};
    } else if (name == "linear") {
        spec.family = Linear{take(params, "a", -1.0)};
    } else if (name == "zero") {
        spec.family = ZeroFn{};
    } else {
        throw ConfigError("unknown model family '" + name + "' (expected logistic, powerlog, linear, zero or custom)");
    }
    if (!params.empty())
        throw ConfigError("model '" + text + "': unknown parameter '" + params.begin()->first + "'");
    return spec;
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::CLASSIFY: return "classify";
        case Mode::DISCRETE: return "discrete";
        case Mode::DIFFUSION: return "diffusion";
        case Mode::DICHOTOMY: return "dichotomy";
        case Mode::SCALING: return "scaling";
    }
    return "?";
}

Mode parse_mode(const std::string& name) {
    for (Mode m : {Mode::CLASSIFY, Mode::DISCRETE, Mode::DIFFUSION, Mode::DICHOTOMY, Mode::SCALING})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown mode '" + name + "' (expected classify, discrete, diffusion, dichotomy or scaling)");
}

std::string to_string(Engine e) { return e == Engine::DISCRETE ? "discrete" : "diffusion"; }

// ---------------------------------------------------------------------------

namespace {

using Section = std::map<std::string, ConfigValue>;

class SectionReader {
public:
    SectionReader(const ConfigDocument& doc, const std::string& name) : name_(name) {
        const auto it = doc.sections.find(name);
        if (it != doc.sections.end()) sec_ = &it->second;
    }

    const ConfigValue* get(const std::string& key) {
        seen_.insert(key);
        if (!sec_) return nullptr;
        const auto it = sec_->find(key);
        return it == sec_->end() ? nullptr : &it->second;
    }

    std::string label(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    void number(const std::string& key, double& out) {
        if (const auto* v = get(key)) out = v->number(label(key));
    }
    void flag(const std::string& key, bool& out) {
        if (const auto* v = get(key)) out = v->boolean(label(key));
    }
    void list(const std::string& key, std::vector<double>& out) {
        if (const auto* v = get(key)) out = v->numbers(label(key));
    }
    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (const auto* v = get(key)) {
            const auto i = v->integer(label(key));
            if (i < 0) throw ConfigError("'" + label(key) + "' must be non-negative", v->line);
            out = static_cast<Int>(i);
        }
    }

    void finish() const {
        if (!sec_) return;
        for (const auto& [key, v] : *sec_)
            if (!seen_.count(key)) throw ConfigError("unknown key '" + label(key) + "'", v.line);
    }

private:
    std::string name_;
    const Section* sec_ = nullptr;
    std::set<std::string> seen_;
};

ModelSpec read_model(SectionReader& r, std::size_t section_line) {
    ModelSpec spec;
    const auto* fam = r.get("family");
    const std::string family = fam ? fam->string("model.family") : "logistic";
    double a = 1.0, b = 1.0, alpha = 1.0, gamma = 0.0;
    if (family == "logistic") {
        r.number("a", a);
        r.number("b", b);
        spec.family = Logistic{a, b};
    } else if (family == "powerlog") {
        r.number("alpha", alpha);
        r.number("gamma", gamma);
        spec.family = PowerLog{alpha, gamma};
    } else if (family == "linear") {
        a = -1.0;
        r.number("a", a);
        spec.family = Linear{a};
    } else if (family == "zero") {
        spec.family = ZeroFn{};
    } else if (family == "custom") {
        const auto* f = r.get("f");
        const auto* pieces = r.get("pieces");
        const auto* knots = r.get("knots");
        if (f && pieces) throw ConfigError("give either model.f or model.pieces, not both", f->line);
        if (f) {
            spec.family = make_custom({f->string("model.f")}, {}, f->line);
        } else if (pieces) {
            spec.family = make_custom(pieces->strings("model.pieces"),
                                      knots ? knots->numbers("model.knots") : std::vector<double>{}, pieces->line);
        } else {
            throw ConfigError("custom model needs model.f or model.pieces", section_line);
        }
    } else {
        throw ConfigError("unknown model family '" + family + "' (expected logistic, powerlog, linear, zero or custom)",
                          fam ? fam->line : section_line);
    }
    if (const auto* v = r.get("theta")) spec.theta = v->number("model.theta");
    if (const auto* v = r.get("a0")) spec.a0 = v->number("model.a0");
    return spec;
}

}  // namespace

ExperimentConfig config_from_document(const ConfigDocument& doc) {
    static const std::set<std::string> known{"", "model", "discrete", "sde", "dichotomy", "scaling", "grid", "output"};
    for (const auto& [name, line] : doc.section_lines)
        if (!known.count(name)) throw ConfigError("unknown section [" + name + "]", line);

    ExperimentConfig cfg;
    SectionReader top(doc, "");
    if (const auto* v = top.get("mode")) {
        try {
            cfg.mode = parse_mode(v->string("mode"));
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), v->line);
        }
    }
    if (const auto* v = top.get("seed")) {
        const auto s = v->integer("seed");
        if (s < 0) throw ConfigError("'seed' must be non-negative", v->line);
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    top.integer("replicas", cfg.replicas);
    top.integer("threads", cfg.threads);
    top.number("lambda", cfg.lambda);
    top.number("mu", cfg.mu);
    top.finish();

    const auto line_of = [&](const std::string& s) {
        const auto it = doc.section_lines.find(s);
        return it == doc.section_lines.end() ? std::size_t{0} : it->second;
    };

    SectionReader model(doc, "model");
    cfg.model = read_model(model, line_of("model"));
    model.finish();

    SectionReader d(doc, "discrete");
    d.list("m_list", cfg.m_list);
    d.number("t_max", cfg.discrete_t_max);
    d.flag("coupled", cfg.coupled);
    d.integer("max_events", cfg.max_events);
    d.finish();

    SectionReader s(doc, "sde");
    s.list("x_list", cfg.x_list);
    if (const auto* v = s.get("target")) {
        try {
            cfg.target = parse_target(v->string("sde.target"));
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what(), v->line);
        }
    }
    s.number("dt", cfg.sde.dt);
    s.number("eps_abs", cfg.sde.eps_abs);
    s.number("t_max", cfg.sde.t_max);
    s.finish();

    SectionReader di(doc, "dichotomy");
    if (const auto* v = di.get("engine")) {
        const auto& e = v->string("dichotomy.engine");
        if (e == "discrete") cfg.engine = Engine::DISCRETE;
        else if (e == "diffusion") cfg.engine = Engine::DIFFUSION;
        else throw ConfigError("dichotomy.engine must be \"discrete\" or \"diffusion\"", v->line);
    }
    di.number("plateau_below", cfg.plateau_below);
    di.number("growing_above", cfg.growing_above);
    di.finish();

    SectionReader sc(doc, "scaling");
    sc.list("n_list", cfg.n_list);
    sc.number("x", cfg.scaling_x);
    sc.number("t", cfg.scaling_t);
    sc.finish();

    SectionReader g(doc, "grid");
    g.list("alpha", cfg.grid_alpha);
    g.list("gamma", cfg.grid_gamma);
    g.finish();

    SectionReader o(doc, "output");
    if (const auto* v = o.get("dir")) cfg.out_dir = v->string("output.dir");
    o.flag("samples", cfg.write_samples);
    o.flag("trace", cfg.write_trace);
    o.finish();
    return cfg;
}

namespace {

void check_ladder(const std::vector<double>& v, const std::string& name, std::size_t min_levels, bool integral) {
    if (v.size() < min_levels) {
        if (v.empty()) throw ConfigError(name + " must not be empty");
        throw ConfigError(name + " needs at least " + std::to_string(min_levels) + " levels");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0) || !std::isfinite(v[i])) throw ConfigError(name + " entries must be positive");
        if (integral && v[i] != std::floor(v[i])) throw ConfigError(name + " entries must be integers");
        if (i > 0 && !(v[i] > v[i - 1])) throw ConfigError(name + " must be strictly increasing");
    }
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
    if (!cfg.seed) throw ConfigError("a seed is required (set 'seed' or pass --seed)");
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) throw ConfigError("lambda must be non-negative");
    if (!(cfg.mu > 0.0) || !std::isfinite(cfg.mu)) throw ConfigError("mu must be positive");
    if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
    const bool simulates = cfg.mode != Mode::CLASSIFY;
    if (simulates && cfg.replicas < 2) throw ConfigError("replicas must be at least 2");

    const bool needs_m = cfg.mode == Mode::DISCRETE || (cfg.mode == Mode::DICHOTOMY && cfg.engine == Engine::DISCRETE);
    const bool needs_x =
        cfg.mode == Mode::DIFFUSION || (cfg.mode == Mode::DICHOTOMY && cfg.engine == Engine::DIFFUSION);
    const std::size_t min_levels = cfg.mode == Mode::DICHOTOMY ? 3 : 1;
    if (needs_m) {
        check_ladder(cfg.m_list, "m_list", min_levels, true);
        if (!(cfg.discrete_t_max > 0.0)) throw ConfigError("discrete t_max must be positive");
        if (cfg.max_events < 1) throw ConfigError("max_events must be positive");
    }
    if (needs_x || cfg.mode == Mode::SCALING) {
        if (needs_x) check_ladder(cfg.x_list, "x_list", min_levels, false);
        try {
            compforest::validate(cfg.sde);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("sde: ") + e.what());
        }
    }
    if (cfg.mode == Mode::SCALING) {
        check_ladder(cfg.n_list, "n_list", 1, false);
        for (double n : cfg.n_list)
            if (n < 1.0) throw ConfigError("n_list entries must be at least 1");
        if (!(cfg.scaling_x > 0.0)) throw ConfigError("scaling x must be positive");
        if (!(cfg.scaling_t > 0.0)) throw ConfigError("scaling t must be positive");
    }
    if (cfg.grid_alpha.empty() != cfg.grid_gamma.empty())
        throw ConfigError("grid needs both alpha and gamma lists");
    if (!cfg.grid_alpha.empty()) {
        if (cfg.mode != Mode::CLASSIFY) throw ConfigError("a [grid] is only used by classify");
        check_ladder(cfg.grid_alpha, "grid.alpha", 1, false);
        for (std::size_t i = 1; i < cfg.grid_gamma.size(); ++i)
            if (!(cfg.grid_gamma[i] > cfg.grid_gamma[i - 1])) throw ConfigError("grid.gamma must be strictly increasing");
        for (double gm : cfg.grid_gamma)
            if (!(gm >= 0.0)) throw ConfigError("grid.gamma entries must be non-negative");
    }
    if (!(cfg.plateau_below <= cfg.growing_above)) throw ConfigError("plateau_below must not exceed growing_above");

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec || !fs::is_directory(cfg.out_dir)) throw ConfigError("cannot create output directory '" + cfg.out_dir + "'");
    const fs::path probe = fs::path(cfg.out_dir) / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw ConfigError("output directory '" + cfg.out_dir + "' is not writable");
    }
    fs::remove(probe, ec);
}

}  // namespace compforest
