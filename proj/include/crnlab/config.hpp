#pragma once

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "crnlab/analysis.hpp"
#include "crnlab/errors.hpp"
#include "crnlab/grid.hpp"
#include "crnlab/network.hpp"
#include "crnlab/simulate.hpp"

namespace crnlab {

enum class ExperimentKind { None, Instability, Stability };

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::None: return "none";
        case ExperimentKind::Instability: return "instability";
        case ExperimentKind::Stability: return "stability";
    }
    return "none";
}

/// One cosine perturbation term: amplitude * prod_axes cos(pi k_a x_a / L_a)
/// added to the named species. k = 0 is the constant shape.
struct ModeSpec {
    int species = 0;
    ModeIndex mode;
    double amplitude = 0.0;
};

/// A fully validated run description. Built by load_config / parse_config;
/// the init section holds the baseline constants (which fix the
/// stoichiometric class) plus cosine modes. For plain simulation runs the
/// initial data is constants + modes; experiment flows interpret the modes
/// as the perturbation shape around the computed equilibrium.
struct RunConfig {
    ReactionNetwork network;
    BoxDomain domain;
    SimConfig sim;
    std::vector<double> init_constants;  // per species index
    std::vector<ModeSpec> init_modes;
    ExperimentKind experiment = ExperimentKind::None;
    double delta = 1e-4;       // instability
    double theta0 = 0.05;      // instability
    double amplitude = 1e-2;   // stability
    double theta = 1.0;        // stability smallness bound
    std::string output_dir = "out";

    explicit RunConfig(ReactionNetwork net) : network(std::move(net)) {}
};

/// Initial data of the plain simulation flow: constants plus modes.
inline FieldSet build_initial_fields(const RunConfig& cfg) {
    FieldSet fs = make_fieldset(cfg.domain, cfg.network.species_count());
    for (int i = 0; i < cfg.network.species_count(); ++i)
        fs.fields[static_cast<std::size_t>(i)] =
            ScalarField::constant(cfg.domain, cfg.init_constants[static_cast<std::size_t>(i)]);
    for (const auto& m : cfg.init_modes) {
        const auto bump = cosine_mode(cfg.domain, m.mode, m.amplitude);
        auto& f = fs.fields[static_cast<std::size_t>(m.species)];
        for (std::size_t c = 0; c < f.values.size(); ++c) f.values[c] += bump.values[c];
    }
    return fs;
}

/// Perturbation shape of the experiment flows: the modes alone.
inline FieldSet build_mode_shape(const RunConfig& cfg) {
    FieldSet fs = make_fieldset(cfg.domain, cfg.network.species_count());
    for (const auto& m : cfg.init_modes) {
        const auto bump = cosine_mode(cfg.domain, m.mode, m.amplitude);
        auto& f = fs.fields[static_cast<std::size_t>(m.species)];
        for (std::size_t c = 0; c < f.values.size(); ++c) f.values[c] += bump.values[c];
    }
    return fs;
}

namespace detail {

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
    bool used = false;
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline double parse_double_value(const ConfigEntry& entry) {
    double v = 0.0;
    const std::string text = trim(entry.value);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError(entry.key, "expected a number, got '" + entry.value + "' (line " +
                                             std::to_string(entry.line) + ")");
    return v;
}

inline long long parse_int_value(const ConfigEntry& entry) {
    long long v = 0;
    const std::string text = trim(entry.value);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError(entry.key, "expected an integer, got '" + entry.value + "' (line " +
                                             std::to_string(entry.line) + ")");
    return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

class ConfigReader {
public:
    ConfigReader(std::string_view text, std::filesystem::path base_dir)
        : base_dir_(std::move(base_dir)) {
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t eol = std::min(text.find('\n', pos), text.size());
            std::string_view line = text.substr(pos, eol - pos);
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            const std::string trimmed = trim(line);
            if (!trimmed.empty()) {
                const auto eq = trimmed.find('=');
                if (eq == std::string::npos)
                    throw ValidationError("config", "expected 'key = value' on line " +
                                                        std::to_string(line_no));
                ConfigEntry entry;
                entry.key = trim(std::string_view(trimmed).substr(0, eq));
                entry.value = trim(std::string_view(trimmed).substr(eq + 1));
                entry.line = line_no;
                if (entry.key.empty())
                    throw ValidationError("config",
                                          "empty key on line " + std::to_string(line_no));
                entries_.push_back(std::move(entry));
            }
            if (eol == text.size()) break;
            pos = eol + 1;
        }
    }

    RunConfig build() {
        RunConfig cfg(read_network());
        apply_diffusion(cfg.network);
        cfg.domain = read_domain();
        read_time(cfg.sim);
        read_init(cfg);
        read_experiment(cfg);
        read_output(cfg);

        // Fail closed: anything unconsumed is an unknown key.
        for (const auto& e : entries_)
            if (!e.used)
                throw ValidationError(e.key, "unknown configuration key (line " +
                                                 std::to_string(e.line) + ")");

        validate(cfg);
        return cfg;
    }

private:
    ConfigEntry* find(const std::string& key) {
        ConfigEntry* found = nullptr;
        for (auto& e : entries_) {
            if (e.key != key) continue;
            if (found != nullptr)
                throw ValidationError(key, "specified more than once (line " +
                                               std::to_string(e.line) + ")");
            found = &e;
        }
        if (found != nullptr) found->used = true;
        return found;
    }

    ReactionNetwork read_network() {
        ConfigEntry* text = find("network.text");
        ConfigEntry* file = find("network.file");
        if (text != nullptr && file != nullptr)
            throw ValidationError("network.file", "network.text and network.file are exclusive");
        if (text != nullptr) return parse_network(text->value);
        if (file != nullptr) {
            const std::filesystem::path path = base_dir_ / trim(file->value);
            std::ifstream in(path);
            if (!in) throw ValidationError("network.file", "cannot open " + path.string());
            std::stringstream buffer;
            buffer << in.rdbuf();
            return parse_network(buffer.str());
        }
        throw ValidationError("network.text", "a network is required");
    }

    void apply_diffusion(ReactionNetwork& net) {
        for (auto& e : entries_) {
            if (e.key.rfind("diffusion.", 0) != 0) continue;
            e.used = true;
            const std::string name = e.key.substr(std::string("diffusion.").size());
            const int idx = net.species_index(name);
            if (idx < 0)
                throw ValidationError(e.key, "unknown species '" + name + "' (line " +
                                                 std::to_string(e.line) + ")");
            const double d = parse_double_value(e);
            if (d < 0.0) throw ValidationError(e.key, "must be nonnegative");
            net.set_diffusion(idx, d);
        }
    }

    BoxDomain read_domain() {
        int dim = 1;
        if (ConfigEntry* e = find("domain.dim")) dim = static_cast<int>(parse_int_value(*e));
        if (dim < 1 || dim > 3) throw ValidationError("domain.dim", "must be 1, 2 or 3");

        std::array<double, 3> lengths{1.0, 1.0, 1.0};
        if (ConfigEntry* e = find("domain.lengths")) {
            const auto parts = split(trim(e->value), ',');
            if (static_cast<int>(parts.size()) != dim)
                throw ValidationError("domain.lengths",
                                      "expected " + std::to_string(dim) + " comma-separated values");
            for (int a = 0; a < dim; ++a) {
                ConfigEntry fake{e->key, parts[static_cast<std::size_t>(a)], e->line, true};
                lengths[static_cast<std::size_t>(a)] = parse_double_value(fake);
            }
        }
        std::array<int, 3> cells{128, 1, 1};
        if (dim > 1) cells = {32, 32, dim > 2 ? 32 : 1};
        if (ConfigEntry* e = find("domain.cells")) {
            const auto parts = split(trim(e->value), ',');
            if (static_cast<int>(parts.size()) != dim)
                throw ValidationError("domain.cells",
                                      "expected " + std::to_string(dim) + " comma-separated values");
            for (int a = 0; a < dim; ++a) {
                ConfigEntry fake{e->key, parts[static_cast<std::size_t>(a)], e->line, true};
                cells[static_cast<std::size_t>(a)] = static_cast<int>(parse_int_value(fake));
                if (cells[static_cast<std::size_t>(a)] < 2)
                    throw ValidationError("domain.cells", "need at least 2 cells per axis");
            }
        }
        return BoxDomain::make(dim, lengths, cells);
    }

    void read_time(SimConfig& sim) {
        sim.t_end = 10.0;
        if (ConfigEntry* e = find("time.dt")) sim.dt = parse_double_value(*e);
        if (ConfigEntry* e = find("time.t_end")) sim.t_end = parse_double_value(*e);
        if (ConfigEntry* e = find("time.record_every"))
            sim.record_every = static_cast<int>(parse_int_value(*e));
        if (ConfigEntry* e = find("time.negativity_tol"))
            sim.negativity_tol = parse_double_value(*e);
        if (ConfigEntry* e = find("time.scheme")) {
            const std::string v = trim(e->value);
            if (v == "strang")
                sim.scheme = Scheme::Strang;
            else if (v == "explicit-rk4")
                sim.scheme = Scheme::ExplicitRk4;
            else
                throw ValidationError("time.scheme", "expected 'strang' or 'explicit-rk4', got '" +
                                                         v + "'");
        }
    }

    void read_init(RunConfig& cfg) {
        cfg.init_constants.assign(static_cast<std::size_t>(cfg.network.species_count()), 1.0);
        for (auto& e : entries_) {
            if (e.key.rfind("init.constant.", 0) != 0) continue;
            e.used = true;
            const std::string name = e.key.substr(std::string("init.constant.").size());
            const int idx = cfg.network.species_index(name);
            if (idx < 0)
                throw ValidationError(e.key, "unknown species '" + name + "' (line " +
                                                 std::to_string(e.line) + ")");
            const double v = parse_double_value(e);
            if (v < 0.0) throw ValidationError(e.key, "must be nonnegative");
            cfg.init_constants[static_cast<std::size_t>(idx)] = v;
        }
        for (auto& e : entries_) {
            if (e.key.rfind("init.mode.", 0) != 0) continue;
            e.used = true;
            const std::string name = e.key.substr(std::string("init.mode.").size());
            const int idx = cfg.network.species_index(name);
            if (idx < 0)
                throw ValidationError(e.key, "unknown species '" + name + "' (line " +
                                                 std::to_string(e.line) + ")");
            // Value: "<k[,k[,k]]> <amplitude>"
            std::istringstream parts(e.value);
            std::string k_text, amp_text, extra;
            if (!(parts >> k_text >> amp_text) || (parts >> extra))
                throw ValidationError(e.key, "expected '<mode> <amplitude>' (line " +
                                                 std::to_string(e.line) + ")");
            ModeSpec spec;
            spec.species = idx;
            const auto ks = split(k_text, ',');
            if (static_cast<int>(ks.size()) > cfg.domain.dim)
                throw ValidationError(e.key, "mode has more components than domain.dim");
            for (std::size_t a = 0; a < ks.size(); ++a) {
                ConfigEntry fake{e.key, ks[a], e.line, true};
                spec.mode.k[a] = static_cast<int>(parse_int_value(fake));
                if (spec.mode.k[a] < 0 ||
                    spec.mode.k[a] >= cfg.domain.cells[a])
                    throw ValidationError(e.key, "mode index out of range for the grid");
            }
            ConfigEntry fake{e.key, amp_text, e.line, true};
            spec.amplitude = parse_double_value(fake);
            cfg.init_modes.push_back(spec);
        }
    }

    void read_experiment(RunConfig& cfg) {
        if (ConfigEntry* e = find("experiment.kind")) {
            const std::string v = trim(e->value);
            if (v == "none")
                cfg.experiment = ExperimentKind::None;
            else if (v == "instability")
                cfg.experiment = ExperimentKind::Instability;
            else if (v == "stability")
                cfg.experiment = ExperimentKind::Stability;
            else
                throw ValidationError("experiment.kind",
                                      "expected none, instability or stability, got '" + v + "'");
        }
        if (ConfigEntry* e = find("experiment.delta")) cfg.delta = parse_double_value(*e);
        if (ConfigEntry* e = find("experiment.theta0")) cfg.theta0 = parse_double_value(*e);
        if (ConfigEntry* e = find("experiment.amplitude")) cfg.amplitude = parse_double_value(*e);
        if (ConfigEntry* e = find("experiment.theta")) cfg.theta = parse_double_value(*e);
    }

    void read_output(RunConfig& cfg) {
        if (ConfigEntry* e = find("output.directory")) cfg.output_dir = trim(e->value);
        if (ConfigEntry* e = find("output.snapshot_every"))
            cfg.sim.snapshot_every = static_cast<int>(parse_int_value(*e));
    }

    void validate(const RunConfig& cfg) const {
        cfg.sim.validate();
        if (cfg.delta < 0.0) throw ValidationError("experiment.delta", "must be nonnegative");
        if (cfg.experiment == ExperimentKind::Instability && !(cfg.theta0 > cfg.delta))
            throw ValidationError("experiment.theta0", "must exceed experiment.delta");
        if (cfg.amplitude < 0.0)
            throw ValidationError("experiment.amplitude", "must be nonnegative");
        if (!(cfg.theta > 0.0)) throw ValidationError("experiment.theta", "must be positive");
        if (cfg.output_dir.empty())
            throw ValidationError("output.directory", "must not be empty");

        // The composed initial data must stay pointwise nonnegative.
        const FieldSet init = build_initial_fields(cfg);
        for (std::size_t i = 0; i < init.fields.size(); ++i)
            for (double v : init.fields[i].values)
                if (v < 0.0)
                    throw ValidationError(
                        "init.mode." + cfg.network.species()[i].name,
                        "initial data dips below zero (min " + format_double(v) + ")");
    }

    std::filesystem::path base_dir_;
    std::vector<ConfigEntry> entries_;
};

}  // namespace detail

/// Parse a line-oriented `section.key = value` configuration. '#' starts a
/// comment; unknown keys are errors.
inline RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".") {
    return detail::ConfigReader(text, base_dir).build();
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(),
                        path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace crnlab
