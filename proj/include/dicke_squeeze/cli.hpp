// cli.hpp: run configuration, strict JSON parsing, and the command runners
// behind the dicke_squeeze executable.
//
// Frequencies in configs are linear (Hz); they become angular exactly once,
// when a RunConfig is turned into model parameters.

#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dicke_squeeze/dynamics.hpp"
#include "dicke_squeeze/elimination.hpp"
#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/metrics.hpp"
#include "dicke_squeeze/model.hpp"
#include "dicke_squeeze/sweeps.hpp"

#ifndef DICKE_SQUEEZE_VERSION
#define DICKE_SQUEEZE_VERSION "0.0.0"
#endif

namespace dicke::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* version = DICKE_SQUEEZE_VERSION;

enum class Command { evolve, sweep_theta, sweep_n, fit, presets, check_elimination };

inline constexpr std::array<std::pair<Command, std::string_view>, 6> command_names{{
    {Command::evolve, "evolve"},
    {Command::sweep_theta, "sweep-theta"},
    {Command::sweep_n, "sweep-n"},
    {Command::fit, "fit"},
    {Command::presets, "presets"},
    {Command::check_elimination, "check-elimination"},
}};

inline std::string to_string(Command c) {
    for (const auto& [k, v] : command_names)
        if (k == c) return std::string(v);
    return "?";
}

inline Command parse_command(std::string_view s) {
    for (const auto& [k, v] : command_names)
        if (v == s) return k;
    throw ConfigError("command: unknown command '" + std::string(s) +
                      "' (expected evolve, sweep-theta, sweep-n, fit, presets or check-elimination)");
}

/// Real-valued couplings of the four-level model, in Hz.
struct PhysicalConfig {
    double g_r_hz = 0.0, g_s_hz = 0.0;
    double omega_r_hz = 0.0, omega_s_hz = 0.0;
    double delta_r_hz = 0.0, delta_s_hz = 0.0;
    double delta_cav_hz = 0.0;

    friend bool operator==(const PhysicalConfig&, const PhysicalConfig&) = default;
};

struct EliminationConfig {
    int n_atoms = 1;
    int n_max = 6;
    int samples = 20000;

    friend bool operator==(const EliminationConfig&, const EliminationConfig&) = default;
};

struct FitConfig {
    double min_n = default_fit_min_n;
    std::string input;                          ///< results.csv of a sweep-n run
    std::vector<std::array<double, 2>> points;  ///< explicit (N, xi_R^2) pairs
    std::optional<double> a, b;                 ///< a printed fit, used as is
    std::vector<double> extrapolate_n{1e6};

    friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

struct RunConfig {
    Command command = Command::evolve;
    std::string preset;  ///< empty: parameters given directly

    double omega_c_hz = 0.0;
    double omega_q_hz = 0.0;
    double kappa_hz = 0.0;
    double gamma_phi_hz = 0.0;
    std::optional<double> lambda_hz;  ///< evolve only; otherwise lambda follows theta
    std::optional<double> kappa_ratio, omega_q_ratio, gamma_phi_ratio;

    int n_atoms = 50;
    int n_max = 0;  ///< 0: automatic
    double n_max_tail_target = 1e-5;
    double theta_ratio = 1.0;
    double theta_factor = 1.0;
    std::vector<double> theta_grid;
    std::vector<double> n_grid;
    double t_final_periods = 1.0;
    int samples_per_period = 200;
    Frame frame = Frame::interaction;
    double tail_guard = default_tail_guard;
    Tolerances tolerances;

    PhysicalConfig physical;
    EliminationConfig elimination;
    FitConfig fit;

    std::string output = "dicke_out";
    std::uint64_t seed = 0;
    int workers = 1;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// ---------------------------------------------------------------------------
// Strict JSON reading

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object())
            throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected a JSON object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key); }

    [[nodiscard]] bool is_null(const std::string& key) const { return has(key) && obj_.at(key).is_null(); }

    [[nodiscard]] double number(const std::string& key) {
        const json& v = take(key);
        if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(where(key) + ": must be finite");
        return x;
    }

    [[nodiscard]] double non_negative(const std::string& key) {
        const double x = number(key);
        if (x < 0.0) throw ConfigError(where(key) + ": must be non-negative, got " + std::to_string(x));
        return x;
    }

    [[nodiscard]] double positive(const std::string& key) {
        const double x = number(key);
        if (!(x > 0.0)) throw ConfigError(where(key) + ": must be positive, got " + std::to_string(x));
        return x;
    }

    [[nodiscard]] std::optional<double> optional_non_negative(const std::string& key) {
        if (is_null(key)) {
            take(key);
            return std::nullopt;
        }
        return non_negative(key);
    }

    [[nodiscard]] std::optional<double> optional_number(const std::string& key) {
        if (is_null(key)) {
            take(key);
            return std::nullopt;
        }
        return number(key);
    }

    [[nodiscard]] long long integer(const std::string& key, long long lo) {
        const json& v = take(key);
        if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
        const long long x = v.get<long long>();
        if (x < lo) throw ConfigError(where(key) + ": must be >= " + std::to_string(lo) + ", got " + std::to_string(x));
        return x;
    }

    [[nodiscard]] std::string string(const std::string& key) {
        const json& v = take(key);
        if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
        return v.get<std::string>();
    }

    [[nodiscard]] std::vector<double> numbers(const std::string& key) {
        const json& v = take(key);
        if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(where(key) + ": expected an array of numbers");
            out.push_back(e.get<double>());
            if (!std::isfinite(out.back())) throw ConfigError(where(key) + ": entries must be finite");
        }
        return out;
    }

    [[nodiscard]] Reader object(const std::string& key) { return Reader(take(key), where(key)); }

    [[nodiscard]] const json& raw(const std::string& key) { return take(key); }

    [[nodiscard]] std::string where(const std::string& key) const { return join_path(path_, key); }

    void finish() const {
        for (const auto& [k, v] : obj_.items())
            if (!used_.count(k)) throw ConfigError(where(k) + ": unknown key");
    }

private:
    const json& take(const std::string& key) {
        if (!obj_.contains(key)) throw ConfigError(where(key) + ": missing");
        used_.insert(key);
        return obj_.at(key);
    }

    const json& obj_;
    std::string path_;
    std::set<std::string> used_;
};

inline PhysicalConfig to_config(const PhysicalParams& p) {
    PhysicalConfig c;
    c.g_r_hz = to_hz(p.g_r.real());
    c.g_s_hz = to_hz(p.g_s.real());
    c.omega_r_hz = to_hz(p.Omega_r.real());
    c.omega_s_hz = to_hz(p.Omega_s.real());
    c.delta_r_hz = to_hz(p.Delta_r);
    c.delta_s_hz = to_hz(p.Delta_s);
    c.delta_cav_hz = to_hz(p.delta_cav);
    return c;
}

}  // namespace detail

/// Defaults for a preset name; an empty name gives the rb_atoms physical
/// block and an ideal omega_c = 1 Hz model.
inline RunConfig defaults_for(Command command, const std::string& preset) {
    RunConfig c;
    c.command = command;
    c.preset = preset;
    c.physical = detail::to_config(rb_physical(1));
    if (preset.empty()) {
        c.omega_c_hz = 1.0;
    } else {
        const Preset p = load_preset(preset);
        c.omega_c_hz = to_hz(p.dicke.omega_c);
        c.omega_q_hz = to_hz(p.dicke.omega_q);
        c.kappa_hz = to_hz(p.dicke.kappa);
        c.gamma_phi_hz = to_hz(p.dicke.Gamma_phi);
        c.theta_factor = p.theta_max_factor;
        if (p.physical) c.physical = detail::to_config(*p.physical);
    }
    c.theta_grid = default_theta_grid();
    c.n_grid = default_n_grid();
    return c;
}

inline RunConfig parse_config(const json& root) {
    detail::Reader r(root, "");
    if (!r.has("command")) throw ConfigError("command: missing");
    const Command command = parse_command(r.string("command"));
    const std::string preset = r.has("preset") && !r.is_null("preset") ? r.string("preset") : std::string{};
    if (r.is_null("preset")) (void)r.raw("preset");
    if (!preset.empty()) {
        bool known = false;
        for (auto n : preset_names) known = known || n == preset;
        if (!known) throw ConfigError("preset: unknown preset '" + preset + "' (expected rb_atoms, siv_centers or bec)");
    }
    RunConfig c = defaults_for(command, preset);

    if (r.has("omega_c_hz")) c.omega_c_hz = r.positive("omega_c_hz");
    if (r.has("omega_q_hz")) c.omega_q_hz = r.non_negative("omega_q_hz");
    if (r.has("kappa_hz")) c.kappa_hz = r.non_negative("kappa_hz");
    if (r.has("gamma_phi_hz")) c.gamma_phi_hz = r.non_negative("gamma_phi_hz");
    if (r.has("lambda_hz")) c.lambda_hz = r.optional_number("lambda_hz");
    if (r.has("kappa_ratio")) c.kappa_ratio = r.optional_non_negative("kappa_ratio");
    if (r.has("omega_q_ratio")) c.omega_q_ratio = r.optional_non_negative("omega_q_ratio");
    if (r.has("gamma_phi_ratio")) c.gamma_phi_ratio = r.optional_non_negative("gamma_phi_ratio");
    if (r.has("n_atoms")) c.n_atoms = static_cast<int>(r.integer("n_atoms", 2));
    if (r.has("n_max")) {
        c.n_max = static_cast<int>(r.integer("n_max", 0));
        if (c.n_max == 1) throw ConfigError("n_max: must be 0 (automatic) or >= 2");
    }
    if (r.has("n_max_tail_target")) c.n_max_tail_target = r.positive("n_max_tail_target");
    if (r.has("theta_ratio")) c.theta_ratio = r.positive("theta_ratio");
    if (r.has("theta_factor")) c.theta_factor = r.positive("theta_factor");
    if (r.has("theta_grid")) c.theta_grid = r.numbers("theta_grid");
    if (r.has("n_grid")) c.n_grid = r.numbers("n_grid");
    if (r.has("t_final_periods")) c.t_final_periods = r.positive("t_final_periods");
    if (r.has("samples_per_period")) c.samples_per_period = static_cast<int>(r.integer("samples_per_period", 1));
    if (r.has("frame")) {
        const std::string f = r.string("frame");
        if (f == "lab") c.frame = Frame::lab;
        else if (f == "interaction") c.frame = Frame::interaction;
        else throw ConfigError("frame: expected 'lab' or 'interaction', got '" + f + "'");
    }
    if (r.has("tail_guard")) c.tail_guard = r.positive("tail_guard");
    if (r.has("tolerances")) {
        auto t = r.object("tolerances");
        if (t.has("rtol")) c.tolerances.rtol = t.positive("rtol");
        if (t.has("atol")) c.tolerances.atol = t.positive("atol");
        if (t.has("initial_step")) c.tolerances.initial_step = t.non_negative("initial_step");
        if (t.has("max_steps")) c.tolerances.max_steps = static_cast<std::size_t>(t.integer("max_steps", 1));
        t.finish();
    }
    if (r.has("physical")) {
        auto p = r.object("physical");
        auto& ph = c.physical;
        if (p.has("g_r_hz")) ph.g_r_hz = p.number("g_r_hz");
        if (p.has("g_s_hz")) ph.g_s_hz = p.number("g_s_hz");
        if (p.has("omega_r_hz")) ph.omega_r_hz = p.number("omega_r_hz");
        if (p.has("omega_s_hz")) ph.omega_s_hz = p.number("omega_s_hz");
        if (p.has("delta_r_hz")) ph.delta_r_hz = p.number("delta_r_hz");
        if (p.has("delta_s_hz")) ph.delta_s_hz = p.number("delta_s_hz");
        if (p.has("delta_cav_hz")) ph.delta_cav_hz = p.number("delta_cav_hz");
        p.finish();
        if (ph.delta_r_hz == 0.0) throw ConfigError("physical.delta_r_hz: must be nonzero");
        if (ph.delta_s_hz == 0.0) throw ConfigError("physical.delta_s_hz: must be nonzero");
    }
    if (r.has("elimination")) {
        auto e = r.object("elimination");
        if (e.has("n_atoms")) {
            c.elimination.n_atoms = static_cast<int>(e.integer("n_atoms", 1));
            if (c.elimination.n_atoms > max_full_model_atoms)
                throw ConfigError("elimination.n_atoms: the four-level model supports at most 2 atoms");
        }
        if (e.has("n_max")) c.elimination.n_max = static_cast<int>(e.integer("n_max", 2));
        if (e.has("samples")) c.elimination.samples = static_cast<int>(e.integer("samples", 1));
        e.finish();
    }
    if (r.has("fit")) {
        auto f = r.object("fit");
        if (f.has("min_n")) c.fit.min_n = f.non_negative("min_n");
        if (f.has("input")) c.fit.input = f.string("input");
        if (f.has("points")) {
            const json& pts = f.raw("points");
            if (!pts.is_array()) throw ConfigError("fit.points: expected an array of [N, xi_R_sq] pairs");
            c.fit.points.clear();
            for (const auto& p : pts) {
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                    throw ConfigError("fit.points: expected an array of [N, xi_R_sq] pairs");
                c.fit.points.push_back({p[0].get<double>(), p[1].get<double>()});
            }
        }
        if (f.has("a")) c.fit.a = f.optional_number("a");
        if (f.has("b")) c.fit.b = f.optional_number("b");
        if (f.has("extrapolate_n")) c.fit.extrapolate_n = f.numbers("extrapolate_n");
        f.finish();
        if (c.fit.a.has_value() != c.fit.b.has_value()) throw ConfigError("fit: 'a' and 'b' must be given together");
        if (c.fit.a && !(*c.fit.a > 0.0)) throw ConfigError("fit.a: must be positive");
    }
    if (r.has("output")) c.output = r.string("output");
    if (r.has("seed")) c.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
    if (r.has("workers")) c.workers = static_cast<int>(r.integer("workers", 1));
    r.finish();
    return c;
}

inline RunConfig parse_config_text(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return parse_config(root);
}

inline json emit_config(const RunConfig& c) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["command"] = to_string(c.command);
    j["preset"] = c.preset.empty() ? json(nullptr) : json(c.preset);
    j["omega_c_hz"] = c.omega_c_hz;
    j["omega_q_hz"] = c.omega_q_hz;
    j["kappa_hz"] = c.kappa_hz;
    j["gamma_phi_hz"] = c.gamma_phi_hz;
    j["lambda_hz"] = opt(c.lambda_hz);
    j["kappa_ratio"] = opt(c.kappa_ratio);
    j["omega_q_ratio"] = opt(c.omega_q_ratio);
    j["gamma_phi_ratio"] = opt(c.gamma_phi_ratio);
    j["n_atoms"] = c.n_atoms;
    j["n_max"] = c.n_max;
    j["n_max_tail_target"] = c.n_max_tail_target;
    j["theta_ratio"] = c.theta_ratio;
    j["theta_factor"] = c.theta_factor;
    j["theta_grid"] = c.theta_grid;
    j["n_grid"] = c.n_grid;
    j["t_final_periods"] = c.t_final_periods;
    j["samples_per_period"] = c.samples_per_period;
    j["frame"] = dicke::to_string(c.frame);
    j["tail_guard"] = c.tail_guard;
    j["tolerances"] = {{"rtol", c.tolerances.rtol},
                       {"atol", c.tolerances.atol},
                       {"initial_step", c.tolerances.initial_step},
                       {"max_steps", c.tolerances.max_steps}};
    j["physical"] = {{"g_r_hz", c.physical.g_r_hz},         {"g_s_hz", c.physical.g_s_hz},
                     {"omega_r_hz", c.physical.omega_r_hz}, {"omega_s_hz", c.physical.omega_s_hz},
                     {"delta_r_hz", c.physical.delta_r_hz}, {"delta_s_hz", c.physical.delta_s_hz},
                     {"delta_cav_hz", c.physical.delta_cav_hz}};
    j["elimination"] = {{"n_atoms", c.elimination.n_atoms},
                        {"n_max", c.elimination.n_max},
                        {"samples", c.elimination.samples}};
    json pts = json::array();
    for (const auto& p : c.fit.points) pts.push_back({p[0], p[1]});
    j["fit"] = {{"min_n", c.fit.min_n}, {"input", c.fit.input},          {"points", pts},
                {"a", opt(c.fit.a)},    {"b", opt(c.fit.b)}, {"extrapolate_n", c.fit.extrapolate_n}};
    j["output"] = c.output;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    return j;
}

// ---------------------------------------------------------------------------
// Config -> model parameters (the only Hz -> rad/s conversion)

inline DickeParams dicke_params(const RunConfig& c) {
    DickeParams d;
    d.omega_c = to_angular(c.omega_c_hz);
    d.omega_q = to_angular(c.omega_q_hz);
    d.kappa = to_angular(c.kappa_hz);
    d.Gamma_phi = to_angular(c.gamma_phi_hz);
    d.lambda = c.lambda_hz ? to_angular(*c.lambda_hz) : 0.0;
    d.n_atoms = c.n_atoms;
    return d;
}

inline PhysicalParams physical_params(const RunConfig& c, int n_atoms) {
    PhysicalParams p;
    const auto& ph = c.physical;
    p.n_atoms = n_atoms;
    p.g_r = to_angular(ph.g_r_hz);
    p.g_s = to_angular(ph.g_s_hz);
    p.Omega_r = to_angular(ph.omega_r_hz);
    p.Omega_s = to_angular(ph.omega_s_hz);
    p.Delta_r = to_angular(ph.delta_r_hz);
    p.Delta_s = to_angular(ph.delta_s_hz);
    p.delta_cav = to_angular(ph.delta_cav_hz);
    return p;
}

inline SweepSpec sweep_spec(const RunConfig& c) {
    SweepSpec s;
    s.kind = c.command == Command::sweep_n ? SweepKind::n_sweep : SweepKind::theta_sweep;
    s.base = dicke_params(c);
    s.ratios = {c.kappa_ratio, c.omega_q_ratio, c.gamma_phi_ratio};
    s.grid = s.kind == SweepKind::n_sweep ? c.n_grid : c.theta_grid;
    s.n_atoms = c.n_atoms;
    s.theta_factor = c.theta_factor;
    s.n_max = c.n_max;
    s.n_max_tail_target = c.n_max_tail_target;
    s.samples_per_period = c.samples_per_period;
    s.tolerances = c.tolerances;
    s.frame = c.frame;
    s.tail_guard = c.tail_guard;
    s.workers = c.workers;
    return s;
}

// ---------------------------------------------------------------------------
// Output

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw Error("csv row width does not match header");
        rows_.push_back(std::move(row));
    }

    [[nodiscard]] std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_field(r[i]);
            out += "\r\n";
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    [[nodiscard]] const std::vector<std::vector<std::string>>& rows() const { return rows_; }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Minimal RFC 4180 reader: returns header-keyed rows.
inline std::vector<std::map<std::string, std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> table;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = any = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                table.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += ch;
            any = true;
        }
    }
    if (quoted) throw ConfigError("csv: unterminated quoted field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        table.push_back(std::move(row));
    }
    std::vector<std::map<std::string, std::string>> out;
    if (table.empty()) return out;
    for (std::size_t r = 1; r < table.size(); ++r) {
        if (table[r].size() != table[0].size())
            throw ConfigError("csv: row " + std::to_string(r) + " has " + std::to_string(table[r].size()) +
                              " fields, header has " + std::to_string(table[0].size()));
        std::map<std::string, std::string> m;
        for (std::size_t k = 0; k < table[0].size(); ++k) m[table[0][k]] = table[r][k];
        out.push_back(std::move(m));
    }
    return out;
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open " + tmp.string() + " for writing");
        f << content;
        f.flush();
        if (!f) throw Error("write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Commands

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_diagnostic = 2;

struct RunOutcome {
    int exit_code = exit_ok;
    std::optional<CsvTable> results;
    json run;  ///< provenance, written to run.json
    std::optional<json> fit;
};

namespace detail {

inline json diagnostics_json(const Diagnostics& d) {
    return {{"trace_drift", d.trace_drift},
            {"hermiticity_drift", d.hermiticity_drift},
            {"min_eigenvalue", d.min_eigenvalue},
            {"tail_population", d.tail_population},
            {"n_max_used", d.n_max_used},
            {"retried", d.retried},
            {"steps", d.integrator.steps},
            {"rhs_calls", d.integrator.rhs_calls},
            {"wall_seconds", d.wall_seconds}};
}

inline json metrics_json(const SqueezingReport& m) {
    return {{"xi_s_sq", m.xi_s_sq},
            {"xi_s_sq_printed", m.xi_s_sq_printed},
            {"xi_R_sq", m.xi_R_sq},
            {"xi_R_db", m.xi_R_sq_db},
            {"xi_min_var_sq", m.xi_min_var_sq},
            {"mean_spin", {m.j_vector[0], m.j_vector[1], m.j_vector[2]}},
            {"n_a", m.n_a},
            {"n_a_sq", m.n_a_sq},
            {"delta_phi", m.delta_phi}};
}

inline json fit_json(const FitResult& f) {
    json pts = json::array();
    for (std::size_t i = 0; i < f.points.size(); ++i)
        pts.push_back({{"n", f.points[i].n}, {"xi_R_sq", f.points[i].xi_sq}, {"log_residual", f.residuals[i]}});
    return {{"a", f.a}, {"b", f.b}, {"r_squared", f.r_squared}, {"n_points", f.n_points}, {"points", pts}};
}

inline json extrapolations_json(const FitResult& f, const std::vector<double>& targets) {
    json out = json::array();
    for (double n : targets) {
        const Extrapolation e = extrapolate(f, n);
        out.push_back({{"n", e.n_target}, {"xi_R_sq", e.xi_sq}, {"xi_R_db", e.db}, {"label", e.label}});
    }
    return out;
}

inline json fit_report(const std::vector<FitPoint>& points, const FitConfig& cfg) {
    const FitResult f = fit_power_law(points);
    json j = fit_json(f);
    json sens = json::array();
    for (const auto& s : fit_range_sensitivity(points))
        sens.push_back({{"range", s.label}, {"a", s.fit.a}, {"b", s.fit.b}, {"r_squared", s.fit.r_squared},
                        {"n_points", s.fit.n_points}});
    j["fit_range_sensitivity"] = sens;
    j["min_n"] = cfg.min_n;
    j["extrapolations"] = extrapolations_json(f, cfg.extrapolate_n);
    return j;
}

inline std::string opt_field(const std::optional<SqueezingReport>& m, double SqueezingReport::* field) {
    return m ? format_double((*m).*field) : std::string{};
}

inline json sweep_rows_json(const SweepResult& sweep, double omega_c) {
    json rows = json::array();
    for (const auto& r : sweep.rows) {
        json row = {{"grid_value", r.grid_value},
                    {"n_atoms", r.n_atoms},
                    {"theta_ratio", r.theta_ratio},
                    {"theta", r.theta},
                    {"lambda_hz", to_hz(r.lambda * omega_c)},
                    {"status", dicke::to_string(r.status)},
                    {"message", r.message},
                    {"diagnostics", diagnostics_json(r.diagnostics)}};
        if (r.metrics) row["metrics"] = metrics_json(*r.metrics);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace detail

inline RunOutcome run_evolve(const RunConfig& c) {
    RunOutcome out;
    const DickeParams d_abs = dicke_params(c);
    const DickeParams d = normalized(d_abs, {c.kappa_ratio, c.omega_q_ratio, c.gamma_phi_ratio});
    EvolutionSpec es;
    es.dicke = d;
    es.dicke.n_atoms = c.n_atoms;
    const double theta = c.theta_ratio * theta_opt(c.n_atoms);
    es.dicke.lambda = c.lambda_hz ? d.lambda : lambda_from_theta(theta, 1.0);
    const int n_max = c.n_max > 0 ? c.n_max : suggest_n_max(c.n_atoms, es.dicke.lambda, 1.0, c.n_max_tail_target);
    es.space = HilbertSpace(c.n_atoms, n_max);
    es.t_final = c.t_final_periods * decoupling_time(1.0);
    es.samples_per_period = c.samples_per_period;
    es.tolerances = c.tolerances;
    es.frame = c.frame;
    es.tail_guard = c.tail_guard;
    const EvolutionResult res = evolve_master(es);

    CsvTable table({"t", "t_over_t1", "cavity_photons", "tail_pop"});
    const double t1 = decoupling_time(1.0);
    for (std::size_t i = 0; i < res.times.size(); ++i)
        table.add({format_double(res.times[i] / d_abs.omega_c), format_double(res.times[i] / t1),
                   format_double(res.cavity_photons[i]), format_double(res.tail_population[i])});
    out.results = std::move(table);

    json summary = {{"n_atoms", c.n_atoms},
                    {"theta", es.dicke.lambda * es.dicke.lambda * 4.0 * t1},
                    {"theta_ratio", es.dicke.lambda * es.dicke.lambda * 4.0 * t1 / theta_opt(c.n_atoms)},
                    {"lambda_hz", to_hz(es.dicke.lambda * d_abs.omega_c)},
                    {"status", dicke::to_string(res.status)},
                    {"message", res.message},
                    {"diagnostics", detail::diagnostics_json(res.diagnostics)}};
    if (res.status != RunStatus::integration_failed) {
        const DenseMat spin = partial_trace_cavity(res.final_state, res.space);
        try {
            summary["metrics"] = detail::metrics_json(squeezing_report(spin, c.n_atoms));
        } catch (const StateError& e) {
            summary["metrics_error"] = e.what();
        }
        const DecouplingReport dec = decoupling_check(res);
        summary["decoupling"] = {{"time", dec.time / d_abs.omega_c},
                                 {"cavity_photons", dec.cavity_photons},
                                 {"spin_purity", dec.spin_purity},
                                 {"decoupled", dec.decoupled}};
    }
    out.run["result"] = summary;
    out.exit_code = res.ok() ? exit_ok : exit_diagnostic;
    return out;
}

inline RunOutcome run_sweep_command(const RunConfig& c, const RowCallback& on_row = {}) {
    RunOutcome out;
    const SweepSpec spec = sweep_spec(c);
    const SweepResult sweep = run_sweep(spec, on_row);
    const double w = to_angular(c.omega_c_hz);
    using detail::opt_field;
    if (spec.kind == SweepKind::theta_sweep) {
        CsvTable t({"theta_ratio", "theta", "lambda", "xi_s_sq", "xi_R_sq", "xi_R_db", "trace_drift", "tail_pop",
                    "status"});
        for (const auto& r : sweep.rows)
            t.add({format_double(r.theta_ratio), format_double(r.theta), format_double(to_hz(r.lambda * w)),
                   opt_field(r.metrics, &SqueezingReport::xi_s_sq), opt_field(r.metrics, &SqueezingReport::xi_R_sq),
                   opt_field(r.metrics, &SqueezingReport::xi_R_sq_db), format_double(r.diagnostics.trace_drift),
                   format_double(r.diagnostics.tail_population), dicke::to_string(r.status)});
        out.results = std::move(t);
        if (const SweepRow* b = sweep.best())
            out.run["best"] = {{"theta_ratio", b->theta_ratio}, {"xi_R_db", b->metrics->xi_R_sq_db}};
    } else {
        CsvTable t({"n_atoms", "theta_ratio", "theta", "lambda", "xi_s_sq", "xi_R_sq", "xi_R_db", "trace_drift",
                    "tail_pop", "status"});
        for (const auto& r : sweep.rows)
            t.add({std::to_string(r.n_atoms), format_double(r.theta_ratio), format_double(r.theta),
                   format_double(to_hz(r.lambda * w)), opt_field(r.metrics, &SqueezingReport::xi_s_sq),
                   opt_field(r.metrics, &SqueezingReport::xi_R_sq), opt_field(r.metrics, &SqueezingReport::xi_R_sq_db),
                   format_double(r.diagnostics.trace_drift), format_double(r.diagnostics.tail_population),
                   dicke::to_string(r.status)});
        out.results = std::move(t);
        const auto points = fit_points(sweep, c.fit.min_n);
        if (points.size() >= 3) {
            json fit = detail::fit_report(points, c.fit);
            json excluded = json::array();
            for (const auto& r : sweep.rows)
                if (!r.ok() || r.n_atoms < c.fit.min_n)
                    excluded.push_back({{"n_atoms", r.n_atoms},
                                        {"reason", r.ok() ? "below min_n" : dicke::to_string(r.status)}});
            fit["excluded"] = excluded;
            out.fit = fit;
        } else {
            out.run["fit_skipped"] = "fewer than 3 usable rows";
        }
    }
    out.run["rows"] = detail::sweep_rows_json(sweep, w);
    out.exit_code = sweep.all_ok() ? exit_ok : exit_diagnostic;
    return out;
}

inline std::vector<FitPoint> points_from_csv(const std::string& path, double min_n) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("fit.input: cannot read '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    std::vector<FitPoint> out;
    for (const auto& row : read_csv(ss.str())) {
        if (!row.count("n_atoms") || !row.count("xi_R_sq"))
            throw ConfigError("fit.input: expected columns n_atoms and xi_R_sq");
        if (row.count("status") && row.at("status") != "ok") continue;
        const double n = std::stod(row.at("n_atoms"));
        if (n >= min_n) out.push_back({n, std::stod(row.at("xi_R_sq"))});
    }
    return out;
}

inline RunOutcome run_fit(const RunConfig& c) {
    RunOutcome out;
    json fit;
    if (c.fit.a) {
        FitResult f;
        f.a = *c.fit.a;
        f.b = *c.fit.b;
        fit = {{"a", f.a}, {"b", f.b}, {"source", "given"}};
        fit["extrapolations"] = detail::extrapolations_json(f, c.fit.extrapolate_n);
    } else {
        std::vector<FitPoint> points;
        for (const auto& p : c.fit.points)
            if (p[0] >= c.fit.min_n) points.push_back({p[0], p[1]});
        if (!c.fit.input.empty()) {
            const auto more = points_from_csv(c.fit.input, c.fit.min_n);
            points.insert(points.end(), more.begin(), more.end());
        }
        fit = detail::fit_report(points, c.fit);
        fit["source"] = c.fit.input.empty() ? "points" : c.fit.input;
    }
    CsvTable t({"n", "xi_R_sq", "xi_R_db", "label"});
    for (const auto& e : fit["extrapolations"])
        t.add({format_double(e["n"].get<double>()), format_double(e["xi_R_sq"].get<double>()),
               format_double(e["xi_R_db"].get<double>()), e["label"].get<std::string>()});
    out.results = std::move(t);
    out.fit = fit;
    return out;
}

inline RunOutcome run_presets() {
    RunOutcome out;
    CsvTable t({"name", "omega_c_hz", "kappa_hz", "omega_q_hz", "gamma_phi_hz", "lambda_hz", "theta_max_factor",
                "note"});
    json list = json::array();
    for (auto name : preset_names) {
        const Preset p = load_preset(name);
        t.add({p.name, format_double(to_hz(p.dicke.omega_c)), format_double(to_hz(p.dicke.kappa)),
               format_double(to_hz(p.dicke.omega_q)), format_double(to_hz(p.dicke.Gamma_phi)),
               format_double(to_hz(p.dicke.lambda)), format_double(p.theta_max_factor), p.note});
        list.push_back({{"name", p.name}, {"omega_c_hz", to_hz(p.dicke.omega_c)}, {"kappa_hz", to_hz(p.dicke.kappa)},
                        {"omega_q_hz", to_hz(p.dicke.omega_q)}, {"gamma_phi_hz", to_hz(p.dicke.Gamma_phi)},
                        {"lambda_hz", to_hz(p.dicke.lambda)}, {"theta_max_factor", p.theta_max_factor},
                        {"note", p.note}});
    }
    out.results = std::move(t);
    out.run["presets"] = list;
    return out;
}

inline RunOutcome run_check_elimination(const RunConfig& c) {
    RunOutcome out;
    EliminationSpec spec;
    spec.physical = physical_params(c, c.elimination.n_atoms);
    spec.n_max = c.elimination.n_max;
    spec.samples = c.elimination.samples;
    const EliminationReport r = check_elimination(spec);
    const EffectiveParams eff = effective_params(spec.physical);
    CsvTable t({"n_atoms", "t_final", "omega_c_hz", "lambda_hz", "lambda_model_hz", "small_parameter",
                "excited_bound", "max_r_population", "max_s_population", "max_excited_population", "final_leakage",
                "fidelity", "trajectory_error", "passed"});
    t.add({std::to_string(r.n_atoms), format_double(r.t_final), format_double(to_hz(r.omega_c)),
           format_double(to_hz(r.lambda_printed)), format_double(to_hz(r.lambda_model)),
           format_double(r.small_parameter), format_double(r.excited_bound), format_double(r.max_r_population),
           format_double(r.max_s_population), format_double(r.max_excited_population), format_double(r.final_leakage),
           format_double(r.fidelity), format_double(r.trajectory_error), r.passed ? "true" : "false"});
    out.results = std::move(t);
    json warnings = json::array();
    for (const auto& w : eff.warnings) warnings.push_back(w);
    out.run["elimination"] = {{"fidelity_opposite_sign", r.fidelity_printed_sign},
                              {"trajectory_error_opposite_sign", r.trajectory_error_printed_sign},
                              {"max_cavity_photons", r.max_cavity_photons},
                              {"omega_q_hz", to_hz(eff.dicke.omega_q)},
                              {"balanced", eff.balanced},
                              {"warnings", warnings}};
    out.exit_code = r.passed ? exit_ok : exit_diagnostic;
    return out;
}

/// Runs the configured command and writes results.csv, run.json and, for
/// fits, fit.json into config.output.
inline int run(const RunConfig& c, std::ostream* log = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    RowCallback on_row;
    if (log)
        on_row = [log](const SweepRow& r) {
            *log << "  N=" << r.n_atoms << " theta/theta_opt=" << r.theta_ratio << " -> "
                 << (r.metrics ? format_double(r.metrics->xi_R_sq_db) + " dB" : std::string("n/a")) << " ["
                 << dicke::to_string(r.status) << "]\n";
        };
    RunOutcome out;
    switch (c.command) {
        case Command::evolve: out = run_evolve(c); break;
        case Command::sweep_theta:
        case Command::sweep_n: out = run_sweep_command(c, on_row); break;
        case Command::fit: out = run_fit(c); break;
        case Command::presets: out = run_presets(); break;
        case Command::check_elimination: out = run_check_elimination(c); break;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::filesystem::path dir(c.output);
    std::filesystem::create_directories(dir);
    json run;
    run["version"] = version;
    run["command"] = to_string(c.command);
    run["config"] = emit_config(c);
    run["tolerances"] = {{"rtol", c.tolerances.rtol},
                         {"atol", c.tolerances.atol},
                         {"initial_step", c.tolerances.initial_step},
                         {"max_steps", c.tolerances.max_steps}};
    run["wall_seconds"] = wall;
    run["exit_code"] = out.exit_code;
    for (auto& [k, v] : out.run.items()) run[k] = v;
    if (out.results) write_atomic(dir / "results.csv", out.results->str());
    if (out.fit) write_atomic(dir / "fit.json", out.fit->dump(2) + "\n");
    write_atomic(dir / "run.json", run.dump(2) + "\n");
    if (log) {
        if (c.command == Command::presets && out.results) *log << out.results->str();
        *log << to_string(c.command) << ": wrote " << dir.string() << " (exit " << out.exit_code << ", "
             << format_double(std::round(wall * 100) / 100) << " s)\n";
    }
    return out.exit_code;
}

}  // namespace dicke::cli
