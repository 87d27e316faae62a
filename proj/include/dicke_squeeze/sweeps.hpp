// sweeps.hpp: theta and N sweeps over the dissipative Dicke model, power-law
// fits of xi_R^2 = a N^b, and extrapolation of those fits.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dicke_squeeze/dynamics.hpp"
#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/metrics.hpp"
#include "dicke_squeeze/model.hpp"

namespace dicke {

enum class SweepKind { theta_sweep, n_sweep };

inline const char* to_string(SweepKind k) { return k == SweepKind::theta_sweep ? "theta_sweep" : "n_sweep"; }

/// Rates relative to omega_c; each set value replaces the base parameter.
struct RateOverrides {
    std::optional<double> kappa, omega_q, gamma_phi;

    friend bool operator==(const RateOverrides&, const RateOverrides&) = default;
};

struct SweepSpec {
    SweepKind kind = SweepKind::theta_sweep;
    DickeParams base;              ///< lambda and n_atoms are set per row
    RateOverrides ratios;
    std::vector<double> grid;      ///< theta/theta_opt ratios, or atom numbers
    int n_atoms = 50;              ///< theta sweeps only
    double theta_factor = 1.0;     ///< n sweeps: theta = theta_factor * theta_opt(N)
    int n_max = 0;                 ///< 0: chosen per row from the predicted Fock tail
    double n_max_tail_target = 1e-5;
    int samples_per_period = 200;
    Tolerances tolerances;
    Frame frame = Frame::interaction;
    double tail_guard = default_tail_guard;
    int workers = 1;
};

struct SweepRow {
    double grid_value = 0.0;
    int n_atoms = 0;
    double theta_ratio = 0.0;
    double theta = 0.0;
    double lambda = 0.0;  ///< in units of omega_c
    std::optional<SqueezingReport> metrics;
    Diagnostics diagnostics;
    RunStatus status = RunStatus::ok;
    std::string message;

    [[nodiscard]] bool ok() const { return status == RunStatus::ok && metrics.has_value(); }
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepRow> rows;  ///< grid order

    [[nodiscard]] bool all_ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok(); });
    }
    /// Row with the largest xi_R^2 in dB among successful rows.
    [[nodiscard]] const SweepRow* best() const {
        const SweepRow* out = nullptr;
        for (const auto& r : rows)
            if (r.ok() && (!out || r.metrics->xi_R_sq_db > out->metrics->xi_R_sq_db)) out = &r;
        return out;
    }
};

/// 25 log-spaced theta/theta_opt ratios over [0.1, 2].
inline std::vector<double> default_theta_grid(int points = 25, double lo = 0.1, double hi = 2.0) {
    if (points < 2) return {lo};
    std::vector<double> out(points);
    for (int i = 0; i < points; ++i) out[i] = lo * std::pow(hi / lo, double(i) / (points - 1));
    return out;
}

inline std::vector<double> default_n_grid() { return {10, 16, 25, 40, 63, 100}; }

inline constexpr int max_sweep_atoms = 100;

/// Parameters rescaled to omega_c = 1, with the ratio overrides applied.
inline DickeParams normalized(const DickeParams& base, const RateOverrides& r) {
    if (!(base.omega_c > 0.0) || !std::isfinite(base.omega_c)) throw ConfigError("omega_c must be positive and finite");
    DickeParams d = base;
    const double w = base.omega_c;
    d.omega_c = 1.0;
    d.omega_q = r.omega_q ? *r.omega_q : base.omega_q / w;
    d.kappa = r.kappa ? *r.kappa : base.kappa / w;
    d.Gamma_phi = r.gamma_phi ? *r.gamma_phi : base.Gamma_phi / w;
    d.lambda = base.lambda / w;
    return d;
}

inline void validate(const SweepSpec& spec) {
    if (spec.grid.empty()) throw ConfigError("sweep grid is empty");
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
        if (!(spec.grid[i] > 0.0) || !std::isfinite(spec.grid[i]))
            throw ConfigError("sweep grid values must be positive and finite");
        if (i > 0 && !(spec.grid[i] > spec.grid[i - 1])) throw ConfigError("sweep grid must be strictly increasing");
    }
    for (const auto& v : {spec.ratios.kappa, spec.ratios.omega_q, spec.ratios.gamma_phi})
        if (v && (!(*v >= 0.0) || !std::isfinite(*v))) throw ConfigError("rate ratios must be non-negative");
    if (spec.base.kappa < 0.0 || spec.base.Gamma_phi < 0.0) throw ConfigError("decay rates must be non-negative");
    if (spec.workers < 1) throw ConfigError("workers must be >= 1");
    if (spec.kind == SweepKind::theta_sweep) {
        if (spec.n_atoms < 2) throw ConfigError("theta sweep needs n_atoms >= 2");
    } else {
        if (!(spec.theta_factor > 0.0)) throw ConfigError("theta_factor must be positive");
        for (double n : spec.grid) {
            if (n != std::floor(n) || n < 2) throw ConfigError("N grid values must be integers >= 2");
            if (n > max_sweep_atoms)
                throw ConfigError("N grid value " + std::to_string(int(n)) + " exceeds the supported maximum of " +
                                  std::to_string(max_sweep_atoms));
        }
    }
    if (spec.n_max != 0 && spec.n_max < 2) throw ConfigError("n_max must be 0 (automatic) or >= 2");
}

/// Runs one point: lambda from theta, evolve to t_1, squeezing of the reduced spin state.
inline SweepRow run_point(const DickeParams& d_norm, int n_atoms, double theta_ratio, const SweepSpec& spec) {
    SweepRow row;
    row.n_atoms = n_atoms;
    row.theta_ratio = theta_ratio;
    row.theta = theta_ratio * theta_opt(n_atoms);
    row.lambda = lambda_from_theta(row.theta, 1.0);
    try {
        EvolutionSpec es;
        es.dicke = d_norm;
        es.dicke.n_atoms = n_atoms;
        es.dicke.lambda = row.lambda;
        const int n_max =
            spec.n_max > 0 ? spec.n_max : suggest_n_max(n_atoms, row.lambda, 1.0, spec.n_max_tail_target);
        es.space = HilbertSpace(n_atoms, n_max);
        es.samples_per_period = spec.samples_per_period;
        es.tolerances = spec.tolerances;
        es.frame = spec.frame;
        es.tail_guard = spec.tail_guard;
        const EvolutionResult res = evolve_master(es);
        row.diagnostics = res.diagnostics;
        row.status = res.status;
        row.message = res.message;
        if (res.status != RunStatus::integration_failed)
            row.metrics = squeezing_report(partial_trace_cavity(res.final_state, res.space), n_atoms);
    } catch (const std::exception& e) {
        row.status = RunStatus::integration_failed;
        row.message = e.what();
    }
    return row;
}

/// Runs tasks 0..count-1 on up to `workers` threads; results land at their index.
template <class T>
std::vector<T> parallel_map(std::size_t count, int workers, const std::function<T(std::size_t)>& task) {
    std::vector<T> out(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                out[i] = task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

using RowCallback = std::function<void(const SweepRow&)>;

inline SweepResult run_sweep(const SweepSpec& spec, const RowCallback& on_row = {}) {
    validate(spec);
    const DickeParams d = normalized(spec.base, spec.ratios);
    std::mutex cb_mutex;
    SweepResult out;
    out.spec = spec;
    out.rows = parallel_map<SweepRow>(spec.grid.size(), spec.workers, [&](std::size_t i) {
        const double g = spec.grid[i];
        SweepRow row = spec.kind == SweepKind::theta_sweep ? run_point(d, spec.n_atoms, g, spec)
                                                           : run_point(d, static_cast<int>(g), spec.theta_factor, spec);
        row.grid_value = g;
        if (on_row) {
            std::lock_guard lock(cb_mutex);
            on_row(row);
        }
        return row;
    });
    return out;
}

inline SweepResult run_theta_sweep(const SweepSpec& spec, const RowCallback& on_row = {}) {
    if (spec.kind != SweepKind::theta_sweep) throw ConfigError("run_theta_sweep: spec.kind must be theta_sweep");
    return run_sweep(spec, on_row);
}

inline SweepResult run_n_sweep(const SweepSpec& spec, const RowCallback& on_row = {}) {
    if (spec.kind != SweepKind::n_sweep) throw ConfigError("run_n_sweep: spec.kind must be n_sweep");
    return run_sweep(spec, on_row);
}

// ---------------------------------------------------------------------------
// Fits

struct FitPoint {
    double n = 0.0;
    double xi_sq = 0.0;
};

struct FitResult {
    double a = 0.0;
    double b = 0.0;
    double r_squared = 0.0;
    int n_points = 0;
    std::vector<FitPoint> points;
    std::vector<double> residuals;  ///< ln xi^2 - ln(a N^b)

    [[nodiscard]] double at(double n) const { return a * std::pow(n, b); }
    [[nodiscard]] double max_abs_residual() const {
        double m = 0.0;
        for (double r : residuals) m = std::max(m, std::abs(r));
        return m;
    }
};

/// Least squares in (ln N, ln xi^2).
inline FitResult fit_power_law(const std::vector<FitPoint>& points) {
    if (points.size() < 3) throw ConfigError("fit_power_law: need at least 3 points, got " + std::to_string(points.size()));
    for (const auto& p : points)
        if (!(p.xi_sq > 0.0) || !(p.n > 0.0)) throw ConfigError("fit_power_law: N and xi^2 must be positive");
    const double m = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (const auto& p : points) {
        sx += std::log(p.n);
        sy += std::log(p.xi_sq);
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : points) {
        const double dx = std::log(p.n) - mx, dy = std::log(p.xi_sq) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) throw ConfigError("fit_power_law: degenerate grid, all N equal");
    FitResult f;
    f.b = sxy / sxx;
    const double intercept = my - f.b * mx;
    f.a = std::exp(intercept);
    f.n_points = static_cast<int>(points.size());
    f.points = points;
    double ss_res = 0.0;
    for (const auto& p : points) {
        const double r = std::log(p.xi_sq) - (intercept + f.b * std::log(p.n));
        f.residuals.push_back(r);
        ss_res += r * r;
    }
    f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return f;
}

inline constexpr double default_fit_min_n = 10.0;

/// Points from successful N-sweep rows with N >= min_n.
inline std::vector<FitPoint> fit_points(const SweepResult& sweep, double min_n = default_fit_min_n) {
    std::vector<FitPoint> out;
    for (const auto& r : sweep.rows)
        if (r.ok() && r.n_atoms >= min_n) out.push_back({double(r.n_atoms), r.metrics->xi_R_sq});
    return out;
}

struct FitSensitivity {
    std::string label;  ///< which points were kept
    FitResult fit;
};

/// Refits with the smallest or the largest N removed, and on the lower and upper halves.
inline std::vector<FitSensitivity> fit_range_sensitivity(const std::vector<FitPoint>& points) {
    std::vector<FitSensitivity> out;
    auto sorted = points;
    std::sort(sorted.begin(), sorted.end(), [](const FitPoint& x, const FitPoint& y) { return x.n < y.n; });
    auto add = [&](const std::string& label, std::vector<FitPoint> pts) {
        if (pts.size() >= 3) out.push_back({label, fit_power_law(pts)});
    };
    add("all", sorted);
    if (sorted.size() >= 4) {
        add("drop_smallest", {sorted.begin() + 1, sorted.end()});
        add("drop_largest", {sorted.begin(), sorted.end() - 1});
    }
    if (sorted.size() >= 6) {
        const auto half = static_cast<std::ptrdiff_t>(sorted.size() / 2);
        add("lower_half", {sorted.begin(), sorted.begin() + half});
        add("upper_half", {sorted.begin() + half, sorted.end()});
    }
    return out;
}

inline constexpr const char* extrapolated_label = "EXTRAPOLATED";

struct Extrapolation {
    double n_target = 0.0;
    double xi_sq = 0.0;
    double db = 0.0;
    std::string label = extrapolated_label;
};

/// a N^b evaluated outside the simulated range; never a simulation result.
inline Extrapolation extrapolate(const FitResult& fit, double n_target) {
    if (!(fit.a > 0.0) || !(n_target > 0.0)) throw ConfigError("extrapolate: fit prefactor and N must be positive");
    Extrapolation e;
    e.n_target = n_target;
    e.xi_sq = fit.at(n_target);
    e.db = db(e.xi_sq);
    return e;
}

}  // namespace dicke
