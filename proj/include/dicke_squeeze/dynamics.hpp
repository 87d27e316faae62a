// dynamics.hpp: master-equation propagation of the dissipative Dicke model
// and the closed-form geometric-phase evolution it reduces to when ideal.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/hilbert.hpp"
#include "dicke_squeeze/integrator.hpp"
#include "dicke_squeeze/liouvillian.hpp"
#include "dicke_squeeze/model.hpp"

namespace dicke {

enum class RunStatus { ok, trace_drift, truncation_unsafe, integration_failed };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::ok: return "ok";
        case RunStatus::trace_drift: return "trace_drift";
        case RunStatus::truncation_unsafe: return "truncation_unsafe";
        case RunStatus::integration_failed: return "integration_failed";
    }
    return "?";
}

inline constexpr double trace_drift_limit = 1e-6;
inline constexpr double default_tail_guard = 1e-4;

// ---------------------------------------------------------------------------
// Geometric-phase closed forms

/// theta(t) = (2 lambda / omega_c)^2 (omega_c t - sin omega_c t)
inline double theta_of_t(double t, double lambda, double omega_c) {
    if (omega_c == 0.0) throw ConfigError("theta_of_t: omega_c must be nonzero");
    const double r = 2.0 * lambda / omega_c;
    return r * r * (omega_c * t - std::sin(omega_c * t));
}

/// alpha(t) = 1 - exp(i omega_c t)
inline cplx alpha_of_t(double t, double omega_c) { return 1.0 - std::exp(I_unit * omega_c * t); }

/// Coupling that accumulates theta_target after one period t_1 = 2 pi / omega_c.
inline double lambda_from_theta(double theta_target, double omega_c) {
    if (theta_target < 0.0) throw ConfigError("lambda_from_theta: theta_target must be >= 0");
    return 0.5 * std::abs(omega_c) * std::sqrt(theta_target / (2.0 * std::numbers::pi));
}

inline double decoupling_time(double omega_c, int m = 1) {
    if (omega_c == 0.0) throw ConfigError("decoupling_time: omega_c must be nonzero");
    return 2.0 * std::numbers::pi * m / std::abs(omega_c);
}

/// Worst-case population of Fock levels >= n_max - 2 during one ideal period.
/// J_x is conserved by the ideal evolution, so the cavity is a mixture of
/// coherent states |beta_m>, |beta_m| <= 2 (2 lambda/omega_c) |m|, weighted by
/// the binomial J_x distribution of |J,-J>.
inline double predicted_fock_tail(int n_atoms, double lambda, double omega_c, int n_max) {
    const int cut = std::max(0, n_max - 2);
    const double amp = 4.0 * std::abs(lambda / omega_c);
    double tail = 0.0;
    for (int k = 0; k <= n_atoms; ++k) {
        const double log_weight = std::lgamma(n_atoms + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_atoms - k + 1.0) -
                                  n_atoms * std::log(2.0);
        const double m = k - 0.5 * n_atoms;
        const double mu = amp * amp * m * m;
        double below = 0.0;  // P(n < cut) for Poisson(mu)
        for (int n = 0; n < cut; ++n)
            below += std::exp(n * (mu > 0.0 ? std::log(mu) : (n == 0 ? 0.0 : -1e300)) - mu - std::lgamma(n + 1.0));
        tail += std::exp(log_weight) * std::max(0.0, 1.0 - below);
    }
    return tail;
}

/// Smallest even n_max >= floor whose predicted tail is below target.
inline int suggest_n_max(int n_atoms, double lambda, double omega_c, double target = 1e-5, int floor = 8) {
    int n_max = std::max(2, floor + floor % 2);
    while (n_max < 256 && predicted_fock_tail(n_atoms, lambda, omega_c, n_max) >= target) n_max += 2;
    return n_max;
}

/// exp(i t A) for Hermitian A.
inline DenseMat expi_hermitian(const DenseMat& a, double t) {
    Eigen::SelfAdjointEigenSolver<DenseMat> es(a);
    const Eigen::VectorXcd phases = (I_unit * t * es.eigenvalues().cast<cplx>()).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// Truncated displacement exp(beta c^dag - beta^* c) on n_max Fock levels.
inline DenseMat displacement(cplx beta, int n_max) {
    DenseMat gen = DenseMat::Zero(n_max, n_max);  // i (beta c^dag - beta^* c), Hermitian
    for (int n = 1; n < n_max; ++n) {
        const double s = std::sqrt(double(n));
        gen(n, n - 1) = I_unit * beta * s;
        gen(n - 1, n) = -I_unit * std::conj(beta) * s;
    }
    return expi_hermitian(gen, -1.0);
}

/// Applies U = exp(i theta J_x^2) exp((2 lambda/omega_c)(alpha c^dag - alpha^* c) J_x)
/// to a joint-space state vector, working in the J_x eigenbasis where the
/// twist is diagonal and the displacement is J_x-conditioned.
inline StateVec apply_geometric_unitary(const StateVec& state, double theta, cplx alpha, double lambda,
                                        double omega_c, const HilbertSpace& space) {
    if (state.size() != space.total_dim())
        throw BasisMismatch("apply_geometric_unitary: state dimension " + std::to_string(state.size()) +
                            " != " + std::to_string(space.total_dim()));
    if (omega_c == 0.0) throw ConfigError("apply_geometric_unitary: omega_c must be nonzero");
    const int s = space.spin_dim();
    const int nc = space.n_max;
    const Eigen::MatrixXd jx = build_spin_operators(space).jx.dense().real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jx);
    const Eigen::MatrixXd& v = es.eigenvectors();

    // amp(n, k): amplitude on |n> ⊗ |J_x = mu_k>
    DenseMat amp(nc, s);
    for (int n = 0; n < nc; ++n) amp.row(n) = state.segment(n * s, s).transpose() * v;

    const double scale = 2.0 * lambda / omega_c;
    for (int k = 0; k < s; ++k) {
        const double mu = es.eigenvalues()(k);
        const cplx twist = std::exp(I_unit * theta * mu * mu);
        if (alpha != cplx(0.0)) amp.col(k) = displacement(scale * alpha * mu, nc) * amp.col(k);
        amp.col(k) *= twist;
    }

    StateVec out(state.size());
    for (int n = 0; n < nc; ++n) out.segment(n * s, s) = (amp.row(n) * v.transpose()).transpose();
    return out;
}

/// Spin-only variant (alpha = 0): exp(i theta J_x^2) on a Dicke-space vector.
inline StateVec apply_twist(const StateVec& spin_state, double theta, const HilbertSpace& space) {
    if (spin_state.size() != space.spin_dim()) throw BasisMismatch("apply_twist: spin state dimension mismatch");
    const DenseMat jx = build_spin_operators(space).jx.dense();
    return expi_hermitian(jx * jx, theta) * spin_state;
}
// ---------------------------------------------------------------------------
// Evolution

struct EvolutionSpec {
    DickeParams dicke;
    HilbertSpace space;
    double t_final = 0.0;  ///< 0 selects t_1 = 2 pi / omega_c
    int samples_per_period = 200;
    Tolerances tolerances;
    std::optional<DenseMat> initial_state;  ///< default |0>_cav ⊗ |J,-J>
    Frame frame = Frame::interaction;
    double tail_guard = default_tail_guard;
    bool retry_on_truncation = true;
    bool keep_states = false;
};

struct Diagnostics {
    double trace_drift = 0.0;        ///< max |Tr rho - 1|
    double hermiticity_drift = 0.0;  ///< max |rho - rho^dag|
    double min_eigenvalue = 0.0;     ///< of the final state
    double tail_population = 0.0;    ///< max over samples of the top-two Fock occupancy
    int n_max_used = 0;
    bool retried = false;
    IntegratorStats integrator;
    double wall_seconds = 0.0;
};

struct EvolutionResult {
    HilbertSpace space;
    std::vector<double> times;
    std::vector<double> cavity_photons;
    std::vector<double> tail_population;
    std::vector<DenseMat> states;  ///< lab-frame snapshots when keep_states
    DenseMat final_state;          ///< lab frame
    Diagnostics diagnostics;
    RunStatus status = RunStatus::ok;
    std::string message;

    [[nodiscard]] bool ok() const { return status == RunStatus::ok; }
};

inline DenseMat ground_state_density(const HilbertSpace& space) { return projector(basis_state(space, 0, 0)); }

inline double cavity_photons(const DenseMat& rho, const HilbertSpace& space) {
    double out = 0.0;
    const int s = space.spin_dim();
    for (int n = 1; n < space.n_max; ++n) out += n * rho.diagonal().segment(n * s, s).real().sum();
    return out;
}

inline double top_fock_population(const DenseMat& rho, const HilbertSpace& space, int levels = 2) {
    const int s = space.spin_dim();
    double out = 0.0;
    for (int n = std::max(0, space.n_max - levels); n < space.n_max; ++n)
        out += rho.diagonal().segment(n * s, s).real().sum();
    return out;
}

/// Embeds a state on a smaller Fock truncation into a larger one.
inline DenseMat embed_fock(const DenseMat& rho, const HilbertSpace& from, const HilbertSpace& to) {
    if (from.n_atoms != to.n_atoms || to.n_max < from.n_max) throw BasisMismatch("embed_fock: incompatible spaces");
    DenseMat out = DenseMat::Zero(to.total_dim(), to.total_dim());
    out.topLeftCorner(from.total_dim(), from.total_dim()) = rho;
    return out;
}

/// Smallest eigenvalue, using the block structure under the parity
/// exp(i pi (c^dag c + J_z + J)) when rho respects it.
inline double min_eigenvalue(const DenseMat& rho, const HilbertSpace& space) {
    const int s = space.spin_dim();
    std::vector<int> even, odd;
    for (int n = 0; n < space.n_max; ++n)
        for (int k = 0; k < s; ++k) ((n + k) % 2 == 0 ? even : odd).push_back(space.index(n, k));
    double off = 0.0;
    for (int i : even)
        for (int j : odd) off = std::max(off, std::abs(rho(i, j)));
    auto block_min = [&](const std::vector<int>& idx) {
        if (idx.empty()) return 0.0;
        DenseMat b(idx.size(), idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < idx.size(); ++j) b(i, j) = rho(idx[i], idx[j]);
        return Eigen::SelfAdjointEigenSolver<DenseMat>(b, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    };
    if (off < 1e-13) return std::min(block_min(even), block_min(odd));
    return Eigen::SelfAdjointEigenSolver<DenseMat>(rho, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

namespace detail {

inline void validate_initial(const DenseMat& rho, const HilbertSpace& space) {
    if (rho.rows() != space.total_dim() || rho.cols() != space.total_dim())
        throw BasisMismatch("initial state dimension does not match the Hilbert space");
    if (std::abs(rho.trace() - 1.0) > 1e-10) throw StateError("initial state trace deviates from 1 by more than 1e-10");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw StateError("initial state is not Hermitian");
    if (min_eigenvalue(rho, space) < -1e-10) throw StateError("initial state is not positive semidefinite");
}

/// Lab-frame state from an interaction-frame one: rho_lab = U rho U^dag, U = exp(-i omega_c t c^dag c).
inline DenseMat to_lab_frame(const DenseMat& rho, const HilbertSpace& space, double omega_c, double t) {
    const int s = space.spin_dim();
    DenseMat out = rho;
    for (int n = 0; n < space.n_max; ++n)
        for (int n2 = 0; n2 < space.n_max; ++n2) {
            if (n == n2) continue;
            out.block(n * s, n2 * s, s, s) *= std::exp(-I_unit * omega_c * t * double(n - n2));
        }
    return out;
}

/// Sector layout for rho0: the populated parity sectors, or the whole space
/// if rho0 carries even/odd coherence. Cavity decay couples the two sectors.
inline SectorLayout layout_for(const DenseMat& rho0, const HilbertSpace& space, const DickeParams& d) {
    SectorLayout both = SectorLayout::parity(space, true, true);
    if (both.leakage(rho0) > 1e-14) return SectorLayout::whole(space);
    const RowMat packed = both.pack(rho0);
    bool active[2];
    for (int s = 0; s < 2; ++s) active[s] = both.block(packed, s).cwiseAbs().maxCoeff() > 0.0;
    if (d.kappa > 0.0) active[0] = active[1] = active[0] || active[1];
    return SectorLayout::parity(space, active[0], active[1]);
}

inline EvolutionResult evolve_once(const EvolutionSpec& spec, const HilbertSpace& space, const DenseMat& rho0,
                                   bool abort_on_tail) {
    const auto start = std::chrono::steady_clock::now();
    EvolutionResult res;
    res.space = space;
    res.diagnostics.n_max_used = space.n_max;

    const double period = decoupling_time(spec.dicke.omega_c);
    const double t_final = spec.t_final > 0.0 ? spec.t_final : period;
    const int per_period = std::max(1, spec.samples_per_period);
    const int n_samples = std::max(1, static_cast<int>(std::ceil(per_period * t_final / period - 1e-9)));

    DickeLiouvillian gen(spec.dicke, layout_for(rho0, space, spec.dicke), spec.frame);
    const SectorLayout& layout = gen.layout();
    auto stepper = make_integrator<RowMat>(std::ref(gen), spec.tolerances);
    RowMat rho = layout.pack(rho0);
    double t = 0.0;

    const int sd = space.spin_dim();
    const int tail_from = std::max(0, space.n_max - 2) * sd;
    auto lab = [&](double time) {
        DenseMat full = layout.unpack(rho);
        return spec.frame == Frame::interaction ? to_lab_frame(full, space, spec.dicke.omega_c, time) : full;
    };
    auto record = [&](double time) {
        const double tr_drift = std::abs(layout.diagonal_sum(rho, [](int) { return 1.0; }) - 1.0);
        double herm = 0.0;
        for (int s = 0; s < layout.count(); ++s) {
            const auto b = layout.block(rho, s);
            herm = std::max(herm, (b - b.adjoint()).cwiseAbs().maxCoeff());
        }
        const double tail = layout.diagonal_sum(rho, [&](int i) { return i >= tail_from ? 1.0 : 0.0; });
        res.times.push_back(time);
        res.cavity_photons.push_back(layout.diagonal_sum(rho, [&](int i) { return double(i / sd); }));
        res.tail_population.push_back(tail);
        res.diagnostics.trace_drift = std::max(res.diagnostics.trace_drift, tr_drift);
        res.diagnostics.hermiticity_drift = std::max(res.diagnostics.hermiticity_drift, herm);
        res.diagnostics.tail_population = std::max(res.diagnostics.tail_population, tail);
        if (spec.keep_states) res.states.push_back(lab(time));
    };

    record(0.0);
    try {
        for (int i = 1; i <= n_samples; ++i) {
            const double target = i == n_samples ? t_final : t_final * double(i) / n_samples;
            stepper.advance(t, target, rho);
            record(target);
            if (abort_on_tail && res.tail_population.back() > spec.tail_guard) {
                res.status = RunStatus::truncation_unsafe;
                res.message = "Fock tail population " + std::to_string(res.tail_population.back()) +
                              " exceeds guard at t=" + std::to_string(target) + " with n_max=" +
                              std::to_string(space.n_max);
                break;
            }
        }
    } catch (const IntegrationError& e) {
        res.status = RunStatus::integration_failed;
        res.message = e.what();
    }
    res.diagnostics.integrator = stepper.stats();

    res.final_state = lab(t);
    if (res.status == RunStatus::ok) {
        res.diagnostics.min_eigenvalue = min_eigenvalue(res.final_state, space);
        if (res.diagnostics.trace_drift >= trace_drift_limit) {
            res.status = RunStatus::trace_drift;
            res.message = "trace drift " + std::to_string(res.diagnostics.trace_drift) + " exceeds 1e-6";
        } else if (res.diagnostics.tail_population >= spec.tail_guard) {
            res.status = RunStatus::truncation_unsafe;
            res.message = "Fock tail population " + std::to_string(res.diagnostics.tail_population) +
                          " exceeds guard with n_max=" + std::to_string(space.n_max);
        }
    }
    res.diagnostics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace detail

/// Integrates the master equation to spec.t_final with the adaptive
/// Dormand–Prince pair. When the top two Fock levels exceed the tail guard
/// the run is repeated once with n_max doubled.
inline EvolutionResult evolve_master(const EvolutionSpec& spec) {
    require_atoms(spec.dicke, spec.space, "evolve_master");
    if (spec.t_final < 0.0) throw ConfigError("t_final must be positive");
    if (spec.dicke.omega_c == 0.0) throw ConfigError("omega_c must be nonzero");
    DenseMat rho0 = spec.initial_state ? *spec.initial_state : ground_state_density(spec.space);
    if (spec.initial_state) detail::validate_initial(rho0, spec.space);

    EvolutionResult res = detail::evolve_once(spec, spec.space, rho0, spec.retry_on_truncation);
    if (res.status == RunStatus::truncation_unsafe && spec.retry_on_truncation) {
        const HilbertSpace bigger(spec.space.n_atoms, 2 * spec.space.n_max);
        const double first_wall = res.diagnostics.wall_seconds;
        res = detail::evolve_once(spec, bigger, embed_fock(rho0, spec.space, bigger), false);
        res.diagnostics.retried = true;
        res.diagnostics.wall_seconds += first_wall;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Comparisons and reports

inline double purity(const DenseMat& rho) { return (rho * rho).trace().real(); }

/// <psi|rho|psi>
inline double fidelity(const StateVec& psi, const DenseMat& rho) {
    if (psi.size() != rho.rows()) throw BasisMismatch("fidelity: dimension mismatch");
    return (psi.adjoint() * rho * psi)(0, 0).real();
}

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DenseMat& rho, const DenseMat& sigma) {
    if (rho.rows() != sigma.rows()) throw BasisMismatch("fidelity: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<DenseMat> es(rho);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const DenseMat sqrt_rho = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    const DenseMat inner = sqrt_rho * sigma * sqrt_rho;
    Eigen::SelfAdjointEigenSolver<DenseMat> es2(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
    const double tr = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return tr * tr;
}

struct DecouplingReport {
    double time = 0.0;
    double cavity_photons = 0.0;
    double spin_purity = 0.0;
    bool decoupled = false;  ///< photons < 1e-6 and spin purity > 0.999
};

inline DecouplingReport decoupling_check(const EvolutionResult& result) {
    if (result.times.empty()) throw StateError("decoupling_check: empty result");
    DecouplingReport out;
    out.time = result.times.back();
    out.cavity_photons = cavity_photons(result.final_state, result.space);
    out.spin_purity = purity(partial_trace_cavity(result.final_state, result.space));
    out.decoupled = out.cavity_photons < 1e-6 && out.spin_purity > 0.999;
    return out;
}

}  // namespace dicke
