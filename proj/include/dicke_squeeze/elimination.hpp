// elimination.hpp: co-propagation of the four-level cavity model and the
// effective Dicke model it reduces to once the excited states |r>, |s> are
// eliminated. Both Hamiltonians are time independent in the drive frame, so
// each is diagonalized once and sampled densely over one period.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dicke_squeeze/dynamics.hpp"
#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/hilbert.hpp"
#include "dicke_squeeze/model.hpp"

namespace dicke {

struct EliminationSpec {
    PhysicalParams physical;
    int n_max = 6;
    int samples = 20000;
    double t_final = 0.0;  ///< 0 selects 2 pi / omega_c of the effective model
};

struct EliminationReport {
    int n_atoms = 1;
    double t_final = 0.0;
    double omega_c = 0.0;
    double lambda_printed = 0.0;  ///< Re(Omega_r^* g_r / 2 Delta_r)
    double lambda_model = 0.0;    ///< coupling the four-level model actually produces
    double small_parameter = 0.0;  ///< (Omega_r / 2 Delta_r)^2
    double excited_bound = 0.0;    ///< 5 x small_parameter
    double max_r_population = 0.0;
    double max_s_population = 0.0;
    double max_excited_population = 0.0;
    double final_leakage = 0.0;  ///< 1 - ground-manifold norm at t_final
    double fidelity = 0.0;       ///< |<psi_eff | P psi_full>|^2 at t_final
    double fidelity_printed_sign = 0.0;
    double trajectory_error = 0.0;  ///< max_t || P psi_full - e^{i phi} psi_eff || / max_t || psi_eff - psi_0 ||
    double trajectory_error_printed_sign = 0.0;
    double max_cavity_photons = 0.0;
    bool passed = false;  ///< excited population below bound and fidelity >= 0.99
};

namespace detail {

/// Time-independent propagation psi(t) = V exp(-i E t) V^dag psi0.
class SpectralPropagator {
public:
    explicit SpectralPropagator(const DenseMat& h) {
        Eigen::SelfAdjointEigenSolver<DenseMat> es(0.5 * (h + h.adjoint()));
        if (es.info() != Eigen::Success) throw Error("eigendecomposition failed");
        energies_ = es.eigenvalues();
        vectors_ = es.eigenvectors();
    }

    void prepare(const StateVec& psi0) { coeffs_ = vectors_.adjoint() * psi0; }

    [[nodiscard]] StateVec at(double t) const {
        StateVec phased(coeffs_.size());
        for (Eigen::Index i = 0; i < coeffs_.size(); ++i) phased(i) = coeffs_(i) * std::exp(-I_unit * energies_(i) * t);
        return vectors_ * phased;
    }

private:
    Eigen::VectorXd energies_;
    DenseMat vectors_;
    StateVec coeffs_;
};

/// Distance between two vectors after removing the best global phase.
inline double phase_aligned_distance(const StateVec& a, const StateVec& b) {
    const cplx overlap = b.dot(a);
    const cplx phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : cplx(1.0);
    return (a - phase * b).norm();
}

}  // namespace detail

/// Starts both models in |0>_cav |g...g> and compares the ground-manifold
/// projection of the full state with the effective Dicke evolution.
///
/// Eliminating |r>, |s> at second order gives the coupling
/// -Omega_r g_r / (2 Delta_r) on c^dag J_-, the negative of the lambda
/// returned by effective_params. The two conventions are related by the
/// rotation exp(i pi J_z), which maps J_x -> -J_x and leaves every squeezing
/// figure unchanged, but a state-level comparison must use the model's sign.
inline EliminationReport check_elimination(const EliminationSpec& spec) {
    const PhysicalParams& p = spec.physical;
    if (p.n_atoms < 1 || p.n_atoms > max_full_model_atoms)
        throw ConfigError("check_elimination: n_atoms must be 1 or 2, got " + std::to_string(p.n_atoms));
    if (spec.n_max < 2) throw ConfigError("check_elimination: n_max must be >= 2");
    if (spec.samples < 1) throw ConfigError("check_elimination: samples must be >= 1");

    const EffectiveParams eff = effective_params(p);
    EliminationReport rep;
    rep.n_atoms = p.n_atoms;
    rep.omega_c = eff.dicke.omega_c;
    if (!(rep.omega_c > 0.0)) throw ConfigError("check_elimination: effective omega_c must be positive");
    rep.t_final = spec.t_final > 0.0 ? spec.t_final : decoupling_time(rep.omega_c);
    rep.lambda_printed = eff.dicke.lambda;
    rep.lambda_model = -eff.dicke.lambda;
    const double ratio = std::abs(p.Omega_r) / (2.0 * std::abs(p.Delta_r));
    rep.small_parameter = ratio * ratio;
    rep.excited_bound = 5.0 * rep.small_parameter;

    // Work in units of the effective omega_c to keep the spectra O(1e3).
    const double scale = rep.omega_c;
    const FullSpace fs{p.n_atoms, spec.n_max};
    const HilbertSpace hs(p.n_atoms, spec.n_max);
    detail::SpectralPropagator full(build_full_lambda_hamiltonian(p, p.n_atoms, spec.n_max) / scale);

    auto effective = [&](double lambda) {
        DickeParams d = eff.dicke;
        d.lambda = lambda;
        d.kappa = d.Gamma_phi = 0.0;
        return detail::SpectralPropagator(build_dicke_hamiltonian(d, hs).dense() / scale);
    };
    detail::SpectralPropagator eff_model = effective(rep.lambda_model);
    detail::SpectralPropagator eff_printed = effective(rep.lambda_printed);

    const StateVec psi0 = basis_state(hs, 0, 0);
    const DenseMat emb = ground_manifold_embedding(p.n_atoms, spec.n_max);
    full.prepare(emb * psi0);
    eff_model.prepare(psi0);
    eff_printed.prepare(psi0);

    // Level masks over the full basis.
    std::vector<double> r_weight(fs.total_dim(), 0.0), s_weight(fs.total_dim(), 0.0);
    for (int n = 0; n < fs.n_max; ++n)
        for (int a = 0; a < fs.atom_dim(); ++a)
            for (int j = 0; j < fs.n_atoms; ++j) {
                const int lv = fs.level_of(a, j);
                if (lv == level::r) r_weight[n * fs.atom_dim() + a] = 1.0;
                if (lv == level::s) s_weight[n * fs.atom_dim() + a] = 1.0;
            }

    const double t_end = rep.t_final * scale;
    double err_model = 0.0, err_printed = 0.0, excursion = 0.0;
    StateVec ground, psi_m, psi_p;
    for (int i = 0; i <= spec.samples; ++i) {
        const double t = t_end * double(i) / spec.samples;
        const StateVec psi = full.at(t);
        double pr = 0.0, ps = 0.0, photons = 0.0;
        for (int k = 0; k < fs.total_dim(); ++k) {
            const double w = std::norm(psi(k));
            pr += r_weight[k] * w;
            ps += s_weight[k] * w;
            photons += (k / fs.atom_dim()) * w;
        }
        rep.max_r_population = std::max(rep.max_r_population, pr);
        rep.max_s_population = std::max(rep.max_s_population, ps);
        rep.max_excited_population = std::max(rep.max_excited_population, pr + ps);
        rep.max_cavity_photons = std::max(rep.max_cavity_photons, photons);

        ground = emb.adjoint() * psi;
        psi_m = eff_model.at(t);
        psi_p = eff_printed.at(t);
        err_model = std::max(err_model, detail::phase_aligned_distance(ground, psi_m));
        err_printed = std::max(err_printed, detail::phase_aligned_distance(ground, psi_p));
        excursion = std::max(excursion, detail::phase_aligned_distance(psi_m, psi0));
    }
    rep.final_leakage = 1.0 - ground.squaredNorm();
    rep.fidelity = std::norm(psi_m.dot(ground));
    rep.fidelity_printed_sign = std::norm(psi_p.dot(ground));
    rep.trajectory_error = excursion > 0.0 ? err_model / excursion : err_model;
    rep.trajectory_error_printed_sign = excursion > 0.0 ? err_printed / excursion : err_printed;
    rep.passed = rep.max_excited_population < rep.excited_bound && rep.fidelity >= 0.99;
    return rep;
}

}  // namespace dicke
