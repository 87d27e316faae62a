// model.hpp: effective Dicke parameters from double-Λ Raman couplings,
// the Dicke / interaction-picture / full four-level Hamiltonians, and the
// experimental presets.
//
// Units: angular frequencies everywhere (hbar = 1). Linear-Hz inputs are
// converted once with to_angular().

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/hilbert.hpp"

namespace dicke {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double to_angular(double hz) { return two_pi * hz; }
inline constexpr double to_hz(double angular) { return angular / two_pi; }

inline constexpr double adiabaticity_limit = 0.1;
inline constexpr double balance_tolerance = 0.01;

struct PhysicalParams {
    cplx g_r{0.0}, g_s{0.0};
    cplx Omega_r{0.0}, Omega_s{0.0};
    double Delta_r = 0.0, Delta_s = 0.0;
    double delta_cav = 0.0;
    // Excited-state branch decays; carried as metadata, not part of the reduced dynamics.
    double gamma_rg = 0.0, gamma_re = 0.0, gamma_sg = 0.0, gamma_se = 0.0;
    double Gamma_phi = 0.0;
    double kappa = 0.0;
    int n_atoms = 1;
};

struct DickeParams {
    double omega_c = 1.0;
    double omega_q = 0.0;
    double lambda = 0.0;
    int n_atoms = 1;
    double kappa = 0.0;
    double Gamma_phi = 0.0;

    /// |omega_q| <= 0.01 |omega_c|: the regime where the geometric-phase protocol is ideal.
    [[nodiscard]] bool ideal_protocol() const { return std::abs(omega_q) <= 0.01 * std::abs(omega_c); }

    friend bool operator==(const DickeParams&, const DickeParams&) = default;
};

struct Adiabaticity {
    double drive_r = 0.0;   ///< |Omega_r / 2 Delta_r|
    double drive_s = 0.0;   ///< |Omega_s / 2 Delta_s|
    double cavity_r = 0.0;  ///< |g_r / Delta_r|
    double cavity_s = 0.0;  ///< |g_s / Delta_s|

    [[nodiscard]] double worst() const { return std::max({drive_r, drive_s, cavity_r, cavity_s}); }
    [[nodiscard]] bool warning() const { return worst() > adiabaticity_limit; }
};

inline Adiabaticity adiabaticity(const PhysicalParams& p) {
    return {std::abs(p.Omega_r / (2.0 * p.Delta_r)), std::abs(p.Omega_s / (2.0 * p.Delta_s)),
            std::abs(p.g_r / p.Delta_r), std::abs(p.g_s / p.Delta_s)};
}

struct EffectiveParams {
    DickeParams dicke;
    cplx lambda_r{0.0};  ///< Omega_r^* g_r / (2 Delta_r)
    cplx lambda_s{0.0};  ///< Omega_s g_s^* / (2 Delta_s)
    bool balanced = true;
    Adiabaticity adiabatic;
    std::vector<std::string> warnings;
};

/// Adiabatic elimination of |r>, |s>. The coupling uses Delta_r in the first
/// expression; the second (Delta_s) expression is kept as a balance check.
inline EffectiveParams effective_params(const PhysicalParams& p) {
    if (p.Delta_r == 0.0 || p.Delta_s == 0.0) throw ConfigError("effective_params: detunings must be nonzero");
    if (p.n_atoms < 1) throw ConfigError("effective_params: n_atoms must be >= 1");

    EffectiveParams out;
    const double n = p.n_atoms;
    out.dicke.n_atoms = p.n_atoms;
    out.dicke.kappa = p.kappa;
    out.dicke.Gamma_phi = p.Gamma_phi;
    out.dicke.omega_c = p.delta_cav - 0.5 * n * (std::norm(p.g_r) / p.Delta_r + std::norm(p.g_s) / p.Delta_s);
    out.dicke.omega_q = std::norm(p.Omega_s) / (4.0 * p.Delta_s) - std::norm(p.Omega_r) / (4.0 * p.Delta_r);
    out.lambda_r = std::conj(p.Omega_r) * p.g_r / (2.0 * p.Delta_r);
    out.lambda_s = p.Omega_s * std::conj(p.g_s) / (2.0 * p.Delta_s);
    out.dicke.lambda = out.lambda_r.real();

    const double scale = std::max(std::abs(out.lambda_r), std::abs(out.lambda_s));
    if (scale > 0.0 && std::abs(out.lambda_r - out.lambda_s) > balance_tolerance * scale) {
        out.balanced = false;
        out.warnings.push_back("unbalanced couplings: lambda_r=" + std::to_string(out.lambda_r.real()) +
                               " lambda_s=" + std::to_string(out.lambda_s.real()));
    }
    if (std::abs(out.lambda_r.imag()) > 1e-12 * std::max(scale, 1e-300))
        out.warnings.push_back("complex coupling phase discarded; lambda taken as Re(lambda_r)");
    out.adiabatic = adiabaticity(p);
    if (out.adiabatic.warning())
        out.warnings.push_back("adiabaticity ratio " + std::to_string(out.adiabatic.worst()) + " exceeds 0.1");
    return out;
}

/// delta_cav that places the effective cavity frequency at omega_c for p.n_atoms atoms.
inline double delta_cav_for(double omega_c, const PhysicalParams& p) {
    return omega_c + 0.5 * p.n_atoms * (std::norm(p.g_r) / p.Delta_r + std::norm(p.g_s) / p.Delta_s);
}

inline void require_atoms(const DickeParams& d, const HilbertSpace& space, const char* where) {
    if (d.n_atoms != space.n_atoms)
        throw BasisMismatch(std::string(where) + ": DickeParams.n_atoms=" + std::to_string(d.n_atoms) +
                            " but space has " + std::to_string(space.n_atoms));
}

/// H = omega_c c^dag c + omega_q J_z + 2 lambda (c^dag + c) J_x.
inline QOperator build_dicke_hamiltonian(const DickeParams& d, const HilbertSpace& space) {
    require_atoms(d, space, "build_dicke_hamiltonian");
    const auto spin = build_spin_operators(space);
    const auto cav = build_cavity_operators(space);
    const QOperator quad = cav.c + cav.c_dag;
    QOperator h = d.omega_c * tensor_lift(cav.n_op, space, Factor::cavity) +
                  d.omega_q * tensor_lift(spin.jz, space, Factor::spin) +
                  (2.0 * d.lambda) * tensor(quad, spin.jx, space);
    return QOperator::hermitian(h.matrix(), h.tag());
}

/// V_x(t) = 2 lambda (e^{i omega_c t} c^dag + e^{-i omega_c t} c) J_x.
inline QOperator build_interaction_picture_coupling(const DickeParams& d, const HilbertSpace& space, double t) {
    require_atoms(d, space, "build_interaction_picture_coupling");
    const auto spin = build_spin_operators(space);
    const auto cav = build_cavity_operators(space);
    const cplx phase = std::exp(I_unit * d.omega_c * t);
    const QOperator quad = phase * cav.c_dag + std::conj(phase) * cav.c;
    QOperator v = (2.0 * d.lambda) * tensor(quad, spin.jx, space);
    return QOperator::hermitian(v.matrix(), v.tag(), 1e-12);
}

// ---------------------------------------------------------------------------
// Full four-level model, used only for the adiabatic-elimination check.

namespace level {
inline constexpr int g = 0, e = 1, r = 2, s = 3;
}

inline constexpr int max_full_model_atoms = 2;

struct FullSpace {
    int n_atoms = 1;
    int n_max = 8;
    [[nodiscard]] int atom_dim() const { return 1 << (2 * n_atoms); }  // 4^N
    [[nodiscard]] int total_dim() const { return n_max * atom_dim(); }
    /// level of atom j in atomic configuration index a (atom 0 most significant)
    [[nodiscard]] int level_of(int a, int j) const { return (a >> (2 * (n_atoms - 1 - j))) & 3; }
    [[nodiscard]] int with_level(int a, int j, int lv) const {
        const int shift = 2 * (n_atoms - 1 - j);
        return (a & ~(3 << shift)) | (lv << shift);
    }
};

/// H = sum_j (Delta_r |r_j><r_j| + Delta_s |s_j><s_j|) + delta_cav c^dag c
///   + sum_j (g_r c^dag |g_j><r_j| + g_s c^dag |e_j><s_j| + h.c.)
///   + sum_j (Omega_r/2 |r_j><e_j| + Omega_s/2 |s_j><g_j| + h.c.)
/// with spatial phases set to one. Ordering: cavity ⊗ atom_0 ⊗ atom_1.
inline DenseMat build_full_lambda_hamiltonian(const PhysicalParams& p, int n_atoms, int n_max) {
    if (n_atoms < 1 || n_atoms > max_full_model_atoms)
        throw ConfigError("build_full_lambda_hamiltonian: n_atoms must be 1 or 2, got " + std::to_string(n_atoms));
    if (n_max < 2) throw ConfigError("build_full_lambda_hamiltonian: n_max must be >= 2");
    const FullSpace fs{n_atoms, n_max};
    const int ad = fs.atom_dim();
    DenseMat h = DenseMat::Zero(fs.total_dim(), fs.total_dim());
    auto idx = [ad](int n, int a) { return n * ad + a; };

    for (int n = 0; n < n_max; ++n) {
        for (int a = 0; a < ad; ++a) {
            double diag = p.delta_cav * n;
            for (int j = 0; j < n_atoms; ++j) {
                const int lv = fs.level_of(a, j);
                if (lv == level::r) diag += p.Delta_r;
                if (lv == level::s) diag += p.Delta_s;

                // Omega_r/2 |r><e| and Omega_s/2 |s><g| (plus h.c. below)
                if (lv == level::e) {
                    const int b = fs.with_level(a, j, level::r);
                    h(idx(n, b), idx(n, a)) += p.Omega_r / 2.0;
                }
                if (lv == level::g) {
                    const int b = fs.with_level(a, j, level::s);
                    h(idx(n, b), idx(n, a)) += p.Omega_s / 2.0;
                }
                // g_r c^dag |g><r| and g_s c^dag |e><s|
                if (n + 1 < n_max) {
                    const double amp = std::sqrt(double(n + 1));
                    if (lv == level::r) {
                        const int b = fs.with_level(a, j, level::g);
                        h(idx(n + 1, b), idx(n, a)) += p.g_r * amp;
                    }
                    if (lv == level::s) {
                        const int b = fs.with_level(a, j, level::e);
                        h(idx(n + 1, b), idx(n, a)) += p.g_s * amp;
                    }
                }
            }
            h(idx(n, a), idx(n, a)) = diag;
        }
    }
    // Off-diagonal entries were written strictly below or above the diagonal
    // in one orientation only; complete the Hermitian conjugate part.
    DenseMat lower = h;
    lower.diagonal().setZero();
    h += lower.adjoint().eval();
    return h;
}

/// Maps the symmetric ground manifold (cavity ⊗ Dicke ladder) into the full
/// model basis: rows are full-model indices, columns Dicke-space indices.
inline DenseMat ground_manifold_embedding(int n_atoms, int n_max) {
    const FullSpace fs{n_atoms, n_max};
    const HilbertSpace hs(n_atoms, n_max);
    DenseMat emb = DenseMat::Zero(fs.total_dim(), hs.total_dim());
    // Ground configurations: every atom in g or e.
    for (int mask = 0; mask < (1 << n_atoms); ++mask) {
        int a = 0;
        int excitations = 0;
        for (int j = 0; j < n_atoms; ++j) {
            const bool up = (mask >> j) & 1;
            excitations += up;
            a = fs.with_level(a, j, up ? level::e : level::g);
        }
        double count = 1.0;  // binomial(n_atoms, excitations)
        for (int i = 0; i < excitations; ++i) count = count * (n_atoms - i) / (i + 1);
        for (int n = 0; n < n_max; ++n) emb(n * fs.atom_dim() + a, hs.index(n, excitations)) = 1.0 / std::sqrt(count);
    }
    return emb;
}

// ---------------------------------------------------------------------------
// Presets

struct Preset {
    std::string name;
    DickeParams dicke;  ///< n_atoms and lambda are set per run
    std::optional<PhysicalParams> physical;
    double theta_max_factor = 1.0;
    std::string note;
};

inline constexpr std::array<std::string_view, 3> preset_names{"rb_atoms", "siv_centers", "bec"};

/// 87Rb D2 line: dipole ratios d_rg = -sqrt(1/8) d, d_se = sqrt(1/6) d fix
/// Delta_r / Delta_s = 3/4, Omega_r / Omega_s = g_r / g_s = -sqrt(3/4).
inline PhysicalParams rb_physical(int n_atoms, double omega_c = to_angular(5.88e6)) {
    PhysicalParams p;
    const double ratio = std::sqrt(3.0 / 4.0);
    p.n_atoms = n_atoms;
    p.Delta_s = to_angular(5e9);
    p.Delta_r = 0.75 * p.Delta_s;
    p.g_r = to_angular(1.1e6);
    p.g_s = -p.g_r / ratio;
    p.Omega_s = p.Delta_s / 50.0;
    p.Omega_r = -ratio * p.Omega_s;
    p.gamma_rg = to_angular(3e6);
    p.gamma_re = to_angular(3e6);
    p.gamma_sg = to_angular(3.6e6);
    p.gamma_se = to_angular(2.4e6);
    p.kappa = to_angular(70e3);
    p.Gamma_phi = 0.0;
    p.delta_cav = delta_cav_for(omega_c, p);
    return p;
}

inline PhysicalParams siv_physical(int n_atoms) {
    PhysicalParams p;
    p.n_atoms = n_atoms;
    p.Delta_r = p.Delta_s = to_angular(10e9);
    p.Omega_r = p.Omega_s = p.Delta_r / 30.0;
    p.g_r = p.g_s = to_angular(46e6);
    p.gamma_rg = p.gamma_re = p.gamma_sg = p.gamma_se = to_angular(3.7e6);
    p.kappa = to_angular(1e6);
    p.Gamma_phi = to_angular(3.5e6);
    p.delta_cav = delta_cav_for(to_angular(350e6), p);
    return p;
}

inline Preset load_preset(std::string_view name) {
    Preset out;
    out.name = std::string(name);
    if (name == "rb_atoms") {
        out.physical = rb_physical(1);
        out.dicke = effective_params(*out.physical).dicke;
        out.theta_max_factor = 1.0;
        out.note = "87Rb, D2 line; lambda/2pi = -12.7 kHz from the physical couplings";
    } else if (name == "siv_centers") {
        out.dicke = {to_angular(350e6), 0.0, 0.0, 1, to_angular(1e6), to_angular(3.5e6)};
        out.physical = siv_physical(1);
        out.theta_max_factor = 0.5;
        out.note = "SiV- centers in diamond at 1 K";
    } else if (name == "bec") {
        out.dicke = {to_angular(500e3), to_angular(28.6e3), to_angular(0.88e3), 1, to_angular(70e3), 0.0};
        out.theta_max_factor = 0.8;
        out.note = "superfluid gas; omega_q is twice the recoil energy";
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "' (expected rb_atoms, siv_centers or bec)");
    }
    return out;
}

}  // namespace dicke
