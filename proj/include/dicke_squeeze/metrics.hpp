// metrics.hpp: spin-squeezing figures of merit on the Dicke ladder.

#pragma once

#include <array>
#include <numbers>
#include <cmath>
#include <string>

#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/hilbert.hpp"

namespace dicke {

struct SqueezingReport {
    double xi_s_sq = 0.0;          ///< Kitagawa–Ueda, HP form
    double xi_R_sq = 0.0;          ///< Wineland: (N/2|<J>|)^2 xi_s^2
    double xi_R_sq_db = 0.0;
    std::array<double, 3> j_vector{};
    double n_a = 0.0, n_a_sq = 0.0;
    double xi_min_var_sq = 0.0;    ///< 4 min_perp Var(J_perp) / N
    double xi_s_sq_printed = 0.0;  ///< the |<Jbar_x^2>| variant, diagnostic only
    double delta_phi = 0.0;        ///< xi_R / sqrt(N)

    [[nodiscard]] double mean_spin_length() const {
        return std::sqrt(j_vector[0] * j_vector[0] + j_vector[1] * j_vector[1] + j_vector[2] * j_vector[2]);
    }
};

/// -10 log10(xi_sq); positive for squeezing.
inline double db(double xi_sq) {
    if (!(xi_sq > 0.0)) throw StateError("db: squeezing parameter must be positive, got " + std::to_string(xi_sq));
    return -10.0 * std::log10(xi_sq);
}

inline double from_db(double decibels) { return std::pow(10.0, -decibels / 10.0); }

/// theta_opt = 6^{-1/6} (N/2)^{-2/3}
inline double theta_opt(int n_atoms) {
    if (n_atoms < 2) throw ConfigError("theta_opt: n_atoms must be >= 2");
    return std::pow(6.0, -1.0 / 6.0) * std::pow(0.5 * n_atoms, -2.0 / 3.0);
}

namespace detail {

inline cplx expect(const DenseMat& rho, const SparseMat& op) {
    cplx out = 0.0;
    for (int k = 0; k < op.outerSize(); ++k)
        for (SparseMat::InnerIterator it(op, k); it; ++it) out += it.value() * rho(it.col(), it.row());
    return out;
}

}  // namespace detail

/// Minimal transverse variance, 4 min Var(J_perp) / N, from the 2x2
/// covariance in the plane perpendicular to <J>.
inline double min_transverse_xi_sq(const DenseMat& rho_spin, int n_atoms, double* angle_out = nullptr) {
    const HilbertSpace space(n_atoms, 2);
    const auto ops = build_spin_operators(space);
    const std::array<const SparseMat*, 3> j{&ops.jx.matrix(), &ops.jy.matrix(), &ops.jz.matrix()};
    Eigen::Vector3d mean;
    for (int i = 0; i < 3; ++i) mean(i) = detail::expect(rho_spin, *j[i]).real();
    const double len = mean.norm();
    if (len < 1e-12) throw StateError("mean spin vanishes; squeezing direction undefined");
    const Eigen::Vector3d n0 = mean / len;
    // Any fixed orthonormal pair perpendicular to n0.
    const Eigen::Vector3d helper = std::abs(n0.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d e1 = helper.cross(n0).normalized();
    const Eigen::Vector3d e2 = n0.cross(e1);

    auto along = [&](const Eigen::Vector3d& e) {
        return SparseMat(e.x() * *j[0] + e.y() * *j[1] + e.z() * *j[2]);
    };
    const SparseMat a = along(e1), b = along(e2);
    const double ma = detail::expect(rho_spin, a).real(), mb = detail::expect(rho_spin, b).real();
    const double vaa = detail::expect(rho_spin, SparseMat(a * a)).real() - ma * ma;
    const double vbb = detail::expect(rho_spin, SparseMat(b * b)).real() - mb * mb;
    const double vab = 0.5 * detail::expect(rho_spin, SparseMat(a * b + b * a)).real() - ma * mb;
    const double mid = 0.5 * (vaa + vbb);
    const double rad = std::sqrt(0.25 * (vaa - vbb) * (vaa - vbb) + vab * vab);
    if (angle_out) *angle_out = 0.5 * std::atan2(2.0 * vab, vaa - vbb) + 0.5 * std::numbers::pi;
    return 4.0 * (mid - rad) / n_atoms;
}

/// Squeezing figures of merit of a Dicke-space density matrix.
///
/// xi_s^2 = 1 + 2<n> - 2<n^2>/N - 2|<Jbar_-^2>|, Jbar_- = J_-/sqrt(N), which is
/// the Kitagawa–Ueda minimal transverse variance whenever <J> lies along z.
inline SqueezingReport squeezing_report(const DenseMat& rho_spin, int n_atoms) {
    if (rho_spin.rows() != n_atoms + 1 || rho_spin.cols() != n_atoms + 1)
        throw BasisMismatch("squeezing_report: expected a " + std::to_string(n_atoms + 1) + "-dim Dicke-space state");
    const HilbertSpace space(n_atoms, 2);
    const auto ops = build_spin_operators(space);
    const double n = n_atoms;

    SqueezingReport r;
    const HPMoments hp = hp_boson_observables(rho_spin);
    r.n_a = hp.n_a;
    r.n_a_sq = hp.n_a_sq;
    r.j_vector = {detail::expect(rho_spin, ops.jx.matrix()).real(), detail::expect(rho_spin, ops.jy.matrix()).real(),
                  detail::expect(rho_spin, ops.jz.matrix()).real()};
    const double len = r.mean_spin_length();
    if (len < 1e-12) throw StateError("squeezing_report: |<J>| < 1e-12, Wineland parameter undefined");

    const cplx jm_sq = detail::expect(rho_spin, SparseMat(ops.jminus.matrix() * ops.jminus.matrix()));
    const double jx_sq = detail::expect(rho_spin, SparseMat(ops.jx.matrix() * ops.jx.matrix())).real();
    const double base = 1.0 + 2.0 * r.n_a - 2.0 * r.n_a_sq / n;
    r.xi_s_sq = base - 2.0 * std::abs(jm_sq) / n;
    r.xi_s_sq_printed = base - 2.0 * std::abs(jx_sq / n);

    const double wineland = (0.5 * n / len) * (0.5 * n / len);
    r.xi_R_sq = wineland * r.xi_s_sq;
    r.xi_R_sq_db = db(r.xi_R_sq);
    r.xi_min_var_sq = min_transverse_xi_sq(rho_spin, n_atoms);
    r.delta_phi = std::sqrt(r.xi_R_sq) / std::sqrt(n);
    return r;
}

}  // namespace dicke
