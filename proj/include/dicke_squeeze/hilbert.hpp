// hilbert.hpp: joint cavity ⊗ collective-spin space and its operators
//
// Basis ordering (frozen, used by every serialized quantity):
//   index(n, k) = n * spin_dim + k,   n = Fock number (0 .. n_max-1),
//                                     k = m + J   (m ascending from -J).
// The cavity factor varies slowest.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dicke_squeeze/error.hpp"

namespace dicke {

using cplx = std::complex<double>;
using SparseMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using DenseMat = Eigen::MatrixXcd;
using StateVec = Eigen::VectorXcd;

inline constexpr cplx I_unit{0.0, 1.0};

struct HilbertSpace {
    int n_atoms = 1;
    int n_max = 16;

    HilbertSpace() = default;
    HilbertSpace(int atoms, int fock_levels) : n_atoms(atoms), n_max(fock_levels) {
        if (atoms < 1) throw ConfigError("n_atoms must be >= 1, got " + std::to_string(atoms));
        if (fock_levels < 2) throw ConfigError("n_max must be >= 2, got " + std::to_string(fock_levels));
    }

    [[nodiscard]] int spin_dim() const { return n_atoms + 1; }
    [[nodiscard]] int total_dim() const { return n_max * spin_dim(); }
    [[nodiscard]] double total_spin() const { return 0.5 * n_atoms; }
    [[nodiscard]] int index(int fock, int k) const { return fock * spin_dim() + k; }

    friend bool operator==(const HilbertSpace&, const HilbertSpace&) = default;
};

enum class Factor { cavity, spin, joint };

inline const char* to_string(Factor f) {
    switch (f) {
        case Factor::cavity: return "cavity";
        case Factor::spin: return "spin";
        case Factor::joint: return "joint";
    }
    return "?";
}

/// Identifies the space an operator acts on. Cavity operators only care about
/// n_max, spin operators only about n_atoms.
struct BasisTag {
    Factor factor = Factor::joint;
    int n_atoms = 0;
    int n_max = 0;

    static BasisTag cavity(const HilbertSpace& s) { return {Factor::cavity, 0, s.n_max}; }
    static BasisTag spin(const HilbertSpace& s) { return {Factor::spin, s.n_atoms, 0}; }
    static BasisTag joint(const HilbertSpace& s) { return {Factor::joint, s.n_atoms, s.n_max}; }

    [[nodiscard]] std::string describe() const {
        return std::string(to_string(factor)) + "(n_atoms=" + std::to_string(n_atoms) +
               ", n_max=" + std::to_string(n_max) + ")";
    }

    friend bool operator==(const BasisTag&, const BasisTag&) = default;
};

inline double max_abs(const SparseMat& m) {
    double out = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMat::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
    return out;
}

/// Sparse complex matrix tagged with its basis. Immutable once built.
class QOperator {
public:
    QOperator() = default;
    QOperator(SparseMat m, BasisTag tag) : mat_(std::move(m)), tag_(tag) {
        mat_.makeCompressed();
        if (mat_.rows() != mat_.cols()) throw BasisMismatch("operator matrix must be square");
    }

    /// Builds an operator flagged Hermitian; the flag is verified against
    /// max|A - A^dag| < tol * max|A|.
    static QOperator hermitian(SparseMat m, BasisTag tag, double tol = 1e-12) {
        QOperator op(std::move(m), tag);
        if (!op.is_hermitian(tol)) throw Error("operator flagged Hermitian is not: " + tag.describe());
        op.hermitian_ = true;
        return op;
    }

    static QOperator identity(int dim, BasisTag tag) {
        SparseMat m(dim, dim);
        m.setIdentity();
        return {std::move(m), tag};
    }

    [[nodiscard]] const SparseMat& matrix() const { return mat_; }
    [[nodiscard]] const BasisTag& tag() const { return tag_; }
    [[nodiscard]] int dim() const { return static_cast<int>(mat_.rows()); }
    [[nodiscard]] bool flagged_hermitian() const { return hermitian_; }
    [[nodiscard]] DenseMat dense() const { return DenseMat(mat_); }

    [[nodiscard]] double hermiticity_defect() const {
        SparseMat diff = mat_ - SparseMat(mat_.adjoint());
        return max_abs(diff);
    }

    [[nodiscard]] bool is_hermitian(double tol = 1e-12) const {
        const double scale = std::max(max_abs(mat_), 1.0);
        return hermiticity_defect() < tol * scale;
    }

    [[nodiscard]] QOperator adjoint() const {
        QOperator out(SparseMat(mat_.adjoint()), tag_);
        out.hermitian_ = hermitian_;
        return out;
    }

    friend QOperator operator+(const QOperator& a, const QOperator& b) {
        require_same(a, b, "+");
        QOperator out(SparseMat(a.mat_ + b.mat_), a.tag_);
        out.hermitian_ = a.hermitian_ && b.hermitian_;
        return out;
    }
    friend QOperator operator-(const QOperator& a, const QOperator& b) {
        require_same(a, b, "-");
        QOperator out(SparseMat(a.mat_ - b.mat_), a.tag_);
        out.hermitian_ = a.hermitian_ && b.hermitian_;
        return out;
    }
    friend QOperator operator*(const QOperator& a, const QOperator& b) {
        require_same(a, b, "*");
        return {SparseMat(a.mat_ * b.mat_), a.tag_};
    }
    friend QOperator operator*(cplx s, const QOperator& a) {
        QOperator out(SparseMat(s * a.mat_), a.tag_);
        out.hermitian_ = a.hermitian_ && s.imag() == 0.0;
        return out;
    }
    friend QOperator operator*(double s, const QOperator& a) { return cplx(s, 0.0) * a; }

private:
    static void require_same(const QOperator& a, const QOperator& b, const char* what) {
        if (!(a.tag_ == b.tag_))
            throw BasisMismatch(std::string("operator ") + what + ": " + a.tag_.describe() + " vs " +
                                b.tag_.describe());
    }

    SparseMat mat_;
    BasisTag tag_;
    bool hermitian_ = false;
};

inline QOperator commutator(const QOperator& a, const QOperator& b) { return a * b - b * a; }

struct SpinOperators {
    QOperator jx, jy, jz, jplus, jminus;
    QOperator jbar_x;  ///< J_x / sqrt(N_a)
};

struct CavityOperators {
    QOperator c, c_dag, n_op;
};

/// Collective spin operators on the symmetric Dicke ladder, m ascending.
inline SpinOperators build_spin_operators(const HilbertSpace& space) {
    const int d = space.spin_dim();
    const double j = space.total_spin();
    const BasisTag tag = BasisTag::spin(space);

    std::vector<Eigen::Triplet<cplx>> up, z;
    for (int k = 0; k < d; ++k) {
        const double m = k - j;
        z.emplace_back(k, k, m);
        if (k + 1 < d) up.emplace_back(k + 1, k, std::sqrt(j * (j + 1.0) - m * (m + 1.0)));
    }
    SparseMat jp(d, d), jz(d, d);
    jp.setFromTriplets(up.begin(), up.end());
    jz.setFromTriplets(z.begin(), z.end());
    SparseMat jm = jp.adjoint();

    SpinOperators ops;
    ops.jplus = QOperator(jp, tag);
    ops.jminus = QOperator(jm, tag);
    ops.jz = QOperator::hermitian(jz, tag);
    ops.jx = QOperator::hermitian(SparseMat(0.5 * (jp + jm)), tag);
    ops.jy = QOperator::hermitian(SparseMat(cplx(0.0, -0.5) * (jp - jm)), tag);
    ops.jbar_x = QOperator::hermitian(SparseMat(ops.jx.matrix() / std::sqrt(double(space.n_atoms))), tag);
    return ops;
}

/// Truncated single-mode ladder operators: <n-1|c|n> = sqrt(n).
inline CavityOperators build_cavity_operators(const HilbertSpace& space) {
    const int d = space.n_max;
    const BasisTag tag = BasisTag::cavity(space);
    std::vector<Eigen::Triplet<cplx>> lower, number;
    for (int n = 0; n < d; ++n) {
        number.emplace_back(n, n, double(n));
        if (n > 0) lower.emplace_back(n - 1, n, std::sqrt(double(n)));
    }
    SparseMat c(d, d), n_op(d, d);
    c.setFromTriplets(lower.begin(), lower.end());
    n_op.setFromTriplets(number.begin(), number.end());
    return {QOperator(c, tag), QOperator(SparseMat(c.adjoint()), tag), QOperator::hermitian(n_op, tag)};
}

inline SparseMat kron(const SparseMat& a, const SparseMat& b) {
    SparseMat out(a.rows() * b.rows(), a.cols() * b.cols());
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka)
        for (SparseMat::InnerIterator ia(a, ka); ia; ++ia)
            for (int kb = 0; kb < b.outerSize(); ++kb)
                for (SparseMat::InnerIterator ib(b, kb); ib; ++ib)
                    trip.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                                      ia.value() * ib.value());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

/// op ⊗ I (which = cavity) or I ⊗ op (which = spin) on the joint space.
inline QOperator tensor_lift(const QOperator& op, const HilbertSpace& space, Factor which) {
    const BasisTag expected = which == Factor::cavity ? BasisTag::cavity(space) : BasisTag::spin(space);
    if (which == Factor::joint || !(op.tag() == expected))
        throw BasisMismatch("tensor_lift: operator on " + op.tag().describe() + " cannot be lifted as " +
                            to_string(which) + " factor of " + BasisTag::joint(space).describe());
    SparseMat eye_spin(space.spin_dim(), space.spin_dim());
    SparseMat eye_cav(space.n_max, space.n_max);
    eye_spin.setIdentity();
    eye_cav.setIdentity();
    SparseMat lifted = which == Factor::cavity ? kron(op.matrix(), eye_spin) : kron(eye_cav, op.matrix());
    QOperator out(std::move(lifted), BasisTag::joint(space));
    return op.flagged_hermitian() ? QOperator::hermitian(out.matrix(), out.tag()) : out;
}

/// Tensor product of a cavity and a spin operator.
inline QOperator tensor(const QOperator& cav, const QOperator& spin, const HilbertSpace& space) {
    if (!(cav.tag() == BasisTag::cavity(space)) || !(spin.tag() == BasisTag::spin(space)))
        throw BasisMismatch("tensor: factors do not match " + BasisTag::joint(space).describe());
    return {kron(cav.matrix(), spin.matrix()), BasisTag::joint(space)};
}

struct HPMoments {
    double n_a = 0.0;     ///< <a^dag a>
    double n_a_sq = 0.0;  ///< <(a^dag a)^2>
};

/// Exact Holstein-Primakoff correspondence |J,m> <-> Fock |J+m>; only the
/// diagonal of rho is needed.
inline HPMoments hp_boson_observables(const DenseMat& rho_spin) {
    const cplx tr = rho_spin.trace();
    if (std::abs(tr - 1.0) > 1e-8)
        throw StateError("hp_boson_observables: trace " + std::to_string(tr.real()) + " deviates from 1");
    HPMoments out;
    for (Eigen::Index k = 0; k < rho_spin.rows(); ++k) {
        const double p = rho_spin(k, k).real();
        out.n_a += p * double(k);
        out.n_a_sq += p * double(k) * double(k);
    }
    return out;
}

/// Tr_cavity of a joint-space density matrix.
inline DenseMat partial_trace_cavity(const DenseMat& rho, const HilbertSpace& space) {
    const int s = space.spin_dim();
    if (rho.rows() != space.total_dim()) throw BasisMismatch("partial_trace_cavity: dimension mismatch");
    DenseMat out = DenseMat::Zero(s, s);
    for (int n = 0; n < space.n_max; ++n) out += rho.block(n * s, n * s, s, s);
    return out;
}

/// Tr_spin of a joint-space density matrix.
inline DenseMat partial_trace_spin(const DenseMat& rho, const HilbertSpace& space) {
    const int s = space.spin_dim();
    if (rho.rows() != space.total_dim()) throw BasisMismatch("partial_trace_spin: dimension mismatch");
    DenseMat out(space.n_max, space.n_max);
    for (int n = 0; n < space.n_max; ++n)
        for (int n2 = 0; n2 < space.n_max; ++n2) out(n, n2) = rho.block(n * s, n2 * s, s, s).trace();
    return out;
}

inline StateVec product_state(const StateVec& cavity, const StateVec& spin) {
    StateVec out(cavity.size() * spin.size());
    for (Eigen::Index n = 0; n < cavity.size(); ++n) out.segment(n * spin.size(), spin.size()) = cavity(n) * spin;
    return out;
}

/// |fock>_cav ⊗ |J, m = -J + k>.
inline StateVec basis_state(const HilbertSpace& space, int fock, int k) {
    StateVec out = StateVec::Zero(space.total_dim());
    out(space.index(fock, k)) = 1.0;
    return out;
}

inline DenseMat projector(const StateVec& psi) { return psi * psi.adjoint(); }

}  // namespace dicke
