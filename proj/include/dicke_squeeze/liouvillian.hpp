// liouvillian.hpp: Lindblad generator for the dissipative Dicke model.
//
//   d rho/dt = -i[H, rho] + D[sqrt(Gamma_phi/2) J_z] rho + D[sqrt(kappa) c] rho
//   D[A] rho = A rho A^dag - 1/2 {A^dag A, rho}
//
// The fast path applies it as
//   d rho/dt = K rho + (K rho)^dag + sum_k L_k rho L_k^dag,   K = -i H - 1/2 sum_k L_k^dag L_k,
// on the blocks of rho that survive the parity P = exp(i pi (c^dag c + J_z + J)).
// H and J_z commute with P and c anticommutes with it, so an initial state
// with no even/odd coherence keeps none: rho = rho_even ⊕ rho_odd.
//
// That form equals the Lindbladian only for Hermitian rho. On the
// anti-Hermitian part it reduces to A -> sum_k L_k A L_k^dag, which for
// dephasing grows at rate Gamma_phi J^2 / 2, so roundoff would blow up at
// large N. The generator is therefore applied to (rho + rho^dag) / 2.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/hilbert.hpp"
#include "dicke_squeeze/model.hpp"

namespace dicke {

enum class Frame { lab, interaction };

inline const char* to_string(Frame f) { return f == Frame::lab ? "lab" : "interaction"; }

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Collapse operators sqrt(kappa) c ⊗ I and sqrt(Gamma_phi/2) I ⊗ J_z; zero rates are omitted.
inline std::vector<QOperator> collapse_operators(const DickeParams& d, const HilbertSpace& space) {
    if (d.kappa < 0.0 || d.Gamma_phi < 0.0) throw ConfigError("decay rates must be non-negative");
    std::vector<QOperator> out;
    if (d.kappa > 0.0)
        out.push_back(std::sqrt(d.kappa) * tensor_lift(build_cavity_operators(space).c, space, Factor::cavity));
    if (d.Gamma_phi > 0.0)
        out.push_back(std::sqrt(d.Gamma_phi / 2.0) *
                      tensor_lift(build_spin_operators(space).jz, space, Factor::spin));
    return out;
}

/// Reference Liouvillian action, written term by term on full matrices.
inline DenseMat lindblad_rhs(const DenseMat& rho, const QOperator& h, const std::vector<QOperator>& collapse) {
    if (rho.rows() != h.dim() || rho.cols() != h.dim())
        throw BasisMismatch("lindblad_rhs: rho is " + std::to_string(rho.rows()) + "x" +
                            std::to_string(rho.cols()) + ", H has dimension " + std::to_string(h.dim()));
    DenseMat out = -I_unit * (h.matrix() * rho - rho * h.matrix());
    for (const auto& l : collapse) {
        if (!(l.tag() == h.tag()))
            throw BasisMismatch("lindblad_rhs: collapse operator on " + l.tag().describe() + ", H on " +
                                h.tag().describe());
        const SparseMat ldl = l.matrix().adjoint() * l.matrix();
        out += l.matrix() * rho * l.matrix().adjoint();
        out -= 0.5 * (ldl * rho + rho * ldl);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sector layout

/// Partition of the joint basis into blocks that rho is diagonal in.
/// Sector states are stacked row-wise into one RowMat:
///   rows [offset(s), offset(s) + size(s)), columns [0, size(s)),
/// with any column padding held at zero.
class SectorLayout {
public:
    /// Even and odd parity sectors, keeping only those flagged active.
    static SectorLayout parity(const HilbertSpace& space, bool even_active, bool odd_active) {
        std::vector<int> even, odd;
        for (int n = 0; n < space.n_max; ++n)
            for (int k = 0; k < space.spin_dim(); ++k) ((n + k) % 2 == 0 ? even : odd).push_back(space.index(n, k));
        SectorLayout out(space);
        if (even_active) out.add(std::move(even));
        if (odd_active) out.add(std::move(odd));
        return out;
    }

    static SectorLayout whole(const HilbertSpace& space) {
        SectorLayout out(space);
        std::vector<int> all(space.total_dim());
        for (int i = 0; i < space.total_dim(); ++i) all[i] = i;
        out.add(std::move(all));
        return out;
    }

    [[nodiscard]] const HilbertSpace& space() const { return space_; }
    [[nodiscard]] int count() const { return static_cast<int>(sectors_.size()); }
    [[nodiscard]] const std::vector<int>& indices(int s) const { return sectors_[s]; }
    [[nodiscard]] int size(int s) const { return static_cast<int>(sectors_[s].size()); }
    [[nodiscard]] int offset(int s) const { return offsets_[s]; }
    [[nodiscard]] int rows() const { return offsets_.back(); }
    [[nodiscard]] int cols() const { return width_; }

    /// Sector s of a packed matrix (a RowMat or a map over one).
    template <class M>
    [[nodiscard]] auto block(M&& m, int s) const {
        return m.block(offset(s), 0, size(s), size(s));
    }

    [[nodiscard]] RowMat pack(const DenseMat& rho) const {
        RowMat out = RowMat::Zero(rows(), cols());
        for (int s = 0; s < count(); ++s) {
            const auto& idx = sectors_[s];
            for (int i = 0; i < size(s); ++i)
                for (int j = 0; j < size(s); ++j) out(offset(s) + i, j) = rho(idx[i], idx[j]);
        }
        return out;
    }

    [[nodiscard]] DenseMat unpack(const RowMat& packed) const {
        DenseMat out = DenseMat::Zero(space_.total_dim(), space_.total_dim());
        for (int s = 0; s < count(); ++s) {
            const auto& idx = sectors_[s];
            for (int i = 0; i < size(s); ++i)
                for (int j = 0; j < size(s); ++j) out(idx[i], idx[j]) = packed(offset(s) + i, j);
        }
        return out;
    }

    /// Largest |rho_ij| outside the sector blocks (including inactive sectors).
    [[nodiscard]] double leakage(const DenseMat& rho) const {
        std::vector<int> owner(space_.total_dim(), -1);
        for (int s = 0; s < count(); ++s)
            for (int i : sectors_[s]) owner[i] = s;
        double out = 0.0;
        for (int j = 0; j < rho.cols(); ++j)
            for (int i = 0; i < rho.rows(); ++i)
                if (owner[i] < 0 || owner[i] != owner[j]) out = std::max(out, std::abs(rho(i, j)));
        return out;
    }

    /// Sum over the diagonal of f(global index) * rho_ii.
    template <class F>
    [[nodiscard]] double diagonal_sum(const RowMat& packed, F&& weight) const {
        double out = 0.0;
        for (int s = 0; s < count(); ++s)
            for (int i = 0; i < size(s); ++i) out += weight(sectors_[s][i]) * packed(offset(s) + i, i).real();
        return out;
    }

private:
    explicit SectorLayout(const HilbertSpace& space) : space_(space), offsets_{0} {}

    void add(std::vector<int> idx) {
        width_ = std::max(width_, static_cast<int>(idx.size()));
        offsets_.push_back(offsets_.back() + static_cast<int>(idx.size()));
        sectors_.push_back(std::move(idx));
    }

    HilbertSpace space_;
    std::vector<std::vector<int>> sectors_;
    std::vector<int> offsets_;
    int width_ = 0;
};

namespace detail {

/// A[rows, cols] with local indices.
inline SparseMat restrict_to(const SparseMat& a, const std::vector<int>& rows, const std::vector<int>& cols) {
    std::vector<int> col_local(a.cols(), -1);
    for (std::size_t j = 0; j < cols.size(); ++j) col_local[cols[j]] = static_cast<int>(j);
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (SparseMat::InnerIterator it(a, rows[i]); it; ++it)
            if (col_local[it.col()] >= 0) trip.emplace_back(static_cast<int>(i), col_local[it.col()], it.value());
    SparseMat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

/// out = A * x, A in CSR; row-wise axpy over contiguous rows of x.
template <class Out, class In>
inline void spmm_left(const SparseMat& a, const In& x, Out&& out) {
    const int* outer = a.outerIndexPtr();
    const int* inner = a.innerIndexPtr();
    const cplx* val = a.valuePtr();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        auto row = out.row(i);
        row.setZero();
        for (int p = outer[i]; p < outer[i + 1]; ++p) row.noalias() += val[p] * x.row(inner[p]);
    }
}

/// out += x * B^dag, B in CSR; for each output row gathers from one row of x.
template <class Out, class In>
inline void spmm_right_adjoint_add(const In& x, const SparseMat& b, Out&& out) {
    const int* outer = b.outerIndexPtr();
    const int* inner = b.innerIndexPtr();
    const cplx* val = b.valuePtr();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            cplx acc = 0.0;
            for (int p = outer[j]; p < outer[j + 1]; ++p) acc += x(i, inner[p]) * std::conj(val[p]);
            out(i, j) += acc;
        }
    }
}

/// out = t + t^dag, tiled so both reads stay cache-resident.
template <class Out, class In>
inline void hermitian_sum(const In& t, Out&& out) {
    constexpr Eigen::Index tile = 32;
    const Eigen::Index n = t.rows();
    for (Eigen::Index ib = 0; ib < n; ib += tile) {
        const Eigen::Index ie = std::min(n, ib + tile);
        for (Eigen::Index jb = 0; jb < n; jb += tile) {
            const Eigen::Index je = std::min(n, jb + tile);
            for (Eigen::Index i = ib; i < ie; ++i)
                for (Eigen::Index j = jb; j < je; ++j) out(i, j) = t(i, j) + std::conj(t(j, i));
        }
    }
}

}  // namespace detail

/// Fast Liouvillian of the Dicke master equation in the lab frame (H of the
/// Dicke model) or the frame rotating with omega_c c^dag c, where the
/// coupling is 2 lambda (e^{i omega_c t} c^dag + e^{-i omega_c t} c) J_x.
/// Acts on SectorLayout-packed states.
class DickeLiouvillian {
public:
    DickeLiouvillian(const DickeParams& d, SectorLayout layout, Frame frame)
        : layout_(std::move(layout)), omega_c_(d.omega_c), frame_(frame) {
        const HilbertSpace& space = layout_.space();
        require_atoms(d, space, "DickeLiouvillian");
        if (d.kappa < 0.0 || d.Gamma_phi < 0.0) throw ConfigError("decay rates must be non-negative");
        const auto spin = build_spin_operators(space);
        const auto cav = build_cavity_operators(space);
        const SparseMat n_op = tensor_lift(cav.n_op, space, Factor::cavity).matrix();
        const SparseMat jz = tensor_lift(spin.jz, space, Factor::spin).matrix();
        const SparseMat up = tensor(cav.c_dag, spin.jx, space).matrix();  // c^dag J_x
        const SparseMat down = SparseMat(up.adjoint());

        SparseMat stat = cplx(0.0, -d.omega_q) * jz;
        if (frame == Frame::lab) stat += cplx(0.0, -d.omega_c) * n_op;
        stat -= cplx(0.5 * d.kappa) * n_op;
        stat -= cplx(0.25 * d.Gamma_phi) * SparseMat(jz * jz);
        const cplx coupling = cplx(0.0, -2.0 * d.lambda);
        const SparseMat up_k = coupling * up;
        const SparseMat down_k = coupling * down;

        const SparseMat jump = std::sqrt(d.kappa) * tensor_lift(cav.c, space, Factor::cavity).matrix();
        const Eigen::VectorXd deph = std::sqrt(d.Gamma_phi / 2.0) * jz.diagonal().real();

        for (int s = 0; s < layout_.count(); ++s) {
            const auto& idx = layout_.indices(s);
            Block b;
            const SparseMat st = detail::restrict_to(stat, idx, idx);
            const SparseMat u = detail::restrict_to(up_k, idx, idx);
            const SparseMat dn = detail::restrict_to(down_k, idx, idx);
            SparseMat pattern = st + u + dn;
            pattern.makeCompressed();
            const SparseMat zero = cplx(0.0) * pattern;
            auto align = [&](const SparseMat& m) {
                SparseMat a = zero + m;
                a.makeCompressed();
                if (a.nonZeros() != pattern.nonZeros()) throw Error("DickeLiouvillian: sparsity alignment failed");
                return std::vector<cplx>(a.valuePtr(), a.valuePtr() + a.nonZeros());
            };
            b.static_vals = align(st);
            b.up_vals = align(u);
            b.down_vals = align(dn);
            b.k = pattern;
            if (d.Gamma_phi > 0.0) {
                b.dephasing.resize(layout_.size(s));
                for (int i = 0; i < layout_.size(s); ++i) b.dephasing(i) = deph(idx[i]);
            }
            if (d.kappa > 0.0) {
                for (int src = 0; src < layout_.count(); ++src) {
                    SparseMat part = detail::restrict_to(jump, idx, layout_.indices(src));
                    if (part.nonZeros() > 0) b.jumps.push_back({src, std::move(part)});
                }
            }
            blocks_.push_back(std::move(b));
        }
        refresh(0.0);
    }

    template <class In, class Out>
    void operator()(double t, const In& rho, Out&& out) {
        refresh(t);
        if constexpr (std::is_same_v<std::remove_cvref_t<Out>, RowMat>)
            if (out.rows() != rho.rows() || out.cols() != rho.cols()) out.resize(rho.rows(), rho.cols());
        herm_.resize(rho.rows(), rho.cols());
        for (int s = 0; s < layout_.count(); ++s) {
            const auto in_s = layout_.block(rho, s);
            layout_.block(herm_, s) = 0.5 * (in_s + in_s.adjoint());
        }
        for (int s = 0; s < layout_.count(); ++s) {
            const Block& b = blocks_[s];
            const int n = layout_.size(s);
            auto rho_s = layout_.block(herm_, s);
            auto out_s = layout_.block(out, s);
            if (n < layout_.cols()) out.block(layout_.offset(s), n, n, layout_.cols() - n).setZero();
            tmp_.resize(n, n);
            detail::spmm_left(b.k, rho_s, tmp_);
            detail::hermitian_sum(tmp_, out_s);
            for (const auto& [src, l] : b.jumps) {
                const int m = layout_.size(src);
                jump_tmp_.resize(n, m);
                detail::spmm_left(l, layout_.block(herm_, src), jump_tmp_);
                detail::spmm_right_adjoint_add(jump_tmp_, l, out_s);
            }
            if (b.dephasing.size() > 0) {
                for (int i = 0; i < n; ++i)
                    out_s.row(i).array() += b.dephasing(i) * b.dephasing.transpose().array() * rho_s.row(i).array();
            }
        }
    }

    [[nodiscard]] const SectorLayout& layout() const { return layout_; }
    [[nodiscard]] Frame frame() const { return frame_; }

private:
    struct Jump {
        int source;
        SparseMat op;
    };
    struct Block {
        SparseMat k;
        std::vector<cplx> static_vals, up_vals, down_vals;
        Eigen::VectorXd dephasing;
        std::vector<Jump> jumps;
    };

    void refresh(double t) {
        if (!first_ && t == last_t_) return;
        cplx f(1.0);
        if (frame_ == Frame::interaction) f = std::exp(I_unit * omega_c_ * t);
        const cplx fc = std::conj(f);
        for (auto& b : blocks_) {
            cplx* v = b.k.valuePtr();
            for (std::size_t i = 0; i < b.static_vals.size(); ++i)
                v[i] = b.static_vals[i] + f * b.up_vals[i] + fc * b.down_vals[i];
        }
        last_t_ = t;
        first_ = false;
    }

    SectorLayout layout_;
    double omega_c_;
    Frame frame_;
    std::vector<Block> blocks_;
    RowMat herm_, tmp_, jump_tmp_;
    double last_t_ = 0.0;
    bool first_ = true;
};

}  // namespace dicke
