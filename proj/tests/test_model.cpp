#include <gtest/gtest.h>

#include <random>

#include "dicke_squeeze/dynamics.hpp"
#include "dicke_squeeze/model.hpp"

using namespace dicke;

namespace {

PhysicalParams symmetric_params() {
    PhysicalParams p;
    p.g_r = p.g_s = 0.3;
    p.Omega_r = p.Omega_s = 2.0;
    p.Delta_r = p.Delta_s = 100.0;
    p.delta_cav = 5.0;
    p.n_atoms = 3;
    return p;
}

}  // namespace

TEST(EffectiveParams, RbCouplingIsMinusTwelvePointSevenKilohertz) {
    const EffectiveParams e = effective_params(rb_physical(1));
    // -g_r (Omega_s/Delta_s) / sqrt(3) with Omega_s = Delta_s / 50.
    const double expected = -1.1e6 / (50.0 * std::sqrt(3.0));
    EXPECT_NEAR(to_hz(e.dicke.lambda), expected, 1e-6);
    EXPECT_NEAR(to_hz(e.dicke.lambda) / 1e3, -12.7, 0.1);
    EXPECT_TRUE(e.balanced);
    EXPECT_NEAR(std::abs(e.lambda_r - e.lambda_s), 0.0, 1e-9 * std::abs(e.lambda_r));
    EXPECT_NEAR(e.dicke.omega_q / e.dicke.lambda, 0.0, 1e-12);
    EXPECT_NEAR(to_hz(e.dicke.omega_c), 5.88e6, 1e-3);
    EXPECT_FALSE(e.adiabatic.warning());
    EXPECT_NEAR(e.adiabatic.drive_r, std::sqrt(0.75) / (2.0 * 0.75 * 50.0), 1e-15);
}

TEST(EffectiveParams, SymmetricInputCancelsLightShift) {
    const EffectiveParams e = effective_params(symmetric_params());
    EXPECT_EQ(e.dicke.omega_q, 0.0);
    EXPECT_TRUE(e.balanced);
}

TEST(EffectiveParams, NoCavityCouplingLeavesBareDetuning) {
    PhysicalParams p = symmetric_params();
    p.g_r = p.g_s = 0.0;
    const EffectiveParams e = effective_params(p);
    EXPECT_EQ(e.dicke.lambda, 0.0);
    EXPECT_EQ(e.dicke.omega_c, p.delta_cav);
}

TEST(EffectiveParams, DriveScalingIsHomogeneous) {
    PhysicalParams p = rb_physical(1);
    p.Omega_r *= 1.3;  // make omega_q nonzero
    const EffectiveParams a = effective_params(p);
    const double s = 2.5;
    p.Omega_r *= s;
    p.Omega_s *= s;
    const EffectiveParams b = effective_params(p);
    EXPECT_NEAR(b.dicke.omega_q, s * s * a.dicke.omega_q, 1e-9 * std::abs(b.dicke.omega_q));
    EXPECT_NEAR(b.dicke.lambda, s * a.dicke.lambda, 1e-9 * std::abs(b.dicke.lambda));
    EXPECT_EQ(b.dicke.omega_c, a.dicke.omega_c);
}

TEST(EffectiveParams, UnbalancedCouplingsWarn) {
    PhysicalParams p = symmetric_params();
    p.g_s = 0.4;
    const EffectiveParams e = effective_params(p);
    EXPECT_FALSE(e.balanced);
    EXPECT_FALSE(e.warnings.empty());
    p.Delta_r = 0.0;
    EXPECT_THROW((void)effective_params(p), ConfigError);
}

TEST(EffectiveParams, AdiabaticityWarning) {
    PhysicalParams p = symmetric_params();
    p.Omega_r = p.Omega_s = 30.0;
    EXPECT_TRUE(effective_params(p).adiabatic.warning());
}

TEST(DickeHamiltonian, SingleSpinTwoFockAssembly) {
    const HilbertSpace s(1, 2);
    DickeParams d;
    d.lambda = 0.1;
    const DenseMat h = build_dicke_hamiltonian(d, s).dense();
    // Basis |0,g>, |0,e>, |1,g>, |1,e>; 2 lambda <m|J_x|m'> = 0.1 for m != m'.
    DenseMat expected = DenseMat::Zero(4, 4);
    expected(2, 2) = expected(3, 3) = 1.0;
    expected(0, 3) = expected(3, 0) = expected(1, 2) = expected(2, 1) = 0.1;
    EXPECT_LT((h - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DickeHamiltonian, UncoupledSpectrumIsDegenerateLadder) {
    const HilbertSpace s(3, 5);
    DickeParams d;
    d.n_atoms = 3;
    d.omega_c = 1.7;
    const DenseMat h = build_dicke_hamiltonian(d, s).dense();
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<DenseMat>(h).eigenvalues();
    for (int i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev(i), 1.7 * (i / 4), 1e-12);
}

TEST(DickeHamiltonian, HermitianForRandomParameters) {
    std::mt19937 gen(2024);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 6;
        DickeParams d{u(gen), u(gen), u(gen), n, 0.0, 0.0};
        const QOperator h = build_dicke_hamiltonian(d, HilbertSpace(n, 4));
        EXPECT_LT(h.hermiticity_defect(), 1e-12);
    }
}

TEST(DickeHamiltonian, AtomCountMustMatchSpace) {
    DickeParams d;
    d.n_atoms = 3;
    EXPECT_THROW((void)build_dicke_hamiltonian(d, HilbertSpace(4, 3)), BasisMismatch);
}

TEST(InteractionCoupling, ReducesToCouplingTermAtZero) {
    const HilbertSpace s(3, 5);
    DickeParams d{1.3, 0.4, 0.21, 3, 0.0, 0.0};
    DickeParams bare = d;
    bare.omega_c = bare.omega_q = 0.0;
    const DenseMat v0 = build_interaction_picture_coupling(d, s, 0.0).dense();
    EXPECT_LT((v0 - build_dicke_hamiltonian(bare, s).dense()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InteractionCoupling, HalfPeriodFlipsCreationPart) {
    const HilbertSpace s(2, 4);
    DickeParams d{1.0, 0.0, 0.3, 2, 0.0, 0.0};
    const auto cav = build_cavity_operators(s);
    const auto spin = build_spin_operators(s);
    const DenseMat v = build_interaction_picture_coupling(d, s, std::numbers::pi).dense();
    const DenseMat expected = 0.6 * (-tensor(cav.c_dag, spin.jx, s).dense() - tensor(cav.c, spin.jx, s).dense());
    EXPECT_LT((v - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(build_interaction_picture_coupling(d, s, 0.37).hermiticity_defect(), 1e-14);
}

TEST(FullModel, UncoupledIsDiagonalWithExcitedEnergies) {
    PhysicalParams p;
    p.Delta_r = 3.0;
    p.Delta_s = 5.0;
    p.delta_cav = 0.5;
    const DenseMat h = build_full_lambda_hamiltonian(p, 1, 3);
    ASSERT_EQ(h.rows(), 12);
    EXPECT_EQ((h - DenseMat(h.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(h(level::r, level::r).real(), 3.0);
    EXPECT_EQ(h(level::s, level::s).real(), 5.0);
    EXPECT_EQ(h(4 + level::g, 4 + level::g).real(), 0.5);
    EXPECT_EQ(h(4 + level::s, 4 + level::s).real(), 5.5);
}

TEST(FullModel, DimensionAndHermiticity) {
    const PhysicalParams p = rb_physical(2);
    EXPECT_EQ(build_full_lambda_hamiltonian(p, 1, 5).rows(), 20);
    const DenseMat h = build_full_lambda_hamiltonian(p, 2, 4);
    EXPECT_EQ(h.rows(), 64);
    EXPECT_EQ((h - h.adjoint()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW((void)build_full_lambda_hamiltonian(p, 3, 4), ConfigError);
}

TEST(FullModel, GroundEmbeddingIsIsometry) {
    for (int n : {1, 2}) {
        const DenseMat e = ground_manifold_embedding(n, 3);
        EXPECT_LT((e.adjoint() * e - DenseMat::Identity(e.cols(), e.cols())).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Presets, MatchPublishedParameters) {
    const Preset rb = load_preset("rb_atoms");
    EXPECT_NEAR(to_hz(rb.dicke.omega_c), 5.88e6, 1e-3);
    EXPECT_NEAR(to_hz(rb.dicke.kappa), 70e3, 1e-9);
    EXPECT_EQ(rb.theta_max_factor, 1.0);
    ASSERT_TRUE(rb.physical.has_value());

    const Preset siv = load_preset("siv_centers");
    EXPECT_NEAR(to_hz(siv.dicke.Gamma_phi), 3.5e6, 1e-6);
    EXPECT_NEAR(to_hz(siv.dicke.omega_c), 350e6, 1e-3);
    EXPECT_NEAR(to_hz(siv.dicke.kappa), 1e6, 1e-6);
    EXPECT_EQ(siv.theta_max_factor, 0.5);

    const Preset bec = load_preset("bec");
    EXPECT_NEAR(to_hz(bec.dicke.omega_q), 28.6e3, 1e-9);
    EXPECT_NEAR(to_hz(bec.dicke.omega_c), 500e3, 1e-6);
    EXPECT_EQ(bec.theta_max_factor, 0.8);

    EXPECT_THROW((void)load_preset("nv_centers"), ConfigError);
}

TEST(DickeParams, IdealProtocolFlag) {
    EXPECT_TRUE((DickeParams{1.0, 0.01, 0.1, 5, 0.0, 0.0}.ideal_protocol()));
    EXPECT_FALSE((DickeParams{1.0, 0.02, 0.1, 5, 0.0, 0.0}.ideal_protocol()));
}
