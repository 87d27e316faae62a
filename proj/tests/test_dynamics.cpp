#include <gtest/gtest.h>

#include <random>

#include "dicke_squeeze/dynamics.hpp"
#include "dicke_squeeze/metrics.hpp"

using namespace dicke;

namespace {

DenseMat random_density(int dim, unsigned seed, int rank = 3) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    DenseMat a(dim, rank);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < rank; ++j) a(i, j) = cplx(nd(gen), nd(gen));
    DenseMat rho = a * a.adjoint();
    return rho / rho.trace();
}

/// Applies the fast generator to a full matrix through a whole-space layout.
DenseMat fast_rhs(const DickeParams& d, const HilbertSpace& s, Frame frame, double t, const DenseMat& rho) {
    DickeLiouvillian gen(d, SectorLayout::whole(s), frame);
    const RowMat packed = gen.layout().pack(rho);
    RowMat out;
    gen(t, packed, out);
    return gen.layout().unpack(out);
}

EvolutionSpec ideal_spec(int n, double theta, int n_max = 12) {
    EvolutionSpec spec;
    spec.dicke = {1.0, 0.0, lambda_from_theta(theta, 1.0), n, 0.0, 0.0};
    spec.space = HilbertSpace(n, n_max);
    return spec;
}

StateVec analytic_final(int n, double theta, const HilbertSpace& s) {
    return apply_geometric_unitary(basis_state(s, 0, 0), theta, alpha_of_t(2 * std::numbers::pi, 1.0),
                                   lambda_from_theta(theta, 1.0), 1.0, s);
}

}  // namespace

TEST(GeometricPhase, ThetaOfT) {
    EXPECT_EQ(theta_of_t(0.0, 0.3, 1.0), 0.0);
    const double lam = 0.07, wc = 1.9;
    EXPECT_NEAR(theta_of_t(decoupling_time(wc), lam, wc), 2 * std::numbers::pi * std::pow(2 * lam / wc, 2), 1e-15);
    EXPECT_NEAR(theta_of_t(std::numbers::pi, 0.5, 1.0), std::numbers::pi, 1e-15);
}

TEST(GeometricPhase, AlphaOfT) {
    EXPECT_LT(std::abs(alpha_of_t(decoupling_time(2.0, 3), 2.0)), 1e-14);
    EXPECT_NEAR(std::abs(alpha_of_t(std::numbers::pi, 1.0) - 2.0), 0.0, 1e-15);
    for (double t = 0.0; t < 10.0; t += 0.173) EXPECT_LE(std::abs(alpha_of_t(t, 1.3)), 2.0 + 1e-15);
}

TEST(GeometricPhase, LambdaFromTheta) {
    EXPECT_EQ(lambda_from_theta(0.0, 1.0), 0.0);
    EXPECT_NEAR(lambda_from_theta(2 * std::numbers::pi, 3.0), 1.5, 1e-15);
    const double wc = 2.2;
    EXPECT_NEAR(theta_of_t(decoupling_time(wc), lambda_from_theta(0.0868, wc), wc), 0.0868, 1e-15);
    EXPECT_THROW((void)lambda_from_theta(-0.1, 1.0), ConfigError);
}

TEST(GeometricUnitary, IdentityAtZero) {
    const HilbertSpace s(3, 4);
    const StateVec psi = random_density(s.total_dim(), 5, 1).col(0).normalized();
    StateVec v = StateVec::Zero(s.total_dim());
    v(3) = 1.0;
    EXPECT_LT((apply_geometric_unitary(v, 0.0, 0.0, 0.0, 1.0, s) - v).norm(), 1e-13);
}

TEST(GeometricUnitary, SpinOneTwistMatchesHandExponential) {
    // J_x^2 for J = 1 has eigenvalues {0, 1, 1}; exp(i pi/2 J_x^2) = I + (i - 1) J_x^2.
    const HilbertSpace s(2, 2);
    const DenseMat jx = build_spin_operators(s).jx.dense();
    const DenseMat jx2 = jx * jx;
    const DenseMat u = DenseMat::Identity(3, 3) + (I_unit - 1.0) * jx2;
    StateVec down = StateVec::Zero(3);
    down(0) = 1.0;
    const StateVec expected = u * down;
    // |1,-1> -> ((1+i)/2) |1,-1> + ((i-1)/2) |1,1>
    EXPECT_NEAR(std::abs(expected(0) - cplx(0.5, 0.5)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(expected(2) - cplx(-0.5, 0.5)), 0.0, 1e-15);
    EXPECT_LT((apply_twist(down, std::numbers::pi / 2, s) - expected).norm(), 1e-13);
}

TEST(GeometricUnitary, CavityReturnsToVacuumAtDecouplingTime) {
    const HilbertSpace s(4, 14);
    const StateVec out = analytic_final(4, 0.4, s);
    const DenseMat rho = projector(out);
    EXPECT_LT(cavity_photons(rho, s), 1e-20);
    EXPECT_NEAR(purity(partial_trace_cavity(rho, s)), 1.0, 1e-12);
    // Mid-period the cavity is displaced.
    const StateVec mid = apply_geometric_unitary(basis_state(s, 0, 0), 0.2, alpha_of_t(std::numbers::pi, 1.0),
                                                 lambda_from_theta(0.4, 1.0), 1.0, s);
    EXPECT_GT(cavity_photons(projector(mid), s), 1e-2);
}

TEST(Lindblad, ZeroGeneratorGivesZeroDerivative) {
    const HilbertSpace s(2, 3);
    const QOperator h(SparseMat(s.total_dim(), s.total_dim()), BasisTag::joint(s));
    EXPECT_EQ(lindblad_rhs(random_density(s.total_dim(), 1), h, {}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lindblad, CavityDecayRateOfSinglePhoton) {
    const HilbertSpace s(1, 4);
    DickeParams d{1.0, 0.0, 0.0, 1, 0.3, 0.0};
    const DenseMat rho = projector(basis_state(s, 1, 0));
    const DenseMat drho = lindblad_rhs(rho, build_dicke_hamiltonian(d, s), collapse_operators(d, s));
    const DenseMat n = tensor_lift(build_cavity_operators(s).n_op, s, Factor::cavity).dense();
    EXPECT_NEAR((n * drho).trace().real(), -0.3, 1e-14);
}

TEST(Lindblad, DephasingDecaysCoherencesQuadratically) {
    const HilbertSpace s(4, 2);
    const double gamma = 0.7;
    DickeParams d{1.0, 0.0, 0.0, 4, 0.0, gamma};
    DenseMat rho = DenseMat::Zero(s.total_dim(), s.total_dim());
    const int i = s.index(0, 0), j = s.index(0, 3);  // m = -2 and m' = 1
    rho(i, j) = 1.0;
    const QOperator h(SparseMat(s.total_dim(), s.total_dim()), BasisTag::joint(s));
    const DenseMat drho = lindblad_rhs(rho, h, collapse_operators(d, s));
    EXPECT_NEAR(drho(i, j).real(), -(gamma / 4.0) * 9.0, 1e-14);
}

TEST(Lindblad, RejectsMismatchedOperators) {
    const HilbertSpace s(2, 3);
    DickeParams d{1.0, 0.0, 0.1, 2, 0.1, 0.0};
    const QOperator h = build_dicke_hamiltonian(d, s);
    EXPECT_THROW((void)lindblad_rhs(DenseMat::Zero(4, 4), h, {}), BasisMismatch);
    EXPECT_THROW((void)lindblad_rhs(DenseMat::Zero(9, 9), h, collapse_operators(DickeParams{1, 0, 0, 3, 0.1, 0}, HilbertSpace(3, 2))),
                 BasisMismatch);
}

TEST(Liouvillian, FastPathMatchesReferenceInLabFrame) {
    const HilbertSpace s(5, 6);
    DickeParams d{1.1, 0.13, 0.21, 5, 0.07, 0.05};
    const DenseMat rho = random_density(s.total_dim(), 9);
    const DenseMat ref = lindblad_rhs(rho, build_dicke_hamiltonian(d, s), collapse_operators(d, s));
    EXPECT_LT((fast_rhs(d, s, Frame::lab, 0.4, rho) - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Liouvillian, FastPathMatchesReferenceInInteractionFrame) {
    const HilbertSpace s(4, 5);
    DickeParams d{1.1, 0.13, 0.21, 4, 0.07, 0.05};
    const double t = 0.83;
    const DenseMat rho = random_density(s.total_dim(), 10);
    const QOperator h = build_interaction_picture_coupling(d, s, t) +
                        d.omega_q * tensor_lift(build_spin_operators(s).jz, s, Factor::spin);
    const DenseMat ref = lindblad_rhs(rho, h, collapse_operators(d, s));
    EXPECT_LT((fast_rhs(d, s, Frame::interaction, t, rho) - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Liouvillian, ParitySectorsMatchWholeSpace) {
    const HilbertSpace s(6, 5);
    DickeParams d{1.0, 0.1, 0.15, 6, 0.2, 0.03};
    const SectorLayout both = SectorLayout::parity(s, true, true);
    const DenseMat rho = both.unpack(both.pack(random_density(s.total_dim(), 12)));  // drop even/odd coherence
    EXPECT_EQ(both.leakage(rho), 0.0);
    DickeLiouvillian sectors(d, both, Frame::interaction);
    RowMat out;
    sectors(0.3, both.pack(rho), out);
    const DenseMat whole = fast_rhs(d, s, Frame::interaction, 0.3, rho);
    EXPECT_LT((both.unpack(out) - whole).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(both.leakage(whole), 1e-15);
}

TEST(Liouvillian, IgnoresAntiHermitianPart) {
    const HilbertSpace s(5, 4);
    DickeParams d{1.0, 0.1, 0.2, 5, 0.1, 0.3};
    std::mt19937 gen(4);
    std::normal_distribution<double> nd;
    DenseMat a(s.total_dim(), s.total_dim());
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = cplx(nd(gen), nd(gen));
    const DenseMat herm = 0.5 * (a + a.adjoint());
    EXPECT_LT((fast_rhs(d, s, Frame::interaction, 0.2, a) - fast_rhs(d, s, Frame::interaction, 0.2, herm))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
}

TEST(Liouvillian, PackUnpackRoundTrip) {
    const HilbertSpace s(3, 4);
    const SectorLayout even = SectorLayout::parity(s, true, false);
    EXPECT_EQ(even.count(), 1);
    EXPECT_EQ(even.rows(), 8);
    DenseMat rho = DenseMat::Zero(s.total_dim(), s.total_dim());
    rho(0, 0) = 0.5;
    rho(s.index(1, 1), s.index(1, 1)) = 0.5;
    rho(0, s.index(1, 1)) = rho(s.index(1, 1), 0) = 0.25;
    EXPECT_EQ((even.unpack(even.pack(rho)) - rho).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Evolution, NoCouplingKeepsInitialState) {
    EvolutionSpec spec = ideal_spec(3, 0.0, 4);
    const EvolutionResult r = evolve_master(spec);
    ASSERT_TRUE(r.ok()) << r.message;
    EXPECT_LT((r.final_state - ground_state_density(spec.space)).cwiseAbs().maxCoeff(), 1e-14);
    for (double n : r.cavity_photons) EXPECT_EQ(n, 0.0);
}

TEST(Evolution, MatchesGeometricUnitaryForSmallEnsembles) {
    for (int n : {2, 4, 8}) {
        const double theta = theta_opt(n);
        // Leftover photons at t_1 scale with the truncated tail, so ask for 1e-7.
        EvolutionSpec spec = ideal_spec(n, theta, suggest_n_max(n, lambda_from_theta(theta, 1.0), 1.0, 1e-7));
        const EvolutionResult r = evolve_master(spec);
        ASSERT_TRUE(r.ok()) << r.message;
        const StateVec psi = analytic_final(n, theta, spec.space);
        EXPECT_GE(fidelity(psi, r.final_state), 0.999) << n;
        EXPECT_NEAR(fidelity(psi, r.final_state), 1.0, 1e-7) << n;
        const DecouplingReport dec = decoupling_check(r);
        EXPECT_LT(dec.cavity_photons, 1e-6) << n;
        EXPECT_GT(dec.spin_purity, 0.999) << n;
        EXPECT_TRUE(dec.decoupled) << n;
    }
}

TEST(Evolution, PhotonsVanishAtEveryDecouplingTime) {
    EvolutionSpec spec = ideal_spec(4, 0.5);
    spec.t_final = decoupling_time(1.0, 3);
    spec.samples_per_period = 40;
    const EvolutionResult r = evolve_master(spec);
    ASSERT_TRUE(r.ok()) << r.message;
    ASSERT_EQ(r.times.size(), 121u);
    for (int m = 1; m <= 3; ++m) EXPECT_LT(r.cavity_photons[40 * m], 1e-6) << m;
    EXPECT_GT(r.cavity_photons[20], 1e-2);
}

TEST(Evolution, LabAndInteractionFramesAgree) {
    EvolutionSpec spec = ideal_spec(4, 0.6);
    spec.dicke.kappa = 0.05;
    spec.frame = Frame::lab;
    const EvolutionResult lab = evolve_master(spec);
    spec.frame = Frame::interaction;
    const EvolutionResult rot = evolve_master(spec);
    ASSERT_TRUE(lab.ok() && rot.ok());
    const DenseMat a = partial_trace_cavity(lab.final_state, spec.space);
    const DenseMat b = partial_trace_cavity(rot.final_state, spec.space);
    EXPECT_GE(fidelity(a, b), 1.0 - 1e-6);
    EXPECT_LT((lab.final_state - rot.final_state).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Evolution, ConservationDiagnosticsWithDissipation) {
    EvolutionSpec spec = ideal_spec(6, theta_opt(6));
    spec.dicke.kappa = 0.1;
    spec.dicke.Gamma_phi = 0.02;
    spec.dicke.omega_q = 0.05;
    const EvolutionResult r = evolve_master(spec);
    ASSERT_TRUE(r.ok()) << r.message;
    EXPECT_LT(r.diagnostics.trace_drift, 1e-6);
    EXPECT_LT(r.diagnostics.hermiticity_drift, 1e-8);
    EXPECT_GT(r.diagnostics.min_eigenvalue, -1e-7);
    EXPECT_GT(cavity_photons(r.final_state, spec.space), 0.0);
    EXPECT_LT(purity(partial_trace_cavity(r.final_state, spec.space)), 0.999);
}

// Strong dephasing at large J: roundoff in the anti-Hermitian part must not
// grow at rate Gamma_phi J^2 / 2 (here 50 omega_c).
TEST(Evolution, StrongDephasingStaysBounded) {
    EvolutionSpec spec = ideal_spec(20, 0.5 * theta_opt(20), 8);
    spec.dicke.kappa = 0.1;
    spec.dicke.Gamma_phi = 1.0;
    spec.samples_per_period = 10;
    const EvolutionResult r = evolve_master(spec);
    ASSERT_TRUE(r.ok()) << r.message;
    EXPECT_LT(r.diagnostics.trace_drift, 1e-6);
    EXPECT_LT(r.diagnostics.hermiticity_drift, 1e-8);
    EXPECT_GT(r.diagnostics.min_eigenvalue, -1e-7);
}

TEST(Evolution, SingleParitySectorWhenLossless) {
    EvolutionSpec spec = ideal_spec(5, 0.3, 8);
    spec.dicke.Gamma_phi = 0.01;
    const EvolutionResult r = evolve_master(spec);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(SectorLayout::parity(spec.space, true, true).leakage(r.final_state), 0.0);
    EXPECT_EQ(detail::layout_for(ground_state_density(spec.space), spec.space, spec.dicke).count(), 1);
    spec.dicke.kappa = 0.1;
    EXPECT_EQ(detail::layout_for(ground_state_density(spec.space), spec.space, spec.dicke).count(), 2);
}

TEST(Evolution, TruncationGuardRetriesWithLargerFockSpace) {
    EvolutionSpec spec = ideal_spec(6, 2.0 * theta_opt(6), 4);
    const EvolutionResult r = evolve_master(spec);
    EXPECT_TRUE(r.diagnostics.retried);
    EXPECT_EQ(r.diagnostics.n_max_used, 8);

    spec.retry_on_truncation = false;
    const EvolutionResult once = evolve_master(spec);
    EXPECT_EQ(once.status, RunStatus::truncation_unsafe);
    EXPECT_FALSE(once.diagnostics.retried);
}

TEST(Evolution, PredictedTailBoundsMeasuredTail) {
    for (int n : {4, 10}) {
        const double theta = 1.5 * theta_opt(n);
        const int n_max = 8;
        EvolutionSpec spec = ideal_spec(n, theta, n_max);
        spec.retry_on_truncation = false;
        spec.tail_guard = 1.0;
        const EvolutionResult r = evolve_master(spec);
        const double predicted = predicted_fock_tail(n, spec.dicke.lambda, 1.0, n_max);
        EXPECT_LE(r.diagnostics.tail_population, predicted * 1.0001) << n;
        EXPECT_GT(r.diagnostics.tail_population, 0.05 * predicted) << n;
    }
    EXPECT_GE(suggest_n_max(50, lambda_from_theta(theta_opt(50), 1.0), 1.0), 16);
}

TEST(Evolution, RejectsInvalidInitialStates) {
    EvolutionSpec spec = ideal_spec(2, 0.1, 3);
    DenseMat rho = ground_state_density(spec.space);
    rho(0, 0) = 0.9;
    spec.initial_state = rho;
    EXPECT_THROW((void)evolve_master(spec), StateError);
    rho = DenseMat::Zero(spec.space.total_dim(), spec.space.total_dim());
    rho(0, 0) = 1.5;
    rho(1, 1) = -0.5;
    spec.initial_state = rho;
    EXPECT_THROW((void)evolve_master(spec), StateError);
    spec.initial_state = DenseMat::Identity(3, 3) / 3.0;
    EXPECT_THROW((void)evolve_master(spec), BasisMismatch);
}

TEST(Evolution, AcceptsMixedInitialStateWithParityCoherence) {
    EvolutionSpec spec = ideal_spec(3, 0.4, 6);
    const StateVec plus = (basis_state(spec.space, 0, 0) + basis_state(spec.space, 0, 1)).normalized();
    spec.initial_state = projector(plus);
    const EvolutionResult r = evolve_master(spec);
    ASSERT_TRUE(r.ok()) << r.message;
    const StateVec plus_used = (basis_state(r.space, 0, 0) + basis_state(r.space, 0, 1)).normalized();
    const StateVec psi = apply_geometric_unitary(plus_used, 0.4, 0.0, spec.dicke.lambda, 1.0, r.space);
    EXPECT_NEAR(fidelity(psi, r.final_state), 1.0, 1e-7);
}

TEST(Evolution, Deterministic) {
    EvolutionSpec spec = ideal_spec(5, 0.3, 8);
    spec.dicke.kappa = 0.05;
    const EvolutionResult a = evolve_master(spec), b = evolve_master(spec);
    EXPECT_EQ((a.final_state - b.final_state).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Evolution, KeepsLabFrameSnapshots) {
    EvolutionSpec spec = ideal_spec(3, 0.4, 8);
    spec.keep_states = true;
    spec.samples_per_period = 10;
    const EvolutionResult r = evolve_master(spec);
    ASSERT_EQ(r.states.size(), 11u);
    EXPECT_LT((r.states.back() - r.final_state).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(cavity_photons(r.states[5], spec.space), r.cavity_photons[5], 1e-14);
}
