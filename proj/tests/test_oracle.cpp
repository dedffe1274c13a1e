#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace qtherm;
using qtherm::test::loglog_slope;

TEST(Rk4, TraceDriftAndPositivity) {
    for (const auto& name : preset_names()) {
        SystemModel m = build_preset(name);
        Propagation p = lindblad_propagate(m, m.initial_state, 0.01, {0, 2500, 5000, 10000});
        EXPECT_LT(p.max_trace_drift, 1e-9 * m.protocol.tau) << name;
        EXPECT_GT(p.min_eigenvalue, -1e-10) << name;
        for (const auto& s : p.states) EXPECT_TRUE(check_mixed_state(s).ok()) << name;
    }
}

// For L = √κ σ_z the master equation gives dρ01/dt = -(iω + 2κ) ρ01 up to the sign of the
// rotation, so |ρ01(t)| = ½ e^{-2κt} from |+⟩.
TEST(Rk4, DephasingCoherenceDecay) {
    PresetParams p;
    p.values = {{"kappa", 0.05}, {"omega_R", 0.0}, {"tau", 40.0}};
    SystemModel m = build_preset("dispersive_qubit", p);
    Matrix plus = Matrix::Constant(2, 2, 0.5);
    Propagation o = lindblad_propagate(m, plus, 0.01, {0, 500, 1000, 4000});
    for (std::size_t i = 0; i < o.instants.size(); ++i) {
        const double t = o.instants[i] * 0.01;
        EXPECT_NEAR(std::abs(o.states[i](0, 1)), 0.5 * std::exp(-2.0 * 0.05 * t), 1e-9) << "t = " << t;
        EXPECT_NEAR(o.states[i](0, 0).real(), 0.5, 1e-12);
    }
}

TEST(Rk4, ThermalRelaxationMatchesRateEquation) {
    SystemModel m = qtherm::test::undriven_thermal(30.0, 0.1);
    m.initial_state = qtherm::test::excited_state();
    Propagation o = lindblad_propagate(m, m.initial_state, 0.01, {3000});
    const double nbar = bose_occupation(1.0, 5.0), g = 0.1 * (2 * nbar + 1);
    const double p_inf = nbar / (2 * nbar + 1);
    EXPECT_NEAR(o.states[0](1, 1).real(), p_inf + (1 - p_inf) * std::exp(-g * 30.0), 1e-9);
}

TEST(Rk4, PositivityLossIsReported) {
    PresetParams p;
    p.values = {{"gamma0", 5.0}, {"tau", 10.0}};
    SystemModel m = build_preset("driven_qubit_thermal", p);
    m.initial_state = qtherm::test::excited_state();
    try {
        lindblad_propagate(m, m.initial_state, 1.0, {10});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PositivityLoss);
    }
}

TEST(SteadyState, ThermalIsGibbs) {
    SystemModel m = qtherm::test::undriven_thermal(10.0);
    SteadyState s = steady_state(m, 0.0);
    EXPECT_LT(s.residual, 1e-10);
    EXPECT_EQ(s.degeneracy, 1);
    EXPECT_LT(max_abs(s.rho - gibbs_state(m.bare.at(0.0), 5.0)), 1e-10);
    EXPECT_TRUE(check_mixed_state(s.rho).ok());
}

TEST(SteadyState, DrivenThermalIsValidState) {
    SystemModel m = build_preset("driven_qubit_thermal");
    for (double t : {0.0, 1.3, 50.0}) {
        SteadyState s = steady_state(m, lambda_at(m, t));
        EXPECT_LT(s.residual, 1e-10);
        EXPECT_LT(hermiticity_defect(s.rho), 1e-12);
        EXPECT_TRUE(check_mixed_state(s.rho).ok());
    }
}

TEST(SteadyState, DephasingIsDegenerateAndUnital) {
    PresetParams p;
    p.values = {{"omega_R", 0.0}};
    SystemModel m = build_preset("dispersive_qubit", p);
    SteadyState s = steady_state(m, 0.0);
    EXPECT_EQ(s.degeneracy, 2);
    EXPECT_LT(max_abs(s.rho - identity(2) / 2.0), 1e-14);
}

TEST(Vectorized, MatchesDirectGenerator) {
    std::mt19937_64 g(11);
    for (int rep = 0; rep < 20; ++rep) {
        const int d = 2 + rep % 3;
        Matrix h = qtherm::test::random_hermitian(g, d);
        std::vector<Matrix> ls{qtherm::test::random_matrix(g, d), qtherm::test::random_matrix(g, d)};
        Matrix rho = qtherm::test::random_density(g, d);
        Matrix direct = lindblad_rhs(h, ls, rho);
        Vector v(d * d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) v(j * d + i) = rho(i, j);
        Vector w = vectorized_generator(h, ls) * v;
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) EXPECT_LT(std::abs(w(j * d + i) - direct(i, j)), 1e-10);
    }
}

// Fixed horizon, refined grid: the deficit accumulates over τ/dt steps, so it is first order.
TEST(Enumeration, CompletenessErrorIsFirstOrderAtFixedHorizon) {
    std::vector<double> dts{0.04, 0.02, 0.01}, deficits;
    for (double dt : dts) {
        PresetParams p;
        p.values = {{"tau", 0.04}, {"gamma0", 0.5}, {"epsilon", 0.3}};
        SystemModel m = build_preset("driven_qubit_thermal", p);
        TPMConfig tpm = make_tpm_config(m.initial_state);
        Matrix rho_tau = lindblad_state_at_end(m, m.initial_state, dt);
        Enumeration e = enumerate_jump_records(m, dt, tpm, make_final_setup(tpm, rho_tau, hamiltonian_at(m, 0.04)));
        deficits.push_back(std::abs(1.0 - e.total_forward));
        std::cout << "dt " << dt << "  deficit " << deficits.back() << '\n';
    }
    EXPECT_NEAR(loglog_slope(dts, deficits), 1.0, 0.2);
}

TEST(Consistency, RequiresMatchingCheckpoints) {
    std::vector<Matrix> a(3, identity(2) / 2.0), b(2, identity(2) / 2.0);
    EXPECT_THROW(unconditional_consistency(a, b), Error);
    b.push_back(pure_density(basis_vector(2, 0)));
    EXPECT_NEAR(unconditional_consistency(a, b), 0.5, 1e-14);
}
