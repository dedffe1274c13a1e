#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace qtherm;
using qtherm::test::loglog_slope;

namespace {

SystemModel strong_thermal(double tau) {
    PresetParams p;
    p.values = {{"gamma0", 0.5}, {"epsilon", 0.3}, {"tau", tau}};
    return build_preset("driven_qubit_thermal", p);
}

double jump_completeness(const StepTable& tb, int j) {
    Matrix sum = tb.drift[j].adjoint() * tb.drift[j];
    for (int k = 0; k < tb.channels; ++k) {
        Matrix om = std::sqrt(tb.dt) * tb.l(k, j + 1) * tb.drift[j];
        sum += om.adjoint() * om;
    }
    return max_abs(sum - identity(tb.dim));
}

// M is affine in the current, so a two-point rule at ±1/√dt reproduces the Gaussian
// average of M†M under the ostensible measure exactly.
double diffusive_completeness(const StepTable& tb, int j) {
    const double s = 1.0 / std::sqrt(tb.dt);
    Matrix sum = Matrix::Zero(tb.dim, tb.dim);
    for (double sign : {1.0, -1.0}) {
        std::vector<double> cur(tb.channels, sign * s);
        Matrix m = diffusive_measurement_operator(tb, j, cur) * tb.drift[j];
        sum += 0.5 * m.adjoint() * m;
    }
    return max_abs(sum - identity(tb.dim));
}

}  // namespace

TEST(Steps, NormPreservedEveryStep) {
    for (const auto& [name, scheme] : {std::pair{"driven_qubit_thermal", Scheme::Jump},
                                       std::pair{"dispersive_qubit", Scheme::Diffusive},
                                       std::pair{"dispersive_qubit", Scheme::Jump}}) {
        PresetParams p;
        p.values = {{"tau", 20.0}, {"gamma0", 0.5}, {"kappa", 0.5}};
        SystemModel m = build_preset(name, p);
        StepTable tb = build_step_table(forward_view(m), scheme, 0.01, 2000);
        Rng rng(8, 0);
        Vector psi = basis_vector(2, 1);
        int fired = 0;
        for (int j = 0; j < tb.steps; ++j) {
            StepOutcome o = scheme == Scheme::Jump ? jump_step(tb, j, psi, rng) : diffusive_step(tb, j, psi, rng);
            ASSERT_NEAR(o.state.norm(), 1.0, 1e-10) << name << " step " << j;
            if (o.fired) ++fired;
            psi = o.state;
        }
        if (scheme == Scheme::Jump) EXPECT_GT(fired, 0) << name;
    }
}

TEST(Steps, PovmCompletenessIsSecondOrder) {
    std::vector<double> dts{0.02, 0.01, 0.005}, cj, cd;
    for (double dt : dts) {
        SystemModel thermal = strong_thermal(1.0);
        StepTable tj = build_step_table(forward_view(thermal), Scheme::Jump, dt, step_count(1.0, dt));
        PresetParams p;
        p.values = {{"kappa", 0.5}, {"omega_R", 0.3}, {"tau", 1.0}};
        SystemModel disp = build_preset("dispersive_qubit", p);
        StepTable td = build_step_table(forward_view(disp), Scheme::Diffusive, dt, step_count(1.0, dt));
        double ej = 0, ed = 0;
        for (int j = 0; j < tj.steps; ++j) {
            ej = std::max(ej, jump_completeness(tj, j));
            ed = std::max(ed, diffusive_completeness(td, j));
        }
        cj.push_back(ej);
        cd.push_back(ed);
        std::cout << "dt " << dt << "  jump C = " << ej / (dt * dt) << "  diffusive C = " << ed / (dt * dt) << '\n';
    }
    EXPECT_NEAR(loglog_slope(dts, cj), 2.0, 0.2);
    EXPECT_NEAR(loglog_slope(dts, cd), 2.0, 0.2);
}

TEST(Steps, JumpProbabilityGuard) {
    PresetParams p;
    p.values = {{"gamma0", 5.0}, {"tau", 1.0}};
    SystemModel m = build_preset("driven_qubit_thermal", p);
    StepTable tb = build_step_table(forward_view(m), Scheme::Jump, 0.1, 10);
    Rng rng(1, 1);
    try {
        jump_step(tb, 0, basis_vector(2, 1), rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StepTooLarge);
    }
}

TEST(Engine, DiffusiveRejectsThermalChannels) {
    SystemModel m = build_preset("driven_qubit_thermal");
    try {
        make_simulation(m, Scheme::Diffusive, 0.01, make_tpm_config(m.initial_state), m.initial_state, 100);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnsupportedChannelSet);
    }
}

TEST(Engine, GridMismatch) {
    EXPECT_THROW(step_count(1.0, 0.3), Error);
    EXPECT_THROW(step_count(1.0, 0.0), Error);
    EXPECT_EQ(step_count(100.0, 0.01), 10000);
}

TEST(Engine, IdenticalSeedsGiveIdenticalRecords) {
    for (auto scheme : {Scheme::Jump, Scheme::Diffusive}) {
        PresetParams p;
        p.values = {{"tau", 20.0}, {"gamma0", 0.05}};
        SystemModel m = build_preset(scheme == Scheme::Jump ? "driven_qubit_thermal" : "dispersive_qubit", p);
        Matrix rho_tau = lindblad_state_at_end(m, m.initial_state, 0.01);
        Simulation sim = make_simulation(m, scheme, 0.01, make_tpm_config(m.initial_state), rho_tau, 100);
        EngineOptions eo;
        eo.keep_snapshots = true;
        for (std::uint64_t stream = 0; stream < 5; ++stream) {
            TrajectoryRecord a = run_trajectory(sim, 77, stream, eo), b = run_trajectory(sim, 77, stream, eo);
            std::string sa = serialize(make_row(a, entropy_production(a, sim.final, nullptr)));
            std::string sb = serialize(make_row(b, entropy_production(b, sim.final, nullptr)));
            EXPECT_EQ(fnv1a(sa.data(), sa.size()), fnv1a(sb.data(), sb.size()));
            EXPECT_EQ(a.events, b.events);
            EXPECT_EQ(a.current_digest, b.current_digest);
        }
        TrajectoryRecord c = run_trajectory(sim, 78, 0, eo), d = run_trajectory(sim, 77, 0, eo);
        EXPECT_NE(serialize(make_row(c, entropy_production(c, sim.final, nullptr))),
                  serialize(make_row(d, entropy_production(d, sim.final, nullptr))));
    }
}

// Self-adjoint L = √κ σ_z gives ⟨L†L⟩ = κ for every state, so counts are Poisson(κτ).
TEST(Engine, JumpCountsArePoissonian) {
    PresetParams p;
    p.values = {{"kappa", 0.1}, {"omega_R", 0.0}, {"tau", 30.0}};
    SystemModel m = build_preset("dispersive_qubit", p);
    Simulation sim = make_simulation(m, Scheme::Jump, 0.01, make_tpm_config(m.initial_state), m.initial_state, 3000);
    const int n = 10000;
    const int bins = 9;  // 0..7 and ≥ 8
    std::vector<double> observed(bins, 0.0);
    for (int i = 0; i < n; ++i) {
        TrajectoryRecord r = run_trajectory(sim, 2024, i);
        observed[std::min<std::size_t>(r.events.size(), bins - 1)] += 1.0;
    }
    const double mu = 3.0;
    double chi2 = 0.0, tail = 1.0;
    for (int k = 0; k < bins; ++k) {
        double pk = k < bins - 1 ? std::exp(-mu + k * std::log(mu) - std::lgamma(k + 1.0)) : tail;
        tail -= pk;
        double e = n * pk;
        chi2 += (observed[k] - e) * (observed[k] - e) / e;
    }
    double pvalue = qtherm::test::chi_square_survival(chi2, bins - 1);
    std::cout << "chi2 = " << chi2 << "  p = " << pvalue << '\n';
    EXPECT_GT(pvalue, 0.01);
}

// First-order weak convergence. The preset's own rates leave the bias far below Monte Carlo
// noise, so this uses the same model with γ0 = 1, T = 0.5 and an excited start.
TEST(Engine, WeakConvergenceIsFirstOrder) {
    std::vector<double> dts{0.08, 0.04, 0.02}, errs;
    for (double dt : dts) {
        PresetParams p;
        p.values = {{"gamma0", 1.0}, {"T", 0.5}, {"tau", 50.0}};
        SystemModel m = build_preset("driven_qubit_thermal", p);
        m.initial_state = qtherm::test::excited_state();
        const int steps = step_count(50.0, dt);
        const int stride = static_cast<int>(std::lround(0.16 / dt));
        auto inst = checkpoint_instants(steps, stride);
        std::vector<int> fine;
        for (int i : inst) fine.push_back(4 * i);
        Propagation oracle = lindblad_propagate(m, m.initial_state, dt / 4, fine);
        Simulation sim = make_simulation(m, Scheme::Jump, dt, make_tpm_config(m.initial_state),
                                         oracle.states.back(), stride);
        EnsembleOptions eo;
        eo.trajectories = 100000;
        eo.seed = 5;
        eo.keep_rows = false;
        EnsembleResult res = run_ensemble(sim, nullptr, eo);
        errs.push_back(unconditional_consistency(res.mean_states, oracle.states));
        std::cout << "dt " << dt << "  max trace distance " << errs.back() << '\n';
    }
    EXPECT_NEAR(loglog_slope(dts, errs), 1.0, 0.2);
}
