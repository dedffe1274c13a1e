#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace qtherm;

namespace {

double pairing_residual(const SystemModel& m, cplx lam) {
    double r = 0.0;
    for (const auto& c : m.channels) {
        if (c.pairing != Pairing::Paired) continue;
        Matrix l = c.op.at(lam), lp = m.channels[c.partner].op.at(lam);
        r = std::max(r, max_abs(l - lp.adjoint() * std::exp(channel_entropy_change(c) / 2.0)));
    }
    return r;
}

}  // namespace

TEST(Presets, HermitianAndPairedOnRandomLambda) {
    std::mt19937_64 g(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (const auto& name : preset_names()) {
        SystemModel m = build_preset(name);
        for (int i = 0; i < 100; ++i) {
            cplx lam(u(g), name == "dispersive_qubit" ? 0.0 : u(g));
            Matrix h = m.bare.at(lam) + m.drive.at(lam);
            EXPECT_LT(hermiticity_defect(h), 1e-12) << name;
            EXPECT_LT(pairing_residual(m, lam), 1e-10) << name;
        }
        EXPECT_TRUE(validate_channel_set(m).ok()) << name;
    }
}

TEST(Presets, FrozenThermalValues) {
    SystemModel m = build_preset("driven_qubit_thermal");
    EXPECT_NEAR(bose_occupation(1.0, 5.0), 4.5167, 1e-4);
    EXPECT_NEAR(m.initial_state(0, 0).real(), 0.5498, 1e-4);
    EXPECT_NEAR(m.initial_state(1, 1).real(), 0.4502, 1e-4);
    auto ds = channel_entropy_changes(m);
    EXPECT_NEAR(ds[0], 0.2, 1e-12);  // emission
    EXPECT_NEAR(ds[1], -0.2, 1e-12);
    auto rep = validate_channel_set(m);
    ASSERT_TRUE(rep.energy_jump_relation);
    EXPECT_NEAR(rep.energy_jumps[0], 1.0, 1e-12);  // released to the bath
    EXPECT_NEAR(rep.energy_jumps[1], -1.0, 1e-12);
}

TEST(Presets, FrozenDispersiveValues) {
    SystemModel m = build_preset("dispersive_qubit");
    EXPECT_NEAR(m.initial_state(1, 1).real(), 0.2689, 1e-4);
    EXPECT_NEAR(m.initial_state(0, 0).real(), 0.7311, 1e-4);
    EXPECT_EQ(channel_entropy_changes(m)[0], 0.0);
}

TEST(Presets, OverridesAndErrors) {
    PresetParams p;
    p.values["gamma0"] = 0.02;
    SystemModel m = build_preset("driven_qubit_thermal", p);
    EXPECT_NEAR(m.channels[0].rate_minus, 0.02 * (bose_occupation(1.0, 5.0) + 1.0), 1e-14);
    try {
        build_preset("nope");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownPreset);
    }
    p.values["gamma0"] = -1.0;
    EXPECT_THROW(build_preset("driven_qubit_thermal", p), Error);
    PresetParams q;
    q.values["bogus"] = 1.0;
    EXPECT_THROW(build_preset("dispersive_qubit", q), Error);
}

TEST(Protocol, DoubleReversalIsIdentity) {
    SystemModel m = build_preset("driven_qubit_thermal");
    ControlProtocol twice = m.protocol.reverse().reverse();
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u(0.0, m.protocol.tau);
    for (int i = 0; i < 1000; ++i) {
        double t = u(g);
        EXPECT_LE(std::abs(twice.evaluate(t) - m.protocol.evaluate(t)), 1e-15);
    }
    ControlProtocol once = m.protocol.reverse();
    EXPECT_LE(std::abs(once.evaluate(0.0) - m.protocol.evaluate(m.protocol.tau)), 1e-15);
}

TEST(Protocol, OutOfWindow) {
    SystemModel m = build_preset("dispersive_qubit");
    try {
        m.protocol.evaluate(m.protocol.tau * 1.01);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfWindow);
    }
    EXPECT_THROW(m.protocol.evaluate(-0.5), Error);
}

TEST(Presets, GibbsIsFixedPointOfUndrivenGenerator) {
    SystemModel m = qtherm::test::undriven_thermal(10.0);
    Matrix hs = m.bare.at(0.0);
    Matrix gibbs = gibbs_state(hs, 5.0);
    std::vector<Matrix> ls;
    for (const auto& c : m.channels) ls.push_back(c.op.at(0.0));
    EXPECT_LT(max_abs(lindblad_rhs(hs, ls, gibbs)), 1e-10);
}

TEST(Validation, DetectsBrokenPairing) {
    SystemModel m = build_preset("driven_qubit_thermal");
    m.channels[1].rate_plus *= 2.0;  // Δs no longer matches the operators
    auto rep = validate_channel_set(m);
    EXPECT_FALSE(rep.ok());
    EXPECT_FALSE(rep.pairing_violations.empty());
}

TEST(Validation, DetectsNonHermitianSelfAdjointChannel) {
    SystemModel m = build_preset("dispersive_qubit");
    m.channels[0].op = ParametricOperator(sigma_minus());
    EXPECT_FALSE(validate_channel_set(m).ok());
}

TEST(Validation, ZeroRateRejected) {
    SystemModel m = build_preset("driven_qubit_thermal");
    m.channels[0].rate_plus = 0.0;
    try {
        channel_entropy_change(m.channels[0]);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroRate);
    }
}
