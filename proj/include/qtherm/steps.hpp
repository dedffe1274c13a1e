#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "model.hpp"

namespace qtherm {

enum class Scheme { Jump, Diffusive };

inline const char* to_string(Scheme s) { return s == Scheme::Jump ? "jump" : "diffusive"; }

// Time-dependent operators seen by an integrator. The backward view is the time-reversed
// process: mirrored times, reversed protocol and Θ applied. Reversed records carry the
// twin channel indices, so channel k here is Θ L_k Θ†.
struct ModelView {
    int dim = 2;
    int channels = 0;
    std::function<Matrix(double)> hamiltonian;
    std::function<Matrix(double)> bare;
    std::function<Matrix(int, double)> jump;
    bool bare_constant = true;
    bool jumps_constant = true;
};

inline ModelView forward_view(const SystemModel& m) {
    ModelView v;
    v.dim = m.dim;
    v.channels = static_cast<int>(m.channels.size());
    v.hamiltonian = [&m](double t) { return hamiltonian_at(m, t); };
    v.bare = [&m](double t) { return bare_at(m, t); };
    v.jump = [&m](int k, double t) { return jump_operator_at(m, k, t); };
    v.bare_constant = m.bare.is_constant();
    v.jumps_constant = channel_set_constant(m);
    return v;
}

inline int twin_channel(const SystemModel& m, int k) {
    const auto& c = m.channels[k];
    return c.pairing == Pairing::SelfAdjoint ? k : c.partner;
}

inline ModelView backward_view(const SystemModel& m) {
    ModelView v;
    v.dim = m.dim;
    v.channels = static_cast<int>(m.channels.size());
    const double tau = m.protocol.tau;
    v.hamiltonian = [&m, tau](double s) { return theta_apply(m, hamiltonian_at(m, tau - s)); };
    v.bare = [&m, tau](double s) { return theta_apply(m, bare_at(m, tau - s)); };
    v.jump = [&m, tau](int k, double s) {
        return theta_apply(m, jump_operator_at(m, k, tau - s));
    };
    v.bare_constant = m.bare.is_constant();
    v.jumps_constant = channel_set_constant(m);
    return v;
}

// Per-step operators shared by the simulators, the trajectory-operator builder and the
// enumeration oracle. Grid: instants t_m = m dt, m = 0..n; step j spans [t_j, t_{j+1}].
// Jump scheme: step j applies exp(-i dt H_eff(t_j + dt/2)), then a jump may occur at t_{j+1}.
// Diffusive scheme: step j applies exp(-i dt H(t_j + dt/2)), then the measurement operator.
struct StepTable {
    Scheme scheme = Scheme::Jump;
    int dim = 2;
    int steps = 0;
    int channels = 0;
    double dt = 0.0;
    std::vector<Matrix> drift;   // steps entries
    std::vector<Matrix> ham;     // steps + 1 instants
    std::vector<Matrix> dham;    // ham[j+1] - ham[j]
    std::vector<Matrix> bare;    // 1 or steps + 1
    std::vector<std::vector<Matrix>> jump;     // [k][1 or steps + 1]
    std::vector<std::vector<Matrix>> jump_sq;  // L†L
    std::vector<std::vector<Matrix>> jump_herm;  // L + L†

    double time(int m) const { return m * dt; }
    const Matrix& bare_at(int m) const { return bare.size() == 1 ? bare[0] : bare[m]; }
    const Matrix& l(int k, int m) const { return jump[k].size() == 1 ? jump[k][0] : jump[k][m]; }
    const Matrix& k2(int k, int m) const {
        return jump_sq[k].size() == 1 ? jump_sq[k][0] : jump_sq[k][m];
    }
    const Matrix& lh(int k, int m) const {
        return jump_herm[k].size() == 1 ? jump_herm[k][0] : jump_herm[k][m];
    }
};

inline int step_count(double tau, double dt) {
    if (dt <= 0.0) throw Error(ErrorCode::InvalidParam, "dt must be positive");
    double r = tau / dt;
    int n = static_cast<int>(std::llround(r));
    if (n < 1 || std::abs(r - n) > 1e-9 * std::max(1.0, r))
        throw Error(ErrorCode::GridMismatch, "tau is not an integer multiple of dt");
    return n;
}

inline StepTable build_step_table(const ModelView& v, Scheme scheme, double dt, int steps) {
    StepTable tb;
    tb.scheme = scheme;
    tb.dim = v.dim;
    tb.steps = steps;
    tb.channels = v.channels;
    tb.dt = dt;
    const int instants = v.jumps_constant ? 1 : steps + 1;
    tb.jump.assign(v.channels, {});
    tb.jump_sq.assign(v.channels, {});
    tb.jump_herm.assign(v.channels, {});
    for (int k = 0; k < v.channels; ++k) {
        for (int m = 0; m < instants; ++m) {
            Matrix l = v.jump(k, m * dt);
            tb.jump[k].push_back(l);
            tb.jump_sq[k].push_back(l.adjoint() * l);
            tb.jump_herm[k].push_back(l + l.adjoint());
        }
    }
    const int bare_instants = v.bare_constant ? 1 : steps + 1;
    for (int m = 0; m < bare_instants; ++m) tb.bare.push_back(v.bare(m * dt));
    tb.ham.reserve(steps + 1);
    for (int m = 0; m <= steps; ++m) tb.ham.push_back(v.hamiltonian(m * dt));
    tb.dham.reserve(steps);
    for (int j = 0; j < steps; ++j) tb.dham.push_back(tb.ham[j + 1] - tb.ham[j]);
    tb.drift.reserve(steps);
    for (int j = 0; j < steps; ++j) {
        const double tm = (j + 0.5) * dt;
        Matrix gen = v.hamiltonian(tm);
        if (scheme == Scheme::Jump) {
            for (int k = 0; k < v.channels; ++k) {
                Matrix l = v.jumps_constant ? tb.jump[k][0] : v.jump(k, tm);
                gen -= 0.5 * I_UNIT * (l.adjoint() * l);
            }
        }
        tb.drift.push_back(expm(Matrix(-I_UNIT * dt * gen)));
    }
    return tb;
}

// Unnormalized per-step measurement operator of the diffusive scheme for currents I_k.
inline Matrix diffusive_measurement_operator(const StepTable& tb, int j, const std::vector<double>& currents) {
    Matrix m = identity(tb.dim);
    for (int k = 0; k < tb.channels; ++k) {
        m -= 0.5 * tb.dt * tb.k2(k, j + 1);
        m += tb.dt * currents[k] * tb.l(k, j + 1);
    }
    return m;
}

inline Matrix no_jump_propagator(const SystemModel& model, double t1, double t2, double dt) {
    if (t2 < t1) throw Error(ErrorCode::InvalidParam, "t1 > t2");
    Matrix u = identity(model.dim);
    if (t2 == t1) return u;
    int n = step_count(t2 - t1, dt);
    ModelView v = forward_view(model);
    for (int j = 0; j < n; ++j) {
        double tm = t1 + (j + 0.5) * dt;
        Matrix gen = v.hamiltonian(tm);
        for (int k = 0; k < v.channels; ++k) {
            Matrix l = v.jump(k, tm);
            gen -= 0.5 * I_UNIT * (l.adjoint() * l);
        }
        u = expm(Matrix(-I_UNIT * dt * gen)) * u;
    }
    return u;
}

}  // namespace qtherm
