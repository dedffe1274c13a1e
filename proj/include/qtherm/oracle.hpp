#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tpm.hpp"

namespace qtherm {

// -i[H, ρ] + Σ_k D_k(ρ)
inline Matrix lindblad_rhs(const Matrix& h, const std::vector<Matrix>& ls, const Matrix& rho) {
    Matrix out = -I_UNIT * (h * rho - rho * h);
    for (const auto& l : ls) out += dissipator(l, rho);
    return out;
}

inline std::vector<Matrix> jump_operators_at(const SystemModel& m, double t) {
    std::vector<Matrix> ls;
    for (int k = 0; k < static_cast<int>(m.channels.size()); ++k) ls.push_back(jump_operator_at(m, k, t));
    return ls;
}

struct Propagation {
    std::vector<int> instants;
    std::vector<Matrix> states;  // one per instant
    double max_trace_drift = 0.0;
    double min_eigenvalue = 1.0;
};

// Classic RK4 on the master equation over the grid t_m = m dt, m = 0..n. States are kept at
// the requested instants (sorted, within 0..n).
inline Propagation lindblad_propagate(const SystemModel& m, const Matrix& rho0, double dt,
                                      const std::vector<int>& instants) {
    const int n = step_count(m.protocol.tau, dt);
    if (instants.empty() || instants.front() < 0 || instants.back() > n)
        throw Error(ErrorCode::GridMismatch, "checkpoint instants outside the grid");
    Propagation p;
    p.instants = instants;
    Matrix rho = rho0;
    std::size_t next = 0;
    auto keep = [&](int inst) {
        while (next < instants.size() && instants[next] == inst) {
            p.states.push_back(rho);
            ++next;
        }
    };
    auto positivity = [&](int inst) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
        double mn = es.eigenvalues().minCoeff();
        p.min_eigenvalue = std::min(p.min_eigenvalue, mn);
        if (mn < Tolerances::rk4_positivity)
            throw Error(ErrorCode::PositivityLoss,
                        "eigenvalue " + std::to_string(mn) + " at t = " + std::to_string(inst * dt));
    };
    keep(0);
    const bool constant_l = channel_set_constant(m);
    const std::vector<Matrix> l_const = jump_operators_at(m, 0.0);
    for (int j = 0; j < n && next < instants.size(); ++j) {
        const double t = j * dt;
        Matrix h0 = hamiltonian_at(m, t), h1 = hamiltonian_at(m, t + 0.5 * dt), h2 = hamiltonian_at(m, t + dt);
        std::vector<Matrix> l0 = constant_l ? l_const : jump_operators_at(m, t);
        std::vector<Matrix> l1 = constant_l ? l_const : jump_operators_at(m, t + 0.5 * dt);
        std::vector<Matrix> l2 = constant_l ? l_const : jump_operators_at(m, t + dt);
        Matrix k1 = lindblad_rhs(h0, l0, rho);
        Matrix k2 = lindblad_rhs(h1, l1, rho + 0.5 * dt * k1);
        Matrix k3 = lindblad_rhs(h1, l1, rho + 0.5 * dt * k2);
        Matrix k4 = lindblad_rhs(h2, l2, rho + dt * k3);
        rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        p.max_trace_drift = std::max(p.max_trace_drift, std::abs(rho.trace() - cplx(1.0)));
        if ((j + 1) % 100 == 0 || j + 1 == n) positivity(j + 1);
        keep(j + 1);
    }
    return p;
}

inline Matrix lindblad_state_at_end(const SystemModel& m, const Matrix& rho0, double dt) {
    return lindblad_propagate(m, rho0, dt, {step_count(m.protocol.tau, dt)}).states.back();
}

// Column-stacked generator: vec(ℒρ) = G vec(ρ), using vec(AXB) = (Bᵀ ⊗ A) vec(X).
inline Matrix vectorized_generator(const Matrix& h, const std::vector<Matrix>& ls) {
    const int d = static_cast<int>(h.rows());
    Matrix id = identity(d);
    auto kron = [](const Matrix& a, const Matrix& b) {
        Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j)
                out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        return out;
    };
    Matrix g = -I_UNIT * (kron(id, h) - kron(h.transpose(), id));
    for (const auto& l : ls) {
        Matrix k = l.adjoint() * l;
        g += kron(l.conjugate(), l) - 0.5 * kron(id, k) - 0.5 * kron(k.transpose(), id);
    }
    return g;
}

struct SteadyState {
    Matrix rho;
    double residual = 0.0;
    int degeneracy = 1;  // number of (numerically) zero eigenvalues of the generator
    double gap = 0.0;    // smallest |eigenvalue| outside the null space
};

inline SteadyState steady_state(const Matrix& h, const std::vector<Matrix>& ls) {
    const int d = static_cast<int>(h.rows());
    Matrix g = vectorized_generator(h, ls);
    Eigen::ComplexEigenSolver<Matrix> es(g);
    const auto& vals = es.eigenvalues();
    int best = 0;
    for (int i = 1; i < vals.size(); ++i)
        if (std::abs(vals(i)) < std::abs(vals(best))) best = i;
    SteadyState s;
    s.degeneracy = 0;
    s.gap = -1.0;
    for (int i = 0; i < vals.size(); ++i) {
        double a = std::abs(vals(i));
        if (a < Tolerances::null_eigenvalue)
            ++s.degeneracy;
        else if (s.gap < 0.0 || a < s.gap)
            s.gap = a;
    }
    if (std::abs(vals(best)) >= Tolerances::null_eigenvalue)
        throw Error(ErrorCode::InvalidParam, "generator has no stationary state; smallest |eigenvalue| = " +
                                                 std::to_string(std::abs(vals(best))));
    auto residual_of = [&](const Matrix& r) { return max_abs(lindblad_rhs(h, ls, r)); };
    Matrix mixed = identity(d) / static_cast<double>(d);
    if (s.degeneracy > 1 && residual_of(mixed) < Tolerances::steady_state_residual) {
        s.rho = mixed;
    } else {
        Vector v = es.eigenvectors().col(best);
        Matrix r(d, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) r(i, j) = v(j * d + i);
        r = (0.5 * (r + r.adjoint())).eval();
        s.rho = r / r.trace();
    }
    s.residual = residual_of(s.rho);
    return s;
}

inline SteadyState steady_state(const SystemModel& m, cplx lambda) {
    std::vector<Matrix> ls;
    for (const auto& c : m.channels) ls.push_back(c.op.at(lambda));
    return steady_state(Matrix(m.bare.at(lambda) + m.drive.at(lambda)), ls);
}

// ---- exhaustive enumeration of jump records on a coarse grid ----

struct EnumeratedRecord {
    int id = 0;
    std::vector<JumpEvent> events;
    int n0 = 0;
    int ntau = 0;
    double p_fwd = 0.0;
    double p_bwd = 0.0;
    double sigma = 0.0;
    double s_tot = 0.0;
    // |log(P_fwd/P_bwd) - S_tot|, NaN when either probability vanishes
    double residual = 0.0;
};

struct Enumeration {
    std::vector<EnumeratedRecord> records;
    double total_forward = 0.0;
    double total_backward = 0.0;
    double max_residual = 0.0;
    int zero_probability_records = 0;
};

inline std::string format_events(const std::vector<JumpEvent>& ev) {
    std::string s;
    for (const auto& e : ev) {
        if (!s.empty()) s += ';';
        s += std::to_string(e.channel) + '@' + std::to_string(e.instant);
    }
    return s.empty() ? "-" : s;
}

// All (K+1)^n jump patterns on the instants 1..n times all TPM outcome pairs. The per-step
// operators are the simulator's StepTable, so this checks the engine's own discretization.
inline Enumeration enumerate_jump_records(const SystemModel& m, double dt, const TPMConfig& tpm,
                                          const FinalSetup& final) {
    const int n = step_count(m.protocol.tau, dt);
    const int k = static_cast<int>(m.channels.size());
    double patterns = std::pow(k + 1.0, n);
    double size = patterns * tpm.initial.size() * final.outcomes.size();
    if (n > 6 || size > 1e6) throw Error(ErrorCode::TooLarge, "enumeration of " + std::to_string(size) + " records");
    StepTable fwd = build_step_table(forward_view(m), Scheme::Jump, dt, n);
    StepTable bwd = build_step_table(backward_view(m), Scheme::Jump, dt, n);
    auto ds = channel_entropy_changes(m);

    Enumeration out;
    int id = 0;
    std::vector<int> digits(n, 0);
    for (long p = 0; p < static_cast<long>(patterns); ++p) {
        long q = p;
        std::vector<JumpEvent> ev;
        double sigma = 0.0;
        for (int i = 0; i < n; ++i) {
            digits[i] = static_cast<int>(q % (k + 1));
            q /= (k + 1);
            if (digits[i] > 0) {
                int ch = digits[i] - 1;
                ev.push_back({(i + 1) * dt, ch, i + 1});
                sigma += ds[ch];
            }
        }
        Matrix t = jump_trajectory_operator(fwd, ev);
        Matrix tt = jump_trajectory_operator(bwd, reverse_events(m, ev, n, dt));
        for (std::size_t a = 0; a < tpm.initial.size(); ++a) {
            for (std::size_t b = 0; b < final.outcomes.size(); ++b) {
                const auto& in = tpm.initial[a];
                const auto& fi = final.outcomes[b];
                EnumeratedRecord r;
                r.id = id++;
                r.events = ev;
                r.n0 = static_cast<int>(a);
                r.ntau = static_cast<int>(b);
                r.p_fwd = record_probability(t, in.vec, fi.vec, in.prob);
                r.p_bwd = record_probability(tt, theta_apply(m, fi.vec), theta_apply(m, in.vec), fi.prob);
                r.sigma = sigma;
                r.s_tot = -std::log(fi.prob) + std::log(in.prob) + sigma;
                if (r.p_fwd > 0.0 && r.p_bwd > 0.0 && std::isfinite(r.s_tot)) {
                    r.residual = std::abs(std::log(r.p_fwd / r.p_bwd) - r.s_tot);
                    out.max_residual = std::max(out.max_residual, r.residual);
                } else {
                    r.residual = std::nan("");
                    ++out.zero_probability_records;
                }
                out.total_forward += r.p_fwd;
                out.total_backward += r.p_bwd;
                out.records.push_back(std::move(r));
            }
        }
    }
    return out;
}

// Max over checkpoints of the trace distance between ensemble-mean and oracle states.
inline double unconditional_consistency(const std::vector<Matrix>& ensemble, const std::vector<Matrix>& oracle) {
    if (ensemble.size() != oracle.size()) throw Error(ErrorCode::GridMismatch, "checkpoint counts differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) worst = std::max(worst, trace_distance(ensemble[i], oracle[i]));
    return worst;
}

}  // namespace qtherm
