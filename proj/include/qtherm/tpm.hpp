#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "record.hpp"
#include "rng.hpp"

namespace qtherm {

enum class FinalBasis { RhoTau, Energy, Explicit };

inline const char* to_string(FinalBasis b) {
    switch (b) {
        case FinalBasis::RhoTau: return "rho_tau";
        case FinalBasis::Energy: return "energy";
        case FinalBasis::Explicit: return "explicit";
    }
    return "?";
}

struct Outcome {
    Vector vec;
    double prob = 0.0;
};

// Rank-1 eigen-outcomes of ρ, degenerate eigenspaces resolved in the computational basis.
inline std::vector<Outcome> spectral_outcomes(const Matrix& rho) {
    std::vector<Outcome> out;
    for (const auto& comp : hermitian_eigendecomposition(rho)) {
        for (const auto& v : resolve_rank_one(comp.projector, comp.rank))
            out.push_back({v, expectation(rho, v).real()});
    }
    return out;
}

struct TPMConfig {
    Matrix rho0;
    std::vector<Outcome> initial;
    FinalBasis final_basis = FinalBasis::RhoTau;
    std::vector<Vector> explicit_basis;
};

inline TPMConfig make_tpm_config(const Matrix& rho0, FinalBasis fb = FinalBasis::RhoTau,
                                 std::vector<Vector> explicit_basis = {}) {
    auto chk = check_mixed_state(rho0);
    if (!chk.ok()) throw Error(ErrorCode::InvalidParam, "initial state is not a valid density matrix");
    TPMConfig c;
    c.rho0 = rho0;
    c.initial = spectral_outcomes(rho0);
    c.final_basis = fb;
    c.explicit_basis = std::move(explicit_basis);
    return c;
}

// Final projectors and the ensemble probabilities p_{n_τ} = tr[Π ρ_τ].
struct FinalSetup {
    std::vector<Outcome> outcomes;
    Matrix rho_tau;
    double p_min = 0.0;
    double p_max = 0.0;
};

inline FinalSetup make_final_setup(const TPMConfig& c, const Matrix& rho_tau, const Matrix& h_tau) {
    FinalSetup s;
    s.rho_tau = rho_tau;
    if (c.final_basis == FinalBasis::RhoTau) {
        s.outcomes = spectral_outcomes(rho_tau);
    } else {
        std::vector<Vector> basis;
        if (c.final_basis == FinalBasis::Energy) {
            for (const auto& comp : hermitian_eigendecomposition(h_tau))
                for (const auto& v : resolve_rank_one(comp.projector, comp.rank)) basis.push_back(v);
        } else {
            basis = c.explicit_basis;
        }
        Matrix sum = Matrix::Zero(rho_tau.rows(), rho_tau.cols());
        for (const auto& v : basis) {
            s.outcomes.push_back({v, expectation(rho_tau, v).real()});
            sum += v * v.adjoint();
        }
        if (max_abs(sum - identity(static_cast<int>(rho_tau.rows()))) > 1e-10)
            throw Error(ErrorCode::InvalidParam, "final projectors are not a complete orthogonal set");
    }
    s.p_min = 1.0;
    s.p_max = 0.0;
    for (const auto& o : s.outcomes) {
        s.p_min = std::min(s.p_min, o.prob);
        s.p_max = std::max(s.p_max, o.prob);
    }
    return s;
}

struct InitialDraw {
    int index = 0;
    Vector vec;
    double prob = 0.0;
};

inline InitialDraw sample_initial(const TPMConfig& c, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < c.initial.size(); ++i) {
        if (c.initial[i].prob <= 0.0) continue;
        last = static_cast<int>(i);
        acc += c.initial[i].prob;
        if (u < acc) return {last, c.initial[i].vec, c.initial[i].prob};
    }
    return {last, c.initial[last].vec, c.initial[last].prob};
}

struct FinalDraw {
    int index = 0;
    double p_ntau = 0.0;
    double born = 0.0;
    bool zero_probability = false;
};

inline FinalDraw final_projective_measurement(const Vector& psi, const FinalSetup& s, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    int chosen = -1;
    std::vector<double> born(s.outcomes.size());
    double total = 0.0;
    for (std::size_t i = 0; i < s.outcomes.size(); ++i) {
        born[i] = std::norm(s.outcomes[i].vec.dot(psi));
        total += born[i];
    }
    for (std::size_t i = 0; i < s.outcomes.size(); ++i) {
        acc += born[i] / total;
        if (born[i] > 0.0) chosen = static_cast<int>(i);
        if (u < acc && born[i] > 0.0) break;
    }
    FinalDraw d;
    d.index = chosen;
    d.born = born[chosen] / total;
    d.p_ntau = s.outcomes[chosen].prob;
    d.zero_probability = d.p_ntau < Tolerances::zero_probability;
    return d;
}

// ---- trajectory operators and record probabilities ----

inline Matrix jump_trajectory_operator(const StepTable& tb, const std::vector<JumpEvent>& events) {
    Matrix t = identity(tb.dim);
    const double sq = std::sqrt(tb.dt);
    std::size_t e = 0;
    auto apply_jumps = [&](int instant) {
        while (e < events.size() && events[e].instant == instant) {
            t = sq * tb.l(events[e].channel, instant) * t;
            ++e;
        }
    };
    apply_jumps(0);
    for (int j = 0; j < tb.steps; ++j) {
        t = tb.drift[j] * t;
        apply_jumps(j + 1);
    }
    if (e != events.size()) throw Error(ErrorCode::GridMismatch, "events outside the grid or unordered");
    return t;
}

struct DiffusiveOperator {
    Matrix op;
    double log_ostensible = 0.0;
};

// currents[j][k]: current of channel k in step j.
inline DiffusiveOperator diffusive_trajectory_operator(const StepTable& tb,
                                                       const std::vector<std::vector<double>>& currents) {
    if (static_cast<int>(currents.size()) != tb.steps)
        throw Error(ErrorCode::GridMismatch, "current record length");
    DiffusiveOperator d;
    d.op = identity(tb.dim);
    const double lognorm = 0.5 * std::log(tb.dt / (2.0 * std::numbers::pi));
    for (int j = 0; j < tb.steps; ++j) {
        d.op = diffusive_measurement_operator(tb, j, currents[j]) * tb.drift[j] * d.op;
        for (double i : currents[j]) d.log_ostensible += lognorm - 0.5 * i * i * tb.dt;
    }
    return d;
}

inline std::vector<std::vector<double>> current_matrix(const TrajectoryRecord& r, int channels) {
    if (r.currents.size() != static_cast<std::size_t>(r.steps) * channels)
        throw Error(ErrorCode::GridMismatch, "record does not carry its currents");
    std::vector<std::vector<double>> c(r.steps, std::vector<double>(channels));
    for (std::size_t i = 0; i < r.currents.size(); ++i) c[i / channels][r.currents[i].channel] = r.currents[i].value;
    return c;
}

inline double record_probability(const Matrix& t, const Vector& from, const Vector& to, double p_from) {
    return p_from * std::norm(to.dot(t * from));
}

inline Matrix trajectory_operator(const SystemModel& m, const TrajectoryRecord& r) {
    StepTable tb = build_step_table(forward_view(m), r.scheme, r.dt, r.steps);
    if (r.scheme == Scheme::Jump) return jump_trajectory_operator(tb, r.events);
    return diffusive_trajectory_operator(tb, current_matrix(r, tb.channels)).op;
}

// P_Λ(γ) = p_{n0} tr[Π_{nτ} 𝒯 Π_{n0} 𝒯†]; diffusive records omit the ostensible factor.
inline double forward_record_probability(const SystemModel& m, const TrajectoryRecord& r) {
    return record_probability(trajectory_operator(m, r), r.initial_vector, r.final_vector, r.p_n0);
}

inline void require_backward_support(const SystemModel& m, Scheme s) {
    if (s != Scheme::Diffusive) return;
    for (const auto& c : m.channels)
        if (channel_entropy_change(c) != 0.0)
            throw Error(ErrorCode::UnsupportedChannelSet, "diffusive backward process needs Δs = 0");
}

inline Matrix backward_trajectory_operator(const SystemModel& m, const TrajectoryRecord& r) {
    require_backward_support(m, r.scheme);
    StepTable tb = build_step_table(backward_view(m), r.scheme, r.dt, r.steps);
    if (r.scheme == Scheme::Jump) return jump_trajectory_operator(tb, reverse_events(m, r.events, r.steps, r.dt));
    auto cur = current_matrix(r, tb.channels);
    std::vector<std::vector<double>> rev(cur.rbegin(), cur.rend());
    return diffusive_trajectory_operator(tb, rev).op;
}

// P_Λ̃(γ̃) = p_{nτ} tr[Π̃_{n0} 𝒯̃ Π̃_{nτ} 𝒯̃†]
inline double backward_record_probability(const SystemModel& m, const TrajectoryRecord& r) {
    Matrix tt = backward_trajectory_operator(m, r);
    return record_probability(tt, theta_apply(m, r.final_vector), theta_apply(m, r.initial_vector), r.p_ntau);
}

// ‖Θ†𝒯̃†Θ − 𝒯 e^{−σ/2}‖_max
inline double microreversibility_residual(const SystemModel& m, const TrajectoryRecord& r, double sigma) {
    Matrix t = trajectory_operator(m, r);
    Matrix tt = backward_trajectory_operator(m, r);
    return max_abs(theta_unapply(m, Matrix(tt.adjoint())) - t * std::exp(-sigma / 2.0));
}

}  // namespace qtherm
