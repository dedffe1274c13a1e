#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "model.hpp"

namespace qtherm {

struct ThermoLedger {
    double dE = 0.0;
    std::vector<double> Q;      // per reservoir
    std::vector<double> sigma;  // per reservoir
    std::vector<int> jumps;     // per channel
    double W_drive = 0.0;
    double W_chem = 0.0;
    double W_meas = 0.0;
    double W_int = 0.0;
    double W_TPM = 0.0;
    double E_initial = 0.0;  // tr[H(λ_0) ρ_γ(0)]
    double E_final = 0.0;    // tr[H(λ_τ) ρ_γ(τ)] before the final projection
    double t_last = 0.0;

    void reset(std::size_t reservoirs, std::size_t channels) {
        *this = ThermoLedger{};
        Q.assign(reservoirs, 0.0);
        sigma.assign(reservoirs, 0.0);
        jumps.assign(channels, 0);
    }

    double heat() const {
        double s = 0.0;
        for (double q : Q) s += q;
        return s;
    }
    double entropy_flow() const {
        double s = 0.0;
        for (double x : sigma) s += x;
        return s;
    }
    double work_components() const { return W_drive + W_chem + W_meas + W_int + W_TPM; }
    // First-law work, ΔE minus heat.
    double work() const { return dE - heat(); }
    double closure_residual() const { return dE - heat() - work_components(); }
};

inline void accumulate_entropy_flow(ThermoLedger& l, const SystemModel& m, int channel) {
    const auto& c = m.channels[channel];
    l.sigma[m.reservoir_index(c.reservoir)] += channel_entropy_change(c);
    l.jumps[channel] += 1;
}

// Q_r = -T_r σ_r. With per-channel heat quanta (ladder operators of H_S), Q_r is summed from the
// integer jump counts instead, so it is an exact multiple of the level spacing.
inline void finalize_heat(ThermoLedger& l, const SystemModel& m, const std::vector<double>& jump_heat = {}) {
    if (jump_heat.empty()) {
        for (std::size_t r = 0; r < m.reservoirs.size(); ++r)
            l.Q[r] = -m.reservoirs[r].temperature * l.sigma[r];
        return;
    }
    std::fill(l.Q.begin(), l.Q.end(), 0.0);
    for (std::size_t k = 0; k < m.channels.size(); ++k)
        l.Q[m.reservoir_index(m.channels[k].reservoir)] += l.jumps[k] * jump_heat[k];
}

inline double energy_change(const Matrix& h_initial, const Vector& v_initial, const Matrix& h_final,
                            const Vector& v_final) {
    return expectation(h_final, v_final).real() - expectation(h_initial, v_initial).real();
}

inline void finalize_tpm_work(ThermoLedger& l, const Matrix& h_final, const Vector& psi_tau,
                              const Vector& outcome) {
    l.E_final = expectation(h_final, psi_tau).real();
    l.W_TPM = expectation(h_final, outcome).real() - l.E_final;
}

// D_k(ρ) = L ρ L† - ½{L†L, ρ}
inline Matrix dissipator(const Matrix& l, const Matrix& rho) {
    Matrix k = l.adjoint() * l;
    return l * rho * l.adjoint() - 0.5 * (k * rho + rho * k);
}

// Σ_{k∈r} Σ_i ν_i tr[X_i D_k(ρ)] with X_1 = H_S, ν_1 = 1 (energy current into the system).
inline std::vector<double> average_heat_current(const SystemModel& m, const Matrix& rho, double t) {
    std::vector<double> out(m.reservoirs.size(), 0.0);
    cplx lam = lambda_at(m, t);
    Matrix hs = m.bare.at(lam);
    for (std::size_t k = 0; k < m.channels.size(); ++k) {
        const auto& c = m.channels[k];
        int r = m.reservoir_index(c.reservoir);
        Matrix d = dissipator(c.op.at(lam), rho);
        double v = (hs * d).trace().real();
        for (const auto& ch : m.charges) {
            auto it = m.reservoirs[r].potentials.find(ch.id);
            if (it != m.reservoirs[r].potentials.end()) v -= it->second * (ch.op.at(lam) * d).trace().real();
        }
        out[r] += v;
    }
    return out;
}

// Chemical-work weights Σ_{i>1} ν_i^{(r)} X_i for one channel, evaluated at λ.
inline Matrix chemical_operator(const SystemModel& m, int channel, cplx lam) {
    Matrix x = Matrix::Zero(m.dim, m.dim);
    int r = m.reservoir_index(m.channels[channel].reservoir);
    for (const auto& ch : m.charges) {
        auto it = m.reservoirs[r].potentials.find(ch.id);
        if (it != m.reservoirs[r].potentials.end()) x += it->second * ch.op.at(lam);
    }
    return x;
}

}  // namespace qtherm
