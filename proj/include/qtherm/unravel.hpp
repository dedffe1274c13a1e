#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "tpm.hpp"

namespace qtherm {

namespace kernel {

// y = A x for a column-major d×d matrix.
inline void mv(const Matrix& a, const cplx* x, cplx* y, int d) {
    const cplx* p = a.data();
    for (int i = 0; i < d; ++i) y[i] = 0.0;
    for (int j = 0; j < d; ++j) {
        const cplx xj = x[j];
        const cplx* col = p + static_cast<std::ptrdiff_t>(j) * d;
        for (int i = 0; i < d; ++i) y[i] += col[i] * xj;
    }
}

// Σ conj(a_i) b_i
inline cplx dot(const cplx* a, const cplx* b, int d) {
    cplx s = 0.0;
    for (int i = 0; i < d; ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline double norm2(const cplx* a, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += std::norm(a[i]);
    return s;
}

inline void scale(cplx* a, double f, int d) {
    for (int i = 0; i < d; ++i) a[i] *= f;
}

// Re <x|A|x> using the scratch buffer.
inline double quad(const Matrix& a, const cplx* x, cplx* scratch, int d) {
    mv(a, x, scratch, d);
    return dot(x, scratch, d).real();
}

}  // namespace kernel

struct EngineOptions {
    int stride = 100;
    bool keep_snapshots = false;
    bool keep_currents = false;
};

inline std::vector<int> checkpoint_instants(int steps, int stride) {
    std::vector<int> out;
    if (stride < 1) stride = 1;
    for (int m = 0; m <= steps; m += stride) out.push_back(m);
    if (out.back() != steps) out.push_back(steps);
    return out;
}

// Everything an ensemble shares across trajectories; built once.
struct Simulation {
    const SystemModel* model = nullptr;
    Scheme scheme = Scheme::Jump;
    StepTable table;
    TPMConfig tpm;
    FinalSetup final;
    std::vector<double> delta_s;
    std::vector<double> jump_heat;  // exact heat per jump, empty when H_S has no ladder structure
    std::vector<int> reservoir_of;
    std::vector<int> checkpoints;
    bool has_charges = false;
    int stride = 100;
};

inline void require_scheme_support(const SystemModel& m, Scheme s) {
    if (s != Scheme::Diffusive) return;
    for (const auto& c : m.channels)
        if (c.pairing != Pairing::SelfAdjoint && channel_entropy_change(c) != 0.0)
            throw Error(ErrorCode::UnsupportedChannelSet,
                        "diffusive unraveling requires self-adjoint channels or Δs = 0 (" + c.name + ")");
}
// Heat per jump is -ΔE_k, with ΔE_k the energy released to the bath; kept only when T Δs_k = ΔE_k and there
// are no extra charges.
inline std::vector<double> jump_heat_quanta(const SystemModel& m) {
    if (!m.charges.empty() || !m.bare.is_constant()) return {};
    ValidationReport rep = validate_channel_set(m, 1);
    if (!rep.energy_jump_relation) return {};
    for (std::size_t k = 0; k < m.channels.size(); ++k) {
        const double t = m.reservoirs[m.reservoir_index(m.channels[k].reservoir)].temperature;
        if (std::abs(t * channel_entropy_change(m.channels[k]) - rep.energy_jumps[k]) > 1e-9) return {};
    }
    std::vector<double> q;  // heat into the system per jump
    for (double e : rep.energy_jumps) q.push_back(-e);
    return q;
}

inline Simulation make_simulation(const SystemModel& m, Scheme scheme, double dt, const TPMConfig& tpm,
                                  const Matrix& rho_tau, int stride) {
    require_scheme_support(m, scheme);
    Simulation s;
    s.model = &m;
    s.scheme = scheme;
    const int n = step_count(m.protocol.tau, dt);
    s.table = build_step_table(forward_view(m), scheme, dt, n);
    s.tpm = tpm;
    s.final = make_final_setup(tpm, rho_tau, s.table.ham[n]);
    s.delta_s = channel_entropy_changes(m);
    s.jump_heat = jump_heat_quanta(m);
    for (const auto& c : m.channels) s.reservoir_of.push_back(m.reservoir_index(c.reservoir));
    s.stride = stride;
    s.checkpoints = checkpoint_instants(n, stride);
    s.has_charges = !m.charges.empty();
    return s;
}

// Accumulates Σ |ψ⟩⟨ψ| per checkpoint.
struct CheckpointSums {
    std::vector<Matrix> sums;
    std::size_t count = 0;

    void init(std::size_t n, int dim) { sums.assign(n, Matrix::Zero(dim, dim)); }
    void merge(const CheckpointSums& o) {
        if (sums.empty()) {
            *this = o;
            return;
        }
        for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += o.sums[i];
        count += o.count;
    }
};

namespace detail {

inline void take_snapshot(TrajectoryRecord& r, const SystemModel& m, int instant, const Vector& psi,
                          double energy) {
    Snapshot s;
    s.instant = instant;
    s.psi = psi;
    s.energy = energy;
    s.entropy_flow = r.ledger.entropy_flow();
    double q = 0.0;
    for (std::size_t i = 0; i < m.reservoirs.size(); ++i) q -= m.reservoirs[i].temperature * r.ledger.sigma[i];
    s.heat = q;
    s.W_drive = r.ledger.W_drive;
    s.W_meas = r.ledger.W_meas;
    s.W_chem = r.ledger.W_chem;
    s.W_int = r.ledger.W_int;
    r.snapshots.push_back(std::move(s));
}

inline void finish(const Simulation& sim, TrajectoryRecord& r, const Vector& psi, Rng& rng) {
    const SystemModel& m = *sim.model;
    const StepTable& tb = sim.table;
    r.psi_tau = psi;
    FinalDraw fd = final_projective_measurement(psi, sim.final, rng);
    r.ntau = fd.index;
    r.p_ntau = fd.p_ntau;
    r.born_ntau = fd.born;
    r.zero_probability_final = fd.zero_probability;
    r.final_vector = sim.final.outcomes[fd.index].vec;
    finalize_heat(r.ledger, m, sim.jump_heat);
    finalize_tpm_work(r.ledger, tb.ham[tb.steps], psi, r.final_vector);
    r.ledger.dE = energy_change(tb.ham[0], r.initial_vector, tb.ham[tb.steps], r.final_vector);
    r.ledger.t_last = tb.time(tb.steps);
}

}  // namespace detail

// One quantum-jump trajectory. Step j: ψ → exp(-i dt H_eff(t_j + dt/2)) ψ, then channel k fires at
// t_{j+1} with probability dt⟨L_k†L_k⟩ (one uniform, stacked thresholds) and ψ → L_k ψ.
inline TrajectoryRecord run_jump_trajectory(const Simulation& sim, std::uint64_t seed, std::uint64_t stream,
                                            const EngineOptions& opt = {}, CheckpointSums* sums = nullptr) {
    const SystemModel& m = *sim.model;
    const StepTable& tb = sim.table;
    const int d = tb.dim;
    const int nk = tb.channels;
    const double dt = tb.dt;
    Rng rng(seed, stream);

    TrajectoryRecord r;
    r.scheme = Scheme::Jump;
    r.dt = dt;
    r.steps = tb.steps;
    r.tau = m.protocol.tau;
    r.seed = seed;
    r.stream = stream;
    r.ledger.reset(m.reservoirs.size(), m.channels.size());

    InitialDraw init = sample_initial(sim.tpm, rng);
    r.n0 = init.index;
    r.p_n0 = init.prob;
    r.initial_vector = init.vec;

    Vector psi = init.vec, phi(d), hx(d), tmp(d), chi(d);
    std::vector<Vector> kx(nk, Vector(d));
    std::vector<double> kexp(nk);

    // Cached per-instant quantities for the current state: energy and Σ_k tr[H M_k(ρ)].
    auto measure = [&](const Vector& x, int instant, double& energy, double& mterm) {
        kernel::mv(tb.ham[instant], x.data(), hx.data(), d);
        energy = kernel::dot(x.data(), hx.data(), d).real();
        mterm = 0.0;
        for (int k = 0; k < nk; ++k) {
            kernel::mv(tb.k2(k, instant), x.data(), kx[k].data(), d);
            kexp[k] = kernel::dot(x.data(), kx[k].data(), d).real();
            mterm += kernel::dot(hx.data(), kx[k].data(), d).real() - energy * kexp[k];
        }
    };

    double e_psi = 0.0, m_psi = 0.0;
    measure(psi, 0, e_psi, m_psi);
    r.ledger.E_initial = e_psi;

    std::size_t next_cp = 0;
    auto checkpoint = [&](int instant, const Vector& x, double energy) {
        if (next_cp < sim.checkpoints.size() && sim.checkpoints[next_cp] == instant) {
            if (sums) sums->sums[next_cp] += x * x.adjoint();
            if (opt.keep_snapshots) detail::take_snapshot(r, m, instant, x, energy);
            ++next_cp;
        }
    };
    checkpoint(0, psi, e_psi);

    for (int j = 0; j < tb.steps; ++j) {
        kernel::mv(tb.drift[j], psi.data(), phi.data(), d);
        double n2 = kernel::norm2(phi.data(), d);
        if (n2 < Tolerances::norm_collapse * Tolerances::norm_collapse)
            throw Error(ErrorCode::NormCollapse, "no-jump update at step " + std::to_string(j));
        kernel::scale(phi.data(), 1.0 / std::sqrt(n2), d);

        const double dh_psi = kernel::quad(tb.dham[j], psi.data(), tmp.data(), d);
        const double dh_phi = kernel::quad(tb.dham[j], phi.data(), tmp.data(), d);
        r.ledger.W_drive += 0.5 * (dh_psi + dh_phi);

        double e_phi = 0.0, m_phi = 0.0;
        measure(phi, j + 1, e_phi, m_phi);
        r.ledger.W_meas -= 0.5 * dt * (m_psi + m_phi);

        double total = 0.0, kmax = 0.0;
        for (int k = 0; k < nk; ++k) {
            total += dt * kexp[k];
            kmax = std::max(kmax, kexp[k]);
        }
        if (dt * kmax >= Tolerances::max_jump_probability)
            throw Error(ErrorCode::StepTooLarge, "dt*<L^dag L> = " + std::to_string(dt * kmax));

        const double u = rng.uniform();
        int fired = -1;
        if (u < total) {
            double acc = 0.0;
            for (int k = 0; k < nk; ++k) {
                acc += dt * kexp[k];
                if (u < acc) {
                    fired = k;
                    break;
                }
            }
            if (fired < 0) fired = nk - 1;
        }

        if (fired >= 0) {
            const int k = fired;
            const int inst = j + 1;
            const double kk = kexp[k];
            if (kk < Tolerances::norm_collapse * Tolerances::norm_collapse)
                throw Error(ErrorCode::NormCollapse, "jump on a dark state at step " + std::to_string(j));
            const Matrix& hs = tb.bare_at(inst);
            kernel::mv(tb.l(k, inst), phi.data(), chi.data(), d);
            // measurement jump term with H_S, interaction term with V = H - H_S
            kernel::mv(hs, phi.data(), tmp.data(), d);
            const double hs_phi = kernel::dot(phi.data(), tmp.data(), d).real();
            const double hs_k = kernel::dot(tmp.data(), kx[k].data(), d).real();
            const double h_chi = kernel::quad(tb.ham[inst], chi.data(), tmp.data(), d);
            const double hs_chi = kernel::quad(hs, chi.data(), tmp.data(), d);
            r.ledger.W_meas += hs_k / kk - hs_phi;
            r.ledger.W_int += (h_chi - hs_chi) / kk - (e_phi - hs_phi);
            if (sim.has_charges) {
                Matrix x = chemical_operator(m, k, lambda_at(m, tb.time(inst)));
                const double x_chi = kernel::quad(x, chi.data(), tmp.data(), d);
                kernel::mv(x, phi.data(), tmp.data(), d);
                const double x_k = kernel::dot(tmp.data(), kx[k].data(), d).real();
                r.ledger.W_chem += (x_chi - x_k) / kk;
            }
            r.ledger.sigma[sim.reservoir_of[k]] += sim.delta_s[k];
            r.ledger.jumps[k] += 1;
            r.events.push_back({tb.time(inst), k, inst});
            kernel::scale(chi.data(), 1.0 / std::sqrt(kernel::norm2(chi.data(), d)), d);
            psi = chi;
            measure(psi, inst, e_psi, m_psi);
        } else {
            psi.swap(phi);
            e_psi = e_phi;
            m_psi = m_phi;
        }
        checkpoint(j + 1, psi, e_psi);
    }
    if (sums) sums->count += 1;
    detail::finish(sim, r, psi, rng);
    return r;
}

// One diffusive trajectory. Step j: ψ → exp(-i dt H(t_j + dt/2)) ψ, then the measurement operator
// 1 - (dt/2)Σ L_k†L_k + dt Σ I_k L_k with I_k = ⟨L_k + L_k†⟩ + dw_k/dt, dw_k ~ N(0, dt).
inline TrajectoryRecord run_diffusive_trajectory(const Simulation& sim, std::uint64_t seed, std::uint64_t stream,
                                                 const EngineOptions& opt = {}, CheckpointSums* sums = nullptr) {
    const SystemModel& m = *sim.model;
    const StepTable& tb = sim.table;
    const int d = tb.dim;
    const int nk = tb.channels;
    const double dt = tb.dt;
    const double sqdt = std::sqrt(dt);
    Rng rng(seed, stream);

    TrajectoryRecord r;
    r.scheme = Scheme::Diffusive;
    r.dt = dt;
    r.steps = tb.steps;
    r.tau = m.protocol.tau;
    r.seed = seed;
    r.stream = stream;
    r.ledger.reset(m.reservoirs.size(), m.channels.size());

    InitialDraw init = sample_initial(sim.tpm, rng);
    r.n0 = init.index;
    r.p_n0 = init.prob;
    r.initial_vector = init.vec;

    Vector psi = init.vec, phi(d), chi(d), tmp(d), tmp2(d);
    std::vector<Vector> lx(nk, Vector(d)), kx(nk, Vector(d));
    std::vector<double> cur(nk);
    Matrix hbar(d, d), vbar(d, d);
    std::vector<Matrix> chem(nk);
    if (sim.has_charges)
        for (int k = 0; k < nk; ++k) chem[k] = chemical_operator(m, k, lambda_at(m, 0.0));

    double e_psi = kernel::quad(tb.ham[0], psi.data(), tmp.data(), d);
    r.ledger.E_initial = e_psi;
    std::uint64_t digest = 1469598103934665603ull;
    if (opt.keep_currents) r.currents.reserve(static_cast<std::size_t>(tb.steps) * nk);

    std::size_t next_cp = 0;
    auto checkpoint = [&](int instant, const Vector& x, double energy) {
        if (next_cp < sim.checkpoints.size() && sim.checkpoints[next_cp] == instant) {
            if (sums) sums->sums[next_cp] += x * x.adjoint();
            if (opt.keep_snapshots) detail::take_snapshot(r, m, instant, x, energy);
            ++next_cp;
        }
    };
    checkpoint(0, psi, e_psi);

    for (int j = 0; j < tb.steps; ++j) {
        const int inst = j + 1;
        kernel::mv(tb.drift[j], psi.data(), phi.data(), d);
        kernel::scale(phi.data(), 1.0 / std::sqrt(kernel::norm2(phi.data(), d)), d);

        for (int i = 0; i < d; ++i) chi[i] = phi[i];
        for (int k = 0; k < nk; ++k) {
            kernel::mv(tb.l(k, inst), phi.data(), lx[k].data(), d);
            kernel::mv(tb.k2(k, inst), phi.data(), kx[k].data(), d);
            const double x = 2.0 * kernel::dot(phi.data(), lx[k].data(), d).real();
            const double dw = sqdt * rng.normal();
            cur[k] = x + dw / dt;
            for (int i = 0; i < d; ++i) chi[i] += -0.5 * dt * kx[k][i] + dt * cur[k] * lx[k][i];
        }
        const double n2 = kernel::norm2(chi.data(), d);
        if (n2 < Tolerances::norm_collapse * Tolerances::norm_collapse)
            throw Error(ErrorCode::NormCollapse, "measurement update at step " + std::to_string(j));
        kernel::scale(chi.data(), 1.0 / std::sqrt(n2), d);

        // Energetics: drive by the trapezoid rule, measurement as the energy change of the
        // measurement update net of the deterministic dissipator terms.
        const double dh_psi = kernel::quad(tb.dham[j], psi.data(), tmp.data(), d);
        const double dh_chi = kernel::quad(tb.dham[j], chi.data(), tmp.data(), d);
        r.ledger.W_drive += 0.5 * (dh_psi + dh_chi);
        hbar = tb.ham[inst] - 0.5 * tb.dham[j];
        vbar = hbar - 0.5 * (tb.bare_at(j) + tb.bare_at(inst));
        const double e_chi = kernel::quad(tb.ham[inst], chi.data(), tmp.data(), d);
        const double change = (e_chi - 0.5 * dh_chi) - kernel::quad(hbar, phi.data(), tmp.data(), d);
        double w_int = 0.0, w_chem = 0.0;
        kernel::mv(vbar, phi.data(), tmp2.data(), d);
        for (int k = 0; k < nk; ++k) {
            w_int += kernel::quad(vbar, lx[k].data(), tmp.data(), d) -
                     kernel::dot(tmp2.data(), kx[k].data(), d).real();
            if (sim.has_charges) {
                kernel::mv(chem[k], phi.data(), tmp.data(), d);
                w_chem += kernel::quad(chem[k], lx[k].data(), tmp.data(), d);
                kernel::mv(chem[k], phi.data(), tmp.data(), d);
                w_chem -= kernel::dot(tmp.data(), kx[k].data(), d).real();
            }
        }
        w_int *= dt;
        w_chem *= dt;
        r.ledger.W_int += w_int;
        r.ledger.W_chem += w_chem;
        r.ledger.W_meas += change - w_int - w_chem;

        for (int k = 0; k < nk; ++k) {
            digest = fnv1a(&cur[k], sizeof(double), digest);
            if (opt.keep_currents) r.currents.push_back({tb.time(j), k, cur[k]});
        }
        psi.swap(chi);
        e_psi = e_chi;
        checkpoint(inst, psi, e_psi);
    }
    r.current_digest = digest;
    r.current_count = static_cast<std::uint64_t>(tb.steps) * nk;
    if (sums) sums->count += 1;
    detail::finish(sim, r, psi, rng);
    return r;
}

inline TrajectoryRecord run_trajectory(const Simulation& sim, std::uint64_t seed, std::uint64_t stream,
                                       const EngineOptions& opt = {}, CheckpointSums* sums = nullptr) {
    return sim.scheme == Scheme::Jump ? run_jump_trajectory(sim, seed, stream, opt, sums)
                                      : run_diffusive_trajectory(sim, seed, stream, opt, sums);
}

// Single steps, exposed for testing the per-step update rules in isolation.
struct StepOutcome {
    Vector state;
    std::optional<int> fired;
    std::vector<double> currents;
};

inline StepOutcome jump_step(const StepTable& tb, int j, const Vector& psi, Rng& rng) {
    const int d = tb.dim;
    Vector phi = tb.drift[j] * psi;
    double n = phi.norm();
    if (n < Tolerances::norm_collapse) throw Error(ErrorCode::NormCollapse, "no-jump update");
    phi /= n;
    double u = rng.uniform(), acc = 0.0;
    for (int k = 0; k < tb.channels; ++k) {
        double p = tb.dt * expectation(tb.k2(k, j + 1), phi).real();
        if (p >= Tolerances::max_jump_probability) throw Error(ErrorCode::StepTooLarge, "jump probability");
        acc += p;
        if (u < acc) {
            Vector c = tb.l(k, j + 1) * phi;
            return {c / c.norm(), k, {}};
        }
    }
    (void)d;
    return {phi, std::nullopt, {}};
}

inline StepOutcome diffusive_step(const StepTable& tb, int j, const Vector& psi, Rng& rng) {
    Vector phi = tb.drift[j] * psi;
    phi /= phi.norm();
    std::vector<double> cur(tb.channels);
    for (int k = 0; k < tb.channels; ++k)
        cur[k] = expectation(tb.lh(k, j + 1), phi).real() + std::sqrt(tb.dt) * rng.normal() / tb.dt;
    Vector chi = diffusive_measurement_operator(tb, j, cur) * phi;
    double n = chi.norm();
    if (n < Tolerances::norm_collapse) throw Error(ErrorCode::NormCollapse, "measurement update");
    return {chi / n, std::nullopt, cur};
}

}  // namespace qtherm
