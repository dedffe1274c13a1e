#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "unravel.hpp"

namespace qtherm {

struct EPRecord {
    double dS = 0.0;
    double sigma = 0.0;
    double S_tot = 0.0;
    double S_psi = 0.0;
    double S_unc = 0.0;
    double S_mar = 0.0;
    std::optional<double> S_ad;
    std::optional<double> S_na;
    bool absolute_irreversibility = false;
    bool unc_bounds_ok = true;
};

// ΔS = -log p_{nτ} + log p_{n0}
inline double system_entropy_change(double p_n0, double p_ntau) {
    if (!(p_n0 > 0.0) || p_n0 > 1.0 + Tolerances::trace)
        throw Error(ErrorCode::InvalidParam, "p_n0 outside (0, 1]");
    if (p_ntau <= 0.0) throw Error(ErrorCode::AbsoluteIrreversibility, "final outcome has zero probability");
    return -std::log(p_ntau) + std::log(p_n0);
}

inline double total_entropy_production(double dS, double sigma) { return dS + sigma; }

// S_ψ = -log⟨ψ|ρ_τ|ψ⟩
inline double fidelity_surprisal(const Vector& psi, const Matrix& rho_tau) {
    return -std::log(expectation(rho_tau, psi).real());
}

// Mixed conditional state variant, -log tr[ρ_τ ρ_γ].
inline double fidelity_surprisal(const Matrix& rho_gamma, const Matrix& rho_tau) {
    return -std::log((rho_tau * rho_gamma).trace().real());
}

struct UncMarSplit {
    double S_psi = 0.0;
    double S_unc = 0.0;
    double S_mar = 0.0;
    bool bounds_ok = true;
};

inline UncMarSplit uncertainty_martingale_split(double S_psi, double p_n0, double p_ntau, double sigma,
                                                double p_min, double p_max) {
    if (p_ntau <= 0.0) throw Error(ErrorCode::AbsoluteIrreversibility, "final outcome has zero probability");
    UncMarSplit s;
    s.S_psi = S_psi;
    s.S_unc = -std::log(p_ntau) - S_psi;
    s.S_mar = S_psi + std::log(p_n0) + sigma;
    if (p_min > 0.0) {
        const double b = std::log(p_max / p_min);
        s.bounds_ok = s.S_unc >= -b - Tolerances::identity && s.S_unc <= b + Tolerances::identity;
    } else {
        s.bounds_ok = std::isfinite(s.S_unc);
    }
    return s;
}

// ---- adiabatic / non-adiabatic split ----

struct SplitModel {
    bool applicable = false;
    std::string reason;
    std::vector<double> delta_phi;  // per channel; valid when applicable
    double max_commutator = 0.0;    // max ‖[H, Φ]‖ over the λ grid
    double max_ladder_residual = 0.0;
};

// Φ_λ = -log π_λ
inline Matrix nonequilibrium_potential(const Matrix& pi, bool* floored = nullptr) {
    return -hermitian_log(pi, Tolerances::phi_eigenvalue_floor, floored);
}

// Decides per model, on a grid of λ samples over the protocol, whether [H, Φ_λ] = 0 and
// [Φ_λ, L_k] = Δφ_k L_k with λ-independent Δφ_k.
inline SplitModel analyze_split(const SystemModel& m, int samples = 64) {
    SplitModel s;
    s.delta_phi.assign(m.channels.size(), 0.0);
    std::vector<bool> seen(m.channels.size(), false);
    for (double t : sample_times(m, samples)) {
        cplx lam = lambda_at(m, t);
        SteadyState ss = steady_state(m, lam);
        Matrix phi = nonequilibrium_potential(ss.rho);
        Matrix h = m.bare.at(lam) + m.drive.at(lam);
        const double scale = std::max(1.0, max_abs(phi));
        const double comm = max_abs(commutator(h, phi));
        s.max_commutator = std::max(s.max_commutator, comm);
        if (comm > Tolerances::split_condition * scale * std::max(1.0, max_abs(h))) {
            s.reason = "[H, Phi] != 0 at t = " + std::to_string(t) + " (" + std::to_string(comm) + ")";
            return s;
        }
        for (std::size_t k = 0; k < m.channels.size(); ++k) {
            Matrix l = m.channels[k].op.at(lam);
            auto [coef, res] = ladder_coefficient(phi, l);
            s.max_ladder_residual = std::max(s.max_ladder_residual, res);
            if (res > Tolerances::split_condition * scale * std::max(1.0, max_abs(l)) ||
                std::abs(coef.imag()) > Tolerances::split_condition * scale) {
                s.reason = "[Phi, L] != dphi L for channel " + m.channels[k].name;
                return s;
            }
            if (seen[k] && std::abs(coef.real() - s.delta_phi[k]) > Tolerances::split_condition * scale) {
                s.reason = "dphi of channel " + m.channels[k].name + " varies with lambda";
                return s;
            }
            s.delta_phi[k] = coef.real();
            seen[k] = true;
        }
    }
    s.applicable = true;
    return s;
}

// ΔΦ summed over the record's jumps.
inline double potential_change(const SplitModel& s, const std::vector<JumpEvent>& events) {
    double x = 0.0;
    for (const auto& e : events) x += s.delta_phi[e.channel];
    return x;
}

// S(ρ‖σ) = tr[ρ (log ρ - log σ)]
inline double relative_entropy(const Matrix& rho, const Matrix& sigma) {
    const double f = Tolerances::phi_eigenvalue_floor;
    return (rho * (hermitian_log(rho, f) - hermitian_log(sigma, f))).trace().real();
}

// Ensemble non-adiabatic rate tr[ρ̇ (log π_λ - log ρ)] along the master equation.
inline double mean_nonadiabatic_rate(const SystemModel& m, const Matrix& rho, double t) {
    const double f = Tolerances::phi_eigenvalue_floor;
    Matrix rho_dot = lindblad_rhs(hamiltonian_at(m, t), jump_operators_at(m, t), rho);
    Matrix pi = steady_state(m, lambda_at(m, t)).rho;
    return (rho_dot * (hermitian_log(pi, f) - hermitian_log(rho, f))).trace().real();
}

// Builds the full EP record for a finished trajectory.
inline EPRecord entropy_production(const TrajectoryRecord& r, const FinalSetup& final, const SplitModel* split) {
    EPRecord ep;
    ep.sigma = r.ledger.entropy_flow();
    if (r.zero_probability_final || r.p_ntau <= 0.0) {
        ep.absolute_irreversibility = true;
        ep.dS = ep.S_tot = ep.S_unc = std::numeric_limits<double>::infinity();
        ep.S_psi = fidelity_surprisal(r.psi_tau, final.rho_tau);
        ep.S_mar = ep.S_psi + std::log(r.p_n0) + ep.sigma;
        return ep;
    }
    ep.dS = system_entropy_change(r.p_n0, r.p_ntau);
    ep.S_tot = total_entropy_production(ep.dS, ep.sigma);
    auto um = uncertainty_martingale_split(fidelity_surprisal(r.psi_tau, final.rho_tau), r.p_n0, r.p_ntau,
                                           ep.sigma, final.p_min, final.p_max);
    ep.S_psi = um.S_psi;
    ep.S_unc = um.S_unc;
    ep.S_mar = um.S_mar;
    ep.unc_bounds_ok = um.bounds_ok;
    if (split && split->applicable) {
        const double dphi = potential_change(*split, r.events);
        ep.S_ad = ep.sigma + dphi;
        ep.S_na = ep.dS - dphi;
    }
    return ep;
}

// ---- fluctuation-theorem estimators ----

struct FTEstimate {
    double mean = 1.0;  // ⟨e^{-S}⟩
    double sem = 0.0;
    std::size_t n = 0;
    std::size_t excluded = 0;
    std::vector<double> running;  // running mean after each included sample
};

inline double log_sum_exp(const std::vector<double>& x) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : x) mx = std::max(mx, v);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double v : x) s += std::exp(v - mx);
    return mx + std::log(s);
}

// Non-finite samples are excluded and counted.
inline FTEstimate integral_ft_estimate(const std::vector<double>& samples, bool keep_running = true) {
    FTEstimate f;
    std::vector<double> a, b;
    double run = 0.0;
    for (double s : samples) {
        if (!std::isfinite(s)) {
            ++f.excluded;
            continue;
        }
        a.push_back(-s);
        b.push_back(-2.0 * s);
        if (keep_running) {
            run += (std::exp(-s) - run) / static_cast<double>(a.size());
            f.running.push_back(run);
        }
    }
    f.n = a.size();
    if (f.n == 0) return f;
    const double ln = std::log(static_cast<double>(f.n));
    const double m1 = std::exp(log_sum_exp(a) - ln);
    const double m2 = std::exp(log_sum_exp(b) - ln);
    f.mean = m1;
    if (f.n > 1) {
        double var = std::max(0.0, (m2 - m1 * m1) * f.n / (f.n - 1.0));
        f.sem = std::sqrt(var / f.n);
    }
    return f;
}

// |mean - 1| ≤ 3 sem, with an absolute floor for samples that are identically zero.
inline bool ft_holds(const FTEstimate& f, double sigmas = 3.0) {
    return f.n > 0 && std::abs(f.mean - 1.0) <= std::max(sigmas * f.sem, 1e-9);
}

struct TailCheck {
    double frequency = 0.0;
    double bound = 1.0;
    double sem = 0.0;
    bool pass = true;
};

// P(S ≤ -x) ≤ e^{-x}, allowing three binomial standard errors.
inline TailCheck tail_bound_check(const std::vector<double>& samples, double x) {
    if (x < 0.0) throw Error(ErrorCode::InvalidParam, "x must be non-negative");
    TailCheck t;
    t.bound = std::exp(-x);
    std::size_t n = 0, hit = 0;
    for (double s : samples) {
        if (std::isnan(s)) continue;
        ++n;
        if (s <= -x) ++hit;
    }
    if (n == 0) return t;
    t.frequency = static_cast<double>(hit) / n;
    t.sem = std::sqrt(t.frequency * (1.0 - t.frequency) / n);
    t.pass = t.frequency <= t.bound + 3.0 * t.sem;
    return t;
}

struct KLEstimate {
    double mean = 0.0;
    double sem = 0.0;
    std::size_t n = 0;
    bool second_law = true;  // mean ≥ -3 sem
};

inline KLEstimate kl_irreversibility(const std::vector<double>& s_tot) {
    KLEstimate k;
    double mean = 0.0, m2 = 0.0;
    for (double s : s_tot) {
        if (!std::isfinite(s)) continue;
        ++k.n;
        double d = s - mean;
        mean += d / static_cast<double>(k.n);
        m2 += d * (s - mean);
    }
    k.mean = mean;
    if (k.n > 1) k.sem = std::sqrt(m2 / (k.n - 1.0) / k.n);
    k.second_law = k.mean >= -3.0 * k.sem - 1e-12;
    return k;
}

}  // namespace qtherm
