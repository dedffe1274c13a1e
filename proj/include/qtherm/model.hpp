#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linalg.hpp"

namespace qtherm {

// O(λ) = constant + Σ_j f_j(λ) A_j.
struct ParametricOperator {
    Matrix constant;
    std::vector<std::pair<Matrix, std::function<cplx(cplx)>>> terms;

    ParametricOperator() = default;
    explicit ParametricOperator(Matrix c) : constant(std::move(c)) {}

    ParametricOperator& add(Matrix a, std::function<cplx(cplx)> f) {
        terms.emplace_back(std::move(a), std::move(f));
        return *this;
    }

    bool is_constant() const { return terms.empty(); }

    Matrix at(cplx lambda) const {
        Matrix out = constant;
        for (const auto& [a, f] : terms) out += f(lambda) * a;
        return out;
    }
};

struct ControlProtocol {
    double tau = 0.0;
    std::function<cplx(double)> fn = [](double) { return cplx(0.0); };
    bool reversed = false;

    cplx evaluate(double t) const {
        if (t < -Tolerances::protocol_window * std::max(1.0, tau) ||
            t > tau * (1.0 + Tolerances::protocol_window) + Tolerances::protocol_window)
            throw Error(ErrorCode::OutOfWindow, "t = " + std::to_string(t));
        return reversed ? fn(tau - t) : fn(t);
    }

    ControlProtocol reverse() const {
        ControlProtocol p = *this;
        p.reversed = !reversed;
        return p;
    }
};

struct Reservoir {
    int id = 0;
    double temperature = 1.0;
    std::map<int, double> potentials;  // charge id (> 1) -> ν_i
};

struct Charge {
    int id = 2;  // charge 1 is H_S itself
    ParametricOperator op;
};

enum class Pairing { SelfAdjoint, Paired };

struct Channel {
    std::string name;
    ParametricOperator op;
    int reservoir = 0;
    Pairing pairing = Pairing::SelfAdjoint;
    int partner = -1;  // index of the adjoint twin when paired
    double rate_plus = 0.0;
    double rate_minus = 0.0;
    bool is_plus = false;  // which side of the pair this channel is
    std::optional<double> delta_phi;
};

struct SystemModel {
    std::string name;
    int dim = 2;
    ParametricOperator bare;   // H_S(λ)
    ParametricOperator drive;  // V(λ)
    std::vector<Channel> channels;
    std::vector<Reservoir> reservoirs;
    std::vector<Charge> charges;
    ControlProtocol protocol;
    Matrix theta_unitary;  // Θ X Θ† = U X* U†
    Matrix initial_state;

    int reservoir_index(int id) const {
        for (std::size_t i = 0; i < reservoirs.size(); ++i)
            if (reservoirs[i].id == id) return static_cast<int>(i);
        throw Error(ErrorCode::InvalidParam, "unknown reservoir " + std::to_string(id));
    }
};

inline cplx lambda_at(const SystemModel& m, double t) { return m.protocol.evaluate(t); }

inline Matrix hamiltonian_at(const SystemModel& m, double t) {
    cplx l = lambda_at(m, t);
    return m.bare.at(l) + m.drive.at(l);
}

inline Matrix bare_at(const SystemModel& m, double t) { return m.bare.at(lambda_at(m, t)); }

inline Matrix drive_at(const SystemModel& m, double t) { return m.drive.at(lambda_at(m, t)); }

inline Matrix jump_operator_at(const SystemModel& m, int k, double t) {
    return m.channels[k].op.at(lambda_at(m, t));
}

inline Matrix theta_apply(const SystemModel& m, const Matrix& x) {
    return m.theta_unitary * x.conjugate() * m.theta_unitary.adjoint();
}

// Θ† X Θ
inline Matrix theta_unapply(const SystemModel& m, const Matrix& x) {
    return (m.theta_unitary.adjoint() * x * m.theta_unitary).conjugate();
}

inline Vector theta_apply(const SystemModel& m, const Vector& v) {
    return m.theta_unitary * v.conjugate();
}

// Δs_k: zero for self-adjoint channels, ±log(Γ+/Γ-) for paired ones.
inline double channel_entropy_change(const Channel& c) {
    if (c.pairing == Pairing::SelfAdjoint) return 0.0;
    if (c.rate_plus <= 0.0 || c.rate_minus <= 0.0)
        throw Error(ErrorCode::ZeroRate, "channel " + c.name);
    double s = std::log(c.rate_plus / c.rate_minus);
    return c.is_plus ? s : -s;
}

inline std::vector<double> channel_entropy_changes(const SystemModel& m) {
    std::vector<double> out;
    for (const auto& c : m.channels) out.push_back(channel_entropy_change(c));
    return out;
}

inline bool channel_set_constant(const SystemModel& m) {
    for (const auto& c : m.channels)
        if (!c.op.is_constant()) return false;
    return true;
}

struct ValidationReport {
    std::vector<std::string> pairing_violations;
    std::vector<std::string> hermiticity_violations;
    bool energy_jump_relation = true;
    std::vector<double> energy_jumps;  // ΔE_k with [H_S, L_k] = -ΔE_k L_k, when the relation holds
    double max_pairing_residual = 0.0;

    bool ok() const { return pairing_violations.empty() && hermiticity_violations.empty(); }
};

inline std::vector<double> sample_times(const SystemModel& m, int count) {
    std::vector<double> ts;
    for (int i = 0; i < count; ++i)
        ts.push_back(count == 1 ? 0.0 : m.protocol.tau * i / (count - 1));
    return ts;
}

// Least-squares eigen-coefficient a in [A, L] ≈ a L; returns (a, residual).
inline std::pair<cplx, double> ladder_coefficient(const Matrix& a, const Matrix& l) {
    Matrix c = commutator(a, l);
    double nl = l.squaredNorm();
    if (nl == 0.0) return {cplx(0.0), max_abs(c)};
    cplx coef = (l.adjoint() * c).trace() / nl;
    return {coef, max_abs(c - coef * l)};
}

inline ValidationReport validate_channel_set(const SystemModel& m, int samples = 16) {
    ValidationReport rep;
    auto ts = sample_times(m, samples);
    for (double t : ts) {
        Matrix h = hamiltonian_at(m, t);
        if (hermiticity_defect(h) > Tolerances::hermiticity)
            rep.hermiticity_violations.push_back("H not Hermitian at t=" + std::to_string(t));
    }
    rep.energy_jumps.assign(m.channels.size(), 0.0);
    for (std::size_t k = 0; k < m.channels.size(); ++k) {
        const auto& c = m.channels[k];
        for (double t : ts) {
            Matrix l = jump_operator_at(m, static_cast<int>(k), t);
            if (c.pairing == Pairing::SelfAdjoint) {
                if (hermiticity_defect(l) > Tolerances::pairing)
                    rep.hermiticity_violations.push_back(c.name + " declared self-adjoint but is not");
            } else {
                if (c.partner < 0 || c.partner >= static_cast<int>(m.channels.size())) {
                    rep.pairing_violations.push_back(c.name + " has no partner");
                    break;
                }
                double ds = channel_entropy_change(c);
                Matrix lp = jump_operator_at(m, c.partner, t);
                double r = max_abs(l - lp.adjoint() * std::exp(ds / 2.0));
                rep.max_pairing_residual = std::max(rep.max_pairing_residual, r);
                if (r > Tolerances::pairing) {
                    rep.pairing_violations.push_back(c.name + " pairing residual " + std::to_string(r));
                    break;
                }
            }
        }
        Matrix hs = bare_at(m, 0.0);
        Matrix l0 = jump_operator_at(m, static_cast<int>(k), 0.0);
        auto [coef, res] = ladder_coefficient(hs, l0);
        if (res > Tolerances::pairing * std::max(1.0, max_abs(hs)) || std::abs(coef.imag()) > 1e-10)
            rep.energy_jump_relation = false;
        else
            rep.energy_jumps[k] = -coef.real();
    }
    return rep;
}

inline Matrix gibbs_state(const Matrix& h, double temperature) {
    Matrix e = expm(Matrix(-h / temperature));
    return e / e.trace();
}

// ---- presets ----

struct PresetParams {
    std::map<std::string, double> values;

    double get(const std::string& key, double fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
};

inline Matrix pauli_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
inline Matrix pauli_y() {
    Matrix m(2, 2);
    m << 0, -I_UNIT, I_UNIT, 0;
    return m;
}
inline Matrix pauli_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}
inline Matrix sigma_minus() {  // |0><1|
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1.0;
    return m;
}
inline Matrix sigma_plus() { return sigma_minus().transpose(); }

inline double bose_occupation(double omega, double temperature) {
    return 1.0 / std::expm1(omega / temperature);
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"driven_qubit_thermal", "dispersive_qubit"};
    return names;
}

inline const std::vector<std::string>& preset_keys() {
    static const std::vector<std::string> keys{"omega", "gamma0", "epsilon", "T",
                                               "kappa", "omega_R", "tau", "dt"};
    return keys;
}

inline SystemModel build_preset(const std::string& name, const PresetParams& p = {}) {
    for (const auto& [k, v] : p.values) {
        (void)v;
        if (std::find(preset_keys().begin(), preset_keys().end(), k) == preset_keys().end())
            throw Error(ErrorCode::InvalidParam, "unknown preset key '" + k + "'");
    }
    SystemModel m;
    m.name = name;
    m.dim = 2;
    m.theta_unitary = identity(2);
    const double omega = p.get("omega", 1.0);
    const double tau = p.get("tau", 100.0);
    if (omega <= 0.0) throw Error(ErrorCode::InvalidParam, "omega must be positive");
    if (tau <= 0.0) throw Error(ErrorCode::InvalidParam, "tau must be positive");
    m.protocol.tau = tau;

    if (name == "driven_qubit_thermal") {
        const double gamma0 = p.get("gamma0", 0.001 * omega);
        const double eps = p.get("epsilon", 0.01 * omega);
        const double temp = p.get("T", 5.0 * omega);
        if (gamma0 <= 0.0) throw Error(ErrorCode::InvalidParam, "gamma0 must be positive");
        if (temp <= 0.0) throw Error(ErrorCode::InvalidParam, "T must be positive");
        const double nbar = bose_occupation(omega, temp);
        Matrix excited = Matrix::Zero(2, 2);
        excited(1, 1) = omega;
        m.bare = ParametricOperator(excited);
        // λ(t) = ε e^{iωt}; V(λ) = λ* σ+ + λ σ-
        m.protocol.fn = [eps, omega](double t) { return eps * std::exp(I_UNIT * (omega * t)); };
        m.drive = ParametricOperator(Matrix::Zero(2, 2));
        m.drive.add(sigma_plus(), [](cplx l) { return std::conj(l); });
        m.drive.add(sigma_minus(), [](cplx l) { return l; });
        m.reservoirs.push_back({0, temp, {}});
        Channel lm{"L-", ParametricOperator(std::sqrt(gamma0 * (nbar + 1.0)) * sigma_minus()), 0,
                   Pairing::Paired, 1, gamma0 * nbar, gamma0 * (nbar + 1.0), false, std::nullopt};
        Channel lp{"L+", ParametricOperator(std::sqrt(gamma0 * nbar) * sigma_plus()), 0,
                   Pairing::Paired, 0, gamma0 * nbar, gamma0 * (nbar + 1.0), true, std::nullopt};
        m.channels = {lm, lp};
        m.initial_state = gibbs_state(excited, temp);
    } else if (name == "dispersive_qubit") {
        const double kappa = p.get("kappa", 0.001 * omega);
        const double omega_r = p.get("omega_R", 0.01 * omega);
        if (kappa <= 0.0) throw Error(ErrorCode::InvalidParam, "kappa must be positive");
        const double temp = p.get("T", omega);  // βω_q = 1
        if (temp <= 0.0) throw Error(ErrorCode::InvalidParam, "T must be positive");
        Matrix hs = -0.5 * omega * pauli_z();
        m.bare = ParametricOperator(hs);
        // λ(t) = Ω_R cos(ω_q t); V(λ) = -σ_y λ
        m.protocol.fn = [omega_r, omega](double t) { return cplx(omega_r * std::cos(omega * t)); };
        m.drive = ParametricOperator(Matrix::Zero(2, 2));
        m.drive.add(-pauli_y(), [](cplx l) { return l; });
        m.reservoirs.push_back({0, temp, {}});
        Channel lz{"Lz", ParametricOperator(std::sqrt(kappa) * pauli_z()), 0, Pairing::SelfAdjoint,
                   -1, 0.0, 0.0, false, std::nullopt};
        m.channels = {lz};
        m.initial_state = gibbs_state(hs, temp);
    } else {
        throw Error(ErrorCode::UnknownPreset, name);
    }
    return m;
}

}  // namespace qtherm
