#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "ensemble.hpp"

namespace qtherm {

// CSV schemas. Every file starts with "# qtherm config_hash=<hex> schema=<name>".
namespace schema {
inline constexpr const char* summary = "quantity,mean,stderr,n,excluded";
inline constexpr const char* histogram = "bin_left,bin_right,count,density";
inline constexpr const char* convergence = "n,running_mean";
inline constexpr const char* timeseries = "t,E_gamma,Q_cum,W_drive_cum,W_meas_cum,W_chem_cum,S_tot_partial";
inline constexpr const char* enumeration = "record_id,events,n0,n_tau,P_fwd,P_bwd,S_tot,residual";
inline constexpr const char* consistency = "t,trace_distance";
}  // namespace schema

inline void write_preamble(std::ostream& o, const std::string& hash, const std::string& name) {
    o << "# qtherm config_hash=" << hash << " schema=" << name << '\n';
}

inline void write_summary(std::ostream& o, const std::string& hash, const EnsembleStats& st) {
    write_preamble(o, hash, "summary");
    o << schema::summary << '\n';
    auto excl = [&](const std::string& q) {
        auto it = st.excluded.find(q);
        return it == st.excluded.end() ? std::size_t{0} : it->second;
    };
    for (const auto& q : sample_quantities()) {
        auto it = st.moments.find(q);
        if (it == st.moments.end()) continue;
        o << q << ',' << format_double(it->second.mean) << ',' << format_double(it->second.sem()) << ','
          << it->second.n << ',' << excl(q) << '\n';
    }
    for (const auto& [q, acc] : st.ft)
        o << "exp(-" << q << ")," << format_double(acc.mean()) << ',' << format_double(acc.sem()) << ',' << acc.n
          << ',' << excl(q) << '\n';
}

inline void write_histogram(std::ostream& o, const std::string& hash, const Histogram& h) {
    write_preamble(o, hash, "histogram");
    o << schema::histogram << '\n';
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        o << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ',' << h.counts[i] << ','
          << format_double(h.density[i]) << '\n';
}

inline void write_convergence(std::ostream& o, const std::string& hash,
                              const std::vector<std::pair<std::size_t, double>>& series) {
    write_preamble(o, hash, "convergence");
    o << schema::convergence << '\n';
    for (const auto& [n, m] : series) o << n << ',' << format_double(m) << '\n';
}

inline void write_records(std::ostream& o, const std::string& hash, const std::vector<RecordRow>& rows) {
    write_preamble(o, hash, "records");
    o << record_header() << '\n';
    for (const auto& r : rows) o << serialize(r) << '\n';
}

inline void write_enumeration(std::ostream& o, const std::string& hash, const Enumeration& e) {
    write_preamble(o, hash, "enumeration");
    o << schema::enumeration << '\n';
    for (const auto& r : e.records)
        o << r.id << ',' << format_events(r.events) << ',' << r.n0 << ',' << r.ntau << ',' << format_double(r.p_fwd)
          << ',' << format_double(r.p_bwd) << ',' << format_double(r.s_tot) << ','
          << (std::isnan(r.residual) ? std::string("NA") : format_double(r.residual)) << '\n';
}

// Energetics along one trajectory. S_tot_partial uses a virtual projective measurement in the
// eigenbasis of the oracle state ρ_t at each checkpoint.
struct TimeSeriesRow {
    double t, energy, heat, w_drive, w_meas, w_chem, s_tot_partial;
};

inline std::vector<TimeSeriesRow> partial_timeseries(const TrajectoryRecord& r, const std::vector<Matrix>& oracle,
                                                     const std::vector<int>& instants, Rng& rng) {
    if (oracle.size() != instants.size() || r.snapshots.size() != instants.size())
        throw Error(ErrorCode::GridMismatch, "snapshots and oracle checkpoints differ");
    std::vector<TimeSeriesRow> out;
    const double log_p0 = std::log(r.p_n0);
    for (std::size_t i = 0; i < instants.size(); ++i) {
        const auto& s = r.snapshots[i];
        FinalSetup fs;
        fs.rho_tau = oracle[i];
        fs.outcomes = spectral_outcomes(oracle[i]);
        FinalDraw d = final_projective_measurement(s.psi, fs, rng);
        double stot = d.p_ntau > 0.0 ? -std::log(d.p_ntau) + log_p0 + s.entropy_flow
                                     : std::numeric_limits<double>::infinity();
        out.push_back({instants[i] * r.dt, s.energy, s.heat, s.W_drive, s.W_meas, s.W_chem, stot});
    }
    return out;
}

inline void write_timeseries(std::ostream& o, const std::string& hash, const std::vector<TimeSeriesRow>& rows) {
    write_preamble(o, hash, "timeseries");
    o << schema::timeseries << '\n';
    for (const auto& r : rows)
        o << format_double(r.t) << ',' << format_double(r.energy) << ',' << format_double(r.heat) << ','
          << format_double(r.w_drive) << ',' << format_double(r.w_meas) << ',' << format_double(r.w_chem) << ','
          << format_double(r.s_tot_partial) << '\n';
}

// Conditional state snapshots plus the martingale part S_ψ(t) + log p_{n0} + σ(t).
inline void write_snapshots(std::ostream& o, const std::string& hash, const TrajectoryRecord& r,
                            const std::vector<Matrix>& oracle) {
    write_preamble(o, hash, "snapshots");
    o << 't';
    const int d = r.snapshots.empty() ? 0 : static_cast<int>(r.snapshots.front().psi.size());
    for (int i = 0; i < d; ++i) o << ",re" << i << ",im" << i;
    o << ",S_mar_partial\n";
    for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
        const auto& s = r.snapshots[i];
        o << format_double(s.instant * r.dt);
        for (int k = 0; k < d; ++k) o << ',' << format_double(s.psi(k).real()) << ',' << format_double(s.psi(k).imag());
        double smar = -std::log(expectation(oracle[i], s.psi).real()) + std::log(r.p_n0) + s.entropy_flow;
        o << ',' << format_double(smar) << '\n';
    }
}

inline void write_consistency(std::ostream& o, const std::string& hash, const std::vector<int>& instants, double dt,
                              const std::vector<Matrix>& ensemble, const std::vector<Matrix>& oracle) {
    write_preamble(o, hash, "consistency");
    o << schema::consistency << '\n';
    for (std::size_t i = 0; i < instants.size(); ++i)
        o << format_double(instants[i] * dt) << ',' << format_double(trace_distance(ensemble[i], oracle[i])) << '\n';
}

}  // namespace qtherm
