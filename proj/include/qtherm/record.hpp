#pragma once

#include <cstdint>
#include <vector>

#include "steps.hpp"
#include "thermo.hpp"

namespace qtherm {

struct JumpEvent {
    double time = 0.0;
    int channel = 0;
    int instant = 0;  // time = instant * dt

    bool operator==(const JumpEvent&) const = default;
};

struct CurrentSample {
    double time = 0.0;
    int channel = 0;
    double value = 0.0;
};

struct Snapshot {
    int instant = 0;
    Vector psi;
    double energy = 0.0;
    double heat = 0.0;
    double entropy_flow = 0.0;
    double W_drive = 0.0;
    double W_meas = 0.0;
    double W_chem = 0.0;
    double W_int = 0.0;
};

struct TrajectoryRecord {
    Scheme scheme = Scheme::Jump;
    double dt = 0.0;
    double tau = 0.0;
    int steps = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    int n0 = 0;
    double p_n0 = 1.0;
    Vector initial_vector;

    std::vector<JumpEvent> events;
    // Currents are kept only on request; a digest always is.
    std::vector<CurrentSample> currents;
    std::uint64_t current_digest = 0;
    std::uint64_t current_count = 0;

    std::vector<Snapshot> snapshots;

    int ntau = 0;
    double p_ntau = 1.0;
    double born_ntau = 1.0;
    bool zero_probability_final = false;
    Vector final_vector;
    Vector psi_tau;  // conditional state just before the final projection

    ThermoLedger ledger;
};

// Time-reversed jump record: twins, mirrored instants, reversed order. Involutive.
inline std::vector<JumpEvent> reverse_events(const SystemModel& m, const std::vector<JumpEvent>& ev,
                                             int steps, double dt) {
    std::vector<JumpEvent> out;
    out.reserve(ev.size());
    for (auto it = ev.rbegin(); it != ev.rend(); ++it) {
        int inst = steps - it->instant;
        out.push_back({inst * dt, twin_channel(m, it->channel), inst});
    }
    return out;
}

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace qtherm
