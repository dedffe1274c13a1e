#pragma once

namespace qtherm {

// Every numerical threshold used by engines and tests lives here.
struct Tolerances {
    static constexpr double norm = 1e-12;
    static constexpr double hermiticity = 1e-12;
    static constexpr double trace = 1e-10;
    static constexpr double eigenvalue_floor = -1e-10;
    static constexpr double degeneracy_gap = 1e-9;
    static constexpr double non_hermitian_input = 1e-9;
    static constexpr double reconstruction = 1e-10;
    static constexpr double norm_collapse = 1e-14;
    static constexpr double zero_probability = 1e-15;
    static constexpr double max_jump_probability = 0.1;  // dt * max <L^dag L>
    static constexpr double pairing = 1e-10;
    static constexpr double steady_state_residual = 1e-10;
    static constexpr double null_eigenvalue = 1e-10;
    static constexpr double rk4_positivity = -1e-8;
    static constexpr double rk4_trace_drift = 1e-9;
    static constexpr double phi_eigenvalue_floor = 1e-14;
    static constexpr double split_condition = 1e-8;
    static constexpr double identity = 1e-10;  // algebraic EP identities
    static constexpr double protocol_window = 1e-12;
    static constexpr double rank_one_resolution = 1e-6;
};

}  // namespace qtherm
