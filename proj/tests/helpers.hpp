#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <qtherm/qtherm.hpp>

namespace qtherm::test {

inline Matrix random_matrix(std::mt19937_64& g, int d) {
    std::normal_distribution<double> n;
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(n(g), n(g));
    return m;
}

inline Matrix random_hermitian(std::mt19937_64& g, int d) {
    Matrix a = random_matrix(g, d);
    return 0.5 * (a + a.adjoint());
}

inline Matrix random_density(std::mt19937_64& g, int d) {
    Matrix a = random_matrix(g, d);
    Matrix r = a * a.adjoint();
    return r / r.trace();
}

inline Vector random_state(std::mt19937_64& g, int d) {
    std::normal_distribution<double> n;
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = cplx(n(g), n(g));
    return v / v.norm();
}

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Upper tail of the chi-square distribution, Q(k/2, x/2).
inline double chi_square_survival(double x, int k) {
    const double a = 0.5 * k, z = 0.5 * x;
    if (z <= 0.0) return 1.0;
    if (z < a + 1.0) {
        double term = 1.0 / a, sum = term;
        for (int n = 1; n < 1000; ++n) {
            term *= z / (a + n);
            sum += term;
            if (term < sum * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-z + a * std::log(z) - std::lgamma(a));
    }
    // continued fraction (Lentz)
    double b = z + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-z + a * std::log(z) - std::lgamma(a)) * h;
}

inline SystemModel undriven_thermal(double tau, double gamma0 = 0.001) {
    PresetParams p;
    p.values = {{"epsilon", 0.0}, {"tau", tau}, {"gamma0", gamma0}};
    return build_preset("driven_qubit_thermal", p);
}

inline Matrix excited_state() {
    Matrix r = Matrix::Zero(2, 2);
    r(1, 1) = 1.0;
    return r;
}

// Runs an ensemble against the RK4 oracle state at τ.
struct Run {
    SystemModel model;
    Propagation oracle;
    Simulation sim;
    SplitModel split;
    EnsembleResult result;
};

// Heap-allocated: the simulation points at the model.
inline std::unique_ptr<Run> run(SystemModel m, Scheme scheme, double dt, std::size_t n, std::uint64_t seed,
                                int stride = 100, bool with_split = false) {
    auto owner = std::make_unique<Run>();
    Run& r = *owner;
    r.model = std::move(m);
    const int steps = step_count(r.model.protocol.tau, dt);
    r.oracle = lindblad_propagate(r.model, r.model.initial_state, dt, checkpoint_instants(steps, stride));
    r.sim = make_simulation(r.model, scheme, dt, make_tpm_config(r.model.initial_state), r.oracle.states.back(),
                            stride);
    if (with_split) r.split = analyze_split(r.model);
    EnsembleOptions eo;
    eo.trajectories = n;
    eo.seed = seed;
    r.result = run_ensemble(r.sim, with_split ? &r.split : nullptr, eo);
    return owner;
}

}  // namespace qtherm::test
