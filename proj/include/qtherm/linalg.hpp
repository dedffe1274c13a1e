#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "constants.hpp"
#include "error.hpp"

namespace qtherm {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx I_UNIT{0.0, 1.0};

inline Matrix adjoint(const Matrix& m) { return m.adjoint(); }

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Matrix& m) { return max_abs(m - m.adjoint()); }

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }
inline Matrix anticommutator(const Matrix& a, const Matrix& b) { return a * b + b * a; }

inline Matrix identity(int d) { return Matrix::Identity(d, d); }

inline Matrix ket_bra(const Vector& a, const Vector& b) { return a * b.adjoint(); }

inline Vector basis_vector(int d, int i) {
    Vector v = Vector::Zero(d);
    v(i) = 1.0;
    return v;
}

struct EigenComponent {
    double value;
    Matrix projector;
    int rank;
};

// Eigenvalues descending; eigenvalues closer than the degeneracy gap share one projector.
inline std::vector<EigenComponent> hermitian_eigendecomposition(const Matrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorCode::DimMismatch, "matrix not square");
    double defect = hermiticity_defect(m);
    if (defect > Tolerances::non_hermitian_input)
        throw Error(ErrorCode::NonHermitianInput, "|M - M^dag|_max = " + std::to_string(defect));
    Matrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const auto& vals = es.eigenvalues();
    const auto& vecs = es.eigenvectors();
    const int d = static_cast<int>(m.rows());
    std::vector<EigenComponent> out;
    for (int i = d - 1; i >= 0; --i) {
        Matrix p = vecs.col(i) * vecs.col(i).adjoint();
        if (!out.empty() && std::abs(out.back().value - vals(i)) < Tolerances::degeneracy_gap) {
            auto& last = out.back();
            last.value = (last.value * last.rank + vals(i)) / (last.rank + 1);
            last.projector += p;
            last.rank += 1;
        } else {
            out.push_back({vals(i), p, 1});
        }
    }
    return out;
}

inline cplx expectation(const Matrix& op, const Vector& psi) {
    if (op.cols() != psi.size()) throw Error(ErrorCode::DimMismatch, "operator/state dims");
    return psi.dot(op * psi);  // Eigen's dot conjugates the first argument
}

inline cplx expectation(const Matrix& op, const Matrix& rho) {
    if (op.cols() != rho.rows() || rho.rows() != rho.cols())
        throw Error(ErrorCode::DimMismatch, "operator/state dims");
    return (op * rho).trace();
}

inline double trace_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(ErrorCode::DimMismatch, "trace_distance dims");
    Matrix diff = a - b;
    diff = (0.5 * (diff + diff.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

struct StateCheck {
    double hermiticity;
    double trace_error;
    double min_eigenvalue;
    bool ok() const {
        return hermiticity <= Tolerances::hermiticity && trace_error <= Tolerances::trace &&
               min_eigenvalue >= Tolerances::eigenvalue_floor;
    }
};

inline StateCheck check_mixed_state(const Matrix& rho) {
    StateCheck c{};
    c.hermiticity = hermiticity_defect(rho);
    c.trace_error = std::abs(rho.trace() - cplx(1.0));
    Matrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = es.eigenvalues().minCoeff();
    return c;
}

inline Matrix pure_density(const Vector& psi) { return psi * psi.adjoint(); }

inline Matrix expm(const Matrix& a) { return a.exp(); }

// Hermitian logarithm with eigenvalues floored; `floored` reports whether the floor was hit.
inline Matrix hermitian_log(const Matrix& m, double floor, bool* floored = nullptr) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
    Eigen::VectorXd v = es.eigenvalues();
    bool hit = false;
    for (int i = 0; i < v.size(); ++i) {
        if (v(i) < floor) {
            v(i) = floor;
            hit = true;
        }
        v(i) = std::log(v(i));
    }
    if (floored) *floored = hit;
    return es.eigenvectors() * v.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

// Resolve a (possibly higher-rank) projector into rank-1 projectors by projecting the
// computational basis vectors in order and orthonormalizing. Deterministic.
inline std::vector<Vector> resolve_rank_one(const Matrix& projector, int rank) {
    const int d = static_cast<int>(projector.rows());
    std::vector<Vector> basis;
    for (int i = 0; i < d && static_cast<int>(basis.size()) < rank; ++i) {
        Vector v = projector * basis_vector(d, i);
        for (const auto& b : basis) v -= b * b.dot(v);
        double n = v.norm();
        if (n > Tolerances::rank_one_resolution) basis.push_back(v / n);
    }
    return basis;
}

}  // namespace qtherm
