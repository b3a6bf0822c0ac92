#pragma once

#include <algorithm>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace coopreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Standard Kronecker product A ⊗ B = [a_ij B].
inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// Eigenvalues of a general real matrix, sorted by (real, imag).
inline std::vector<Complex> eigenvalues(const Matrix& m) {
    std::vector<Complex> out;
    if (m.size() == 0) return out;
    Eigen::EigenSolver<Matrix> solver(m, false);
    const CVector ev = solver.eigenvalues();
    out.assign(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return out;
}

inline double max_real_part(const std::vector<Complex>& eigs) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& l : eigs) best = std::max(best, l.real());
    return best;
}

inline double min_real_part(const std::vector<Complex>& eigs) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& l : eigs) best = std::min(best, l.real());
    return best;
}

inline bool is_hurwitz(const Matrix& m) {
    return m.size() == 0 || max_real_part(eigenvalues(m)) < 0.0;
}

inline double max_real_part(const CMatrix& m) {
    if (m.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::ComplexEigenSolver<CMatrix> solver(m, false);
    return solver.eigenvalues().real().maxCoeff();
}

/// Singular-value rank with threshold rel_tol * sigma_max.
inline int numerical_rank(const Matrix& m, double rel_tol = 1e-9) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > rel_tol * sv(0)) ++rank;
    }
    return rank;
}

/// Kalman controllability matrix [b, Ab, ..., A^{n-1} b].
inline Matrix controllability_matrix(const Matrix& a, const Vector& b) {
    const auto n = a.rows();
    Matrix ctrb(n, n);
    Vector col = b;
    for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.col(k) = col;
        col = a * col;
    }
    return ctrb;
}

inline Matrix expm(const Matrix& m) { return m.exp(); }

/// Discrete zero-order-hold pair (e^{A dt}, ∫_0^dt e^{A s} ds).
inline std::pair<Matrix, Matrix> zoh_pair(const Matrix& a, double dt) {
    const auto n = a.rows();
    Matrix aug = Matrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = a * dt;
    aug.topRightCorner(n, n) = Matrix::Identity(n, n) * dt;
    const Matrix e = aug.exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, n)};
}

/// Solves A X + X B = C by Kronecker vectorisation (small dense systems).
inline Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
    const auto m = a.rows();
    const auto n = b.rows();
    const Matrix op = kron(Matrix::Identity(n, n), a) + kron(b.transpose(), Matrix::Identity(m, m));
    const Vector rhs = Eigen::Map<const Vector>(c.data(), c.size());
    const Vector x = op.fullPivLu().solve(rhs);
    return Eigen::Map<const Matrix>(x.data(), m, n);
}

}  // namespace coopreg
