#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "coopreg/errors.hpp"
#include "coopreg/linalg.hpp"

namespace coopreg {

/// Concentrated source w δ(z - location) in the right-hand side.
struct PointSource {
    double location = 0.0;
    Vector weight;
};

/// y'' - G y = f(z) + Σ w_k δ(z - z_k) on (0,1), y'(0) = slope0, y'(1) = slope1.
/// Vector-valued profiles are stored as (M+1) x n matrices, one row per node.
struct NeumannBvp {
    Matrix G;
    Matrix forcing;
    std::vector<PointSource> points;
    Vector slope0;
    Vector slope1;
};

/// Throws ResonantSpectrum if some eigenvalue g of G satisfies g = -(kπ)²,
/// i.e. the homogeneous Neumann problem has a nontrivial solution.
inline void require_nonresonant(const Matrix& g, const std::string& context) {
    for (const auto& ev : eigenvalues(g)) {
        const double k = std::round(std::sqrt(std::max(0.0, -ev.real())) / std::numbers::pi);
        const double target = -(k * std::numbers::pi) * (k * std::numbers::pi);
        if (std::abs(ev - Complex(target, 0.0)) <= 1e-8 * std::max(1.0, std::abs(ev))) {
            throw ResonantSpectrum(context + ": eigenvalue " + std::to_string(ev.real()) +
                                   (ev.imag() != 0.0 ? "+" + std::to_string(ev.imag()) + "i" : std::string()) +
                                   " meets the Neumann spectrum -(kπ)² at k = " +
                                   std::to_string(static_cast<int>(k)));
        }
    }
}

namespace detail {

inline void validate_bvp(const NeumannBvp& p) {
    const auto n = p.G.rows();
    if (p.G.cols() != n || n == 0) throw InvalidArgument("BVP: G must be square and non-empty");
    if (p.forcing.cols() != n || p.forcing.rows() < 3) {
        throw InvalidArgument("BVP: forcing must have n columns and at least three nodes");
    }
    if (p.slope0.size() != n || p.slope1.size() != n) throw InvalidArgument("BVP: boundary data size");
    for (const auto& s : p.points) {
        if (s.weight.size() != n || !(s.location >= 0.0 && s.location <= 1.0)) {
            throw InvalidArgument("BVP: point source outside [0,1] or of wrong size");
        }
    }
}

}  // namespace detail

/// Second-order central differences with ghost-node Neumann closure. Point
/// sources are spread onto the two neighbouring nodes with hat weights.
inline Matrix solve_neumann_bvp(const NeumannBvp& p) {
    detail::validate_bvp(p);
    const auto n = p.G.rows();
    const int m = static_cast<int>(p.forcing.rows()) - 1;
    const double h = 1.0 / m;
    const Eigen::Index size = static_cast<Eigen::Index>(m + 1) * n;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(size) * static_cast<std::size_t>(n + 2));
    Vector rhs(size);
    for (int i = 0; i <= m; ++i) {
        const Eigen::Index row = static_cast<Eigen::Index>(i) * n;
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < n; ++c) {
                const double v = -h * h * p.G(r, c) - (r == c ? 2.0 : 0.0);
                if (v != 0.0) trip.emplace_back(row + r, row + c, v);
            }
            const double left = (i == m) ? 2.0 : 1.0;
            const double right = (i == 0) ? 2.0 : 1.0;
            if (i > 0) trip.emplace_back(row + r, row - n + r, left);
            if (i < m) trip.emplace_back(row + r, row + n + r, right);
        }
        rhs.segment(row, n) = h * h * p.forcing.row(i).transpose();
    }
    rhs.head(n) += 2.0 * h * p.slope0;
    rhs.tail(n) -= 2.0 * h * p.slope1;
    for (const auto& s : p.points) {
        const double pos = s.location * m;
        const int i = std::min(static_cast<int>(std::floor(pos)), m - 1);
        const double theta = pos - i;
        const double wl = (i == 0 ? 2.0 : 1.0) * (1.0 - theta);
        const double wr = (i + 1 == m ? 2.0 : 1.0) * theta;
        rhs.segment(static_cast<Eigen::Index>(i) * n, n) += h * wl * s.weight;
        rhs.segment(static_cast<Eigen::Index>(i + 1) * n, n) += h * wr * s.weight;
    }

    Eigen::SparseMatrix<double> a(size, size);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw SingularSystem("BVP: finite-difference matrix is singular");
    const Vector y = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !y.allFinite()) throw SingularSystem("BVP: solve failed");

    Matrix out(m + 1, n);
    for (int i = 0; i <= m; ++i) out.row(i) = y.segment(static_cast<Eigen::Index>(i) * n, n).transpose();
    return out;
}

/// Nodal samples of a profile on the grid of 2M intervals; midpoints use
/// four-point cubic interpolation (one-sided next to the ends).
inline Matrix refine_samples(const Matrix& coarse) {
    const int m = static_cast<int>(coarse.rows()) - 1;
    if (m < 3) throw InvalidArgument("refine_samples needs at least four nodes");
    Matrix fine(2 * m + 1, coarse.cols());
    for (int i = 0; i <= m; ++i) fine.row(2 * i) = coarse.row(i);
    for (int i = 0; i < m; ++i) {
        int b = std::clamp(i - 1, 0, m - 3);
        const double t = (i + 0.5) - b;  // position in units of h relative to node b
        double w[4];
        for (int a = 0; a < 4; ++a) {
            double l = 1.0;
            for (int c = 0; c < 4; ++c) {
                if (c != a) l *= (t - c) / static_cast<double>(a - c);
            }
            w[a] = l;
        }
        fine.row(2 * i + 1) = w[0] * coarse.row(b) + w[1] * coarse.row(b + 1) + w[2] * coarse.row(b + 2) +
                              w[3] * coarse.row(b + 3);
    }
    return fine;
}

/// Richardson combination (4 y_{2M} - y_M) / 3 of two finite-difference
/// solves, sampled on the original grid.
inline Matrix solve_neumann_bvp_extrapolated(const NeumannBvp& p) {
    const Matrix coarse = solve_neumann_bvp(p);
    NeumannBvp fine_problem = p;
    fine_problem.forcing = refine_samples(p.forcing);
    const Matrix fine = solve_neumann_bvp(fine_problem);
    Matrix out(coarse.rows(), coarse.cols());
    for (Eigen::Index i = 0; i < coarse.rows(); ++i) {
        out.row(i) = (4.0 * fine.row(2 * i) - coarse.row(i)) / 3.0;
    }
    return out;
}

}  // namespace coopreg
