#pragma once

#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "coopreg/errors.hpp"
#include "coopreg/linalg.hpp"

namespace coopreg {

/// Weighted digraph of N agents plus the links from the virtual leader node 0.
/// adjacency(i, j) = a_ij > 0 means agent i receives information from agent j.
class CommTopology {
public:
    CommTopology() = default;

    CommTopology(Matrix adjacency, Vector leader_links)
        : adjacency_(std::move(adjacency)), leader_links_(std::move(leader_links)) {
        const auto n = adjacency_.rows();
        if (n < 1 || adjacency_.cols() != n) {
            throw InvalidArgument("adjacency must be a non-empty square matrix");
        }
        if (leader_links_.size() != n) {
            throw InvalidArgument("leader_links must have one entry per agent");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (adjacency_(i, i) != 0.0) {
                throw InvalidArgument("adjacency diagonal must be zero (a_" + std::to_string(i + 1) +
                                      std::to_string(i + 1) + " != 0)");
            }
            if (leader_links_(i) < 0.0 || !std::isfinite(leader_links_(i))) {
                throw InvalidArgument("leader links must be finite and nonnegative");
            }
        }
        if ((adjacency_.array() < 0.0).any() || !adjacency_.allFinite()) {
            throw InvalidArgument("adjacency weights must be finite and nonnegative");
        }
    }

    static CommTopology leaderless(Matrix adjacency) {
        const auto n = adjacency.rows();
        return {std::move(adjacency), Vector::Zero(n)};
    }

    [[nodiscard]] int size() const { return static_cast<int>(adjacency_.rows()); }
    [[nodiscard]] const Matrix& adjacency() const { return adjacency_; }
    [[nodiscard]] const Vector& leader_links() const { return leader_links_; }
    [[nodiscard]] bool has_leader_links() const { return (leader_links_.array() > 0.0).any(); }

    /// Same follower graph with every leader link removed.
    [[nodiscard]] CommTopology without_leader() const { return leaderless(adjacency_); }

    friend bool operator==(const CommTopology& a, const CommTopology& b) {
        return a.adjacency_ == b.adjacency_ && a.leader_links_ == b.leader_links_;
    }

private:
    Matrix adjacency_;
    Vector leader_links_;
};

struct GraphMatrices {
    Matrix laplacian;        // L_G = D_G - A_G
    Matrix leader_follower;  // H = L_G + diag(leader links)
    Matrix degree;           // D_G
};

inline GraphMatrices laplacian(const CommTopology& topology) {
    const Matrix& a = topology.adjacency();
    GraphMatrices g;
    g.degree = a.rowwise().sum().asDiagonal();
    g.laplacian = g.degree - a;
    g.leader_follower = g.laplacian;
    g.leader_follower.diagonal() += topology.leader_links();
    return g;
}

namespace detail {

// Nodes reachable from `source` along edges j -> i with adjacency(i, j) > 0.
inline std::vector<bool> reachable_from(const Matrix& adjacency, int source) {
    const int n = static_cast<int>(adjacency.rows());
    std::vector<bool> seen(n, false);
    std::queue<int> frontier;
    seen[source] = true;
    frontier.push(source);
    while (!frontier.empty()) {
        const int j = frontier.front();
        frontier.pop();
        for (int i = 0; i < n; ++i) {
            if (!seen[i] && adjacency(i, j) > 0.0) {
                seen[i] = true;
                frontier.push(i);
            }
        }
    }
    return seen;
}

}  // namespace detail

/// With `with_root_zero`, checks that the virtual leader node 0 reaches every
/// agent; otherwise checks that some agent is a root of the follower graph.
inline bool is_connected(const CommTopology& topology, bool with_root_zero) {
    const int n = topology.size();
    if (with_root_zero) {
        // Extended graph: node 0 is the leader, agents shift to 1..N.
        Matrix ext = Matrix::Zero(n + 1, n + 1);
        ext.bottomRightCorner(n, n) = topology.adjacency();
        ext.block(1, 0, n, 1) = topology.leader_links();
        const auto seen = detail::reachable_from(ext, 0);
        return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    }
    for (int root = 0; root < n; ++root) {
        const auto seen = detail::reachable_from(topology.adjacency(), root);
        if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) return true;
    }
    return false;
}

/// Coordinates isolating the synchronisation errors e_i - e_1, i = 2..N.
struct ThetaDecomposition {
    Matrix theta;
    Matrix theta_inverse;
    RowVector l12;  // first row of Θ L Θ⁻¹ without its leading zero
    Matrix l22;     // (N-1)x(N-1) trailing block

    /// H̃ = Θ⁻¹ [l12; L22], the N x (N-1) map from output differences to L_G y.
    [[nodiscard]] Matrix h_tilde() const {
        const auto n = theta.rows();
        Matrix stacked(n, n - 1);
        stacked.row(0) = l12;
        stacked.bottomRows(n - 1) = l22;
        return theta_inverse * stacked;
    }
};

inline ThetaDecomposition theta_decompose(const Matrix& laplacian_matrix, double tol = 1e-9) {
    const auto n = laplacian_matrix.rows();
    if (n < 2 || laplacian_matrix.cols() != n) {
        throw InvalidArgument("theta_decompose needs a square matrix with N >= 2");
    }
    ThetaDecomposition d;
    d.theta = Matrix::Identity(n, n);
    d.theta.block(1, 0, n - 1, 1).setConstant(-1.0);
    d.theta_inverse = Matrix::Identity(n, n);
    d.theta_inverse.block(1, 0, n - 1, 1).setConstant(1.0);

    const Matrix transformed = d.theta * laplacian_matrix * d.theta_inverse;
    const double scale = std::max(1.0, laplacian_matrix.cwiseAbs().maxCoeff());
    const double leak = transformed.col(0).cwiseAbs().maxCoeff();
    if (leak > tol * scale) {
        throw BlockStructureViolation("first column of the transformed matrix is not zero (max |entry| = " +
                                      std::to_string(leak) + "); input is not a Laplacian");
    }
    d.l12 = transformed.block(0, 1, 1, n - 1);
    d.l22 = transformed.bottomRightCorner(n - 1, n - 1);
    return d;
}

/// Eigenvalues with |Re λ| below this are treated as zero.
inline constexpr double kZeroEigenvalueTolerance = 1e-9;

/// min Re λ over σ(m). With `require_positive` a non-positive bound raises
/// NonPositiveBound (the graph is not connected in the required sense).
inline double spectral_lower_bound(const Matrix& m, bool require_positive = false) {
    if (m.rows() != m.cols() || m.size() == 0) {
        throw InvalidArgument("spectral_lower_bound needs a non-empty square matrix");
    }
    const double bound = min_real_part(eigenvalues(m));
    if (require_positive && !(bound > kZeroEigenvalueTolerance)) {
        throw NonPositiveBound("min Re λ = " + std::to_string(bound) +
                               " <= 0: the communication graph lacks the required root");
    }
    return bound;
}

}  // namespace coopreg
