#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "coopreg/errors.hpp"
#include "coopreg/linalg.hpp"

namespace coopreg {

/// Canonical real generator for one frequency: [0] for ω = 0, ω[[0,1],[-1,0]] otherwise.
inline Matrix frequency_block(double omega) {
    if (omega == 0.0) return Matrix::Zero(1, 1);
    Matrix b(2, 2);
    b << 0.0, omega, -omega, 0.0;
    return b;
}

inline int frequency_block_size(double omega) { return omega == 0.0 ? 1 : 2; }

inline Matrix block_diagonal(const std::vector<Matrix>& blocks) {
    Eigen::Index n = 0;
    for (const auto& b : blocks) n += b.rows();
    Matrix out = Matrix::Zero(n, n);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        out.block(at, at, b.rows(), b.cols()) = b;
        at += b.rows();
    }
    return out;
}

namespace detail {

inline void require_distinct(const std::vector<double>& freqs, const std::string& owner) {
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        if (!(freqs[i] >= 0.0) || !std::isfinite(freqs[i])) {
            throw InvalidArgument(owner + ": frequencies must be finite and >= 0");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (freqs[i] == freqs[j]) {
                throw DuplicateFrequency(owner + ": frequency " + std::to_string(freqs[i]) +
                                         " listed twice");
            }
        }
    }
}

}  // namespace detail

struct ReferenceBlock {
    std::vector<double> frequencies;
    Matrix S;  // S_r
    Vector p;  // r = pᵀ w_r
};

/// Reference model generating constants (ω = 0) and harmonics (ω > 0).
inline ReferenceBlock build_reference_block(const std::vector<double>& frequencies) {
    detail::require_distinct(frequencies, "reference model");
    ReferenceBlock r;
    r.frequencies = frequencies;
    std::vector<Matrix> blocks;
    int n = 0;
    for (double w : frequencies) {
        blocks.push_back(frequency_block(w));
        n += frequency_block_size(w);
    }
    r.S = block_diagonal(blocks);
    r.p = Vector::Zero(n);
    int at = 0;
    for (double w : frequencies) {
        r.p(at) = 1.0;
        at += frequency_block_size(w);
    }
    return r;
}

/// Local disturbance model of one agent, d_i = P_di w_di with w_di in canonical form.
struct DisturbanceBlock {
    std::vector<double> frequencies;
    Matrix P;        // m_i x n_di
    Vector initial;  // w_di(0)
};

/// Merged signal model ẇ = S w, r = pᵀ w, d_i = P_i w. Only S and b_y are
/// design data; p and P_i drive the simulated truth model.
struct ExoModel {
    Matrix S;
    Vector p;
    std::vector<Matrix> P;
    Vector b_y;
    Vector initial_state;
    std::vector<double> frequencies;  // one per canonical block, in order

    [[nodiscard]] int order() const { return static_cast<int>(S.rows()); }
};

inline bool check_controllable(const Matrix& s, const Vector& b) {
    if (s.rows() != s.cols() || b.size() != s.rows()) {
        throw InvalidArgument("check_controllable: dimension mismatch");
    }
    if (b.isZero(0.0)) return false;
    return numerical_rank(controllability_matrix(s, b), 1e-9) == s.rows();
}

inline bool check_observable(const Matrix& c, const Matrix& s) {
    const auto n = s.rows();
    Matrix obs(c.rows() * n, n);
    Matrix power = Matrix::Identity(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        obs.middleRows(k * c.rows(), c.rows()) = c * power;
        power = power * s;
    }
    return numerical_rank(obs, 1e-9) == n;
}

/// All eigenvalues on the imaginary axis and a full set of eigenvectors.
inline bool is_marginally_stable_diagonalizable(const Matrix& s, double tol = 1e-9) {
    if (s.size() == 0) return true;
    Eigen::EigenSolver<Matrix> solver(s, true);
    const CVector ev = solver.eigenvalues();
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i).real()) > tol * scale) return false;
    }
    const CMatrix vecs = solver.eigenvectors();
    Eigen::JacobiSVD<CMatrix> svd(vecs);
    const auto sv = svd.singularValues();
    return sv(sv.size() - 1) > 1e-8 * sv(0);
}

inline void validate_exo_model(const ExoModel& m) {
    const auto n = m.S.rows();
    if (m.S.cols() != n || n == 0) throw InvalidArgument("signal model: S must be square and non-empty");
    if (m.p.size() != n) throw InvalidArgument("signal model: p has wrong length");
    if (m.b_y.size() != n) throw InvalidArgument("signal model: b_y has wrong length");
    if (m.initial_state.size() != n) throw InvalidArgument("signal model: w(0) has wrong length");
    for (const auto& p : m.P) {
        if (p.cols() != n) throw InvalidArgument("signal model: P_i has wrong column count");
    }
    if (!is_marginally_stable_diagonalizable(m.S)) {
        throw InvalidArgument("signal model: S must be diagonalizable with σ(S) on the imaginary axis");
    }
}

/// Builds an ExoModel from raw matrices and re-checks every invariant.
inline ExoModel exo_model_from_raw(Matrix s, Vector p, std::vector<Matrix> p_i, Vector b_y,
                                   Vector w0) {
    ExoModel m;
    m.S = std::move(s);
    m.p = std::move(p);
    m.P = std::move(p_i);
    m.b_y = std::move(b_y);
    m.initial_state = std::move(w0);
    validate_exo_model(m);
    return m;
}

namespace detail {

// M commuting with the rotation generator and mapping `from` onto `to`.
inline Matrix rotation_scaling(const Vector& from, const Vector& to) {
    if (from.size() == 1) {
        if (from(0) == 0.0) throw InvalidArgument("cannot fold disturbance into a zero-state block");
        return Matrix::Constant(1, 1, to(0) / from(0));
    }
    Matrix basis(2, 2);
    basis.col(0) = from;
    basis.col(1) << from(1), -from(0);
    if (from.squaredNorm() == 0.0) {
        throw InvalidArgument("cannot fold disturbance into a zero-state block");
    }
    const Vector ab = basis.fullPivLu().solve(to);
    Matrix k(2, 2);
    k << 0.0, 1.0, -1.0, 0.0;
    return ab(0) * Matrix::Identity(2, 2) + ab(1) * k;
}

}  // namespace detail

/// Merges the reference block with the agents' disturbance blocks. Each
/// distinct frequency appears once in S; a disturbance block that shares a
/// frequency with an existing block is folded into it by rescaling P_i, so
/// the merged model reproduces every d_i(t) exactly. New blocks start from the
/// canonical state (1) or (1, 0). An empty b_y defaults to the all-ones vector.
inline ExoModel merge(const ReferenceBlock& reference, const Vector& reference_initial,
                      const std::vector<DisturbanceBlock>& disturbances, Vector b_y = {}) {
    if (reference_initial.size() != reference.S.rows()) {
        throw InvalidArgument("reference initial state has wrong length");
    }
    std::vector<double> freqs = reference.frequencies;
    std::vector<Vector> inits;
    {
        int at = 0;
        for (double w : reference.frequencies) {
            const int k = frequency_block_size(w);
            inits.push_back(reference_initial.segment(at, k));
            at += k;
        }
    }
    for (std::size_t i = 0; i < disturbances.size(); ++i) {
        const auto& d = disturbances[i];
        detail::require_distinct(d.frequencies, "disturbance model of agent " + std::to_string(i + 1));
        for (double w : d.frequencies) {
            if (std::find(freqs.begin(), freqs.end(), w) == freqs.end()) {
                freqs.push_back(w);
                Vector canon = Vector::Zero(frequency_block_size(w));
                canon(0) = 1.0;
                inits.push_back(canon);
            }
        }
    }

    std::vector<Matrix> blocks;
    std::vector<int> offsets;
    int n = 0;
    for (double w : freqs) {
        blocks.push_back(frequency_block(w));
        offsets.push_back(n);
        n += frequency_block_size(w);
    }

    ExoModel m;
    m.frequencies = freqs;
    m.S = block_diagonal(blocks);
    m.p = Vector::Zero(n);
    m.p.head(reference.p.size()) = reference.p;
    m.initial_state = Vector::Zero(n);
    for (std::size_t b = 0; b < freqs.size(); ++b) {
        m.initial_state.segment(offsets[b], inits[b].size()) = inits[b];
    }

    for (std::size_t i = 0; i < disturbances.size(); ++i) {
        const auto& d = disturbances[i];
        int local = 0;
        for (double w : d.frequencies) local += frequency_block_size(w);
        if (d.P.cols() != local || d.initial.size() != local) {
            throw InvalidArgument("disturbance model of agent " + std::to_string(i + 1) +
                                  ": P and initial state must match the block sizes");
        }
        Matrix pi = Matrix::Zero(d.P.rows(), n);
        int at = 0;
        for (double w : d.frequencies) {
            const int k = frequency_block_size(w);
            const auto b = static_cast<std::size_t>(
                std::find(freqs.begin(), freqs.end(), w) - freqs.begin());
            const Vector target = d.initial.segment(at, k);
            if (target.isZero(0.0)) {
                at += k;
                continue;  // a block that never leaves zero contributes nothing
            }
            const Matrix fold = detail::rotation_scaling(inits[b], target);
            pi.middleCols(offsets[b], k) += d.P.middleCols(at, k) * fold;
            at += k;
        }
        m.P.push_back(pi);
    }
    m.b_y = b_y.size() == 0 ? Vector::Ones(n) : std::move(b_y);
    validate_exo_model(m);
    return m;
}

/// Exact advance w(t + dt) = e^{S dt} w(t).
inline Vector exo_step(const ExoModel& model, const Vector& w, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("exo_step: dt must be positive");
    return expm(model.S * dt) * w;
}

}  // namespace coopreg
