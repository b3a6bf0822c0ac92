#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "coopreg/bvp.hpp"
#include "coopreg/comm_graph.hpp"
#include "coopreg/errors.hpp"
#include "coopreg/grid.hpp"
#include "coopreg/kernel.hpp"
#include "coopreg/linalg.hpp"
#include "coopreg/signal_model.hpp"

namespace coopreg {

enum class Mode { LeaderFollower, Leaderless };

inline std::string to_string(Mode m) {
    return m == Mode::LeaderFollower ? "leader-follower" : "leaderless";
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "leader-follower") return Mode::LeaderFollower;
    if (s == "leaderless") return Mode::Leaderless;
    throw InvalidArgument("unknown mode '" + s + "' (expected leader-follower or leaderless)");
}

/// Nominal agent used for the design: x_t = x'' + a x, x'(0) = q0 x(0),
/// x'(1) = q1 x(1) + u, y = C[x].
struct NominalPlant {
    GridFunction a;
    double q0 = 0.0;
    double q1 = 0.0;
    OutputOperator output;
};

/// Row-wise profiles on the kernel grid: q_tilde.row(i) = q̃(z_i)ᵀ.
struct DecouplingSolution {
    Matrix q_tilde;
    Matrix q;
    Vector q_tilde_at_1;
};

/// C̃ applied to each column of a row-wise vector profile.
inline RowVector apply_columns(const OutputOperator& c, const Matrix& profile) {
    RowVector out(profile.cols());
    for (Eigen::Index j = 0; j < profile.cols(); ++j) out(j) = c.apply(GridFunction(Vector(profile.col(j))));
    return out;
}

/// Solves q̃'' - (μ_c I + S) q̃ = b_y c̃ with q̃'(0) = b_y c_b0 and
/// q̃'(1) = -b_y c_b1; point weights of c̃ become jumps b_y c_k in q̃'. The
/// finite-difference solution is Richardson-extrapolated from M and 2M.
/// q(ζ) = q̃(ζ) - ∫_ζ^1 q̃(s) k(s,ζ) ds.
inline DecouplingSolution solve_decoupling(const Matrix& s, const Vector& b_y, const OutputOperator& c_tilde,
                                           double mu_c, const TriangularKernel& k) {
    const auto n = s.rows();
    if (s.cols() != n || b_y.size() != n) throw InvalidArgument("solve_decoupling: dimension mismatch");
    const int m = c_tilde.smooth_weight.intervals();
    if (k.intervals() != m) throw GridMismatch("solve_decoupling: output weight and kernel grids differ");

    NeumannBvp p;
    p.G = mu_c * Matrix::Identity(n, n) + s;
    require_nonresonant(p.G, "decoupling equations (σ(S) must avoid -μ_c - (kπ)²)");
    p.forcing = c_tilde.smooth_weight.values() * b_y.transpose();
    for (const auto& pw : c_tilde.point_weights) p.points.push_back({pw.location, pw.weight * b_y});
    p.slope0 = c_tilde.boundary0 * b_y;
    p.slope1 = -c_tilde.boundary1 * b_y;

    DecouplingSolution d;
    d.q_tilde = solve_neumann_bvp_extrapolated(p);
    d.q_tilde_at_1 = d.q_tilde.row(m).transpose();
    const double h = k.step();
    d.q = d.q_tilde;
    for (int j = 0; j < m; ++j) {
        RowVector acc = 0.5 * (d.q_tilde.row(j) * k(j, j) + d.q_tilde.row(m) * k(m, j));
        for (int i = j + 1; i < m; ++i) acc += d.q_tilde.row(i) * k(i, j);
        d.q.row(j) -= h * acc;
    }
    return d;
}

/// Fourth-order end-corrected trapezoid weights (3/8, 7/6, 23/24, 1, ...).
inline Vector gregory_weights(int intervals) {
    if (intervals < 6) return trapezoid_weights(intervals);
    Vector w = Vector::Ones(intervals + 1);
    const double ends[3] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};
    for (int i = 0; i < 3; ++i) {
        w(i) = ends[i];
        w(intervals - i) = ends[i];
    }
    return w / intervals;
}

/// Scalar numerator n(s) = c_b0 + c_b1 cosh(r) + ∫ c̃(ζ) cosh(rζ) dζ + Σ c_k cosh(r z_k),
/// r = √(s + μ_c). cosh is even in r, so the branch of the root is irrelevant.
/// The integral uses fourth-order quadrature to match the accuracy of the
/// extrapolated decoupling solve.
inline Complex numerator_at(Complex s, const OutputOperator& c_tilde, double mu_c) {
    const Complex r = std::sqrt(s + mu_c);
    const auto& w = c_tilde.smooth_weight;
    const int m = w.intervals();
    const Vector q = gregory_weights(m);
    Complex integral = 0.0;
    for (int i = 0; i <= m; ++i) integral += q(i) * w[i] * std::cosh(r * w.node(i));
    Complex n = c_tilde.boundary0 + c_tilde.boundary1 * std::cosh(r) + integral;
    for (const auto& p : c_tilde.point_weights) n += p.weight * std::cosh(r * p.location);
    return n;
}

/// N(s) = n(s) I_N.
inline CMatrix numerator_matrix(Complex s, const OutputOperator& c_tilde, double mu_c, int agents) {
    return numerator_at(s, c_tilde, mu_c) * CMatrix::Identity(agents, agents);
}

struct ControllabilityReport {
    bool by_controllable = false;        // (S, b_y)
    std::vector<Complex> eigenvalues;    // σ(S)
    std::vector<Complex> numerators;     // n(λ), λ ∈ σ(S)
    bool nonblocking = false;            // |n(λ)| > threshold for all λ
    std::vector<double> pbh_components;  // |uᵀ q̃(1)| / (|u| |q̃(1)|) per left eigenvector u
    bool rank_test = false;              // PBH test on (S, q̃(1))
    bool controllable = false;
};

inline constexpr double kNonblockingThreshold = 1e-6;
inline constexpr double kPbhThreshold = 1e-4;

/// Relative size of the projection of g on each left eigenvector of S.
inline std::vector<double> pbh_components(const Matrix& s, const Vector& g) {
    std::vector<double> out;
    Eigen::EigenSolver<Matrix> solver(s.transpose(), true);
    const CMatrix u = solver.eigenvectors();
    const double gn = g.norm();
    for (Eigen::Index i = 0; i < u.cols(); ++i) {
        const Complex proj = (u.col(i).transpose() * g.cast<Complex>())(0);
        out.push_back(gn == 0.0 ? 0.0 : std::abs(proj) / (u.col(i).norm() * gn));
    }
    return out;
}

/// (S, q̃(1)) controllable ⇔ (S, b_y) controllable and n(λ) ≠ 0 on σ(S); the
/// conjunction is cross-checked against a PBH rank test on (S, q̃(1)).
inline ControllabilityReport check_controllable_pair(const Matrix& s, const Vector& b_y,
                                                     const Vector& q_tilde_at_1,
                                                     const OutputOperator& c_tilde, double mu_c) {
    ControllabilityReport r;
    r.by_controllable = check_controllable(s, b_y);
    r.eigenvalues = eigenvalues(s);
    r.nonblocking = true;
    for (const auto& l : r.eigenvalues) {
        r.numerators.push_back(numerator_at(l, c_tilde, mu_c));
        if (!(std::abs(r.numerators.back()) > kNonblockingThreshold)) r.nonblocking = false;
    }
    r.pbh_components = pbh_components(s, q_tilde_at_1);
    r.rank_test = std::all_of(r.pbh_components.begin(), r.pbh_components.end(),
                              [](double c) { return c > kPbhThreshold; });
    const bool lemma = r.by_controllable && r.nonblocking;
    if (lemma != r.rank_test) {
        throw InconsistentCertificates(std::string("controllability of (S, q̃(1)): structural test says ") +
                                       (lemma ? "yes" : "no") + ", rank test says " +
                                       (r.rank_test ? "yes" : "no"));
    }
    r.controllable = lemma;
    return r;
}

struct AreSolution {
    Matrix Q;
    double residual = 0.0;
    int iterations = 0;
};

inline double are_residual(const Matrix& s, const Vector& g, double nu, double a, const Matrix& q) {
    const auto n = s.rows();
    const Matrix r = s.transpose() * q + q * s - 2.0 * nu * q * g * g.transpose() * q + a * Matrix::Identity(n, n);
    return r.norm();
}

/// Sᵀ Q + Q S - 2ν Q g gᵀ Q + a I = 0 by Newton–Kleinman from a Bass
/// stabilizing gain; each step solves a Lyapunov equation by vectorization.
inline AreSolution solve_are(const Matrix& s, const Vector& g, double nu, double a, int max_iter = 100) {
    const auto n = s.rows();
    if (s.cols() != n || g.size() != n) throw InvalidArgument("solve_are: dimension mismatch");
    if (!(nu > 0.0) || !(a > 0.0)) throw InvalidArgument("solve_are: ν and a must be positive");
    if (!check_controllable(s, g)) throw NotControllable("solve_are: the pair (S, q̃(1)) is not controllable");

    const Matrix eye = Matrix::Identity(n, n);
    const double beta = 1.0 + s.norm();
    const Matrix shifted = s + beta * eye;
    const Matrix p = solve_sylvester(shifted, shifted.transpose(), 2.0 * g * g.transpose());
    RowVector k = g.transpose() * p.llt().solve(eye);

    AreSolution out;
    Matrix q = Matrix::Zero(n, n);
    const double target = 1e-12 * a * static_cast<double>(n);
    for (int it = 1; it <= max_iter; ++it) {
        const Matrix closed = s - g * k;
        if (!is_hurwitz(closed)) throw NewtonDivergence("Newton–Kleinman iterate lost stability");
        const Matrix rhs = -(a * eye + k.transpose() * k / (2.0 * nu));
        Matrix next = solve_sylvester(closed.transpose(), closed, rhs);
        next = 0.5 * (next + next.transpose());
        const double change = (next - q).norm();
        q = next;
        k = 2.0 * nu * g.transpose() * q;
        out.iterations = it;
        if (change <= 1e-14 * q.norm() || are_residual(s, g, nu, a, q) <= target) break;
    }
    out.Q = q;
    out.residual = are_residual(s, g, nu, a, q);
    if (!q.allFinite() || out.residual > 1e-8 * a * static_cast<double>(n)) {
        throw NewtonDivergence("Newton–Kleinman did not reach the residual target (residual " +
                               std::to_string(out.residual) + ")");
    }
    return out;
}

/// k_v = Q q̃(1).
inline Vector feedback_gain(const Matrix& q, const Vector& q_tilde_at_1) { return q * q_tilde_at_1; }

struct RegulatorGains {
    Vector k_v;
    double k_1 = 0.0;
    GridFunction k_x;
    GridFunction r_x;
    Vector b_y;
    Matrix S;
    double mu_c = 0.0;

    friend bool operator==(const RegulatorGains&, const RegulatorGains&) = default;
};

/// k_z(1, ζ) on the grid. Second-order one-sided differences in z where the
/// stencil fits; at ζ = 1 the diagonal identity d/dz k(z,z) = -λ(z)/2 gives
/// k_z = -λ(1)/2 - k_ζ(1,1), and ζ = z_{M-1} is interpolated in ζ.
inline GridFunction kernel_z_derivative_top(const TriangularKernel& k, double lambda_at_1) {
    const int m = k.intervals();
    const double h = k.step();
    GridFunction d(m);
    for (int j = 0; j <= m - 2; ++j) d[j] = (3.0 * k(m, j) - 4.0 * k(m - 1, j) + k(m - 2, j)) / (2.0 * h);
    const double k_zeta = (3.0 * k(m, m) - 4.0 * k(m, m - 1) + k(m, m - 2)) / (2.0 * h);
    d[m] = -0.5 * lambda_at_1 - k_zeta;
    // Quadratic through ζ = z_{M-3}, z_{M-2}, z_M evaluated at z_{M-1}.
    d[m - 1] = -d[m - 3] / 3.0 + d[m - 2] + d[m] / 3.0;
    return d;
}

/// k_1 = q1 - k(1,1), k_x = -k_z(1,·), r_x = -k_vᵀ q(·).
inline RegulatorGains assemble_gains(const TriangularKernel& k, const GridFunction& a,
                                     const DecouplingSolution& dec, double q1, const Vector& k_v,
                                     const Vector& b_y, const Matrix& s, double mu_c) {
    const int m = k.intervals();
    if (a.intervals() != m || dec.q.rows() != m + 1) throw GridMismatch("assemble_gains: grids differ");
    RegulatorGains g;
    g.k_v = k_v;
    g.k_1 = q1 - k(m, m);
    g.k_x = -1.0 * kernel_z_derivative_top(k, mu_c + a[m]);
    g.r_x = GridFunction(Vector(-(dec.q * k_v)));
    g.b_y = b_y;
    g.S = s;
    g.mu_c = mu_c;
    return g;
}

/// F_ev = I_N ⊗ S - H ⊗ q̃(1) k_vᵀ (leader-follower) or
/// F_εv = I_{N-1} ⊗ S - L̃_22 ⊗ q̃(1) k_vᵀ (leaderless).
inline Matrix closed_loop_matrix(const Matrix& s, const Vector& g, const Vector& k_v, const Matrix& coupling) {
    const auto n = coupling.rows();
    return kron(Matrix::Identity(n, n), s) - kron(coupling, g * k_v.transpose());
}

/// The graph matrix that enters the closed loop for the given mode.
inline Matrix coupling_matrix(Mode mode, const GraphMatrices& gm) {
    if (mode == Mode::LeaderFollower) return gm.leader_follower;
    return theta_decompose(gm.laplacian).l22;
}

struct StabilityCertificate {
    Mode mode = Mode::LeaderFollower;
    std::vector<Complex> closed_loop_eigs;
    double alpha_ev = 0.0;
    double target_pde_top_eig = 0.0;
    double overall_alpha = 0.0;
    std::vector<double> per_eigenvalue_max_re;  // max Re σ(S - λ_i q̃(1) k_vᵀ)
    bool pass = false;
};

inline StabilityCertificate certify_stability(Mode mode, const Matrix& s, const Vector& g, const Vector& k_v,
                                              const GraphMatrices& gm, double mu_c) {
    StabilityCertificate c;
    c.mode = mode;
    if (mode == Mode::Leaderless && gm.laplacian.rows() < 2) {
        throw InvalidArgument("leaderless mode needs at least two agents");
    }
    const Matrix coupling = coupling_matrix(mode, gm);
    c.closed_loop_eigs = eigenvalues(closed_loop_matrix(s, g, k_v, coupling));
    c.alpha_ev = -max_real_part(c.closed_loop_eigs);
    c.target_pde_top_eig = -mu_c;
    c.overall_alpha = std::min(c.alpha_ev, mu_c);
    const CMatrix sc = s.cast<Complex>();
    const CMatrix gk = (g * k_v.transpose()).cast<Complex>();
    for (const auto& l : eigenvalues(coupling)) c.per_eigenvalue_max_re.push_back(max_real_part(CMatrix(sc - l * gk)));
    c.pass = c.alpha_ev > 0.0 && mu_c > 0.0;
    return c;
}

/// Leader-follower: det H ≠ 0. Leaderless: rank H̃ = N - 1.
inline bool internal_model_rank_check(Mode mode, const GraphMatrices& gm) {
    const int n = static_cast<int>(gm.laplacian.rows());
    if (mode == Mode::LeaderFollower) return numerical_rank(gm.leader_follower) == n;
    if (n < 2) return false;
    return numerical_rank(theta_decompose(gm.laplacian).h_tilde()) == n - 1;
}

/// Solutions of the leaderless steady-state equations. sigma1[r] and
/// sigma2[r] hold row r of Σ1(z), Σ2(z) as row-wise profiles.
struct SyncSteadyState {
    Matrix Pi;
    std::vector<Matrix> sigma1;
    std::vector<Matrix> sigma2;
    Matrix B;
    Matrix y_inf_map;  // row r = C̃ applied to Σ1 row r
};

namespace detail {

// Row profile σ with σ'' - μ σ - σ A = 0, σ'(0) = 0, σ'(1) = slope.
inline Matrix solve_row_bvp(const Matrix& a, double mu, const RowVector& slope, int intervals) {
    const auto p = a.cols();
    NeumannBvp prob;
    prob.G = mu * Matrix::Identity(p, p) + a.transpose();
    prob.forcing = Matrix::Zero(intervals + 1, p);
    prob.slope0 = Vector::Zero(p);
    prob.slope1 = slope.transpose();
    return solve_neumann_bvp_extrapolated(prob);
}

}  // namespace detail

/// Π F_εv - S Π = -(l̃_12ᵀ ⊗ q̃(1) k_vᵀ), then the Neumann matrix BVPs for Σ1
/// and Σ2, and the read-out map C̃[Σ1].
inline SyncSteadyState sync_steady_state(const Matrix& s, const Vector& k_v, const Vector& g,
                                         const RowVector& l12, const Matrix& f, double mu_c,
                                         const OutputOperator& c_tilde) {
    const auto nw = s.rows();
    const auto agents = l12.size() + 1;
    if (f.rows() != (agents - 1) * nw) throw InvalidArgument("sync_steady_state: F has wrong size");

    const auto sig_s = eigenvalues(s);
    const auto sig_f = eigenvalues(f);
    for (const auto& a : sig_s) {
        for (const auto& b : sig_f) {
            if (std::abs(a - b) < 1e-8 * std::max(1.0, std::abs(a))) {
                throw ResonantSpectrum("σ(F_εv) ∩ σ(S) is not empty");
            }
        }
    }
    require_nonresonant(mu_c * Matrix::Identity(nw, nw) + s.transpose(), "Σ1 equations (σ_c ∩ σ(S) = ∅)");
    require_nonresonant(mu_c * Matrix::Identity(f.rows(), f.rows()) + f.transpose(),
                        "Σ2 equations (σ_c ∩ σ(F_εv) = ∅)");

    SyncSteadyState out;
    const Matrix rhs = -kron(l12, g * k_v.transpose());
    out.Pi = solve_sylvester(-s, f, rhs);

    out.B = Matrix::Zero(agents, (agents - 1) * nw);
    out.B.bottomRows(agents - 1) = kron(Matrix::Identity(agents - 1, agents - 1), k_v.transpose());

    const int m = c_tilde.smooth_weight.intervals();
    const RowVector slope1 = k_v.transpose();
    const Matrix base1 = detail::solve_row_bvp(s, mu_c, slope1, m);
    out.y_inf_map.resize(agents, nw);
    for (Eigen::Index r = 0; r < agents; ++r) {
        out.sigma1.push_back(base1);
        out.y_inf_map.row(r) = apply_columns(c_tilde, base1);
        const RowVector slope2 = k_v.transpose() * out.Pi + out.B.row(r);
        out.sigma2.push_back(detail::solve_row_bvp(f, mu_c, slope2, m));
    }
    return out;
}

/// Everything the synthesis pipeline needs.
struct DesignSpec {
    Mode mode = Mode::LeaderFollower;
    CommTopology topology;
    NominalPlant plant;
    Matrix S;
    Vector b_y;
    double mu_c = 5.0;
    std::optional<double> nu;
    double are_weight = 150.0;
    KernelOptions kernel;
};

struct Synthesis {
    GraphMatrices graph;
    double spectral_bound = 0.0;
    double nu = 0.0;
    TriangularKernel kernel;
    TriangularKernel kernel_inverse;
    OutputOperator c_tilde;
    DecouplingSolution decoupling;
    ControllabilityReport controllability;
    AreSolution are;
    RegulatorGains gains;
    StabilityCertificate certificate;
    std::optional<SyncSteadyState> sync;
};

/// kernel → inverse → transformed output → decoupling → nonblocking and
/// controllability → Riccati → gains → certificate (→ steady state when leaderless).
inline Synthesis synthesize(const DesignSpec& spec) {
    Synthesis out;
    const int agents = spec.topology.size();
    if (spec.mode == Mode::Leaderless && agents < 2) {
        throw InvalidArgument("leaderless mode needs at least two agents");
    }
    spec.plant.output.validate();
    out.graph = laplacian(spec.mode == Mode::Leaderless ? spec.topology.without_leader() : spec.topology);
    const Matrix coupling = coupling_matrix(spec.mode, out.graph);
    out.spectral_bound = spectral_lower_bound(coupling, true);
    out.nu = spec.nu.value_or(out.spectral_bound);
    if (!(out.nu > 0.0)) throw InvalidArgument("ν must be positive");

    out.kernel = solve_kernel(spec.plant.a, spec.plant.q0, spec.mu_c, spec.kernel);
    out.kernel_inverse = invert_kernel(out.kernel);
    out.c_tilde = transform_output_weight(spec.plant.output, out.kernel_inverse);
    out.decoupling = solve_decoupling(spec.S, spec.b_y, out.c_tilde, spec.mu_c, out.kernel);
    out.controllability =
        check_controllable_pair(spec.S, spec.b_y, out.decoupling.q_tilde_at_1, out.c_tilde, spec.mu_c);
    if (!out.controllability.controllable) {
        throw NotControllable(out.controllability.by_controllable
                                  ? "(S, q̃(1)) not controllable: n(λ) vanishes at an exosystem eigenvalue"
                                  : "(S, b_y) is not controllable");
    }
    out.are = solve_are(spec.S, out.decoupling.q_tilde_at_1, out.nu, spec.are_weight);
    const Vector k_v = feedback_gain(out.are.Q, out.decoupling.q_tilde_at_1);
    out.gains = assemble_gains(out.kernel, spec.plant.a, out.decoupling, spec.plant.q1, k_v, spec.b_y, spec.S,
                               spec.mu_c);
    out.certificate =
        certify_stability(spec.mode, spec.S, out.decoupling.q_tilde_at_1, k_v, out.graph, spec.mu_c);
    if (spec.mode == Mode::Leaderless && out.certificate.pass) {
        const auto theta = theta_decompose(out.graph.laplacian);
        const Matrix f = closed_loop_matrix(spec.S, out.decoupling.q_tilde_at_1, k_v, theta.l22);
        out.sync = sync_steady_state(spec.S, k_v, out.decoupling.q_tilde_at_1, theta.l12, f, spec.mu_c,
                                     out.c_tilde);
    }
    return out;
}

}  // namespace coopreg
