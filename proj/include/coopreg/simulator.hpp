#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "coopreg/comm_graph.hpp"
#include "coopreg/errors.hpp"
#include "coopreg/grid.hpp"
#include "coopreg/kernel.hpp"
#include "coopreg/linalg.hpp"
#include "coopreg/signal_model.hpp"
#include "coopreg/synthesis.hpp"

namespace coopreg {

/// Additive uncertainty of the output weights; point entries pair with the
/// nominal point locations.
struct OutputUncertainty {
    GridFunction delta_c0;
    std::vector<double> delta_points;
    double delta_b0 = 0.0;
    double delta_b1 = 0.0;
};

/// d_i enters as g1ᵀd in the domain, g2ᵀd and g3ᵀd in the boundary conditions
/// at z = 0 and z = 1, and g4ᵀd in the output.
struct DisturbanceInjection {
    std::vector<GridFunction> g1;
    Vector g2;
    Vector g3;
    Vector g4;

    [[nodiscard]] int channels() const { return static_cast<int>(g2.size()); }
};

struct AgentSpec {
    GridFunction delta_lambda;
    GridFunction delta_a;
    double delta_q0 = 0.0;
    double delta_q1 = 0.0;
    OutputUncertainty output;
    DisturbanceInjection disturbance;
    GridFunction initial_profile;
    Vector internal_model_initial;
};

/// Truth-model coefficients of one agent on the simulation grid.
struct TruthAgent {
    Vector lambda;
    Vector a;
    double q0 = 0.0;
    double q1 = 0.0;
    OutputOperator output;
    Matrix g1;  // (M+1) x m
    Vector g2, g3, g4;
};

inline TruthAgent truth_agent(const AgentSpec& spec, const NominalPlant& plant, int m) {
    TruthAgent t;
    t.lambda = Vector::Ones(m + 1) + spec.delta_lambda.resampled(m).values();
    if (!(t.lambda.minCoeff() > 0.0)) throw InvalidArgument("agent diffusion 1 + Δλ must stay positive");
    t.a = plant.a.resampled(m).values() + spec.delta_a.resampled(m).values();
    t.q0 = plant.q0 + spec.delta_q0;
    t.q1 = plant.q1 + spec.delta_q1;
    t.output.smooth_weight = plant.output.smooth_weight.resampled(m) + spec.output.delta_c0.resampled(m);
    t.output.point_weights = plant.output.point_weights;
    if (!spec.output.delta_points.empty()) {
        if (spec.output.delta_points.size() != plant.output.point_weights.size()) {
            throw InvalidArgument("point output uncertainty must match the nominal point weights");
        }
        for (std::size_t k = 0; k < t.output.point_weights.size(); ++k) {
            t.output.point_weights[k].weight += spec.output.delta_points[k];
        }
    }
    t.output.boundary0 = plant.output.boundary0 + spec.output.delta_b0;
    t.output.boundary1 = plant.output.boundary1 + spec.output.delta_b1;
    const int ch = spec.disturbance.channels();
    const auto& dj = spec.disturbance;
    if (static_cast<int>(dj.g1.size()) != ch || dj.g3.size() != ch || dj.g4.size() != ch) {
        throw InvalidArgument("disturbance injection vectors must have one entry per channel");
    }
    t.g1 = Matrix::Zero(m + 1, ch);
    for (int l = 0; l < ch; ++l) t.g1.col(l) = dj.g1[l].resampled(m).values();
    t.g2 = dj.g2;
    t.g3 = dj.g3;
    t.g4 = dj.g4;
    return t;
}

/// Output of the truth model: quadrature of the smooth weight, interpolated
/// point samples, boundary samples and g4ᵀd.
inline double evaluate_output(const TruthAgent& agent, const GridFunction& profile, const Vector& d) {
    double y = agent.output.apply(profile);
    if (agent.g4.size() > 0) y += agent.g4.dot(d);
    return y;
}

inline double evaluate_output(const AgentSpec& spec, const OutputOperator& nominal, const GridFunction& profile,
                              const Vector& d) {
    NominalPlant p;
    p.a = GridFunction(profile.intervals());
    p.output = nominal;
    return evaluate_output(truth_agent(spec, p, profile.intervals()), profile, d);
}

/// Crank–Nicolson for x_t = λ x'' + a x + f with ghost-node Robin closure
/// x'(0) = q0 x(0) + β0, x'(1) = q1 x(1) + β1. The implicit tridiagonal
/// matrix is factored once.
class CrankNicolson {
public:
    CrankNicolson() = default;

    CrankNicolson(const Vector& lambda, const Vector& a, double q0, double q1, double dt)
        : m_(static_cast<int>(lambda.size()) - 1), dt_(dt), lambda0_(lambda(0)), lambdam_(lambda(m_)) {
        if (m_ < 2 || a.size() != lambda.size()) throw InvalidArgument("CrankNicolson: bad grid");
        if (!(dt > 0.0)) throw InvalidArgument("CrankNicolson: dt must be positive");
        const double h = 1.0 / m_;
        const double s = 1.0 / (h * h);
        lower_ = Vector::Zero(m_ + 1);
        diag_ = Vector::Zero(m_ + 1);
        upper_ = Vector::Zero(m_ + 1);
        for (int i = 0; i <= m_; ++i) {
            diag_(i) = -2.0 * lambda(i) * s + a(i);
            if (i > 0) lower_(i) = lambda(i) * s;
            if (i < m_) upper_(i) = lambda(i) * s;
        }
        upper_(0) *= 2.0;
        lower_(m_) *= 2.0;
        diag_(0) -= 2.0 * h * q0 * lambda(0) * s;
        diag_(m_) += 2.0 * h * q1 * lambda(m_) * s;

        // Thomas factors of I - dt/2 A.
        c_prime_ = Vector::Zero(m_ + 1);
        inv_pivot_ = Vector::Zero(m_ + 1);
        for (int i = 0; i <= m_; ++i) {
            const double b = 1.0 - 0.5 * dt * diag_(i);
            const double l = -0.5 * dt * lower_(i);
            const double pivot = (i == 0) ? b : b - l * c_prime_(i - 1);
            if (!(std::abs(pivot) > 1e-14) || !std::isfinite(pivot)) {
                throw SingularStep("Crank–Nicolson matrix is singular (non-positive diffusion?)");
            }
            inv_pivot_(i) = 1.0 / pivot;
            c_prime_(i) = -0.5 * dt * upper_(i) * inv_pivot_(i);
        }
    }

    [[nodiscard]] int intervals() const { return m_; }

    /// Source vector of the boundary data: ghost-node terms 2λβ/h at the ends.
    [[nodiscard]] Vector boundary_source(double beta0, double beta1) const {
        Vector f = Vector::Zero(m_ + 1);
        f(0) = -2.0 * lambda0_ * beta0 * m_;
        f(m_) = 2.0 * lambdam_ * beta1 * m_;
        return f;
    }

    /// x⁺ = (I - dt/2 A)⁻¹ ((I + dt/2 A) x + dt f).
    [[nodiscard]] Vector step(const Vector& x, const Vector& f) const {
        Vector rhs(m_ + 1);
        for (int i = 0; i <= m_; ++i) {
            double ax = diag_(i) * x(i);
            if (i > 0) ax += lower_(i) * x(i - 1);
            if (i < m_) ax += upper_(i) * x(i + 1);
            rhs(i) = x(i) + 0.5 * dt_ * ax + dt_ * f(i);
        }
        Vector y(m_ + 1);
        y(0) = rhs(0) * inv_pivot_(0);
        for (int i = 1; i <= m_; ++i) y(i) = (rhs(i) + 0.5 * dt_ * lower_(i) * y(i - 1)) * inv_pivot_(i);
        for (int i = m_ - 1; i >= 0; --i) y(i) -= c_prime_(i) * y(i + 1);
        return y;
    }

private:
    int m_ = 0;
    double dt_ = 0.0;
    double lambda0_ = 1.0;
    double lambdam_ = 1.0;
    Vector lower_, diag_, upper_, c_prime_, inv_pivot_;
};

/// Distributed and boundary source of one agent for disturbance value d and input u.
inline Vector agent_source(const CrankNicolson& cn, const TruthAgent& agent, double u, const Vector& d) {
    const bool has_d = d.size() > 0;
    Vector f = cn.boundary_source(has_d ? agent.g2.dot(d) : 0.0, u + (has_d ? agent.g3.dot(d) : 0.0));
    if (has_d) f += agent.g1 * d;
    return f;
}

/// One Crank–Nicolson step of a single agent with u and d held over the step.
inline GridFunction pde_step(const TruthAgent& agent, const GridFunction& profile, double u, const Vector& d,
                             double dt) {
    const CrankNicolson cn(agent.lambda, agent.a, agent.q0, agent.q1, dt);
    return GridFunction(cn.step(profile.values(), agent_source(cn, agent, u, d)));
}

/// ξ_i = ∫ r_x x_i and u_i = k_vᵀ v_i - k_1 x_i(1) - ∫ k_x x_i + Σ_j a_ij (ξ_i - ξ_j) + a_i0 ξ_i.
/// `v` holds one internal-model state per column. Leaderless mode drops a_i0.
inline Vector controller_input(const RegulatorGains& gains, const CommTopology& topology, const Matrix& v,
                               const std::vector<GridFunction>& x, Mode mode) {
    const int n = topology.size();
    Vector xi(n);
    Vector local(n);
    for (int i = 0; i < n; ++i) {
        const auto& xi_prof = x[static_cast<std::size_t>(i)];
        xi(i) = trapezoid_product(gains.r_x, xi_prof);
        local(i) = gains.k_v.dot(v.col(i)) - gains.k_1 * xi_prof[xi_prof.intervals()] -
                   trapezoid_product(gains.k_x, xi_prof);
    }
    const Matrix& a = topology.adjacency();
    Vector u = local;
    for (int i = 0; i < n; ++i) {
        double c = 0.0;
        for (int j = 0; j < n; ++j) c += a(i, j) * (xi(i) - xi(j));
        if (mode == Mode::LeaderFollower) c += topology.leader_links()(i) * xi(i);
        u(i) += c;
    }
    return u;
}

/// e_i = Σ_j a_ij (y_i - y_j) + a_i0 (y_i - r); a_i0 is ignored when leaderless.
inline Vector output_coupling(const CommTopology& topology, const Vector& y, double r, Mode mode) {
    const int n = topology.size();
    const Matrix& a = topology.adjacency();
    Vector e(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += a(i, j) * (y(i) - y(j));
        if (mode == Mode::LeaderFollower) s += topology.leader_links()(i) * (y(i) - r);
        e(i) = s;
    }
    return e;
}

/// v̇_i = S v_i + b_y e_i over one step with e_i held: exact zero-order hold.
inline Matrix internal_model_step(const RegulatorGains& gains, const CommTopology& topology, const Matrix& v,
                                  const Vector& y, double r, double dt, Mode mode) {
    if (!(dt > 0.0)) throw InvalidArgument("internal_model_step: dt must be positive");
    const auto [phi, gamma] = zoh_pair(gains.S, dt);
    const Vector e = output_coupling(topology, y, r, mode);
    return phi * v + (gamma * gains.b_y) * e.transpose();
}

struct SimOptions {
    double dt = 1e-3;
    double horizon = 20.0;
    int sample_every = 10;
    std::vector<double> snapshot_times;
    double blowup_bound = 1e8;
    bool record_states = false;
};

struct Snapshot {
    double time = 0.0;
    Matrix profiles;  // (M+1) x N
};

struct SimTrace {
    Mode mode = Mode::LeaderFollower;
    bool certified = true;
    int intervals = 0;
    std::vector<double> times;
    std::vector<double> r;
    Matrix y;  // samples x N
    Matrix u;  // samples x N
    std::vector<Snapshot> snapshots;
    std::vector<Matrix> states_x;  // (M+1) x N per sample, with record_states
    std::vector<Matrix> states_v;  // n_w x N per sample, with record_states

    [[nodiscard]] int agents() const { return static_cast<int>(y.cols()); }

    /// y_i - r (leader-follower) or y_i minus the network average (leaderless).
    [[nodiscard]] Matrix errors() const {
        Matrix e = y;
        for (Eigen::Index k = 0; k < y.rows(); ++k) {
            const double ref = mode == Mode::LeaderFollower ? r[static_cast<std::size_t>(k)] : y.row(k).mean();
            e.row(k).array() -= ref;
        }
        return e;
    }

    /// max_i |y_i - r| or max_{i,j} |y_i - y_j| per sample.
    [[nodiscard]] Vector error_signal() const {
        Vector s(y.rows());
        for (Eigen::Index k = 0; k < y.rows(); ++k) {
            if (mode == Mode::LeaderFollower) {
                s(k) = (y.row(k).array() - r[static_cast<std::size_t>(k)]).abs().maxCoeff();
            } else {
                s(k) = y.row(k).maxCoeff() - y.row(k).minCoeff();
            }
        }
        return s;
    }
};

/// Closed loop of N truth agents, their internal models and the exosystem.
struct ClosedLoop {
    Mode mode = Mode::LeaderFollower;
    CommTopology topology;
    NominalPlant plant;
    ExoModel exo;
    std::vector<AgentSpec> agents;
    RegulatorGains gains;
    int intervals = 200;
    bool certified = true;
};

/// Method-of-lines simulation: w exactly, v by zero-order hold, x by
/// Crank–Nicolson, with u and the output coupling evaluated at the start of
/// each step.
inline SimTrace simulate(const ClosedLoop& loop, const SimOptions& opt) {
    const int n = loop.topology.size();
    const int m = loop.intervals;
    if (static_cast<int>(loop.agents.size()) != n) throw InvalidArgument("simulate: one AgentSpec per agent");
    if (!(opt.dt > 0.0) || !(opt.horizon >= 0.0) || opt.sample_every < 1) {
        throw InvalidArgument("simulate: dt > 0, horizon >= 0 and sample_every >= 1 required");
    }
    const auto nw = loop.gains.S.rows();
    RegulatorGains gains = loop.gains;
    gains.k_x = gains.k_x.resampled(m);
    gains.r_x = gains.r_x.resampled(m);

    std::vector<TruthAgent> truth;
    std::vector<CrankNicolson> steppers;
    std::vector<GridFunction> x;
    Matrix v(nw, n);
    for (int i = 0; i < n; ++i) {
        const auto& spec = loop.agents[static_cast<std::size_t>(i)];
        truth.push_back(truth_agent(spec, loop.plant, m));
        steppers.emplace_back(truth.back().lambda, truth.back().a, truth.back().q0, truth.back().q1, opt.dt);
        x.push_back(spec.initial_profile.resampled(m));
        if (spec.internal_model_initial.size() != nw) {
            throw InvalidArgument("internal model initial state of agent " + std::to_string(i + 1) +
                                  " has wrong length");
        }
        v.col(i) = spec.internal_model_initial;
        if (static_cast<std::size_t>(truth.back().g1.cols()) > 0 &&
            (i >= static_cast<int>(loop.exo.P.size()) || loop.exo.P[static_cast<std::size_t>(i)].rows() != truth.back().g1.cols())) {
            throw InvalidArgument("disturbance channels of agent " + std::to_string(i + 1) +
                                  " do not match the signal model");
        }
    }
    auto disturbance = [&](int i, const Vector& w) -> Vector {
        if (truth[static_cast<std::size_t>(i)].g1.cols() == 0) return Vector();
        return loop.exo.P[static_cast<std::size_t>(i)] * w;
    };

    const auto [phi_v, gamma_v] = zoh_pair(gains.S, opt.dt);
    const Vector gamma_b = gamma_v * gains.b_y;
    const Matrix phi_w = expm(loop.exo.S * opt.dt);
    Vector w = loop.exo.initial_state;

    const long steps = std::lround(opt.horizon / opt.dt);
    std::vector<long> snap_steps;
    for (double ts : opt.snapshot_times) snap_steps.push_back(std::clamp(std::lround(ts / opt.dt), 0L, steps));

    SimTrace trace;
    trace.mode = loop.mode;
    trace.certified = loop.certified;
    trace.intervals = m;
    const long samples = steps / opt.sample_every + 1;
    trace.y.resize(samples, n);
    trace.u.resize(samples, n);
    long row = 0;

    Vector y(n);
    for (long step = 0; step <= steps; ++step) {
        const double t = static_cast<double>(step) * opt.dt;
        const double r = loop.exo.p.dot(w);
        std::vector<Vector> d(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            d[static_cast<std::size_t>(i)] = disturbance(i, w);
            y(i) = evaluate_output(truth[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(i)],
                                   d[static_cast<std::size_t>(i)]);
        }
        const Vector u = controller_input(gains, loop.topology, v, x, loop.mode);

        if (step % opt.sample_every == 0 && row < samples) {
            trace.times.push_back(t);
            trace.r.push_back(r);
            trace.y.row(row) = y.transpose();
            trace.u.row(row) = u.transpose();
            if (opt.record_states) {
                Matrix xs(m + 1, n);
                for (int i = 0; i < n; ++i) xs.col(i) = x[static_cast<std::size_t>(i)].values();
                trace.states_x.push_back(xs);
                trace.states_v.push_back(v);
            }
            ++row;
        }
        for (long s : snap_steps) {
            if (s == step) {
                Snapshot snap{t, Matrix(m + 1, n)};
                for (int i = 0; i < n; ++i) snap.profiles.col(i) = x[static_cast<std::size_t>(i)].values();
                trace.snapshots.push_back(snap);
            }
        }
        if (step == steps) break;

        const Vector w_next = phi_w * w;
        const Vector e = output_coupling(loop.topology, y, r, loop.mode);
        v = phi_v * v + gamma_b * e.transpose();
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            Vector d_avg = d[ui];
            if (d_avg.size() > 0) d_avg = 0.5 * (d_avg + disturbance(i, w_next));
            x[ui] = GridFunction(steppers[ui].step(x[ui].values(), agent_source(steppers[ui], truth[ui], u(i), d_avg)));
            const double peak = x[ui].values().cwiseAbs().maxCoeff();
            if (!(peak <= opt.blowup_bound)) {
                throw NumericalBlowup("state of agent " + std::to_string(i + 1) + " exceeded " +
                                      std::to_string(opt.blowup_bound) + " at t = " +
                                      std::to_string(t + opt.dt));
            }
        }
        if (!(v.cwiseAbs().maxCoeff() <= opt.blowup_bound)) {
            throw NumericalBlowup("internal model state exceeded " + std::to_string(opt.blowup_bound) +
                                  " at t = " + std::to_string(t + opt.dt));
        }
        w = w_next;
    }
    trace.y.conservativeResize(row, n);
    trace.u.conservativeResize(row, n);
    return trace;
}

/// Trace of the target cascade ė_v = F e_v, x̃_t = x̃'' - μ_c x̃,
/// x̃'(0) = 0, x̃'(1) = k_vᵀ e_v,i.
struct CascadeTrace {
    std::vector<double> times;
    std::vector<Vector> e_v;       // N n_w stacked
    std::vector<Matrix> x_tilde;   // (M+1) x N
};

/// `coupling` is H (leader-follower) or L_G (leaderless); g = q̃(1).
inline CascadeTrace simulate_target_cascade(const RegulatorGains& gains, const Matrix& coupling, const Vector& g,
                                            const Vector& e_v0, const Matrix& x_tilde0, const SimOptions& opt) {
    const auto n = coupling.rows();
    const auto nw = gains.S.rows();
    const int m = static_cast<int>(x_tilde0.rows()) - 1;
    if (e_v0.size() != n * nw || x_tilde0.cols() != n) throw InvalidArgument("cascade: initial state size");
    const Matrix f = closed_loop_matrix(gains.S, g, gains.k_v, coupling);
    const Matrix phi = expm(f * opt.dt);
    const CrankNicolson cn(Vector::Ones(m + 1), Vector::Constant(m + 1, -gains.mu_c), 0.0, 0.0, opt.dt);

    CascadeTrace out;
    Vector ev = e_v0;
    Matrix xt = x_tilde0;
    const long steps = std::lround(opt.horizon / opt.dt);
    for (long step = 0; step <= steps; ++step) {
        if (step % opt.sample_every == 0) {
            out.times.push_back(static_cast<double>(step) * opt.dt);
            out.e_v.push_back(ev);
            out.x_tilde.push_back(xt);
        }
        if (step == steps) break;
        const Vector ev_next = phi * ev;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = 0.5 * gains.k_v.dot(ev.segment(i * nw, nw) + ev_next.segment(i * nw, nw));
            xt.col(i) = cn.step(xt.col(i), cn.boundary_source(0.0, u));
        }
        if (!(xt.cwiseAbs().maxCoeff() <= opt.blowup_bound)) {
            throw NumericalBlowup("cascade state exceeded the bound at t = " +
                                  std::to_string(static_cast<double>(step + 1) * opt.dt));
        }
        ev = ev_next;
    }
    return out;
}

/// Cascade coordinates of an original-coordinate state: x̃_i = T[x_i] and
/// e_v = v - (H ⊗ I) ∫ q̃ x̃.
inline std::pair<Vector, Matrix> to_cascade_coordinates(const TriangularKernel& k, const Matrix& q_tilde,
                                                        const Matrix& coupling, const Matrix& v,
                                                        const Matrix& x) {
    const auto n = coupling.rows();
    const auto nw = q_tilde.cols();
    const int m = k.intervals();
    const Vector wts = trapezoid_weights(m);
    Matrix xt(m + 1, n);
    Matrix moments(nw, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        xt.col(i) = apply_transform(k, GridFunction(Vector(x.col(i)))).values();
        moments.col(i) = q_tilde.transpose() * wts.cwiseProduct(xt.col(i));
    }
    const Matrix ev = v - moments * coupling.transpose();
    return {Eigen::Map<const Vector>(ev.data(), ev.size()), xt};
}

struct ErrorMetrics {
    double threshold = 0.0;
    double settling_time = 0.0;  // +inf if the error never settles
    double tail_error = 0.0;
    double decay_rate = 0.0;
    bool tail_bound_met = false;
};

/// Settling time: first sample after which the error signal stays below
/// `threshold`. Tail error: sup over the last 20% of the horizon. Decay rate:
/// least-squares slope of log of the running-sup envelope (samples above
/// 1e-12 of its initial value).
inline ErrorMetrics error_metrics(const std::vector<double>& times, const Vector& err, double threshold) {
    if (times.empty() || static_cast<Eigen::Index>(times.size()) != err.size()) {
        throw InvalidArgument("error_metrics: empty or misaligned trace");
    }
    ErrorMetrics out;
    out.threshold = threshold;
    const auto n = err.size();
    const double t_end = times.back();
    const double t0 = times.front();

    Eigen::Index last_bad = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (!(err(k) < threshold)) last_bad = k;
    }
    if (last_bad == n - 1) {
        out.settling_time = std::numeric_limits<double>::infinity();
    } else {
        out.settling_time = last_bad < 0 ? t0 : times[static_cast<std::size_t>(last_bad + 1)];
    }

    const double tail_start = t_end - 0.2 * (t_end - t0);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (times[static_cast<std::size_t>(k)] >= tail_start - 1e-12) out.tail_error = std::max(out.tail_error, err(k));
    }
    out.tail_bound_met = out.tail_error < threshold;

    Vector env(n);
    double run = 0.0;
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        run = std::max(run, std::abs(err(k)));
        env(k) = run;
    }
    const double floor = 1e-12 * env(0);
    double st = 0, sy = 0, stt = 0, sty = 0;
    int cnt = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (env(k) > floor && env(k) > 0.0) {
            const double t = times[static_cast<std::size_t>(k)], ly = std::log(env(k));
            st += t;
            sy += ly;
            stt += t * t;
            sty += t * ly;
            ++cnt;
        }
    }
    if (cnt >= 2) {
        const double den = cnt * stt - st * st;
        if (den > 0.0) out.decay_rate = -(cnt * sty - st * sy) / den;
    }
    return out;
}

/// Threshold of 5% of the reference amplitude (leader-follower) or of the
/// output amplitude (leaderless), unless given explicitly.
inline ErrorMetrics error_metrics(const SimTrace& trace, double threshold = -1.0) {
    if (threshold <= 0.0) {
        double amp = 0.0;
        if (trace.mode == Mode::LeaderFollower) {
            for (double r : trace.r) amp = std::max(amp, std::abs(r));
        } else {
            amp = trace.y.size() > 0 ? trace.y.cwiseAbs().maxCoeff() : 0.0;
        }
        threshold = amp > 0.0 ? 0.05 * amp : 1e-12;
    }
    return error_metrics(trace.times, trace.error_signal(), threshold);
}

}  // namespace coopreg
