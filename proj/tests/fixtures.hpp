#pragma once

// Four-agent reaction-diffusion network used throughout the tests.

#include <numbers>

#include "coopreg/comm_graph.hpp"
#include "coopreg/signal_model.hpp"
#include "coopreg/simulator.hpp"
#include "coopreg/synthesis.hpp"

namespace fixture {

using namespace coopreg;

inline CommTopology four_agents(bool with_leader = true) {
    Matrix a = Matrix::Zero(4, 4);
    a(0, 2) = 1.0;
    a(1, 0) = 1.0;
    a(1, 3) = 1.0;
    a(2, 0) = 1.0;
    a(3, 2) = 1.0;
    Vector l0 = Vector::Zero(4);
    if (with_leader) l0(0) = 1.0;
    return {a, l0};
}

inline Matrix exo_generator() {
    Matrix s = Matrix::Zero(3, 3);
    s(0, 1) = std::numbers::pi;
    s(1, 0) = -std::numbers::pi;
    return s;
}

inline NominalPlant plant(int m) {
    NominalPlant p;
    p.a = GridFunction::sample(m, [](double z) { return z + 1.0; });
    p.q0 = 3.0;
    p.q1 = 0.0;
    p.output.smooth_weight = GridFunction::sample(m, [](double z) { return -z; });
    p.output.boundary0 = 1.0;
    p.output.boundary1 = 1.0;
    return p;
}

inline DesignSpec design(Mode mode, int m = 200) {
    DesignSpec d;
    d.mode = mode;
    d.topology = four_agents(mode == Mode::LeaderFollower);
    d.plant = plant(m);
    d.S = exo_generator();
    d.b_y = Vector::Ones(3);
    d.mu_c = 5.0;
    d.nu = mode == Mode::LeaderFollower ? 0.382 : 1.0;
    d.are_weight = 150.0;
    return d;
}


/// Constant disturbances d = (3, -3, 1, 1) on top of the reference 2cos(πt).
inline ExoModel signal_model() {
    const auto ref = build_reference_block({std::numbers::pi});
    const double d[4] = {3.0, -3.0, 1.0, 1.0};
    std::vector<DisturbanceBlock> blocks;
    for (double di : d) blocks.push_back({{0.0}, Matrix::Ones(1, 1), Vector::Constant(1, di)});
    return merge(ref, (Vector(2) << 2.0, 0.0).finished(), blocks, Vector::Ones(3));
}

/// Uncertain agents with the listed injection profiles and initial data.
inline std::vector<AgentSpec> agents(int m) {
    const double dl[4] = {0.2, -0.2, -0.1, 0.1};
    const double da[4] = {0.2, -0.2, 0.1, 0.1};
    const double x0[4] = {1.0, 2.0, 0.5, 3.0};
    const double v0[4][3] = {{1.0, 3.5, 0.5}, {0.1, 2.0, 0.8}, {1.7, 0.8, 0.3}, {0.5, 0.7, 0.9}};
    const std::function<double(double)> g1[4] = {[](double z) { return 2.0 * z; },
                                                 [](double z) { return 3.0 * z + 1.0; },
                                                 [](double z) { return z - 1.0; },
                                                 [](double z) { return 2.0 * z; }};
    std::vector<AgentSpec> out;
    for (int i = 0; i < 4; ++i) {
        AgentSpec a;
        a.delta_lambda = GridFunction(m, dl[i]);
        a.delta_a = GridFunction::sample(m, [&](double z) { return da[i] * (z + 1.0); });
        a.output.delta_c0 = GridFunction(m);
        if (i == 3) {
            a.output.delta_b0 = -0.05;
            a.output.delta_b1 = 0.1;
        }
        a.disturbance.g1 = {GridFunction::sample(m, g1[i])};
        a.disturbance.g2 = Vector::Ones(1);
        a.disturbance.g3 = Vector::Ones(1);
        a.disturbance.g4 = Vector::Zero(1);
        a.initial_profile = GridFunction(m, x0[i]);
        a.internal_model_initial = Eigen::Map<const Vector>(v0[i], 3);
        out.push_back(a);
    }
    return out;
}

/// Nominal agents without disturbances, from given initial data.
inline std::vector<AgentSpec> nominal_agents(const std::vector<GridFunction>& x0, const Matrix& v0) {
    std::vector<AgentSpec> out;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const int m = x0[i].intervals();
        AgentSpec a;
        a.delta_lambda = GridFunction(m);
        a.delta_a = GridFunction(m);
        a.output.delta_c0 = GridFunction(m);
        a.disturbance.g2 = Vector();
        a.disturbance.g3 = Vector();
        a.disturbance.g4 = Vector();
        a.initial_profile = x0[i];
        a.internal_model_initial = v0.col(static_cast<Eigen::Index>(i));
        out.push_back(a);
    }
    return out;
}

inline ClosedLoop closed_loop(Mode mode, const RegulatorGains& gains, int m) {
    ClosedLoop loop;
    loop.mode = mode;
    loop.topology = four_agents(mode == Mode::LeaderFollower);
    loop.plant = plant(m);
    loop.exo = signal_model();
    loop.agents = agents(m);
    loop.gains = gains;
    loop.intervals = m;
    return loop;
}

}  // namespace fixture
