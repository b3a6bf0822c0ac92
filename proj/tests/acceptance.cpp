// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "coopreg/coopreg.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "structural.hpp"

using namespace coopreg;
using std::numbers::pi;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(COOPREG_SOURCE_DIR) / "scenarios";

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

CommTopology random_connected(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> weight(0.1, 2.0);
    std::bernoulli_distribution extra(0.3);
    Matrix a = Matrix::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> parent(0, i - 1);
        a(i, parent(rng)) = weight(rng);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && a(i, j) == 0.0 && extra(rng)) a(i, j) = weight(rng);
        }
    }
    Vector l0 = Vector::Zero(n);
    l0(0) = weight(rng);
    return {a, l0};
}

void graph_suite(Outcome& o) {
    const auto g = laplacian(fixture::four_agents());
    Matrix expected(4, 4);
    expected << 1, 0, -1, 0, -1, 2, 0, -1, -1, 0, 1, 0, 0, 0, -1, 1;
    o.require(g.laplacian == expected, "four-agent laplacian");

    std::mt19937 rng(20240611);
    double worst = 0.0;
    int connected = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 9;
        const auto topo = random_connected(rng, n);
        const auto gm = laplacian(topo);
        connected += is_connected(topo, true) ? 1 : 0;
        const double tol = 8.0 * n * 2.2e-16 * gm.degree.maxCoeff();
        worst = std::max(worst, (gm.laplacian * Vector::Ones(n)).cwiseAbs().maxCoeff() / tol);
    }
    o.require(connected == 100, "random graphs connected");
    o.require(worst <= 1.0, "L 1 = 0 to round-off");
    const double bound = spectral_lower_bound(g.leader_follower, true);
    o.require(std::abs(bound - 0.382) <= 1e-3, "min Re sigma(H) near 0.382");
    o.detail << "min Re sigma(H) = " << bound << ", worst |L1|/tol = " << worst;
}

void kernel_suite(Outcome& o) {
    const double mu_c = 5.0, q0 = 3.0;
    auto a_of = [](int m) { return GridFunction::sample(m, [](double z) { return z + 1.0; }); };
    const auto k200 = solve_kernel(a_of(200), q0, mu_c);
    double diag = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double z = k200.node(i);
        diag = std::max(diag, std::abs(k200(i, i) - (q0 - 0.5 * (mu_c * z + 0.5 * z * z + z))));
    }
    o.require(diag <= 1e-3, "diagonal identity");

    const auto a = [](double z) { return z + 1.0; };
    const double r100 = oracle::kernel_interior_residual(solve_kernel(a_of(100), q0, mu_c), a, mu_c);
    const double r200 = oracle::kernel_interior_residual(k200, a, mu_c);
    const double order = std::log2(r100 / r200);
    o.require(order >= 1.8, "residual order");

    const auto ki = invert_kernel(k200);
    std::mt19937 rng(99);
    double comp = 0.0;
    for (int t = 0; t < 10; ++t) {
        const auto x = oracle::random_profile(rng, 200);
        comp = std::max(comp, relative_l2(apply_inverse_transform(ki, apply_transform(k200, x)), x));
    }
    o.require(comp <= 1e-3, "forward o inverse");
    o.detail << "diag err " << diag << ", order " << order << ", composition " << comp;
}

void decoupling_suite(Outcome& o) {
    auto spec = fixture::design(Mode::LeaderFollower, 400);
    const auto syn = synthesize(spec);
    const Matrix& s = spec.S;
    const auto n = s.rows();
    const Matrix lhs = oracle::second_derivative(syn.decoupling.q_tilde);
    const Matrix rhs = syn.decoupling.q_tilde * (spec.mu_c * Matrix::Identity(n, n) + s).transpose() +
                       syn.c_tilde.smooth_weight.values() * spec.b_y.transpose();
    const double res = (lhs - rhs).cwiseAbs().maxCoeff();
    o.require(res <= 1e-5, "decoupling residual");
    const double are_tol = 1e-8 * spec.are_weight * static_cast<double>(n);
    o.require(syn.are.residual <= are_tol, "Riccati residual");
    Eigen::SelfAdjointEigenSolver<Matrix> qe(syn.are.Q);
    o.require(qe.eigenvalues().minCoeff() > 0.0 && (syn.are.Q - syn.are.Q.transpose()).norm() == 0.0, "Q > 0");
    double worst = -std::numeric_limits<double>::infinity();
    for (double v : syn.certificate.per_eigenvalue_max_re) worst = std::max(worst, v);
    o.require(worst < 0.0, "per-eigenvalue Hurwitz");
    o.detail << "decoupling residual " << res << ", ARE residual " << syn.are.residual << ", min eig Q "
             << qe.eigenvalues().minCoeff() << ", max Re " << worst;
}

void nonblocking_suite(Outcome& o) {
    const auto p = fixture::plant(200);
    const auto k = solve_kernel(p.a, p.q0, 5.0);
    const auto c = transform_output_weight(p.output, invert_kernel(k));
    double min_n = std::numeric_limits<double>::infinity(), diff = 0.0;
    for (Complex l : {Complex(0, 0), Complex(0, pi), Complex(0, -pi)}) {
        const Complex n = numerator_at(l, c, 5.0);
        min_n = std::min(min_n, std::abs(n));
        diff = std::max(diff, std::abs(n - oracle::numerator_by_ode(l, c, 5.0)));
    }
    o.require(min_n > 1e-6, "|n| > 1e-6");
    o.require(diff <= 1e-8, "ODE oracle agreement");
    o.detail << "min |n| " << min_n << ", oracle difference " << diff;
}

void structural_suite(Outcome& o) {
    const auto syn = synthesize(fixture::design(Mode::LeaderFollower, 200));
    const double dt = 1e-3, bound = 5.0 * (1.0 / (200.0 * 200.0) + dt);
    double worst = 0.0;
    for (unsigned seed = 1; seed <= 5; ++seed) {
        worst = std::max(worst, structural::oracle_error(syn, fixture::four_agents(), fixture::plant(200), seed, dt, 2.0));
    }
    o.require(worst <= bound, "relative L2 within 5(M^-2 + dt)");
    o.detail << "worst relative L2 " << worst << " (bound " << bound << ")";
}

SimTrace run_scenario(const Scenario& s, Synthesis& syn,
                      const std::function<void(ClosedLoop&)>& edit = [](ClosedLoop&) {}) {
    syn = synthesize(scenario_design(s));
    auto loop = scenario_closed_loop(s, syn.gains, syn.certificate.pass);
    edit(loop);
    return simulate(loop, scenario_sim_options(s));
}

void leader_end_to_end(Outcome& o) {
    const auto s = load_scenario(kScenarios / "paper_sec6_leader.json");
    Synthesis syn;
    const auto trace = run_scenario(s, syn);
    const auto m = error_metrics(trace, 0.1);
    o.require(syn.certificate.pass, "certificate");
    o.require(trace.times.back() == 20.0, "20-unit horizon");
    o.require(m.tail_error < 0.1, "tail |e_i| < 0.1");
    o.require(m.decay_rate > 0.0, "positive decay rate");
    o.detail << "tail " << m.tail_error << ", decay rate " << m.decay_rate << ", settling " << m.settling_time;
}

void leaderless_end_to_end(Outcome& o) {
    const auto s = load_scenario(kScenarios / "paper_sec6_leaderless.json");
    Synthesis syn;
    const auto trace = run_scenario(s, syn);
    const auto m = error_metrics(trace, 0.1);
    o.require(syn.certificate.pass && syn.sync.has_value(), "certificate and steady state");
    o.require(m.tail_error < 0.1, "pairwise tail < 0.1");
    double spread = std::numeric_limits<double>::infinity();
    if (syn.sync) {
        const Matrix& y = syn.sync->y_inf_map;
        spread = 0.0;
        for (Eigen::Index r = 1; r < y.rows(); ++r) spread = std::max(spread, (y.row(r) - y.row(0)).cwiseAbs().maxCoeff());
    }
    o.require(spread <= 1e-6, "steady-state rows equal");
    o.detail << "pairwise tail " << m.tail_error << ", row spread " << spread;
}

void robustness(Outcome& o) {
    const auto s = load_scenario(kScenarios / "paper_sec6_leader.json");
    Synthesis syn;
    std::mt19937 rng(8);
    const auto trace = run_scenario(s, syn, [&](ClosedLoop& loop) {
        for (auto& a : loop.agents) {
            a.disturbance.g1 = {oracle::random_profile(rng, loop.intervals)};
            a.disturbance.g4 = Vector::Ones(1);
        }
    });
    const auto m = error_metrics(trace, 0.1);
    o.require(m.tail_error < 0.1, "tail |e_i| < 0.1");
    o.detail << "tail " << m.tail_error << ", decay rate " << m.decay_rate;
}

template <class E>
bool raises(const std::function<void()>& f, std::string& kind) {
    try {
        f();
    } catch (const E& e) {
        kind = e.kind();
        return true;
    } catch (const Error& e) {
        kind = e.kind();
        return false;
    }
    kind = "none";
    return false;
}

void negative_controls(Outcome& o) {
    std::string k1, k2, k3;
    auto edgeless = fixture::design(Mode::LeaderFollower, 100);
    edgeless.topology = CommTopology(Matrix::Zero(4, 4), Vector::Zero(4));
    o.require(raises<NonPositiveBound>([&] { (void)synthesize(edgeless); }, k1), "edgeless graph");

    auto blind = fixture::design(Mode::LeaderFollower, 100);
    blind.b_y = Vector::Zero(3);
    o.require(raises<NotControllable>([&] { (void)synthesize(blind); }, k2), "b_y = 0");

    auto resonant = fixture::design(Mode::LeaderFollower, 100);
    resonant.mu_c = 0.0;
    o.require(raises<ResonantSpectrum>([&] { (void)synthesize(resonant); }, k3), "resonant mu_c");
    o.detail << "edgeless: " << k1 << ", b_y = 0: " << k2 << ", mu_c = 0: " << k3;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        void (*run)(Outcome&);
    };
    const Criterion criteria[] = {
        {1, "graph suite", 1.0, graph_suite},
        {2, "kernel suite", 30.0, kernel_suite},
        {3, "decoupling and Riccati suite", 10.0, decoupling_suite},
        {4, "nonblocking", 1.0, nonblocking_suite},
        {5, "structural oracle", 120.0, structural_suite},
        {6, "leader-follower end to end", 300.0, leader_end_to_end},
        {7, "leaderless end to end", 300.0, leaderless_end_to_end},
        {8, "robustness to injection profiles", 300.0, robustness},
        {9, "negative controls", 5.0, negative_controls},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "] ";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.limit_s) o.require(false, "runtime limit");
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s [%.2f s, limit %.0f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.str().c_str(), secs, c.limit_s);
    }
    std::printf("%d of 9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
