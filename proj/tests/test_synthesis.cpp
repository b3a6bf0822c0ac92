#include <catch_amalgamated.hpp>

#include <random>

#include "coopreg/synthesis.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coopreg;
using Catch::Approx;
using std::numbers::pi;

namespace {

struct Pieces {
    TriangularKernel k, ki;
    OutputOperator c_tilde;
};

Pieces example_pieces(int m) {
    const auto p = fixture::plant(m);
    Pieces out;
    out.k = solve_kernel(p.a, p.q0, 5.0);
    out.ki = invert_kernel(out.k);
    out.c_tilde = transform_output_weight(p.output, out.ki);
    return out;
}

double decoupling_residual(const DecouplingSolution& d, const Matrix& s, const Vector& b_y,
                           const OutputOperator& c, double mu_c) {
    const auto n = s.rows();
    const Matrix lhs = oracle::second_derivative(d.q_tilde);
    const Matrix rhs = d.q_tilde * (mu_c * Matrix::Identity(n, n) + s).transpose() +
                       c.smooth_weight.values() * b_y.transpose();
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("decoupling with zero input vector is zero") {
    const auto pc = example_pieces(64);
    const auto d = solve_decoupling(fixture::exo_generator(), Vector::Zero(3), pc.c_tilde, 5.0, pc.k);
    CHECK(d.q_tilde.cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.q.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decoupling with constant weight is constant") {
    const int m = 64;
    OutputOperator c;
    c.smooth_weight = GridFunction(m, 2.0);
    const double b = 1.5, mu = 4.0;
    const auto d = solve_decoupling(Matrix::Zero(1, 1), Vector::Constant(1, b), c, mu, TriangularKernel(m));
    for (int i = 0; i <= m; ++i) CHECK(d.q_tilde(i, 0) == Approx(-b * 2.0 / mu).epsilon(1e-12));
}

TEST_CASE("decoupling point weight produces the Green's function") {
    const int m = 200;
    const double mu = 3.0, z0 = 0.3, c0 = 2.0;
    OutputOperator c;
    c.smooth_weight = GridFunction(m);
    c.point_weights.push_back({c0, z0});
    const auto d = solve_decoupling(Matrix::Zero(1, 1), Vector::Ones(1), c, mu, TriangularKernel(m));
    const double r = std::sqrt(mu);
    for (int i = 0; i <= m; i += 10) {
        const double z = static_cast<double>(i) / m;
        const double lo = std::min(z, z0), hi = std::max(z, z0);
        const double exact = -c0 * std::cosh(r * lo) * std::cosh(r * (1.0 - hi)) / (r * std::sinh(r));
        CHECK(d.q_tilde(i, 0) == Approx(exact).margin(1e-4));
    }
}

TEST_CASE("decoupling residual on the example data") {
    const int m = 400;
    const auto pc = example_pieces(m);
    const Matrix s = fixture::exo_generator();
    const Vector b = Vector::Ones(3);
    const auto d = solve_decoupling(s, b, pc.c_tilde, 5.0, pc.k);
    const double res = decoupling_residual(d, s, b, pc.c_tilde, 5.0);
    INFO("residual " << res);
    CHECK(res <= 1e-5);
    CHECK((oracle::end_slope(d.q_tilde, 0).transpose() - b * pc.c_tilde.boundary0).norm() < 1e-6);
    CHECK((oracle::end_slope(d.q_tilde, 1).transpose() + b * pc.c_tilde.boundary1).norm() < 1e-6);

    SECTION("q is the adjoint-transformed profile") {
        std::mt19937 rng(5);
        for (int t = 0; t < 3; ++t) {
            const auto x = oracle::random_profile(rng, m);
            const auto xt = apply_transform(pc.k, x);
            for (int c = 0; c < 3; ++c) {
                const double lhs = trapezoid_product(GridFunction(Vector(d.q.col(c))), x);
                const double rhs = trapezoid_product(GridFunction(Vector(d.q_tilde.col(c))), xt);
                CHECK(lhs == Approx(rhs).margin(1e-4));
            }
        }
        CHECK((d.q.row(m) - d.q_tilde.row(m)).norm() == 0.0);
    }
}

TEST_CASE("decoupling detects resonance") {
    const auto pc = example_pieces(64);
    CHECK_THROWS_AS(solve_decoupling(fixture::exo_generator(), Vector::Ones(3), pc.c_tilde, 0.0, pc.k),
                    ResonantSpectrum);
    CHECK_THROWS_AS(solve_decoupling(Matrix::Zero(1, 1), Vector::Ones(1), pc.c_tilde, -pi * pi, pc.k),
                    ResonantSpectrum);
}

TEST_CASE("numerator") {
    OutputOperator unit;
    unit.smooth_weight = GridFunction(50);
    unit.boundary0 = 1.0;
    for (Complex s : {Complex(0, 0), Complex(-3, 2), Complex(10, -4)}) {
        CHECK(std::abs(numerator_at(s, unit, 5.0) - 1.0) == 0.0);
    }
    CHECK(numerator_matrix(Complex(1, 1), unit, 5.0, 4).isApprox(CMatrix::Identity(4, 4)));

    const auto pc = example_pieces(200);
    for (Complex l : {Complex(0, 0), Complex(0, pi), Complex(0, -pi), Complex(-5, 0), Complex(-7.5, 3)}) {
        const Complex n = numerator_at(l, pc.c_tilde, 5.0);
        const Complex ode = oracle::numerator_by_ode(l, pc.c_tilde, 5.0);
        CHECK(std::abs(n - ode) < 1e-8);
        if (l.real() == 0.0) CHECK(std::abs(n) > 1e-6);
    }
}

TEST_CASE("controllable pair") {
    const int m = 200;
    const Matrix s = fixture::exo_generator();
    const auto pc = example_pieces(m);
    const auto d = solve_decoupling(s, Vector::Ones(3), pc.c_tilde, 5.0, pc.k);
    const auto rep = check_controllable_pair(s, Vector::Ones(3), d.q_tilde_at_1, pc.c_tilde, 5.0);
    CHECK(rep.controllable);
    CHECK(rep.rank_test);

    const auto dz = solve_decoupling(s, Vector::Zero(3), pc.c_tilde, 5.0, pc.k);
    CHECK_FALSE(check_controllable_pair(s, Vector::Zero(3), dz.q_tilde_at_1, pc.c_tilde, 5.0).controllable);

    SECTION("boundary weights chosen to block the harmonic") {
        auto plant = fixture::plant(m);
        auto n_for = [&](double cb0, double cb1) {
            plant.output.boundary0 = cb0;
            plant.output.boundary1 = cb1;
            return numerator_at(Complex(0, pi), transform_output_weight(plant.output, pc.ki), 5.0);
        };
        const Complex n0 = n_for(0, 0), e0 = n_for(1, 0) - n0, e1 = n_for(0, 1) - n0;
        Eigen::Matrix2d a;
        a << e0.real(), e1.real(), e0.imag(), e1.imag();
        const Eigen::Vector2d w = a.fullPivLu().solve(Eigen::Vector2d(-n0.real(), -n0.imag()));
        plant.output.boundary0 = w(0);
        plant.output.boundary1 = w(1);
        const auto blocked = transform_output_weight(plant.output, pc.ki);
        REQUIRE(std::abs(numerator_at(Complex(0, pi), blocked, 5.0)) < 1e-10);
        const auto db = solve_decoupling(s, Vector::Ones(3), blocked, 5.0, pc.k);
        ControllabilityReport r;
        REQUIRE_NOTHROW(r = check_controllable_pair(s, Vector::Ones(3), db.q_tilde_at_1, blocked, 5.0));
        CHECK_FALSE(r.controllable);
        CHECK_FALSE(r.rank_test);
        CHECK(r.by_controllable);
    }
}

TEST_CASE("Riccati equation") {
    SECTION("scalar") {
        const auto r = solve_are(Matrix::Zero(1, 1), Vector::Ones(1), 0.5, 1.0);
        CHECK(r.Q(0, 0) == Approx(1.0).epsilon(1e-12));
        CHECK(feedback_gain(r.Q, Vector::Ones(1))(0) == Approx(1.0));
    }
    SECTION("random controllable pairs") {
        std::mt19937 rng(11);
        std::normal_distribution<double> nd;
        for (int t = 0; t < 10; ++t) {
            Matrix s = Matrix::Zero(5, 5);
            s(0, 1) = 1.0 + t;
            s(1, 0) = -1.0 - t;
            s(2, 3) = 0.5;
            s(3, 2) = -0.5;
            Vector g(5);
            for (int i = 0; i < 5; ++i) g(i) = nd(rng);
            const double nu = 0.3 + 0.1 * t, a = 10.0;
            const auto r = solve_are(s, g, nu, a);
            CHECK(r.residual <= 1e-8 * a * 5);
            CHECK(is_hurwitz(s - nu * g * g.transpose() * r.Q));
            CHECK(is_hurwitz(s - 2.0 * nu * g * g.transpose() * r.Q));
        }
    }
    SECTION("failures") {
        CHECK_THROWS_AS(solve_are(Matrix::Zero(2, 2), Vector::Ones(2), 1.0, 1.0), NotControllable);
        CHECK_THROWS_AS(solve_are(Matrix::Zero(1, 1), Vector::Ones(1), 0.0, 1.0), InvalidArgument);
    }
    CHECK(feedback_gain(Matrix::Identity(3, 3), Vector::Unit(3, 0)) == Vector::Unit(3, 0));
}

TEST_CASE("gains") {
    SECTION("zero kernel and decoupling") {
        const int m = 40;
        DecouplingSolution d;
        d.q = Matrix::Zero(m + 1, 2);
        d.q_tilde = d.q;
        TriangularKernel k(m);
        const auto g = assemble_gains(k, GridFunction(m, -5.0), d, 0.7, Vector::Ones(2), Vector::Ones(2),
                                      Matrix::Zero(2, 2), 5.0);
        CHECK(g.k_1 == 0.7);
        CHECK(g.k_x.values().cwiseAbs().maxCoeff() < 1e-12);
        CHECK(g.r_x.values().cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("z-derivative of the top kernel row") {
        const double lambda = 6.0;
        const int m = 200;
        const auto k = solve_kernel(GridFunction(m, 1.0), 0.0, lambda - 1.0);
        const auto kz = kernel_z_derivative_top(k, lambda);
        double worst = 0.0, scale = 0.0;
        for (int j = 0; j <= m; ++j) {
            const double exact = oracle::neumann_constant_kernel_dz(lambda, k.node(j));
            worst = std::max(worst, std::abs(kz[j] - exact));
            scale = std::max(scale, std::abs(exact));
        }
        CHECK(worst < 1e-3 * scale);
    }
}

TEST_CASE("certificates and steady state for the example network") {
    const auto lf = synthesize(fixture::design(Mode::LeaderFollower));
    CHECK(lf.gains.k_1 == Approx(0.25).margin(1e-6));
    CHECK(lf.are.residual <= 1e-8 * 150 * 3);
    CHECK(lf.are.Q.llt().info() == Eigen::Success);
    CHECK((lf.are.Q - lf.are.Q.transpose()).norm() <= 1e-12 * lf.are.Q.norm());
    CHECK(lf.certificate.pass);
    CHECK(lf.certificate.alpha_ev > 0.0);
    CHECK(lf.certificate.overall_alpha == std::min(lf.certificate.alpha_ev, 5.0));
    CHECK(lf.certificate.target_pde_top_eig == -5.0);
    REQUIRE(lf.certificate.per_eigenvalue_max_re.size() == 4);
    for (double re : lf.certificate.per_eigenvalue_max_re) CHECK(re < 0.0);
    CHECK((lf.gains.r_x.values() + lf.decoupling.q * lf.gains.k_v).norm() == 0.0);
    CHECK(internal_model_rank_check(Mode::LeaderFollower, lf.graph));

    const auto ll = synthesize(fixture::design(Mode::Leaderless));
    CHECK(ll.certificate.pass);
    CHECK(internal_model_rank_check(Mode::Leaderless, ll.graph));
    REQUIRE(ll.sync.has_value());
    const auto& ss = *ll.sync;
    for (Eigen::Index r = 1; r < ss.y_inf_map.rows(); ++r) {
        CHECK((ss.y_inf_map.row(r) - ss.y_inf_map.row(0)).norm() <= 1e-8 * ss.y_inf_map.row(0).norm());
    }

    const Matrix s = fixture::exo_generator();
    const Vector g = ll.decoupling.q_tilde_at_1;
    const auto theta = theta_decompose(ll.graph.laplacian);
    const Matrix f = closed_loop_matrix(s, g, ll.gains.k_v, theta.l22);
    CHECK((ss.Pi * f - s * ss.Pi + kron(theta.l12, g * ll.gains.k_v.transpose())).norm() < 1e-9);
    const double mu = 5.0;
    for (int r = 0; r < 4; ++r) {
        const Matrix& s1 = ss.sigma1[r];
        CHECK((oracle::second_derivative(s1) - mu * s1 - s1 * s).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((oracle::end_slope(s1, 1) - ll.gains.k_v.transpose()).norm() < 1e-6);
        const Matrix& s2 = ss.sigma2[r];
        CHECK((oracle::second_derivative(s2) - mu * s2 - s2 * f).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((oracle::end_slope(s2, 1) - ll.gains.k_v.transpose() * ss.Pi - ss.B.row(r)).norm() < 1e-6);
        CHECK(oracle::end_slope(s2, 0).norm() < 1e-6);
    }
}

TEST_CASE("certificate fails without feedback") {
    const auto gm = laplacian(fixture::four_agents());
    const auto c = certify_stability(Mode::LeaderFollower, fixture::exo_generator(), Vector::Ones(3),
                                     Vector::Zero(3), gm, 5.0);
    CHECK_FALSE(c.pass);
}

TEST_CASE("homogeneous steady-state rows vanish") {
    const Matrix z = detail::solve_row_bvp(fixture::exo_generator(), 5.0, RowVector::Zero(3), 50);
    CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rank checks and negative controls") {
    const auto edgeless = laplacian(CommTopology::leaderless(Matrix::Zero(4, 4)));
    CHECK_FALSE(internal_model_rank_check(Mode::LeaderFollower, edgeless));
    CHECK_FALSE(internal_model_rank_check(Mode::Leaderless, edgeless));

    auto d = fixture::design(Mode::LeaderFollower, 64);
    d.topology = CommTopology::leaderless(Matrix::Zero(4, 4));
    CHECK_THROWS_AS(synthesize(d), NonPositiveBound);

    auto z = fixture::design(Mode::LeaderFollower, 64);
    z.b_y = Vector::Zero(3);
    CHECK_THROWS_AS(synthesize(z), NotControllable);

    auto r = fixture::design(Mode::LeaderFollower, 64);
    r.mu_c = 0.0;
    CHECK_THROWS_AS(synthesize(r), ResonantSpectrum);
}
