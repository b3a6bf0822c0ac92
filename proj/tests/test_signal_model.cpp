#include <catch_amalgamated.hpp>

#include <numbers>

#include "coopreg/signal_model.hpp"

using namespace coopreg;
using Catch::Approx;
using std::numbers::pi;

TEST_CASE("reference blocks") {
    const auto r = build_reference_block({pi});
    Matrix s(2, 2);
    s << 0, pi, -pi, 0;
    CHECK(r.S == s);
    CHECK(r.p == Vector((Vector(2) << 1, 0).finished()));

    const auto c = build_reference_block({0.0});
    CHECK(c.S == Matrix::Zero(1, 1));
    CHECK(c.p(0) == 1.0);

    const auto both = build_reference_block({0.0, pi});
    CHECK(both.S.rows() == 3);
    CHECK(both.S(1, 2) == pi);
    CHECK(check_observable(both.p.transpose(), both.S));

    CHECK_THROWS_AS(build_reference_block({pi, pi}), DuplicateFrequency);
    CHECK_THROWS_AS(build_reference_block({-1.0}), InvalidArgument);
}

TEST_CASE("merging reference and constant disturbances") {
    const auto r = build_reference_block({pi});
    Vector wr(2);
    wr << 2, 0;
    const double d[4] = {3, -3, 1, 1};
    std::vector<DisturbanceBlock> dist;
    for (double di : d) {
        DisturbanceBlock b;
        b.frequencies = {0.0};
        b.P = Matrix::Constant(1, 1, 1.0);
        b.initial = Vector::Constant(1, di);
        dist.push_back(b);
    }
    const auto m = merge(r, wr, dist);
    REQUIRE(m.order() == 3);
    CHECK(m.S.topLeftCorner(2, 2) == r.S);
    CHECK(m.S(2, 2) == 0.0);
    CHECK(m.b_y == Vector::Ones(3));
    CHECK(check_controllable(m.S, m.b_y));
    for (int i = 0; i < 4; ++i) {
        CHECK((m.P[i] * m.initial_state)(0) == Approx(d[i]));
        CHECK(m.P[i](0, 0) == 0.0);
        CHECK(m.P[i](0, 1) == 0.0);
    }
    CHECK(m.p.dot(m.initial_state) == Approx(2.0));

    SECTION("no disturbances keeps the reference alone") {
        const auto only = merge(r, wr, {});
        CHECK(only.S == r.S);
    }
    SECTION("shared harmonic disturbance is folded into the reference block") {
        DisturbanceBlock h;
        h.frequencies = {pi};
        h.P = Matrix::Identity(2, 2);
        h.initial = (Vector(2) << 0.3, -0.7).finished();
        const auto mm = merge(r, wr, {h});
        CHECK(mm.order() == 2);
        for (double t : {0.0, 0.37, 1.2}) {
            const Vector w = expm(mm.S * t) * mm.initial_state;
            const Vector wd = expm(r.S * t) * h.initial;
            CHECK((mm.P[0] * w - wd).norm() < 1e-12);
        }
    }
}

TEST_CASE("controllability") {
    Matrix s = Matrix::Zero(3, 3);
    s(0, 1) = pi;
    s(1, 0) = -pi;
    CHECK(check_controllable(s, Vector::Ones(3)));
    CHECK_FALSE(check_controllable(s, Vector::Zero(3)));
    CHECK_FALSE(check_controllable(Matrix::Zero(2, 2), Vector::Ones(2)));
}

TEST_CASE("exosystem stepping") {
    const auto r = build_reference_block({pi});
    ExoModel m = exo_model_from_raw(r.S, r.p, {}, Vector::Ones(2), (Vector(2) << 2, 0).finished());
    const Vector w1 = exo_step(m, m.initial_state, 1.0);
    CHECK(w1(0) == Approx(-2.0));
    CHECK(std::abs(w1(1)) < 1e-12);

    ExoModel z = exo_model_from_raw(Matrix::Zero(1, 1), Vector::Ones(1), {}, Vector::Ones(1),
                                    Vector::Ones(1));
    CHECK(exo_step(z, z.initial_state, 0.5) == z.initial_state);

    Vector w = m.initial_state;
    const double dt = 1e-3;
    double worst = 0.0;
    for (int k = 1; k <= 1000; ++k) {
        w = exo_step(m, w, dt);
        worst = std::max(worst, std::abs(w.norm() - 2.0));
        if (k % 250 == 0) CHECK(m.p.dot(w) == Approx(2.0 * std::cos(pi * k * dt)).margin(1e-9));
    }
    CHECK(worst < 1e-9);
    CHECK_THROWS_AS(exo_step(m, w, 0.0), InvalidArgument);
}

TEST_CASE("raw models are validated") {
    Matrix unstable(1, 1);
    unstable << 1.0;
    CHECK_THROWS_AS(exo_model_from_raw(unstable, Vector::Ones(1), {}, Vector::Ones(1), Vector::Ones(1)),
                    InvalidArgument);
    Matrix jordan(2, 2);
    jordan << 0, 1, 0, 0;
    CHECK_THROWS_AS(exo_model_from_raw(jordan, Vector::Ones(2), {}, Vector::Ones(2), Vector::Ones(2)),
                    InvalidArgument);
}
