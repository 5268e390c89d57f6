#include <cmath>
#include <numbers>

#include <doctest.h>

#include "mobprof/model.hpp"

using namespace mobprof;

TEST_SUITE("model") {

TEST_CASE("build_system has the constant-velocity structure") {
    const SystemModel m = build_system(0.5, 2.0, 3.0);
    Vec6 x;
    x << 1, 2, 3, 4, 5, 6;
    const Vec6 next = m.A * x;
    CHECK(next(0) == doctest::Approx(1 + 0.5 * 4));
    CHECK(next(2) == doctest::Approx(3 + 0.5 * 6));
    CHECK(next.tail<3>() == x.tail<3>());
    CHECK((m.H * x) == x.head<3>());
    CHECK((m.F * Vec3(7, 8, 9)).head<3>().isZero());
    CHECK(m.R.isApprox(2.0 * Mat6::Identity()));
    CHECK(m.Q.isApprox(3.0 * Mat3::Identity()));
    CHECK_THROWS_AS(build_system(0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_system(1.0, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
    constexpr double pi = std::numbers::pi;
    CHECK(wrap_angle(pi) == doctest::Approx(pi));
    CHECK(wrap_angle(-pi) == doctest::Approx(pi));
    CHECK(wrap_angle(3 * pi / 2) == doctest::Approx(-pi / 2));
    CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
    for (double a = -20.0; a < 20.0; a += 0.37) {
        const double w = wrap_angle(a);
        CHECK(w > -pi);
        CHECK(w <= pi + 1e-15);
        CHECK(std::remainder(w - a, 2 * pi) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("heading_of falls back below the speed threshold") {
    CHECK(heading_of(Vec3(0, 2, 0), 0.0) == doctest::Approx(std::numbers::pi / 2));
    CHECK(heading_of(Vec3(0, 0, 5), 1.25) == 1.25);
}

TEST_CASE("cartesian_input rotates the velocity exactly") {
    const Vec3 v(3.0, 4.0, 1.0);
    const DrivingForce f{0.5, -0.2, 0.3};
    const double dt = 2.0;
    const Vec3 after = v + cartesian_input(v, f, dt);
    CHECK(std::hypot(after.x(), after.y()) == doctest::Approx(5.0 + 0.5 * dt));
    CHECK(wrap_angle(std::atan2(after.y(), after.x()) - std::atan2(4.0, 3.0)) == doctest::Approx(0.3 * dt));
    CHECK(after.z() == doctest::Approx(1.0 - 0.2 * dt));
}

TEST_CASE("apply_dynamics: position moves with the old velocity, velocity takes the input") {
    const SystemModel m = build_system(1.0, 0.0, 0.0);
    StateVector s;
    s.velocity = Vec3(10, 0, 0);
    const StateVector next = apply_dynamics(s, DrivingForce{1.0, 0.0, 0.0}, m);
    CHECK(next.position.isApprox(Vec3(10, 0, 0)));
    CHECK(next.velocity.isApprox(Vec3(11, 0, 0)));
    CHECK(next.timestep_index == 1);
}

TEST_CASE("constant turn keeps the speed and closes a circle") {
    // Oracle: a heading rate of 2 pi / n per step visits a regular n-gon and
    // returns to the start after n steps.
    const SystemModel m = build_system(1.0, 0.0, 0.0);
    const int n = 36;
    StateVector s;
    s.velocity = Vec3(2.0, 0.0, 0.0);
    const DrivingForce turn{0.0, 0.0, 2 * std::numbers::pi / n};
    for (int k = 0; k < n; ++k) {
        s = apply_dynamics(s, turn, m);
        CHECK(s.velocity.norm() == doctest::Approx(2.0));
    }
    CHECK(s.position.norm() < 1e-9);
}

TEST_CASE("to_polar decomposes speed, heading and turn rate") {
    StateVector a;
    a.velocity = Vec3(0, 3, 4);
    StateVector b;
    b.velocity = Vec3(-3, 0, 4);
    const PolarKinematics p = to_polar(a, b, 0.5);
    CHECK(p.speed_xy == doctest::Approx(3.0));
    CHECK(p.speed_total == doctest::Approx(5.0));
    CHECK(p.heading == doctest::Approx(std::numbers::pi / 2));
    CHECK(p.angular_velocity == doctest::Approx(std::numbers::pi));
    CHECK(p.vertical_velocity == doctest::Approx(4.0));
}

}  // TEST_SUITE
