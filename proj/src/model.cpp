#include "mobprof/model.hpp"

#include <cmath>
#include <numbers>

namespace mobprof {

SystemModel build_system(double dt, double process_noise_scale, double measurement_noise_scale) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("build_system: dt must be positive");
    }
    if (!(process_noise_scale >= 0.0) || !(measurement_noise_scale >= 0.0)) {
        throw std::invalid_argument("build_system: noise scales must be non-negative");
    }
    SystemModel m;
    m.dt = dt;
    m.A = Mat6::Identity();
    m.A.topRightCorner<3, 3>() = dt * Mat3::Identity();
    m.F.setZero();
    m.F.bottomRows<3>() = Mat3::Identity();
    m.H.setZero();
    m.H.leftCols<3>() = Mat3::Identity();
    m.R = process_noise_scale * Mat6::Identity();
    m.Q = measurement_noise_scale * Mat3::Identity();
    return m;
}

double wrap_angle(double angle) {
    constexpr double pi = std::numbers::pi;
    double wrapped = std::remainder(angle, 2.0 * pi);  // [-pi, pi]
    if (wrapped <= -pi) wrapped += 2.0 * pi;
    return wrapped;
}

double heading_of(const Vec3& velocity, double fallback) {
    const double speed_xy = std::hypot(velocity.x(), velocity.y());
    if (speed_xy < kHeadingEpsilon) return fallback;
    return std::atan2(velocity.y(), velocity.x());
}

PolarKinematics to_polar(const StateVector& state, const StateVector& next_state, double dt,
                         double previous_heading) {
    if (!(dt > 0.0)) throw std::invalid_argument("to_polar: dt must be positive");
    const Vec3& v = state.velocity;
    PolarKinematics p;
    p.speed_xy = std::hypot(v.x(), v.y());
    p.vertical_velocity = v.z();
    p.speed_total = std::hypot(p.speed_xy, v.z());
    p.heading = heading_of(v, previous_heading);
    const double next_heading = heading_of(next_state.velocity, p.heading);
    p.angular_velocity = wrap_angle(next_heading - p.heading) / dt;
    return p;
}

Vec3 cartesian_input(const Vec3& velocity, const DrivingForce& force, double dt,
                     double heading_fallback) {
    const double speed = std::hypot(velocity.x(), velocity.y());
    const double heading = heading_of(velocity, heading_fallback);
    const double new_speed = speed + force.a_xy * dt;
    const double new_heading = heading + force.a_theta * dt;
    return Vec3{new_speed * std::cos(new_heading) - velocity.x(),
                new_speed * std::sin(new_heading) - velocity.y(), force.a_z * dt};
}

StateVector apply_dynamics(const StateVector& state, const DrivingForce& input,
                           const SystemModel& model, const std::optional<Vec6>& process_noise,
                           double heading_fallback) {
    Vec6 next = model.A * state.stacked() +
                model.F * cartesian_input(state.velocity, input, model.dt, heading_fallback);
    if (process_noise) next += *process_noise;
    return StateVector::from_stacked(next, state.timestep_index + 1);
}

}  // namespace mobprof
