#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mobprof {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/// Below this xy-speed (m/s) the heading is undefined and is carried over.
inline constexpr double kHeadingEpsilon = 1e-6;

/// Raised when a linear-algebra step cannot proceed (singular innovation,
/// non-finite likelihood, ...). Carries the timestep where it happened.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t timestep)
        : std::runtime_error(what + " (timestep " + std::to_string(timestep) + ")"),
          timestep_(timestep) {}

    std::size_t timestep() const noexcept { return timestep_; }

private:
    std::size_t timestep_;
};

/// Position and velocity of one object at one time step.
struct StateVector {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    std::size_t timestep_index = 0;

    Vec6 stacked() const {
        Vec6 x;
        x << position, velocity;
        return x;
    }

    static StateVector from_stacked(const Vec6& x, std::size_t k) {
        return StateVector{x.head<3>(), x.tail<3>(), k};
    }

    bool finite() const { return position.allFinite() && velocity.allFinite(); }
};

/// Noisy position reading. When `valid` is false the reading carries no
/// information and consumers must ignore it.
struct Observation {
    Vec3 position_reading = Vec3::Zero();
    bool valid = false;
    std::size_t timestep_index = 0;
};

/// Discretized constant-velocity kinematics:
///   x(k+1) = A x(k) + F a(k) + w(k),  w ~ N(0, R)
///   z(k)   = H x(k) + zeta(k),        zeta ~ N(0, Q)
struct SystemModel {
    double dt = 1.0;
    Mat6 A = Mat6::Identity();
    Mat63 F = Mat63::Zero();
    Mat36 H = Mat36::Zero();
    Mat6 R = Mat6::Zero();
    Mat3 Q = Mat3::Zero();
};

struct PolarKinematics {
    double speed_xy = 0.0;
    double speed_total = 0.0;
    double heading = 0.0;
    double angular_velocity = 0.0;
    double vertical_velocity = 0.0;
};

/// Per-step driving force in polar form: tangential (xy-plane), vertical,
/// and angular. The angular term is the heading rate imposed over the step.
struct DrivingForce {
    double a_xy = 0.0;
    double a_z = 0.0;
    double a_theta = 0.0;

    bool finite() const {
        return std::isfinite(a_xy) && std::isfinite(a_z) && std::isfinite(a_theta);
    }
};

SystemModel build_system(double dt, double process_noise_scale, double measurement_noise_scale);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// Heading of a velocity vector, or `fallback` when the xy-speed is below
/// kHeadingEpsilon.
double heading_of(const Vec3& velocity, double fallback);

/// Polar decomposition of `state`'s velocity; angular velocity is the wrapped
/// heading change to `next_state` divided by dt. `previous_heading` is used
/// whenever a heading is undefined.
PolarKinematics to_polar(const StateVector& state, const StateVector& next_state, double dt,
                         double previous_heading = 0.0);

/// Converts a polar driving force into the Cartesian input vector a(k) of the
/// state equation, i.e. the velocity increment over one step: the xy-speed
/// changes by a_xy*dt, the heading rotates by a_theta*dt and v_z changes by
/// a_z*dt.
Vec3 cartesian_input(const Vec3& velocity, const DrivingForce& force, double dt,
                     double heading_fallback = 0.0);

/// One step of the state equation with a polar input and optional process
/// noise sample.
StateVector apply_dynamics(const StateVector& state, const DrivingForce& input,
                           const SystemModel& model,
                           const std::optional<Vec6>& process_noise = std::nullopt,
                           double heading_fallback = 0.0);

}  // namespace mobprof
