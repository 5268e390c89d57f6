#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "mobprof/model.hpp"

namespace mobprof {

/// Unbiased minimum-variance estimator of state and unknown input.
///
/// With F = [0 I]^T and H = [I 0] the input a(k) never reaches z(k+1)
/// directly (H F = 0); it first shows up in z(k+2). The filter therefore
/// runs one step behind the sensor: the estimate of x(k) is formed from the
/// readings up to z(k+1), using the shifted output
///
///   y(k) = z(k+1) = H A x(k) + H w(k) + zeta(k+1),
///
/// whose input map (H A) F = dt I is invertible. Each step is
///   1. time update with zero input:   x- = A x,  P- = A P A^T + R (+ cross terms)
///   2. input estimation:              a  = M (y - H A x-)
///   3. measurement update:            x  = x- + F a
/// where M is the weighted least-squares inverse of (H A) F. The output noise
/// of y(k) is correlated with the process noise entering x(k+1); the
/// covariance recursion tracks that correlation exactly.
struct FilterState {
    Vec6 state_estimate = Vec6::Zero();
    Mat6 error_covariance = Mat6::Identity();
    /// Input that drove the previous state into this one (Cartesian velocity
    /// increment). Zero when the step was not corrected.
    Vec3 input_estimate = Vec3::Zero();
    std::size_t timestep_index = 0;
    /// True when a valid reading corrected this state.
    bool corrected = false;
    /// cov(e(k), w(k)) between this estimate's error and the process noise of
    /// the next transition.
    Mat6 noise_cross = Mat6::Zero();
    /// Covariance of (v_hat(k) - v_hat(k-1)) minus the true driving increment.
    Mat3 increment_error_covariance = Mat3::Zero();

    StateVector state() const { return StateVector::from_stacked(state_estimate, timestep_index); }
};

inline constexpr double kInitialVariance = 100.0;

/// Error variances of the polar force estimates at one step.
struct ForceNoise {
    double a_xy = 0.0;
    double a_z = 0.0;
    double a_theta = 0.0;
};

struct EstimatedTrajectory {
    std::vector<StateVector> states;
    /// forces[j] is the finite-difference force from states[j+1] to states[j+2].
    std::vector<DrivingForce> forces;
    /// False when states[j+2] was only time-updated (reading missing).
    std::vector<bool> force_valid;
    std::vector<ForceNoise> force_noise;
    std::vector<double> covariance_trace;
    std::vector<FilterState> filter_states;
};

/// Starting estimate: first valid reading's position, zero velocity, indexed
/// at the first observation.
StateVector initial_guess_from(std::span<const Observation> observations);

/// Builds the filter state for `guess.timestep_index` from a prior guess
/// (covariance `initial_variance * I`) and the following reading.
FilterState filter_initialize(const StateVector& guess, const Observation& next_reading,
                              const SystemModel& model, double initial_variance = kInitialVariance);

/// Advances the estimate of x(k) to x(k+1) using z(k+2). A missing reading
/// yields the time update alone with a zero input estimate.
/// Throws NumericalError when the input-to-output map is singular.
FilterState filter_step(const FilterState& prior, const Observation& reading,
                        const SystemModel& model);

/// Filters consecutive readings z(k0..k1). Produces estimates of states
/// k0..k1-1 and their polar force estimates. Requires >= 3 readings.
EstimatedTrajectory filter_trajectory(std::span<const Observation> observations,
                                      const SystemModel& model, const StateVector& initial_guess);

/// Open-loop prediction A^h x for h = 1..horizon.
std::vector<StateVector> predict_ahead(const FilterState& current, const SystemModel& model,
                                       std::size_t horizon);

/// Same schema as the ground-truth export with `_hat` columns:
/// k,x_hat,y_hat,z_hat,vx_hat,vy_hat,vz_hat,a_xy_hat,a_z_hat,a_theta_hat,force_valid,cov_trace
void write_estimate_csv(std::ostream& out, const EstimatedTrajectory& est);

}  // namespace mobprof
