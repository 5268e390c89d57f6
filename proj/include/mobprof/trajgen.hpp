#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mobprof/model.hpp"
#include "mobprof/profile.hpp"

namespace mobprof {

/// Ground truth and sensor stream for one simulated object.
/// `observations[i]` is the reading of `states[i + 1]`.
struct SynthTrajectory {
    std::vector<StateVector> states;
    std::vector<DrivingForce> inputs;
    std::vector<Observation> observations;
    int true_class = 0;
    MotionProfile profile;
};

/// Position at the origin, 10 m/s along +x.
StateVector default_initial_state();

/// Draws lambda ~ Beta, tau ~ Gamma, mu ~ N(mu_c, 1/(tau n_c)) per channel.
/// In planar mode the vertical channel is pinned to (0, 0, floor).
MotionProfile sample_profile(const ClassHyperParams& hyper, std::uint64_t seed,
                             MotionMode mode = MotionMode::planar);

/// Spike-and-slab forces: each channel and step is 0 with probability
/// 1 - lambda and N(mu, sigma^2) otherwise.
std::vector<DrivingForce> sample_driving_forces(const MotionProfile& profile, std::size_t length,
                                                std::uint64_t seed);

/// Runs the state equation for `length` steps with sampled forces and process
/// noise and emits noisy observations, each valid with probability
/// `update_rate`.
SynthTrajectory synthesize(const MotionProfile& profile, const SystemModel& model,
                           std::size_t length, double update_rate,
                           const StateVector& initial_state, std::uint64_t seed,
                           MotionMode mode = MotionMode::planar);

/// `per_class` objects for every class in `hyper_list`. Object ids are
/// consecutive across the population and object i uses seed + i, so the
/// result does not depend on evaluation order.
std::vector<SynthTrajectory> generate_population(const std::vector<ClassHyperParams>& hyper_list,
                                                 std::size_t per_class, const SystemModel& model,
                                                 std::size_t length, double update_rate,
                                                 std::uint64_t seed,
                                                 MotionMode mode = MotionMode::planar,
                                                 int first_object_id = 0);

/// CSV with columns k,x,y,z,vx,vy,vz,a_xy,a_z,a_theta,zx,zy,zz,obs_valid.
/// Row k carries the force applied from step k to k+1 and the reading of
/// state k; cells that do not exist are left empty.
void write_trajectory_csv(std::ostream& out, const SynthTrajectory& traj);

}  // namespace mobprof
