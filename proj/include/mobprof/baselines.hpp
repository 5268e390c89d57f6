#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mobprof/filter.hpp"
#include "mobprof/profile.hpp"

namespace mobprof {

/// Outcome of a direct clustering baseline after the oracle relabelling.
struct BaselineResult {
    std::string method;
    std::vector<int> predicted;
    double csr = 0.0;
};

/// One row per object: mean and standard deviation of every active force
/// channel over the valid samples (xy mean, xy std, theta mean, theta std, ...).
Eigen::MatrixXd force_summaries(std::span<const EstimatedTrajectory> trajectories, MotionMode mode);

/// Maps cluster labels to class labels so that the number of agreements with
/// `truth` is maximal. Distinct clusters get distinct classes while there are
/// enough classes; surplus clusters take their majority class.
std::vector<int> oracle_relabel(std::span<const int> clusters, std::span<const int> truth);

struct FcmResult {
    Eigen::MatrixXd memberships;  // objects x clusters, rows sum to 1
    Eigen::MatrixXd centroids;
    std::vector<double> objective_trace;
};

/// Fuzzy c-means with fuzzifier m > 1, seeded random memberships, best of
/// `restarts` runs by final objective.
FcmResult fuzzy_cmeans(const Eigen::MatrixXd& points, int k, double m, std::uint64_t seed,
                       int restarts = 10, int max_iterations = 300, double tolerance = 1e-9);

/// What the direct baselines cluster, one row per object.
enum class BaselineInput {
    summary,               // force_summaries in their own units
    standardized_summary,  // force_summaries with every column z-scored
    sequence,              // force_sequences
};

/// Raw valid forces of every active channel, channel after channel, in time
/// order. Missing samples are zero. All trajectories must carry the same
/// number of forces.
Eigen::MatrixXd force_sequences(std::span<const EstimatedTrajectory> trajectories, MotionMode mode);

/// K-means with k = n_classes on the chosen representation.
BaselineResult kmeans_direct(std::span<const EstimatedTrajectory> trajectories, std::span<const int> truth,
                             int n_classes, std::uint64_t seed, MotionMode mode = MotionMode::planar,
                             BaselineInput input = BaselineInput::sequence);

/// Fuzzy c-means on the same representation, hard assignment by largest
/// membership.
BaselineResult fcm_direct(std::span<const EstimatedTrajectory> trajectories, std::span<const int> truth,
                          int n_classes, double m, std::uint64_t seed, MotionMode mode = MotionMode::planar,
                          BaselineInput input = BaselineInput::sequence);

}  // namespace mobprof
