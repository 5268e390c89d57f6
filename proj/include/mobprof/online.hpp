#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mobprof/classifier.hpp"
#include "mobprof/filter.hpp"
#include "mobprof/profile.hpp"
#include "mobprof/profiler.hpp"

namespace mobprof {

/// Observation window of one object for one segment.
struct ObjectWindow {
    int object_id = 0;
    std::vector<Observation> observations;
};

/// Segment s covers time [(s-1)T, sT]; every window holds exactly
/// `segment_length` readings.
struct SegmentBatch {
    std::size_t segment_index = 1;
    std::size_t segment_length = 0;
    std::vector<ObjectWindow> windows;

    void validate() const;
};

/// Running mean of an object's per-segment profiles.
struct RunningProfile {
    int object_id = 0;
    std::size_t segment_count = 0;
    MotionProfile mean_profile;
    MotionProfile last_segment_profile;
};

/// mean <- ((s-1) mean + segment) / s, component-wise; s is incremented.
/// Throws std::invalid_argument if the segment belongs to another object.
RunningProfile update_running_profile(const RunningProfile& prev, const MotionProfile& segment_profile);

/// Per-dimension z-score parameters for clustering features, plus a common
/// multiplier applied after standardizing. The multiplier sets the length
/// scale that the per-cluster penalty is measured against.
struct FeatureStandardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
    double feature_scale = 1.0;
};

/// Pulse variances below this value are not resolvable from a few hundred
/// force samples at the simulated noise levels; the log-variance feature is
/// clamped here so that estimates sitting on the numerical floor do not
/// dominate the feature scale.
inline constexpr double kFeatureVarianceFloor = 1e-2;

/// (lambda, mu, log max(sigma^2, kFeatureVarianceFloor)) for each active
/// channel, in channel order.
Eigen::VectorXd raw_features(const MotionProfile& profile, MotionMode mode);

/// Population mean and standard deviation of the raw features. Dimensions
/// with zero spread get scale 1.
FeatureStandardization fit_standardization(std::span<const MotionProfile> population,
                                           MotionMode mode, double feature_scale = 1.0);

Eigen::VectorXd profile_feature_vector(const MotionProfile& profile,
                                       const FeatureStandardization& standardization,
                                       MotionMode mode);

struct KMeansResult {
    std::vector<int> assignments;
    Eigen::MatrixXd centroids;  // one row per cluster
    double inertia = 0.0;       // unnormalized within-cluster sum of squares
    std::vector<double> inertia_trace;
};

/// Seeded k-means with k-means++ seeding; keeps the best of `restarts` runs.
/// `points` has one row per observation. Requires 1 <= k <= rows.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, int max_iterations,
                    std::uint64_t seed);

/// Sum of squared distances to the assigned centroids divided by
/// n_clusters times the total membership.
double within_variance(const Eigen::MatrixXd& points, std::span<const int> assignments,
                       const Eigen::MatrixXd& centroids);

/// alpha * within + (1 - alpha) * beta * n_clusters.
double penalized_objective(double within, int n_clusters, double alpha, double beta);

struct ClusterOptions {
    int delta = 3;
    double alpha = 0.2;
    double beta = 10.0;
    int restarts = 20;
    int max_iterations = 100;
};

struct ClusteringResult {
    std::vector<int> assignments;
    Eigen::MatrixXd centroids;
    double within_variance = 0.0;
    double objective = 0.0;
    int n_clusters = 0;
    /// (n_clusters, objective) for every candidate that was evaluated.
    std::vector<std::pair<int, double>> candidates;
};

/// Tries every cluster count in [prev_count - delta, prev_count + delta]
/// (clamped to [1, rows]) and returns the one with the smallest penalized
/// objective; ties keep the smaller count.
ClusteringResult penalized_cluster(const Eigen::MatrixXd& features, int prev_count,
                                   const ClusterOptions& options, std::uint64_t seed);

struct RegisteredClass {
    int class_id = 0;
    ClassHyperParams hyper;
    std::vector<int> members;
    /// Mean raw feature vector of the members.
    Eigen::VectorXd centroid;
};

struct ClassRegistry {
    std::vector<RegisteredClass> classes;
    int next_class_id = 1;
    FeatureStandardization standardization;
    std::map<int, RunningProfile> profiles;

    int current_count() const { return static_cast<int>(classes.size()); }
    std::vector<ClassHyperParams> hyper_list() const;
    /// Class holding the object, or nullopt.
    std::optional<int> class_of(int object_id) const;
};

/// Beta/Gamma/Normal hyper-parameters of one channel by the method of moments.
/// Zero spread in lambda falls back to (lambda k, (1 - lambda) k) with k = 100;
/// zero spread in tau to (k, k / mean tau).
ChannelHyper moment_fit(std::span<const ChannelProfile> members);

/// Moment fit for all active channels; inactive channels copy `fallback`.
ClassHyperParams refit_hyper(std::span<const MotionProfile> members, MotionMode mode,
                             const ClassHyperParams& fallback);

/// Matches clusters to registry classes by greedy nearest centroid in the
/// current feature space, creates classes for unmatched clusters, retires
/// classes left without a cluster and refits hyper-parameters of classes with
/// at least 3 members. `object_ids[i]` names row i of the clustered features;
/// profiles come from `registry.profiles`.
ClassRegistry match_and_refine(const ClusteringResult& result, std::span<const int> object_ids,
                               const ClassRegistry& registry, MotionMode mode);

struct OnlineConfig {
    SystemModel model = build_system(1.0, 1.0, 1.0);
    ProfilerOptions profiler{};
    ClusterOptions cluster{};
    /// Cluster count assumed before the first clustering (C^(1)).
    int initial_count = 4;
    /// Multiplier on the standardized features; it sets how far apart profiles
    /// must be before a cluster pays its penalty beta.
    double feature_scale = 12.0;
    /// When false the standardization is fitted once, when the registry is
    /// first built, and kept afterwards so that class centroids and the
    /// penalty keep a fixed meaning across segments. When true it is refitted
    /// on every tracked profile at every segment.
    bool refit_standardization = false;
    std::uint64_t seed = 0;
    unsigned workers = 0;
};

struct IngestError {
    int object_id = 0;
    std::string message;
};

struct ObjectDecision {
    int object_id = 0;
    ClassPosterior posterior;
};

struct IngestResult {
    ClassRegistry registry;
    std::vector<ObjectDecision> decisions;
    std::vector<IngestError> errors;
    std::optional<ClusteringResult> clustering;
};

/// Profiles every window (filter, then EM), folds the result into the running
/// profiles, classifies against the incoming registry and re-clusters all
/// tracked objects. Failures of single objects are reported, not thrown.
IngestResult ingest_segment(const SegmentBatch& batch, const ClassRegistry& registry,
                            const OnlineConfig& config);

/// JSON document with the classes (class_id, member ids, member_count,
/// per-channel hyper-parameters, centroid), the next class id and the
/// standardization. Running profiles are not stored.
std::string registry_to_json(const ClassRegistry& registry);
ClassRegistry registry_from_json(const std::string& text);

}  // namespace mobprof
