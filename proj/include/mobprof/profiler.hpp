#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mobprof/filter.hpp"
#include "mobprof/profile.hpp"

namespace mobprof {

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMinFitSamples = 10;

/// Result of fitting (1 - lambda) N(0, n) + lambda N(mu, sigma^2 + n) to a
/// channel of force estimates, where n is the (known) estimation-noise
/// variance.
struct MixtureFit {
    double pulse_prob = 0.0;
    double pulse_mean = 0.0;
    double pulse_var = kVarianceFloor;
    /// Mean estimation-noise variance over the samples.
    double noise_var = 0.0;
    double log_likelihood = 0.0;
    /// Log-likelihood plus the log hyper-prior density (equal to
    /// log_likelihood for maximum-likelihood fits).
    double log_posterior = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Objective (log_posterior) after every completed iteration, starting
    /// with the initial guess.
    std::vector<double> log_likelihood_trace;

    ChannelProfile channel() const { return {pulse_prob, pulse_mean, pulse_var}; }
};

struct EmOptions {
    double tolerance = 1e-8;
    int max_iterations = 500;
};

/// EM fit with a fixed zero-mean noise component of variance `noise_var`.
MixtureFit fit_channel(std::span<const double> samples, double noise_var,
                       const EmOptions& options = {});

/// Same model with a per-sample noise variance.
MixtureFit fit_channel(std::span<const double> samples, std::span<const double> noise_vars,
                       const EmOptions& options = {});

/// Posterior-mode fit: maximizes the mixture log-likelihood plus the log
/// density of (lambda, mu, tau = 1/sigma^2) under one channel's hyper-prior.
/// The prior keeps sigma^2 away from the floor when only a handful of pulses
/// are present. Requires beta shapes >= 1 and gamma shape > 1/2.
MixtureFit fit_channel_map(std::span<const double> samples, std::span<const double> noise_vars,
                           const ChannelHyper& prior, const EmOptions& options = {});

struct ProfilerOptions {
    MotionMode mode = MotionMode::planar;
    /// Fixed noise variance per channel (xy, z, theta). When unset, each
    /// sample uses the variance propagated from the filter covariance.
    std::array<std::optional<double>, 3> noise_override{};
    EmOptions em{};
};

/// Fits every active channel of a filtered trajectory; only force samples
/// whose end state was corrected by a reading are used. Disabled channels are
/// set to (0, 0, floor).
MotionProfile extract_profile(const EstimatedTrajectory& traj, const ProfilerOptions& options = {});

struct ProfileEstimate {
    MotionProfile profile;
    /// Class whose hyper-prior produced the winning posterior mode.
    int prior_class = 0;
    double log_posterior = 0.0;
    /// Best objective reached under each class prior, in registry order.
    std::vector<double> class_scores;
};

/// Posterior mode of the profile under the class-mixture prior
/// P(theta) = sum_c P(c) P(theta | psi_c). Each class prior is maximized on
/// its own (all channels together) and the class with the largest
/// log P(c) + objective supplies the estimate.
ProfileEstimate extract_profile_map(const EstimatedTrajectory& traj,
                                    std::span<const ClassHyperParams> classes,
                                    const ProfilerOptions& options = {},
                                    std::optional<std::span<const double>> class_priors = std::nullopt);

}  // namespace mobprof
