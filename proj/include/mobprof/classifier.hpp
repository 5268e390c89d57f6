#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mobprof/profile.hpp"

namespace mobprof {

/// Clamp applied to pulse probabilities before the Beta density.
inline constexpr double kProbClamp = 1e-9;

double log_beta_pdf(double x, double a, double b);
/// Gamma density with shape/rate parameterization.
double log_gamma_pdf(double x, double shape, double rate);
double log_normal_pdf(double x, double mean, double var);

struct ClassPosterior {
    std::vector<double> probabilities;
    std::vector<double> log_likelihoods;
    std::vector<int> class_ids;
    int best_class = 0;
};

/// log P(profile | hyper): per active channel, Beta on lambda, Gamma on the
/// precision 1/sigma^2 and Normal(mu_c, sigma^2/n_c) on mu.
/// Throws NumericalError naming the channel when the result is not finite.
double profile_log_likelihood(const MotionProfile& profile, const ClassHyperParams& hyper,
                              MotionMode mode = MotionMode::planar);

/// Posterior over `registry` (equal priors unless given), normalized with
/// log-sum-exp. Ties go to the lowest class_id.
ClassPosterior classify(const MotionProfile& profile, std::span<const ClassHyperParams> registry,
                        std::optional<std::span<const double>> priors = std::nullopt,
                        MotionMode mode = MotionMode::planar);

/// Normalizes log-weights into probabilities; shift-invariant.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

}  // namespace mobprof
