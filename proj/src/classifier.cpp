#include "mobprof/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mobprof/model.hpp"

namespace mobprof {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

double log_beta_pdf(double x, double a, double b) {
    const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    return log_norm + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

double log_gamma_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double profile_log_likelihood(const MotionProfile& profile, const ClassHyperParams& hyper,
                              MotionMode mode) {
    double total = 0.0;
    for (Channel c : active_channels(mode)) {
        const ChannelProfile& p = profile[c];
        const ChannelHyper& h = hyper[c];
        const double prob = std::clamp(p.pulse_prob, kProbClamp, 1.0 - kProbClamp);
        const double var = std::max(p.pulse_var, kVarianceFloor);
        const double term = log_beta_pdf(prob, h.beta_a, h.beta_b) +
                            log_gamma_pdf(1.0 / var, h.gamma_alpha, h.gamma_beta) +
                            log_normal_pdf(p.pulse_mean, h.normal_mean, var / h.shrinkage);
        if (!std::isfinite(term)) {
            throw NumericalError("profile_log_likelihood: non-finite density on channel " +
                                     std::string(channel_name(c)),
                                 0);
        }
        total += term;
    }
    return total;
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
    const double top = *std::max_element(log_weights.begin(), log_weights.end());
    std::vector<double> out(log_weights.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(log_weights[i] - top);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

ClassPosterior classify(const MotionProfile& profile, std::span<const ClassHyperParams> registry,
                        std::optional<std::span<const double>> priors, MotionMode mode) {
    if (registry.empty()) throw std::invalid_argument("classify: empty class registry");
    if (priors && priors->size() != registry.size()) {
        throw std::invalid_argument("classify: one prior per class required");
    }
    ClassPosterior post;
    std::vector<double> log_post;
    for (std::size_t i = 0; i < registry.size(); ++i) {
        const double ll = profile_log_likelihood(profile, registry[i], mode);
        post.log_likelihoods.push_back(ll);
        post.class_ids.push_back(registry[i].class_id);
        const double prior = priors ? (*priors)[i] : 1.0 / static_cast<double>(registry.size());
        if (!(prior >= 0.0)) throw std::invalid_argument("classify: negative prior");
        log_post.push_back(ll + std::log(prior));
    }
    post.probabilities = normalize_log_weights(log_post);
    std::size_t best = 0;
    for (std::size_t i = 1; i < registry.size(); ++i) {
        const double pi = post.probabilities[i];
        const double pb = post.probabilities[best];
        if (pi > pb || (pi == pb && post.class_ids[i] < post.class_ids[best])) best = i;
    }
    post.best_class = post.class_ids[best];
    return post;
}

}  // namespace mobprof
