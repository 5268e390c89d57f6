#include "mobprof/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mobprof/classifier.hpp"

namespace mobprof {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double log_add(double a, double b) {
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Params {
    double prob;
    double mean;
    double var;
};

// EM for the fixed-spike mixture. With a prior, every step maximizes the
// log-likelihood plus the log hyper-prior density of (lambda, mu, tau) instead
// of the likelihood alone.
class ChannelEm {
public:
    ChannelEm(std::span<const double> x, std::span<const double> noise, bool homoscedastic,
              const ChannelHyper* prior)
        : x_(x), noise_(noise), homoscedastic_(homoscedastic), prior_(prior), resp_(x.size(), 0.0),
          spike_(x.size()) {
        for (std::size_t k = 0; k < x.size(); ++k) spike_[k] = log_normal(x[k], 0.0, noise[k]);
    }

    // E-step: fills responsibilities, returns the data log-likelihood.
    double expect(const Params& p) {
        const double log_on = p.prob > 0.0 ? std::log(p.prob) : -INFINITY;
        const double log_off = p.prob < 1.0 ? std::log1p(-p.prob) : -INFINITY;
        double ll = 0.0;
        for (std::size_t k = 0; k < x_.size(); ++k) {
            const double off = log_off + spike_[k];
            const double on = log_on + log_normal(x_[k], p.mean, p.var + noise_[k]);
            const double total = log_add(off, on);
            resp_[k] = on == -INFINITY ? 0.0 : std::exp(on - total);
            ll += total;
        }
        return ll;
    }

    double log_prior(const Params& p) const {
        if (!prior_) return 0.0;
        const ChannelHyper& h = *prior_;
        const double prob = std::clamp(p.prob, kProbClamp, 1.0 - kProbClamp);
        return log_beta_pdf(prob, h.beta_a, h.beta_b) +
               log_gamma_pdf(1.0 / p.var, h.gamma_alpha, h.gamma_beta) +
               log_normal_pdf(p.mean, h.normal_mean, p.var / h.shrinkage);
    }

    // M-step given current responsibilities. Returns false when the slab has
    // lost all mass (maximum-likelihood mode only).
    bool maximize(Params& p) const {
        const double mass = std::accumulate(resp_.begin(), resp_.end(), 0.0);
        const double n = static_cast<double>(x_.size());
        if (prior_) {
            const double a = prior_->beta_a;
            const double b = prior_->beta_b;
            p.prob = std::clamp((mass + a - 1.0) / (n + a + b - 2.0), kProbClamp, 1.0 - kProbClamp);
        } else {
            p.prob = mass / n;
            if (mass < 1e-12) return false;
        }
        if (homoscedastic_ && !prior_) {
            double mean = 0.0;
            for (std::size_t k = 0; k < x_.size(); ++k) mean += resp_[k] * x_[k];
            mean /= mass;
            double spread = 0.0;
            for (std::size_t k = 0; k < x_.size(); ++k) {
                spread += resp_[k] * (x_[k] - mean) * (x_[k] - mean);
            }
            p.mean = mean;
            p.var = std::max(spread / mass - noise_[0], kVarianceFloor);
            return true;
        }
        // One round of coordinate ascent on the expected slab objective; each
        // move is accepted only if it does not lower it.
        double best = slab_objective(p.mean, p.var);
        const double mean = best_mean(p.var);
        const double at_mean = slab_objective(mean, p.var);
        if (at_mean >= best) {
            p.mean = mean;
            best = at_mean;
        }
        const double var = best_variance(p.mean, p.var);
        if (slab_objective(p.mean, var) >= best) p.var = var;
        return true;
    }

private:
    double best_mean(double var) const {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < x_.size(); ++k) {
            const double w = resp_[k] / (var + noise_[k]);
            num += w * x_[k];
            den += w;
        }
        if (prior_) {
            const double w = prior_->shrinkage / var;
            num += w * prior_->normal_mean;
            den += w;
        }
        return den > 0.0 ? num / den : 0.0;
    }

    // Expected complete-data log density of the slab plus the prior terms
    // that involve (mu, sigma^2).
    double slab_objective(double mean, double var) const {
        double q = 0.0;
        for (std::size_t k = 0; k < x_.size(); ++k) {
            if (resp_[k] > 0.0) q += resp_[k] * log_normal(x_[k], mean, var + noise_[k]);
        }
        if (prior_) {
            q += log_gamma_pdf(1.0 / var, prior_->gamma_alpha, prior_->gamma_beta) +
                 log_normal_pdf(mean, prior_->normal_mean, var / prior_->shrinkage);
        }
        return q;
    }

    // Value, slope and curvature of the slab objective in u = log sigma^2.
    void derivatives(double mean, double u, double& value, double& slope, double& curve) const {
        const double e = std::exp(u);
        value = 0.0;
        slope = 0.0;
        curve = 0.0;
        for (std::size_t k = 0; k < x_.size(); ++k) {
            const double g = resp_[k];
            if (g <= 0.0) continue;
            const double s = e + noise_[k];
            const double p = e / s;
            const double d2 = (x_[k] - mean) * (x_[k] - mean);
            value += g * (-0.5 * std::log(s) - 0.5 * d2 / s);
            slope += g * (-0.5 * p + 0.5 * d2 * e / (s * s));
            curve += g * (-0.5 * p * (1.0 - p) + 0.5 * d2 * e / (s * s) * (1.0 - 2.0 * p));
        }
        if (prior_) {
            // Gamma on tau = exp(-u) and Normal(mu; mu_c, sigma^2 / n_c), up to
            // constants: -(alpha - 1/2) u - B exp(-u).
            const double dm = mean - prior_->normal_mean;
            const double B = prior_->gamma_beta + 0.5 * prior_->shrinkage * dm * dm;
            const double c = prior_->gamma_alpha - 0.5;
            const double inv = std::exp(-u);
            value += -c * u - B * inv;
            slope += -c + B * inv;
            curve += -B * inv;
        }
    }

    // Safeguarded Newton ascent over log-variance, bounded below by the floor.
    double best_variance(double mean, double start) const {
        const double lo = std::log(kVarianceFloor);
        double u = std::max(std::log(start), lo);
        double value = 0.0;
        double slope = 0.0;
        double curve = 0.0;
        derivatives(mean, u, value, slope, curve);
        for (int it = 0; it < 60; ++it) {
            double step = curve < 0.0 ? -slope / curve : (slope > 0.0 ? 1.0 : -1.0);
            step = std::clamp(step, -3.0, 3.0);
            double next = std::max(u + step, lo);
            if (next == u) break;
            double v2 = 0.0;
            double s2 = 0.0;
            double c2 = 0.0;
            bool moved = false;
            for (int half = 0; half < 40; ++half) {
                derivatives(mean, next, v2, s2, c2);
                if (v2 >= value) {
                    moved = true;
                    break;
                }
                next = u + 0.5 * (next - u);
            }
            if (!moved) break;
            const double change = std::abs(next - u);
            u = next;
            value = v2;
            slope = s2;
            curve = c2;
            if (change < 1e-10) break;
        }
        return std::max(std::exp(u), kVarianceFloor);
    }

    std::span<const double> x_;
    std::span<const double> noise_;
    bool homoscedastic_;
    const ChannelHyper* prior_;
    std::vector<double> resp_;
    std::vector<double> spike_;
};

void check_samples(std::span<const double> x, std::span<const double> noise) {
    if (x.size() < kMinFitSamples) {
        throw InsufficientDataError("fit_channel: " + std::to_string(x.size()) +
                                    " samples, need at least " + std::to_string(kMinFitSamples));
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k]) || !(noise[k] > 0.0) || !std::isfinite(noise[k])) {
            throw std::invalid_argument("fit_channel: samples must be finite, noise positive");
        }
    }
}

// Moment-based start from the samples that stand out of the noise. Returns
// nullopt when every sample is exactly zero.
std::optional<Params> moment_start(std::span<const double> x, std::span<const double> noise) {
    std::size_t outliers = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    double outlier_noise = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (std::abs(x[k]) > 2.0 * std::sqrt(noise[k])) {
            ++outliers;
            sum += x[k];
            sum_sq += x[k] * x[k];
            outlier_noise += noise[k];
        }
    }
    Params p{};
    if (outliers == 0) {
        const auto peak = std::max_element(x.begin(), x.end(),
                                           [](double a, double b) { return std::abs(a) < std::abs(b); });
        if (*peak == 0.0) return std::nullopt;
        p = {1.0 / static_cast<double>(x.size()), *peak, kVarianceFloor};
    } else {
        const double n = static_cast<double>(outliers);
        const double mean = sum / n;
        p.prob = n / static_cast<double>(x.size());
        p.mean = mean;
        p.var = std::max(sum_sq / n - mean * mean - outlier_noise / n, kVarianceFloor);
    }
    p.prob = std::min(p.prob, 1.0 - 1e-6);
    return p;
}

MixtureFit iterate(std::span<const double> x, std::span<const double> noise, bool homoscedastic,
                   const ChannelHyper* prior, Params p, const EmOptions& options) {
    MixtureFit fit;
    fit.noise_var = std::accumulate(noise.begin(), noise.end(), 0.0) / static_cast<double>(x.size());
    ChannelEm em(x, noise, homoscedastic, prior);
    double ll = em.expect(p);
    double objective = ll + em.log_prior(p);
    fit.log_likelihood_trace.push_back(objective);
    for (int it = 1; it <= options.max_iterations; ++it) {
        fit.iterations = it;
        Params next = p;
        if (!em.maximize(next)) {
            p = Params{0.0, 0.0, kVarianceFloor};
            ll = em.expect(p);
            objective = ll;
            fit.log_likelihood_trace.push_back(objective);
            fit.converged = true;
            break;
        }
        const double next_ll = em.expect(next);
        const double next_objective = next_ll + em.log_prior(next);
        fit.log_likelihood_trace.push_back(next_objective);
        const double gain = next_objective - objective;
        p = next;
        ll = next_ll;
        objective = next_objective;
        if (gain < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (!std::isfinite(objective)) {
        throw NumericalError("fit_channel: non-finite log-likelihood", 0);
    }
    fit.pulse_prob = p.prob;
    fit.pulse_mean = p.mean;
    fit.pulse_var = std::max(p.var, kVarianceFloor);
    fit.log_likelihood = ll;
    fit.log_posterior = objective;
    return fit;
}

MixtureFit run_em(std::span<const double> x, std::span<const double> noise, bool homoscedastic,
                  const EmOptions& options) {
    check_samples(x, noise);
    const auto start = moment_start(x, noise);
    if (!start) {
        // Nothing but exact zeros: no pulses at all.
        MixtureFit fit;
        fit.noise_var = std::accumulate(noise.begin(), noise.end(), 0.0) / static_cast<double>(x.size());
        ChannelEm em(x, noise, homoscedastic, nullptr);
        fit.log_likelihood = em.expect(Params{0.0, 0.0, kVarianceFloor});
        fit.log_posterior = fit.log_likelihood;
        fit.log_likelihood_trace.push_back(fit.log_likelihood);
        fit.converged = true;
        return fit;
    }
    return iterate(x, noise, homoscedastic, nullptr, *start, options);
}

std::vector<double> channel_samples(const EstimatedTrajectory& traj, Channel c,
                                    const ProfilerOptions& options, std::vector<double>& noise) {
    std::vector<double> samples;
    noise.clear();
    for (std::size_t j = 0; j < traj.forces.size(); ++j) {
        if (!traj.force_valid[j]) continue;
        const DrivingForce& f = traj.forces[j];
        const ForceNoise& n = traj.force_noise[j];
        switch (c) {
            case Channel::xy:
                samples.push_back(f.a_xy);
                noise.push_back(n.a_xy);
                break;
            case Channel::z:
                samples.push_back(f.a_z);
                noise.push_back(n.a_z);
                break;
            case Channel::theta:
                samples.push_back(f.a_theta);
                noise.push_back(n.a_theta);
                break;
        }
    }
    const auto& fixed = options.noise_override[static_cast<std::size_t>(c)];
    if (fixed) std::fill(noise.begin(), noise.end(), *fixed);
    for (double& n : noise) n = std::max(n, kVarianceFloor);
    return samples;
}

}  // namespace

MixtureFit fit_channel(std::span<const double> samples, double noise_var, const EmOptions& options) {
    if (!(noise_var > 0.0)) throw std::invalid_argument("fit_channel: noise variance must be > 0");
    const std::vector<double> noise(samples.size(), noise_var);
    return run_em(samples, noise, true, options);
}

MixtureFit fit_channel(std::span<const double> samples, std::span<const double> noise_vars,
                       const EmOptions& options) {
    if (noise_vars.size() != samples.size()) {
        throw std::invalid_argument("fit_channel: one noise variance per sample required");
    }
    const bool uniform = std::all_of(noise_vars.begin(), noise_vars.end(),
                                     [&](double n) { return n == noise_vars.front(); });
    return run_em(samples, noise_vars, uniform, options);
}

MixtureFit fit_channel_map(std::span<const double> samples, std::span<const double> noise_vars,
                           const ChannelHyper& prior, const EmOptions& options) {
    if (noise_vars.size() != samples.size()) {
        throw std::invalid_argument("fit_channel_map: one noise variance per sample required");
    }
    if (!(prior.beta_a >= 1.0) || !(prior.beta_b >= 1.0) || !(prior.gamma_alpha > 0.5) ||
        !(prior.gamma_beta > 0.0) || !(prior.shrinkage > 0.0)) {
        throw std::invalid_argument(
            "fit_channel_map: prior needs beta shapes >= 1, gamma shape > 1/2, positive rate and "
            "shrinkage");
    }
    check_samples(samples, noise_vars);

    // Two starts: the prior mode and the data-driven moment guess. The
    // posterior can be bimodal when the pulses barely clear the noise.
    const double a = prior.beta_a;
    const double b = prior.beta_b;
    const double mode_prob =
        a + b > 2.0 ? std::clamp((a - 1.0) / (a + b - 2.0), kProbClamp, 1.0 - kProbClamp) : 0.5;
    const double mode_var = prior.gamma_beta / (prior.gamma_alpha - 0.5);
    std::vector<Params> starts{{mode_prob, prior.normal_mean, mode_var}};
    if (const auto guess = moment_start(samples, noise_vars)) {
        Params g = *guess;
        g.prob = std::clamp(g.prob, kProbClamp, 1.0 - kProbClamp);
        g.var = std::max(g.var, mode_var * 1e-3);
        starts.push_back(g);
    }
    MixtureFit best;
    best.log_posterior = -std::numeric_limits<double>::infinity();
    for (const Params& s : starts) {
        MixtureFit fit = iterate(samples, noise_vars, false, &prior, s, options);
        if (fit.log_posterior > best.log_posterior) best = std::move(fit);
    }
    return best;
}

MotionProfile extract_profile(const EstimatedTrajectory& traj, const ProfilerOptions& options) {
    MotionProfile profile;
    std::vector<double> noise;
    for (Channel c : active_channels(options.mode)) {
        const std::vector<double> samples = channel_samples(traj, c, options, noise);
        profile[c] = fit_channel(samples, noise, options.em).channel();
    }
    return profile;
}

ProfileEstimate extract_profile_map(const EstimatedTrajectory& traj,
                                    std::span<const ClassHyperParams> classes,
                                    const ProfilerOptions& options,
                                    std::optional<std::span<const double>> class_priors) {
    if (classes.empty()) throw std::invalid_argument("extract_profile_map: no classes given");
    if (class_priors && class_priors->size() != classes.size()) {
        throw std::invalid_argument("extract_profile_map: one prior per class required");
    }
    const std::vector<Channel> channels = active_channels(options.mode);
    std::vector<std::vector<double>> samples;
    std::vector<std::vector<double>> noises;
    for (Channel c : channels) {
        std::vector<double> noise;
        samples.push_back(channel_samples(traj, c, options, noise));
        noises.push_back(std::move(noise));
    }

    ProfileEstimate out;
    out.log_posterior = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const double weight = class_priors ? (*class_priors)[i]
                                           : 1.0 / static_cast<double>(classes.size());
        if (!(weight > 0.0)) continue;
        MotionProfile candidate;
        double score = std::log(weight);
        for (std::size_t j = 0; j < channels.size(); ++j) {
            const MixtureFit fit =
                fit_channel_map(samples[j], noises[j], classes[i][channels[j]], options.em);
            candidate[channels[j]] = fit.channel();
            score += fit.log_posterior;
        }
        out.class_scores.push_back(score);
        if (score > out.log_posterior) {
            out.log_posterior = score;
            out.profile = candidate;
            out.prior_class = classes[i].class_id;
        }
    }
    if (!std::isfinite(out.log_posterior)) {
        throw NumericalError("extract_profile_map: no class gives a finite posterior", 0);
    }
    return out;
}

}  // namespace mobprof
