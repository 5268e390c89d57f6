#include "mobprof/filter.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "mobprof/format.hpp"

namespace mobprof {

namespace {

Mat6 symmetrize(const Mat6& m) { return 0.5 * (m + m.transpose()); }

struct Gain {
    Mat63 state_gain;  // L = F M
    Mat3 input_gain;   // M
};

// Minimum-variance input gain for the shifted output y = (H A) x + noise.
// M = (G^T S^-1 G)^-1 G^T S^-1 with G = (H A) F. When G is square and
// invertible this is G^-1 for every S, so S never has to be inverted and the
// state correction leaves no residual innovation for a separate gain.
Gain input_gain(const SystemModel& model, std::size_t timestep) {
    const Mat36 output = model.H * model.A;
    const Mat3 input_map = output * model.F;
    Eigen::FullPivLU<Mat3> lu(input_map);
    const double scale = std::max(input_map.cwiseAbs().maxCoeff(), 1.0);
    lu.setThreshold(1e-12 * scale);
    if (!lu.isInvertible()) {
        throw NumericalError("filter: input-to-output map (H A F) is singular", timestep);
    }
    Gain g;
    g.input_gain = lu.inverse();
    g.state_gain = model.F * g.input_gain;
    return g;
}

// Covariance of the error in v_hat(k+1) - v_hat(k) relative to the true
// driving increment, given the transition's covariances.
Mat3 increment_error(const FilterState& prior, const Mat6& transfer, const Mat6& posterior,
                     const SystemModel& model) {
    const Mat6& X = prior.noise_cross;
    const Mat6 lag = transfer * (model.A * prior.error_covariance + X.transpose());  // cov(e1, e0)
    const Mat6 with_noise = transfer * (model.A * X + model.R);                      // cov(e1, w0)
    const Mat6 total = model.R + posterior + prior.error_covariance - with_noise -
                       with_noise.transpose() + X + X.transpose() - lag - lag.transpose();
    return 0.5 * (total.bottomRightCorner<3, 3>() + total.bottomRightCorner<3, 3>().transpose());
}

FilterState correct(const Vec6& predicted, const Mat6& predicted_cov, const Observation& reading,
                    const SystemModel& model, std::size_t timestep) {
    const Gain gain = input_gain(model, timestep);
    const Mat36 output = model.H * model.A;
    const Vec3 innovation = reading.position_reading - output * predicted;
    const Mat3 output_noise = model.H * model.R * model.H.transpose() + model.Q;
    const Mat6 transfer = Mat6::Identity() - gain.state_gain * output;

    FilterState next;
    next.timestep_index = timestep;
    next.corrected = true;
    next.input_estimate = gain.input_gain * innovation;
    next.state_estimate = predicted + gain.state_gain * innovation;
    next.error_covariance =
        symmetrize(transfer * predicted_cov * transfer.transpose() +
                   gain.state_gain * output_noise * gain.state_gain.transpose());
    next.noise_cross = -gain.state_gain * model.H * model.R;
    return next;
}

}  // namespace

StateVector initial_guess_from(std::span<const Observation> observations) {
    if (observations.empty()) throw std::invalid_argument("initial_guess_from: no observations");
    StateVector guess;
    guess.timestep_index = observations.front().timestep_index;
    for (const Observation& o : observations) {
        if (o.valid) {
            guess.position = o.position_reading;
            break;
        }
    }
    return guess;
}

FilterState filter_initialize(const StateVector& guess, const Observation& next_reading,
                              const SystemModel& model, double initial_variance) {
    const Mat6 prior_cov = initial_variance * Mat6::Identity();
    if (!next_reading.valid) {
        FilterState s;
        s.state_estimate = guess.stacked();
        s.error_covariance = prior_cov;
        s.timestep_index = guess.timestep_index;
        return s;
    }
    FilterState s = correct(guess.stacked(), prior_cov, next_reading, model, guess.timestep_index);
    // The first correction only fixes the guessed velocity; it is not a force.
    s.input_estimate.setZero();
    return s;
}

FilterState filter_step(const FilterState& prior, const Observation& reading,
                        const SystemModel& model) {
    const std::size_t k = prior.timestep_index + 1;
    if (reading.timestep_index != k + 1) {
        throw std::invalid_argument("filter_step: reading must be two steps ahead of the prior");
    }
    const Vec6 predicted = model.A * prior.state_estimate;
    const Mat6 AX = model.A * prior.noise_cross;
    const Mat6 predicted_cov =
        symmetrize(model.A * prior.error_covariance * model.A.transpose() + model.R + AX +
                   AX.transpose());

    FilterState next;
    Mat6 transfer = Mat6::Identity();
    if (reading.valid) {
        next = correct(predicted, predicted_cov, reading, model, k);
        const Mat36 output = model.H * model.A;
        transfer -= model.F * input_gain(model, k).input_gain * output;
    } else {
        next.state_estimate = predicted;
        next.error_covariance = predicted_cov;
        next.timestep_index = k;
        next.corrected = false;
    }
    next.increment_error_covariance = increment_error(prior, transfer, next.error_covariance, model);
    return next;
}

EstimatedTrajectory filter_trajectory(std::span<const Observation> observations,
                                      const SystemModel& model, const StateVector& initial_guess) {
    if (observations.size() < 3) {
        throw std::invalid_argument("filter_trajectory: at least 3 observations required");
    }
    for (std::size_t i = 1; i < observations.size(); ++i) {
        if (observations[i].timestep_index != observations[i - 1].timestep_index + 1) {
            throw std::invalid_argument("filter_trajectory: observations must be consecutive");
        }
    }
    EstimatedTrajectory est;
    const std::size_t n_states = observations.size() - 1;
    est.filter_states.reserve(n_states);
    StateVector guess = initial_guess;
    guess.timestep_index = observations.front().timestep_index;
    est.filter_states.push_back(filter_initialize(guess, observations[1], model));
    for (std::size_t j = 1; j < n_states; ++j) {
        est.filter_states.push_back(filter_step(est.filter_states.back(), observations[j + 1], model));
    }

    est.states.reserve(n_states);
    est.covariance_trace.reserve(n_states);
    for (const FilterState& s : est.filter_states) {
        est.states.push_back(s.state());
        est.covariance_trace.push_back(s.error_covariance.trace());
    }

    const double dt = model.dt;
    std::vector<double> headings(n_states);
    double carry = 0.0;
    for (std::size_t j = 0; j < n_states; ++j) {
        carry = heading_of(est.states[j].velocity, carry);
        headings[j] = carry;
    }
    for (std::size_t j = 1; j + 1 < n_states; ++j) {
        const Vec3& v0 = est.states[j].velocity;
        const Vec3& v1 = est.states[j + 1].velocity;
        const double s0 = std::hypot(v0.x(), v0.y());
        const double s1 = std::hypot(v1.x(), v1.y());
        DrivingForce f;
        f.a_xy = (s1 - s0) / dt;
        f.a_z = (v1.z() - v0.z()) / dt;
        f.a_theta = wrap_angle(headings[j + 1] - headings[j]) / dt;
        est.forces.push_back(f);
        est.force_valid.push_back(est.filter_states[j + 1].corrected);

        const Mat3& D = est.filter_states[j + 1].increment_error_covariance;
        const double mean_heading = headings[j] + 0.5 * wrap_angle(headings[j + 1] - headings[j]);
        const Eigen::Vector2d along{std::cos(mean_heading), std::sin(mean_heading)};
        const Eigen::Vector2d across{-along.y(), along.x()};
        const Eigen::Matrix2d Dxy = D.topLeftCorner<2, 2>();
        const double speed = std::max(0.5 * (s0 + s1), kHeadingEpsilon);
        ForceNoise noise;
        noise.a_xy = along.dot(Dxy * along) / (dt * dt);
        noise.a_z = D(2, 2) / (dt * dt);
        noise.a_theta = across.dot(Dxy * across) / (speed * speed * dt * dt);
        est.force_noise.push_back(noise);
    }
    return est;
}

std::vector<StateVector> predict_ahead(const FilterState& current, const SystemModel& model,
                                       std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("predict_ahead: horizon must be >= 1");
    std::vector<StateVector> out;
    out.reserve(horizon);
    Vec6 x = current.state_estimate;
    for (std::size_t h = 1; h <= horizon; ++h) {
        x = model.A * x;
        out.push_back(StateVector::from_stacked(x, current.timestep_index + h));
    }
    return out;
}

void write_estimate_csv(std::ostream& out, const EstimatedTrajectory& est) {
    out << "k,x_hat,y_hat,z_hat,vx_hat,vy_hat,vz_hat,a_xy_hat,a_z_hat,a_theta_hat,force_valid,"
           "cov_trace\n";
    for (std::size_t j = 0; j < est.states.size(); ++j) {
        const StateVector& s = est.states[j];
        out << s.timestep_index;
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.position(i));
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.velocity(i));
        // Force rows align with the state they start from.
        if (j >= 1 && j - 1 < est.forces.size()) {
            const DrivingForce& f = est.forces[j - 1];
            out << ',' << format_double(f.a_xy) << ',' << format_double(f.a_z) << ','
                << format_double(f.a_theta) << ',' << (est.force_valid[j - 1] ? 1 : 0);
        } else {
            out << ",,,,";
        }
        out << ',' << format_double(est.covariance_trace[j]) << '\n';
    }
}

}  // namespace mobprof
