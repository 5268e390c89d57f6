#include "mobprof/trajgen.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "mobprof/format.hpp"
#include "mobprof/random.hpp"

namespace mobprof {

namespace {

enum Stream : std::uint64_t { kProfile = 0, kForces = 1, kProcess = 2, kMeasure = 3, kGate = 4 };

// Matrix square root of a symmetric PSD covariance.
template <int N>
Eigen::Matrix<double, N, N> covariance_root(const Eigen::Matrix<double, N, N>& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> eig(cov);
    const auto values = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * values.asDiagonal();
}

template <int N>
Eigen::Matrix<double, N, 1> draw_gaussian(Rng& rng, const Eigen::Matrix<double, N, N>& root) {
    Eigen::Matrix<double, N, 1> u;
    for (int i = 0; i < N; ++i) u(i) = draw_normal(rng, 0.0, 1.0);
    return root * u;
}

}  // namespace

StateVector default_initial_state() {
    return StateVector{Vec3::Zero(), Vec3{10.0, 0.0, 0.0}, 0};
}

MotionProfile sample_profile(const ClassHyperParams& hyper, std::uint64_t seed, MotionMode mode) {
    hyper.validate();
    Rng rng = make_rng(seed, kProfile);
    MotionProfile profile;
    for (Channel c : kAllChannels) {
        const ChannelHyper& h = hyper[c];
        ChannelProfile p;
        p.pulse_prob = draw_beta(rng, h.beta_a, h.beta_b);
        const double tau = draw_gamma(rng, h.gamma_alpha, h.gamma_beta);
        p.pulse_var = std::max(1.0 / tau, kVarianceFloor);
        p.pulse_mean = draw_normal(rng, h.normal_mean, std::sqrt(p.pulse_var / h.shrinkage));
        profile[c] = p;
    }
    if (mode == MotionMode::planar) profile[Channel::z] = ChannelProfile{};
    return profile;
}

std::vector<DrivingForce> sample_driving_forces(const MotionProfile& profile, std::size_t length,
                                                std::uint64_t seed) {
    if (length == 0) throw std::invalid_argument("sample_driving_forces: length must be >= 1");
    profile.validate();
    Rng rng = make_rng(seed, kForces);
    auto draw = [&rng](const ChannelProfile& p) {
        const bool pulse = draw_uniform(rng) < p.pulse_prob;
        const double amplitude = draw_normal(rng, p.pulse_mean, std::sqrt(p.pulse_var));
        return pulse ? amplitude : 0.0;
    };
    std::vector<DrivingForce> forces(length);
    for (DrivingForce& f : forces) {
        f.a_xy = draw(profile[Channel::xy]);
        f.a_z = draw(profile[Channel::z]);
        f.a_theta = draw(profile[Channel::theta]);
    }
    return forces;
}

SynthTrajectory synthesize(const MotionProfile& profile, const SystemModel& model,
                           std::size_t length, double update_rate,
                           const StateVector& initial_state, std::uint64_t seed, MotionMode mode) {
    if (!(update_rate >= 0.0 && update_rate <= 1.0)) {
        throw std::invalid_argument("synthesize: update rate must lie in [0,1]");
    }
    SynthTrajectory traj;
    traj.profile = profile;
    traj.inputs = sample_driving_forces(profile, length, seed);

    Rng process_rng = make_rng(seed, kProcess);
    Rng measure_rng = make_rng(seed, kMeasure);
    Rng gate_rng = make_rng(seed, kGate);
    const Mat6 process_root = covariance_root<6>(model.R);
    const Mat3 measure_root = covariance_root<3>(model.Q);

    traj.states.reserve(length + 1);
    traj.observations.reserve(length);
    traj.states.push_back(initial_state);
    double heading = heading_of(initial_state.velocity, 0.0);
    for (std::size_t k = 0; k < length; ++k) {
        const StateVector& current = traj.states.back();
        Vec6 w = draw_gaussian<6>(process_rng, process_root);
        if (mode == MotionMode::planar) {
            w(2) = 0.0;
            w(5) = 0.0;
        }
        StateVector next = apply_dynamics(current, traj.inputs[k], model, w, heading);
        heading = heading_of(next.velocity, heading);

        Observation obs;
        obs.timestep_index = next.timestep_index;
        obs.position_reading = model.H * next.stacked() + draw_gaussian<3>(measure_rng, measure_root);
        obs.valid = draw_uniform(gate_rng) < update_rate;
        traj.observations.push_back(obs);
        traj.states.push_back(next);
    }
    return traj;
}

std::vector<SynthTrajectory> generate_population(const std::vector<ClassHyperParams>& hyper_list,
                                                 std::size_t per_class, const SystemModel& model,
                                                 std::size_t length, double update_rate,
                                                 std::uint64_t seed, MotionMode mode,
                                                 int first_object_id) {
    if (per_class == 0) throw std::invalid_argument("generate_population: per_class must be >= 1");
    std::vector<SynthTrajectory> out;
    out.reserve(hyper_list.size() * per_class);
    int object_id = first_object_id;
    for (const ClassHyperParams& hyper : hyper_list) {
        for (std::size_t j = 0; j < per_class; ++j, ++object_id) {
            const std::uint64_t object_seed = seed + static_cast<std::uint64_t>(object_id);
            MotionProfile profile = sample_profile(hyper, object_seed, mode);
            profile.object_id = object_id;
            SynthTrajectory traj = synthesize(profile, model, length, update_rate,
                                              default_initial_state(), object_seed, mode);
            traj.true_class = hyper.class_id;
            out.push_back(std::move(traj));
        }
    }
    return out;
}

void write_trajectory_csv(std::ostream& out, const SynthTrajectory& traj) {
    out << "k,x,y,z,vx,vy,vz,a_xy,a_z,a_theta,zx,zy,zz,obs_valid\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const StateVector& s = traj.states[k];
        out << s.timestep_index;
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.position(i));
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.velocity(i));
        if (k < traj.inputs.size()) {
            const DrivingForce& f = traj.inputs[k];
            out << ',' << format_double(f.a_xy) << ',' << format_double(f.a_z) << ','
                << format_double(f.a_theta);
        } else {
            out << ",,,";
        }
        const Observation* obs = k >= 1 ? &traj.observations[k - 1] : nullptr;
        if (obs != nullptr && obs->valid) {
            for (int i = 0; i < 3; ++i) out << ',' << format_double(obs->position_reading(i));
            out << ",1\n";
        } else {
            out << ",,,," << (obs == nullptr ? "" : "0") << '\n';
        }
    }
}

}  // namespace mobprof
