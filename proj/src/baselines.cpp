#include "mobprof/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "mobprof/online.hpp"
#include "mobprof/random.hpp"

namespace mobprof {

namespace {

Eigen::MatrixXd standardize_columns(Eigen::MatrixXd x) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mean).square().mean());
        x.col(j).array() -= mean;
        if (sd > 0.0) x.col(j) /= sd;
    }
    return x;
}

// Exhaustive search over injective cluster -> class maps.
void search(std::size_t cluster, const std::vector<std::vector<int>>& agree, std::vector<bool>& used,
            std::vector<int>& current, int score, int& best_score, std::vector<int>& best) {
    if (cluster == agree.size()) {
        if (score > best_score) {
            best_score = score;
            best = current;
        }
        return;
    }
    for (std::size_t c = 0; c < used.size(); ++c) {
        if (used[c]) continue;
        used[c] = true;
        current[cluster] = static_cast<int>(c);
        search(cluster + 1, agree, used, current, score + agree[cluster][c], best_score, best);
        used[c] = false;
    }
}

Eigen::MatrixXd baseline_points(std::span<const EstimatedTrajectory> trajectories, MotionMode mode,
                                BaselineInput input) {
    switch (input) {
        case BaselineInput::summary:
            return force_summaries(trajectories, mode);
        case BaselineInput::standardized_summary:
            return standardize_columns(force_summaries(trajectories, mode));
        case BaselineInput::sequence:
            return force_sequences(trajectories, mode);
    }
    throw std::invalid_argument("unknown baseline input");
}

double csr_of(std::span<const int> predicted, std::span<const int> truth) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
    return truth.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
}

void check_inputs(std::span<const EstimatedTrajectory> trajectories, std::span<const int> truth, int n_classes) {
    if (trajectories.size() != truth.size() || trajectories.empty()) {
        throw std::invalid_argument("baseline: one truth label per trajectory required");
    }
    if (n_classes < 1 || static_cast<std::size_t>(n_classes) > trajectories.size()) {
        throw std::invalid_argument("baseline: n_classes must lie in [1, number of objects]");
    }
}

}  // namespace

Eigen::MatrixXd force_summaries(std::span<const EstimatedTrajectory> trajectories, MotionMode mode) {
    const std::vector<Channel> channels = active_channels(mode);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(trajectories.size()), static_cast<Eigen::Index>(2 * channels.size()));
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const EstimatedTrajectory& t = trajectories[i];
        for (std::size_t c = 0; c < channels.size(); ++c) {
            std::vector<double> v;
            for (std::size_t j = 0; j < t.forces.size(); ++j) {
                if (!t.force_valid[j]) continue;
                const DrivingForce& f = t.forces[j];
                v.push_back(channels[c] == Channel::xy ? f.a_xy : channels[c] == Channel::z ? f.a_z : f.a_theta);
            }
            double mean = 0.0;
            double sd = 0.0;
            if (!v.empty()) {
                for (double a : v) mean += a;
                mean /= static_cast<double>(v.size());
                for (double a : v) sd += (a - mean) * (a - mean);
                sd = std::sqrt(sd / static_cast<double>(v.size()));
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * c)) = mean;
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * c + 1)) = sd;
        }
    }
    return out;
}

Eigen::MatrixXd force_sequences(std::span<const EstimatedTrajectory> trajectories, MotionMode mode) {
    const std::vector<Channel> channels = active_channels(mode);
    if (trajectories.empty()) return Eigen::MatrixXd(0, 0);
    const std::size_t length = trajectories.front().forces.size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trajectories.size()),
                                                static_cast<Eigen::Index>(length * channels.size()));
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const EstimatedTrajectory& t = trajectories[i];
        if (t.forces.size() != length) {
            throw std::invalid_argument("force_sequences: trajectories differ in force count");
        }
        for (std::size_t c = 0; c < channels.size(); ++c) {
            for (std::size_t j = 0; j < length; ++j) {
                if (!t.force_valid[j]) continue;
                const DrivingForce& f = t.forces[j];
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c * length + j)) =
                    channels[c] == Channel::xy ? f.a_xy : channels[c] == Channel::z ? f.a_z : f.a_theta;
            }
        }
    }
    return out;
}

std::vector<int> oracle_relabel(std::span<const int> clusters, std::span<const int> truth) {
    if (clusters.size() != truth.size()) throw std::invalid_argument("oracle_relabel: size mismatch");
    std::map<int, std::size_t> cluster_index;
    std::map<int, std::size_t> class_index;
    std::vector<int> class_labels;
    for (int c : clusters) cluster_index.emplace(c, cluster_index.size());
    for (int t : std::set<int>(truth.begin(), truth.end())) {
        class_index.emplace(t, class_labels.size());
        class_labels.push_back(t);
    }
    std::vector<std::vector<int>> agree(cluster_index.size(), std::vector<int>(class_labels.size(), 0));
    for (std::size_t i = 0; i < clusters.size(); ++i) ++agree[cluster_index[clusters[i]]][class_index[truth[i]]];

    std::vector<int> mapping(agree.size(), 0);
    if (agree.size() <= class_labels.size()) {
        std::vector<bool> used(class_labels.size(), false);
        std::vector<int> current(agree.size(), 0);
        int best_score = -1;
        search(0, agree, used, current, 0, best_score, mapping);
    } else {
        for (std::size_t k = 0; k < agree.size(); ++k) {
            mapping[k] = static_cast<int>(std::max_element(agree[k].begin(), agree[k].end()) - agree[k].begin());
        }
    }
    std::vector<int> out(clusters.size());
    for (std::size_t i = 0; i < clusters.size(); ++i) out[i] = class_labels[static_cast<std::size_t>(mapping[cluster_index[clusters[i]]])];
    return out;
}

FcmResult fuzzy_cmeans(const Eigen::MatrixXd& points, int k, double m, std::uint64_t seed, int restarts,
                       int max_iterations, double tolerance) {
    if (!(m > 1.0)) throw std::invalid_argument("fuzzy_cmeans: fuzzifier must be > 1");
    if (k < 1 || k > points.rows()) throw std::invalid_argument("fuzzy_cmeans: need 1 <= k <= number of points");
    const Eigen::Index n = points.rows();
    const double exponent = 2.0 / (m - 1.0);
    FcmResult best;
    double best_objective = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(r));
        FcmResult run;
        run.memberships.resize(n, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int c = 0; c < k; ++c) run.memberships(i, c) = draw_uniform(rng) + 1e-3;
            run.memberships.row(i) /= run.memberships.row(i).sum();
        }
        for (int it = 0; it < max_iterations; ++it) {
            const Eigen::MatrixXd w = run.memberships.array().pow(m);
            run.centroids = w.transpose() * points;
            const Eigen::VectorXd mass = w.colwise().sum().transpose();
            for (int c = 0; c < k; ++c) {
                // A cluster can lose all its weight when points coincide with another centroid.
                if (mass(c) > 0.0) {
                    run.centroids.row(c) /= mass(c);
                } else {
                    run.centroids.row(c) = points.colwise().mean();
                }
            }
            Eigen::MatrixXd d2(n, k);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (int c = 0; c < k; ++c) d2(i, c) = (points.row(i) - run.centroids.row(c)).squaredNorm();
            }
            run.objective_trace.push_back((w.array() * d2.array()).sum());

            Eigen::MatrixXd next(n, k);
            for (Eigen::Index i = 0; i < n; ++i) {
                int zeros = 0;
                for (int c = 0; c < k; ++c) zeros += d2(i, c) == 0.0;
                if (zeros > 0) {
                    for (int c = 0; c < k; ++c) next(i, c) = d2(i, c) == 0.0 ? 1.0 / zeros : 0.0;
                    continue;
                }
                // u_ic = 1 / sum_l (d_ic / d_il)^(2/(m-1)), evaluated in log space.
                for (int c = 0; c < k; ++c) {
                    double sum = 0.0;
                    for (int l = 0; l < k; ++l) sum += std::exp(0.5 * exponent * (std::log(d2(i, c)) - std::log(d2(i, l))));
                    next(i, c) = 1.0 / sum;
                }
            }
            const double change = (next - run.memberships).cwiseAbs().maxCoeff();
            run.memberships = next;
            if (change < tolerance) break;
        }
        const Eigen::MatrixXd w = run.memberships.array().pow(m);
        double objective = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int c = 0; c < k; ++c) objective += w(i, c) * (points.row(i) - run.centroids.row(c)).squaredNorm();
        }
        if (objective < best_objective) {
            best_objective = objective;
            best = std::move(run);
        }
    }
    return best;
}

BaselineResult kmeans_direct(std::span<const EstimatedTrajectory> trajectories, std::span<const int> truth,
                             int n_classes, std::uint64_t seed, MotionMode mode, BaselineInput input) {
    check_inputs(trajectories, truth, n_classes);
    const Eigen::MatrixXd x = baseline_points(trajectories, mode, input);
    const KMeansResult km = kmeans(x, n_classes, 20, 100, seed);
    BaselineResult r;
    r.method = "kmeans_direct";
    r.predicted = oracle_relabel(km.assignments, truth);
    r.csr = csr_of(r.predicted, truth);
    return r;
}

BaselineResult fcm_direct(std::span<const EstimatedTrajectory> trajectories, std::span<const int> truth,
                          int n_classes, double m, std::uint64_t seed, MotionMode mode, BaselineInput input) {
    check_inputs(trajectories, truth, n_classes);
    const Eigen::MatrixXd x = baseline_points(trajectories, mode, input);
    const FcmResult fcm = fuzzy_cmeans(x, n_classes, m, seed);
    std::vector<int> hard(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::Index best = 0;
        fcm.memberships.row(i).maxCoeff(&best);
        hard[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    BaselineResult r;
    r.method = "fcm_direct";
    r.predicted = oracle_relabel(hard, truth);
    r.csr = csr_of(r.predicted, truth);
    return r;
}

}  // namespace mobprof
