#include "mobprof/online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "mobprof/parallel.hpp"
#include "mobprof/random.hpp"

namespace mobprof {

namespace {

constexpr double kFallbackConcentration = 100.0;
constexpr double kMeanSpreadEpsilon = 1e-12;

ChannelProfile blend(const ChannelProfile& prev, const ChannelProfile& next, double s) {
    return {((s - 1.0) * prev.pulse_prob + next.pulse_prob) / s,
            ((s - 1.0) * prev.pulse_mean + next.pulse_mean) / s,
            ((s - 1.0) * prev.pulse_var + next.pulse_var) / s};
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // unbiased; 0 for a single value
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    if (x.empty()) return m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    if (x.size() < 2) return m;
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.var = ss / static_cast<double>(x.size() - 1);
    return m;
}

double squared_distance(const Eigen::MatrixXd& points, Eigen::Index row, const Eigen::MatrixXd& centroids,
                        Eigen::Index c) {
    return (points.row(row) - centroids.row(c)).squaredNorm();
}

// Index of the nearest centroid; ties go to the lower index.
int nearest(const Eigen::MatrixXd& points, Eigen::Index row, const Eigen::MatrixXd& centroids,
            double& dist) {
    int best = 0;
    dist = squared_distance(points, row, centroids, 0);
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
        const double d = squared_distance(points, row, centroids, c);
        if (d < dist) {
            dist = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& points, int k, Rng& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centroids(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centroids.row(0) = points.row(pick(rng));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j) best = std::min(best, squared_distance(points, i, centroids, j));
            d2[static_cast<std::size_t>(i)] = best;
            total += best;
        }
        Eigen::Index chosen = 0;
        if (total <= 0.0) {
            chosen = pick(rng);
        } else {
            double target = draw_uniform(rng) * total;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= d2[static_cast<std::size_t>(i)];
                if (target < 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.row(c) = points.row(chosen);
    }
    return centroids;
}

KMeansResult lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centroids, int max_iterations) {
    const Eigen::Index n = points.rows();
    const int k = static_cast<int>(centroids.rows());
    KMeansResult r;
    r.assignments.assign(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = nearest(points, i, centroids, dist[static_cast<std::size_t>(i)]);
            if (c != r.assignments[static_cast<std::size_t>(i)]) {
                r.assignments[static_cast<std::size_t>(i)] = c;
                changed = true;
            }
        }
        // An empty cluster takes over the point that is worst served.
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int a : r.assignments) ++counts[static_cast<std::size_t>(a)];
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index far = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(r.assignments[static_cast<std::size_t>(i)])] < 2) continue;
                if (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
            }
            if (far < 0) break;
            --counts[static_cast<std::size_t>(r.assignments[static_cast<std::size_t>(far)])];
            r.assignments[static_cast<std::size_t>(far)] = c;
            dist[static_cast<std::size_t>(far)] = 0.0;
            counts[static_cast<std::size_t>(c)] = 1;
            changed = true;
        }
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
        for (Eigen::Index i = 0; i < n; ++i) next.row(r.assignments[static_cast<std::size_t>(i)]) += points.row(i);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                next.row(c) /= counts[static_cast<std::size_t>(c)];
            } else {
                next.row(c) = centroids.row(c);
            }
        }
        centroids = next;
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            inertia += squared_distance(points, i, centroids, r.assignments[static_cast<std::size_t>(i)]);
        }
        r.inertia_trace.push_back(inertia);
        if (!changed) break;
    }
    r.centroids = centroids;
    r.inertia = r.inertia_trace.empty() ? 0.0 : r.inertia_trace.back();
    return r;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

void SegmentBatch::validate() const {
    if (segment_index < 1) throw std::invalid_argument("segment batch: segment_index must be >= 1");
    std::set<int> seen;
    for (const ObjectWindow& w : windows) {
        if (!seen.insert(w.object_id).second) {
            throw std::invalid_argument("segment batch: duplicate object id " + std::to_string(w.object_id));
        }
        if (w.observations.size() != segment_length) {
            throw std::invalid_argument("segment batch: window of object " + std::to_string(w.object_id) +
                                        " has " + std::to_string(w.observations.size()) +
                                        " points, expected " + std::to_string(segment_length));
        }
    }
}

RunningProfile update_running_profile(const RunningProfile& prev, const MotionProfile& segment_profile) {
    if (prev.segment_count > 0 && segment_profile.object_id != prev.object_id) {
        throw std::invalid_argument("update_running_profile: segment belongs to object " +
                                    std::to_string(segment_profile.object_id) + ", not " +
                                    std::to_string(prev.object_id));
    }
    RunningProfile next;
    next.object_id = segment_profile.object_id;
    next.segment_count = prev.segment_count + 1;
    next.last_segment_profile = segment_profile;
    next.mean_profile.object_id = segment_profile.object_id;
    const double s = static_cast<double>(next.segment_count);
    for (Channel c : kAllChannels) {
        next.mean_profile[c] = prev.segment_count == 0 ? segment_profile[c]
                                                       : blend(prev.mean_profile[c], segment_profile[c], s);
    }
    return next;
}

Eigen::VectorXd raw_features(const MotionProfile& profile, MotionMode mode) {
    const std::vector<Channel> channels = active_channels(mode);
    Eigen::VectorXd f(static_cast<Eigen::Index>(3 * channels.size()));
    Eigen::Index i = 0;
    for (Channel c : channels) {
        const ChannelProfile& p = profile[c];
        f(i++) = p.pulse_prob;
        f(i++) = p.pulse_mean;
        f(i++) = std::log(std::max(p.pulse_var, kFeatureVarianceFloor));
    }
    return f;
}

FeatureStandardization fit_standardization(std::span<const MotionProfile> population, MotionMode mode,
                                           double feature_scale) {
    if (population.empty()) throw std::invalid_argument("fit_standardization: empty population");
    if (!(feature_scale > 0.0)) throw std::invalid_argument("fit_standardization: feature_scale must be > 0");
    const Eigen::Index d = raw_features(population.front(), mode).size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(population.size()), d);
    for (std::size_t i = 0; i < population.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = raw_features(population[i], mode).transpose();
    }
    FeatureStandardization s;
    s.feature_scale = feature_scale;
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double var = (x.col(j).array() - s.mean(j)).square().mean();
        const double sd = std::sqrt(var);
        // Spreads at rounding level count as zero.
        s.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? sd : 1.0;
    }
    return s;
}

Eigen::VectorXd profile_feature_vector(const MotionProfile& profile,
                                       const FeatureStandardization& standardization, MotionMode mode) {
    const Eigen::VectorXd raw = raw_features(profile, mode);
    if (standardization.mean.size() != raw.size() || standardization.scale.size() != raw.size()) {
        throw std::invalid_argument("profile_feature_vector: standardization has the wrong dimension");
    }
    return standardization.feature_scale *
           ((raw - standardization.mean).array() / standardization.scale.array()).matrix();
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, int max_iterations,
                    std::uint64_t seed) {
    if (k < 1 || k > points.rows()) throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
    if (restarts < 1 || max_iterations < 1) {
        throw std::invalid_argument("kmeans: restarts and iterations must be >= 1");
    }
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(r));
        KMeansResult run = lloyd(points, seed_centroids(points, k, rng), max_iterations);
        if (run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

double within_variance(const Eigen::MatrixXd& points, std::span<const int> assignments,
                       const Eigen::MatrixXd& centroids) {
    if (static_cast<Eigen::Index>(assignments.size()) != points.rows() || points.rows() == 0) {
        throw std::invalid_argument("within_variance: one assignment per point required");
    }
    double ss = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        ss += squared_distance(points, i, centroids, assignments[static_cast<std::size_t>(i)]);
    }
    return ss / (static_cast<double>(centroids.rows()) * static_cast<double>(points.rows()));
}

double penalized_objective(double within, int n_clusters, double alpha, double beta) {
    return alpha * within + (1.0 - alpha) * beta * static_cast<double>(n_clusters);
}

ClusteringResult penalized_cluster(const Eigen::MatrixXd& features, int prev_count,
                                   const ClusterOptions& options, std::uint64_t seed) {
    if (features.rows() == 0) throw std::invalid_argument("penalized_cluster: no profiles");
    if (prev_count < 1 || options.delta < 0) {
        throw std::invalid_argument("penalized_cluster: prev_count must be >= 1 and delta >= 0");
    }
    if (!(options.alpha >= 0.0 && options.alpha <= 1.0) || !(options.beta >= 0.0)) {
        throw std::invalid_argument("penalized_cluster: alpha must lie in [0,1] and beta be >= 0");
    }
    const int lo = std::max(1, prev_count - options.delta);
    const int hi = prev_count + options.delta;
    ClusteringResult best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<std::pair<int, double>> evaluated;
    for (int n = lo; n <= hi; ++n) {
        if (n > features.rows()) continue;
        const KMeansResult km = kmeans(features, n, options.restarts, options.max_iterations,
                                       mix_seed(seed, static_cast<std::uint64_t>(n)));
        const double within = within_variance(features, km.assignments, km.centroids);
        const double f = penalized_objective(within, n, options.alpha, options.beta);
        evaluated.emplace_back(n, f);
        if (f < best.objective) {
            best.assignments = km.assignments;
            best.centroids = km.centroids;
            best.within_variance = within;
            best.objective = f;
            best.n_clusters = n;
        }
    }
    if (evaluated.empty()) {
        throw std::invalid_argument("penalized_cluster: every candidate count exceeds the number of profiles");
    }
    best.candidates = std::move(evaluated);
    return best;
}

std::vector<ClassHyperParams> ClassRegistry::hyper_list() const {
    std::vector<ClassHyperParams> out;
    out.reserve(classes.size());
    for (const RegisteredClass& c : classes) out.push_back(c.hyper);
    return out;
}

std::optional<int> ClassRegistry::class_of(int object_id) const {
    for (const RegisteredClass& c : classes) {
        if (std::find(c.members.begin(), c.members.end(), object_id) != c.members.end()) return c.class_id;
    }
    return std::nullopt;
}

ChannelHyper moment_fit(std::span<const ChannelProfile> members) {
    if (members.empty()) throw std::invalid_argument("moment_fit: no members");
    std::vector<double> lambda;
    std::vector<double> tau;
    std::vector<double> mu;
    std::vector<double> var;
    for (const ChannelProfile& p : members) {
        const double v = std::max(p.pulse_var, kVarianceFloor);
        lambda.push_back(p.pulse_prob);
        tau.push_back(1.0 / v);
        mu.push_back(p.pulse_mean);
        var.push_back(v);
    }
    ChannelHyper h;
    const Moments ml = moments(lambda);
    const double m = std::clamp(ml.mean, 1e-6, 1.0 - 1e-6);
    double k = ml.var > 0.0 ? m * (1.0 - m) / ml.var - 1.0 : 0.0;
    if (!(k > 0.0)) k = kFallbackConcentration;
    h.beta_a = m * k;
    h.beta_b = (1.0 - m) * k;

    const Moments mt = moments(tau);
    if (mt.var > 0.0) {
        h.gamma_alpha = mt.mean * mt.mean / mt.var;
        h.gamma_beta = mt.mean / mt.var;
    } else {
        h.gamma_alpha = kFallbackConcentration;
        h.gamma_beta = kFallbackConcentration / mt.mean;
    }

    const Moments mm = moments(mu);
    h.normal_mean = mm.mean;
    h.shrinkage = moments(var).mean / std::max(mm.var, kMeanSpreadEpsilon);
    return h;
}

ClassHyperParams refit_hyper(std::span<const MotionProfile> members, MotionMode mode,
                             const ClassHyperParams& fallback) {
    ClassHyperParams h = fallback;
    std::vector<ChannelProfile> channel(members.size());
    for (Channel c : active_channels(mode)) {
        for (std::size_t i = 0; i < members.size(); ++i) channel[i] = members[i][c];
        h[c] = moment_fit(channel);
    }
    return h;
}

ClassRegistry match_and_refine(const ClusteringResult& result, std::span<const int> object_ids,
                               const ClassRegistry& registry, MotionMode mode) {
    if (result.n_clusters < 1 || result.centroids.rows() != result.n_clusters) {
        throw std::invalid_argument("match_and_refine: empty clustering result");
    }
    if (object_ids.size() != result.assignments.size()) {
        throw std::invalid_argument("match_and_refine: one object id per clustered row required");
    }
    const FeatureStandardization& std_ = registry.standardization;

    // Greedy nearest-centroid matching over all (cluster, class) pairs.
    std::vector<std::tuple<double, int, int>> pairs;
    for (int j = 0; j < result.n_clusters; ++j) {
        for (std::size_t i = 0; i < registry.classes.size(); ++i) {
            const Eigen::VectorXd centre =
                std_.feature_scale *
                ((registry.classes[i].centroid - std_.mean).array() / std_.scale.array()).matrix();
            const double d = (result.centroids.row(j).transpose() - centre).squaredNorm();
            pairs.emplace_back(d, j, static_cast<int>(i));
        }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<int> match(static_cast<std::size_t>(result.n_clusters), -1);
    std::vector<bool> taken(registry.classes.size(), false);
    for (const auto& [d, j, i] : pairs) {
        if (match[static_cast<std::size_t>(j)] >= 0 || taken[static_cast<std::size_t>(i)]) continue;
        match[static_cast<std::size_t>(j)] = i;
        taken[static_cast<std::size_t>(i)] = true;
    }

    ClassRegistry next;
    next.standardization = registry.standardization;
    next.profiles = registry.profiles;
    next.next_class_id = registry.next_class_id;
    for (int j = 0; j < result.n_clusters; ++j) {
        RegisteredClass cls;
        const int previous = match[static_cast<std::size_t>(j)];
        std::vector<MotionProfile> members;
        for (std::size_t r = 0; r < result.assignments.size(); ++r) {
            if (result.assignments[r] != j) continue;
            cls.members.push_back(object_ids[r]);
            const auto it = registry.profiles.find(object_ids[r]);
            if (it == registry.profiles.end()) {
                throw std::invalid_argument("match_and_refine: no running profile for object " +
                                            std::to_string(object_ids[r]));
            }
            members.push_back(it->second.mean_profile);
        }
        if (members.empty()) continue;
        cls.centroid = Eigen::VectorXd::Zero(raw_features(members.front(), mode).size());
        for (const MotionProfile& p : members) cls.centroid += raw_features(p, mode);
        cls.centroid /= static_cast<double>(members.size());

        if (previous >= 0) {
            const RegisteredClass& old = registry.classes[static_cast<std::size_t>(previous)];
            cls.class_id = old.class_id;
            cls.hyper = members.size() >= 3 ? refit_hyper(members, mode, old.hyper) : old.hyper;
        } else {
            cls.class_id = next.next_class_id++;
            ClassHyperParams seed_hyper;
            seed_hyper.class_id = cls.class_id;
            cls.hyper = refit_hyper(members, mode, seed_hyper);
        }
        cls.hyper.class_id = cls.class_id;
        next.classes.push_back(std::move(cls));
    }
    std::sort(next.classes.begin(), next.classes.end(),
              [](const RegisteredClass& a, const RegisteredClass& b) { return a.class_id < b.class_id; });
    return next;
}

IngestResult ingest_segment(const SegmentBatch& batch, const ClassRegistry& registry,
                            const OnlineConfig& config) {
    IngestResult out;
    out.registry = registry;
    if (batch.windows.empty()) return out;
    batch.validate();
    const MotionMode mode = config.profiler.mode;

    // Filter and profile each window.
    const std::size_t n = batch.windows.size();
    std::vector<std::optional<MotionProfile>> fitted(n);
    std::vector<std::string> failure(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            const ObjectWindow& w = batch.windows[i];
            try {
                const EstimatedTrajectory est =
                    filter_trajectory(w.observations, config.model, initial_guess_from(w.observations));
                MotionProfile p = extract_profile(est, config.profiler);
                p.object_id = w.object_id;
                fitted[i] = p;
            } catch (const std::exception& e) {
                failure[i] = e.what();
            }
        },
        config.workers);

    // Running means, then classification against the incoming registry.
    const std::vector<ClassHyperParams> known = registry.hyper_list();
    for (std::size_t i = 0; i < n; ++i) {
        const int id = batch.windows[i].object_id;
        if (!fitted[i]) {
            out.errors.push_back({id, failure[i]});
            continue;
        }
        const auto it = out.registry.profiles.find(id);
        const RunningProfile prev = it == out.registry.profiles.end() ? RunningProfile{} : it->second;
        out.registry.profiles[id] = update_running_profile(prev, *fitted[i]);
        if (known.empty()) continue;
        try {
            out.decisions.push_back({id, classify(out.registry.profiles[id].mean_profile, known, std::nullopt, mode)});
        } catch (const std::exception& e) {
            out.errors.push_back({id, e.what()});
        }
    }
    if (out.registry.profiles.empty()) return out;

    // Re-cluster every tracked object and refine.
    std::vector<int> ids;
    std::vector<MotionProfile> population;
    for (const auto& [id, rp] : out.registry.profiles) {
        ids.push_back(id);
        population.push_back(rp.mean_profile);
    }
    if (config.refit_standardization || registry.standardization.mean.size() == 0) {
        out.registry.standardization = fit_standardization(population, mode, config.feature_scale);
    }
    Eigen::MatrixXd features(static_cast<Eigen::Index>(population.size()),
                             raw_features(population.front(), mode).size());
    for (std::size_t i = 0; i < population.size(); ++i) {
        features.row(static_cast<Eigen::Index>(i)) =
            profile_feature_vector(population[i], out.registry.standardization, mode).transpose();
    }
    const int prev_count = registry.classes.empty() ? config.initial_count : registry.current_count();
    ClusteringResult clustering = penalized_cluster(features, prev_count, config.cluster,
                                                    mix_seed(config.seed, batch.segment_index));
    out.registry = match_and_refine(clustering, ids, out.registry, mode);
    out.clustering = std::move(clustering);
    return out;
}

namespace {

nlohmann::json channel_json(const ChannelHyper& h) {
    return {{"beta_a", h.beta_a},         {"beta_b", h.beta_b},         {"gamma_alpha", h.gamma_alpha},
            {"gamma_beta", h.gamma_beta}, {"normal_mean", h.normal_mean}, {"shrinkage", h.shrinkage}};
}

ChannelHyper channel_from(const nlohmann::json& j) {
    ChannelHyper h;
    h.beta_a = j.at("beta_a").get<double>();
    h.beta_b = j.at("beta_b").get<double>();
    h.gamma_alpha = j.at("gamma_alpha").get<double>();
    h.gamma_beta = j.at("gamma_beta").get<double>();
    h.normal_mean = j.at("normal_mean").get<double>();
    h.shrinkage = j.at("shrinkage").get<double>();
    return h;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string registry_to_json(const ClassRegistry& registry) {
    nlohmann::json doc;
    doc["next_class_id"] = registry.next_class_id;
    doc["standardization"] = {{"mean", to_vector(registry.standardization.mean)},
                              {"scale", to_vector(registry.standardization.scale)},
                              {"feature_scale", registry.standardization.feature_scale}};
    doc["classes"] = nlohmann::json::array();
    for (const RegisteredClass& c : registry.classes) {
        nlohmann::json channels;
        for (Channel ch : kAllChannels) channels[std::string(channel_name(ch))] = channel_json(c.hyper[ch]);
        doc["classes"].push_back({{"class_id", c.class_id},
                                  {"member_count", c.members.size()},
                                  {"members", c.members},
                                  {"centroid", to_vector(c.centroid)},
                                  {"channels", channels}});
    }
    return doc.dump(2);
}

ClassRegistry registry_from_json(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    ClassRegistry r;
    r.next_class_id = doc.at("next_class_id").get<int>();
    const auto& s = doc.at("standardization");
    r.standardization.mean = from_vector(s.at("mean").get<std::vector<double>>());
    r.standardization.scale = from_vector(s.at("scale").get<std::vector<double>>());
    r.standardization.feature_scale = s.at("feature_scale").get<double>();
    for (const auto& jc : doc.at("classes")) {
        RegisteredClass c;
        c.class_id = jc.at("class_id").get<int>();
        c.members = jc.at("members").get<std::vector<int>>();
        if (jc.at("member_count").get<std::size_t>() != c.members.size()) {
            throw std::invalid_argument("registry json: member_count does not match members");
        }
        c.centroid = from_vector(jc.at("centroid").get<std::vector<double>>());
        c.hyper.class_id = c.class_id;
        for (Channel ch : kAllChannels) c.hyper[ch] = channel_from(jc.at("channels").at(std::string(channel_name(ch))));
        r.classes.push_back(std::move(c));
    }
    return r;
}

}  // namespace mobprof
