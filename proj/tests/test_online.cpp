#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "mobprof/online.hpp"
#include "mobprof/trajgen.hpp"

using namespace mobprof;

namespace {

// Three tight blobs far apart in 2-D.
Eigen::MatrixXd blobs(std::size_t per, std::uint64_t seed, std::vector<int>* truth = nullptr) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    const double centres[3][2] = {{0, 0}, {10, 0}, {0, 10}};
    Eigen::MatrixXd x(static_cast<Eigen::Index>(3 * per), 2);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per; ++i) {
            const auto r = static_cast<Eigen::Index>(c * per + i);
            x(r, 0) = centres[c][0] + noise(rng);
            x(r, 1) = centres[c][1] + noise(rng);
            if (truth) truth->push_back(static_cast<int>(c));
        }
    }
    return x;
}

// Adjusted agreement: every pair of rows is in the same cluster in both
// labelings or in different clusters in both.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
        }
    }
    return true;
}

MotionProfile random_profile(std::mt19937_64& rng, int id) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    MotionProfile p;
    p.object_id = id;
    for (Channel c : kAllChannels) p[c] = {u(rng), 4 * u(rng) - 2, 3 * u(rng)};
    return p;
}

}  // namespace

TEST_SUITE("online") {

TEST_CASE("running profile equals the batch mean of the segment profiles") {
    std::mt19937_64 rng(1);
    std::vector<MotionProfile> segments;
    RunningProfile running;
    for (int s = 0; s < 25; ++s) {
        segments.push_back(random_profile(rng, 42));
        running = update_running_profile(running, segments.back());
        REQUIRE(running.segment_count == static_cast<std::size_t>(s + 1));
        for (Channel c : kAllChannels) {
            double prob = 0.0;
            double mean = 0.0;
            double var = 0.0;
            for (const MotionProfile& p : segments) {
                prob += p[c].pulse_prob;
                mean += p[c].pulse_mean;
                var += p[c].pulse_var;
            }
            const double n = static_cast<double>(segments.size());
            CHECK(std::abs(running.mean_profile[c].pulse_prob - prob / n) < 1e-9);
            CHECK(std::abs(running.mean_profile[c].pulse_mean - mean / n) < 1e-9);
            CHECK(std::abs(running.mean_profile[c].pulse_var - var / n) < 1e-9);
        }
    }
    MotionProfile other = segments.front();
    other.object_id = 7;
    CHECK_THROWS_AS(update_running_profile(running, other), std::invalid_argument);
}

TEST_CASE("k-means recovers separated blobs and its inertia never increases") {
    std::vector<int> truth;
    const Eigen::MatrixXd x = blobs(30, 2, &truth);
    const KMeansResult km = kmeans(x, 3, 5, 100, 7);
    CHECK(same_partition(km.assignments, truth));
    for (std::size_t i = 1; i < km.inertia_trace.size(); ++i) {
        CHECK(km.inertia_trace[i] <= km.inertia_trace[i - 1] + 1e-12);
    }
    const KMeansResult again = kmeans(x, 3, 5, 100, 7);
    CHECK(again.assignments == km.assignments);
    CHECK_THROWS_AS(kmeans(x, 0, 1, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(x, 91, 1, 10, 1), std::invalid_argument);
}

TEST_CASE("penalized objective recomputed from scratch matches to 1e-12") {
    const Eigen::MatrixXd x = blobs(20, 3);
    ClusterOptions options;
    const ClusteringResult r = penalized_cluster(x, 4, options, 11);
    // Independent recomputation: centroids from the assignments, then
    // alpha * SS / (C * N) + (1 - alpha) * beta * C.
    const int c = r.n_clusters;
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(c, x.cols());
    std::vector<double> counts(static_cast<std::size_t>(c), 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int a = r.assignments[static_cast<std::size_t>(i)];
        centroids.row(a) += x.row(i);
        counts[static_cast<std::size_t>(a)] += 1.0;
    }
    for (int k = 0; k < c; ++k) centroids.row(k) /= counts[static_cast<std::size_t>(k)];
    double ss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        ss += (x.row(i) - centroids.row(r.assignments[static_cast<std::size_t>(i)])).squaredNorm();
    }
    const double within = ss / (c * static_cast<double>(x.rows()));
    const double f = options.alpha * within + (1 - options.alpha) * options.beta * c;
    CHECK(std::abs(r.within_variance - within) < 1e-12 * std::max(1.0, within));
    CHECK(std::abs(r.objective - f) < 1e-12 * std::max(1.0, f));
    CHECK(penalized_objective(2.0, 3, 0.2, 10.0) == doctest::Approx(0.4 + 24.0));
}

TEST_CASE("penalized clustering searches prev +- delta and picks the minimum") {
    std::vector<int> truth;
    const Eigen::MatrixXd x = blobs(20, 4, &truth) * 10.0;
    ClusterOptions options;
    const ClusteringResult r = penalized_cluster(x, 4, options, 5);
    CHECK(r.n_clusters == 3);
    CHECK(same_partition(r.assignments, truth));
    REQUIRE(r.candidates.size() == 7);  // counts 1..7
    CHECK(r.candidates.front().first == 1);
    CHECK(r.candidates.back().first == 7);
    for (const auto& [n, f] : r.candidates) CHECK(f >= r.objective);
    // A huge penalty collapses everything into one cluster.
    options.beta = 1e9;
    CHECK(penalized_cluster(x, 4, options, 5).n_clusters == 1);
    // Candidates beyond the number of rows are skipped.
    CHECK(penalized_cluster(x.topRows(2), 4, ClusterOptions{}, 5).candidates.size() == 2);
}

TEST_CASE("standardization z-scores every feature and honours the multiplier") {
    std::mt19937_64 rng(5);
    std::vector<MotionProfile> pop;
    for (int i = 0; i < 50; ++i) pop.push_back(random_profile(rng, i));
    const FeatureStandardization s = fit_standardization(pop, MotionMode::planar, 3.0);
    Eigen::MatrixXd f(50, 6);
    for (int i = 0; i < 50; ++i) f.row(i) = profile_feature_vector(pop[static_cast<std::size_t>(i)], s, MotionMode::planar).transpose();
    for (Eigen::Index j = 0; j < 6; ++j) {
        CHECK(std::abs(f.col(j).mean()) < 1e-12);
        CHECK(std::sqrt(f.col(j).array().square().mean()) == doctest::Approx(3.0));
    }
    MotionProfile tiny;
    tiny[Channel::xy].pulse_var = 1e-9;
    CHECK(raw_features(tiny, MotionMode::planar)(2) == doctest::Approx(std::log(kFeatureVarianceFloor)));
    CHECK(raw_features(tiny, MotionMode::spatial).size() == 9);
}

TEST_CASE("moment fit recovers the generating hyper-parameters") {
    const ClassHyperParams h = reference_classes()[1];
    std::vector<ChannelProfile> members;
    for (std::uint64_t s = 0; s < 5000; ++s) members.push_back(sample_profile(h, s)[Channel::xy]);
    const ChannelHyper fit = moment_fit(members);
    const ChannelHyper& t = h[Channel::xy];
    CHECK(fit.beta_a / (fit.beta_a + fit.beta_b) == doctest::Approx(t.beta_a / (t.beta_a + t.beta_b)).epsilon(0.02));
    CHECK(fit.beta_a == doctest::Approx(t.beta_a).epsilon(0.1));
    CHECK(fit.gamma_alpha / fit.gamma_beta == doctest::Approx(t.gamma_alpha / t.gamma_beta).epsilon(0.05));
    CHECK(fit.normal_mean == doctest::Approx(t.normal_mean).epsilon(0.1));

    // Identical members: fallback concentrations keep the fit finite.
    const std::vector<ChannelProfile> same(4, ChannelProfile{0.25, 1.0, 0.5});
    const ChannelHyper flat = moment_fit(same);
    CHECK(flat.beta_a / (flat.beta_a + flat.beta_b) == doctest::Approx(0.25));
    CHECK(flat.gamma_alpha / flat.gamma_beta == doctest::Approx(2.0));
    CHECK(std::isfinite(flat.shrinkage));
    CHECK_THROWS_AS(moment_fit(std::vector<ChannelProfile>{}), std::invalid_argument);
}

TEST_CASE("registry survives a JSON round trip") {
    ClassRegistry r;
    r.next_class_id = 9;
    r.standardization.mean = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0 / 3.0);
    r.standardization.scale = Eigen::VectorXd::Constant(6, 0.1);
    r.standardization.feature_scale = 12.0;
    for (int c = 0; c < 3; ++c) {
        RegisteredClass cls;
        cls.class_id = 2 * c + 1;
        cls.hyper = reference_classes()[static_cast<std::size_t>(c)];
        cls.hyper.class_id = cls.class_id;
        cls.members = {c, 10 + c, 20 + c};
        cls.centroid = Eigen::VectorXd::Constant(6, 0.1 * c + 1.0 / 7.0);
        r.classes.push_back(cls);
    }
    const std::string text = registry_to_json(r);
    const ClassRegistry back = registry_from_json(text);
    CHECK(registry_to_json(back) == text);
    REQUIRE(back.classes.size() == 3);
    CHECK(back.next_class_id == 9);
    CHECK(back.classes[1].hyper[Channel::theta].gamma_beta == r.classes[1].hyper[Channel::theta].gamma_beta);
    CHECK(back.classes[2].centroid == r.classes[2].centroid);
    CHECK(back.class_of(21) == 3);
    CHECK_FALSE(back.class_of(99).has_value());
}

TEST_CASE("segment batches are validated") {
    SegmentBatch b;
    b.segment_length = 3;
    b.windows = {{1, std::vector<Observation>(3)}, {1, std::vector<Observation>(3)}};
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
    b.windows[1].object_id = 2;
    b.windows[1].observations.resize(2);
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
    b.windows[1].observations.resize(3);
    CHECK_NOTHROW(b.validate());
}

TEST_CASE("ingesting segments builds a registry that tracks every object") {
    const SystemModel model = build_system(1.0, 1.0, 1.0);
    const auto classes = reference_classes();
    const std::size_t length = 60;
    const auto population = generate_population(classes, 12, model, 2 * length, 1.0, 3);
    OnlineConfig cfg;
    cfg.seed = 3;
    cfg.workers = 2;
    ClassRegistry registry;
    for (std::size_t s = 1; s <= 2; ++s) {
        SegmentBatch batch;
        batch.segment_index = s;
        batch.segment_length = length;
        for (const SynthTrajectory& t : population) {
            batch.windows.push_back({t.profile.object_id,
                                     {t.observations.begin() + static_cast<std::ptrdiff_t>((s - 1) * length),
                                      t.observations.begin() + static_cast<std::ptrdiff_t>(s * length)}});
        }
        const IngestResult r = ingest_segment(batch, registry, cfg);
        CHECK(r.errors.empty());
        CHECK(r.decisions.size() == (s == 1 ? 0 : population.size()));
        REQUIRE(r.clustering.has_value());
        registry = r.registry;
        std::size_t members = 0;
        for (const RegisteredClass& c : registry.classes) members += c.members.size();
        CHECK(members == population.size());
        for (const auto& [id, rp] : registry.profiles) CHECK(rp.segment_count == s);
    }
    CHECK(registry.current_count() >= 1);
    // Same seed, same result regardless of thread count.
    OnlineConfig single = cfg;
    single.workers = 1;
    SegmentBatch first;
    first.segment_length = length;
    for (const SynthTrajectory& t : population) {
        first.windows.push_back({t.profile.object_id, {t.observations.begin(), t.observations.begin() + length}});
    }
    CHECK(registry_to_json(ingest_segment(first, {}, cfg).registry) ==
          registry_to_json(ingest_segment(first, {}, single).registry));
}

}  // TEST_SUITE
