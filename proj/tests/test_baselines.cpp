#include <random>

#include <doctest.h>

#include "mobprof/baselines.hpp"
#include "mobprof/online.hpp"

using namespace mobprof;

namespace {

EstimatedTrajectory constant_forces(double a_xy, double a_theta, std::size_t n = 20) {
    EstimatedTrajectory t;
    t.forces.assign(n, DrivingForce{a_xy, 0.0, a_theta});
    t.force_valid.assign(n, true);
    return t;
}

Eigen::MatrixXd two_blobs(std::size_t per, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.5);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(2 * per), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double shift = i < static_cast<Eigen::Index>(per) ? 0.0 : 6.0;
        x(i, 0) = shift + noise(rng);
        x(i, 1) = noise(rng);
    }
    return x;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("force summaries are mean and spread of the valid samples") {
    EstimatedTrajectory t = constant_forces(2.0, -1.0, 4);
    t.forces[3] = DrivingForce{100.0, 0.0, 100.0};
    t.force_valid[3] = false;
    t.forces[1].a_xy = 4.0;
    const std::vector<EstimatedTrajectory> one{t};
    const Eigen::MatrixXd s = force_summaries(one, MotionMode::planar);
    REQUIRE(s.cols() == 4);
    CHECK(s(0, 0) == doctest::Approx(8.0 / 3.0));
    CHECK(s(0, 1) == doctest::Approx(std::sqrt(8.0 / 9.0)));
    CHECK(s(0, 2) == doctest::Approx(-1.0));
    CHECK(s(0, 3) == doctest::Approx(0.0));
    const Eigen::MatrixXd q = force_sequences(one, MotionMode::planar);
    REQUIRE(q.cols() == 8);
    CHECK(q(0, 1) == 4.0);
    CHECK(q(0, 3) == 0.0);  // missing sample
    CHECK(q(0, 4) == -1.0);
}

TEST_CASE("perfectly separated classes are recovered by every representation") {
    std::vector<EstimatedTrajectory> trajs;
    std::vector<int> truth;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 10; ++i) {
            trajs.push_back(constant_forces(3.0 * c, 0.5 * c));
            truth.push_back(c + 1);
        }
    }
    for (BaselineInput input : {BaselineInput::summary, BaselineInput::standardized_summary, BaselineInput::sequence}) {
        CHECK(kmeans_direct(trajs, truth, 3, 1, MotionMode::planar, input).csr == 1.0);
        CHECK(fcm_direct(trajs, truth, 3, 2.0, 1, MotionMode::planar, input).csr == 1.0);
    }
}

TEST_CASE("a single cluster scores the majority fraction") {
    std::vector<EstimatedTrajectory> trajs;
    std::vector<int> truth;
    for (int i = 0; i < 12; ++i) {
        trajs.push_back(constant_forces(i % 3 == 0 ? 1.0 : -1.0, 0.0));
        truth.push_back(i % 3 == 0 ? 1 : 2);
    }
    const BaselineResult k = kmeans_direct(trajs, truth, 1, 3);
    CHECK(k.csr == doctest::Approx(8.0 / 12.0));
    CHECK(fcm_direct(trajs, truth, 1, 2.0, 3).csr == doctest::Approx(8.0 / 12.0));
    CHECK(k.method == "kmeans_direct");
    CHECK_THROWS_AS(kmeans_direct(trajs, truth, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(kmeans_direct(trajs, std::vector<int>(3, 1), 2, 3), std::invalid_argument);
}

TEST_CASE("oracle relabelling maximizes agreement") {
    const std::vector<int> clusters{0, 0, 1, 1, 2, 2};
    const std::vector<int> truth{5, 5, 9, 7, 7, 7};
    const std::vector<int> mapped = oracle_relabel(clusters, truth);
    CHECK(mapped == std::vector<int>{5, 5, 9, 9, 7, 7});
    // More clusters than classes: each takes its majority class.
    const std::vector<int> many{0, 1, 2, 3};
    CHECK(oracle_relabel(many, std::vector<int>{1, 1, 2, 2}) == std::vector<int>{1, 1, 2, 2});
}

TEST_CASE("FCM memberships are distributions and the objective never increases") {
    const Eigen::MatrixXd x = two_blobs(25, 1);
    const FcmResult r = fuzzy_cmeans(x, 3, 2.0, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        CHECK(r.memberships.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.memberships.row(i).minCoeff() >= 0.0);
    }
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
        CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] * (1 + 1e-12));
    }
    CHECK_THROWS_AS(fuzzy_cmeans(x, 2, 1.0, 1), std::invalid_argument);
}

TEST_CASE("identical points get uniform memberships") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(8, 3, 1.5);
    const FcmResult r = fuzzy_cmeans(x, 4, 2.0, 2);
    CHECK((r.memberships.array() - 0.25).abs().maxCoeff() < 1e-12);
}

TEST_CASE("FCM with m near 1 partitions like k-means") {
    const Eigen::MatrixXd x = two_blobs(30, 6);
    const FcmResult f = fuzzy_cmeans(x, 2, 1.05, 3);
    const KMeansResult k = kmeans(x, 2, 5, 100, 3);
    int disagreements = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::Index fi = 0;
        f.memberships.row(i).maxCoeff(&fi);
        Eigen::Index f0 = 0;
        f.memberships.row(0).maxCoeff(&f0);
        const bool same_fcm = fi == f0;
        const bool same_km = k.assignments[static_cast<std::size_t>(i)] == k.assignments[0];
        disagreements += same_fcm != same_km;
        // Memberships are almost hard.
        CHECK(f.memberships.row(i).maxCoeff() > 0.99);
    }
    CHECK(disagreements == 0);
}

}  // TEST_SUITE
