#include <doctest.h>

#include <random>

#include "gcslam/association.hpp"
#include "test_helpers.hpp"

using namespace gcslam;
using namespace gcslam::testing;

namespace {

GroundObservation make_obs(const Vec3& cp, const Mat3& cov) {
    GroundObservation obs{PlaneCP(cp)};
    obs.covariance = cov;
    obs.support_count = 500;
    obs.mean_residual = 0.0;
    return obs;
}

}  // namespace

TEST_SUITE("association") {

TEST_CASE("consistent pair has zero innovation") {
    std::mt19937 rng(501);
    for (int k = 0; k < 50; ++k) {
        // one physical plane seen from two poses
        const Vec3 world_cp = random_cp(rng, 1.0, 5.0);
        const Pose t_i = random_pose(rng, 1.0);
        const Pose t_j = random_pose(rng, 1.0);
        PlaneCP in_i{Vec3::UnitZ()}, in_j{Vec3::UnitZ()};
        try {
            in_i = transform_plane(PlaneCP(world_cp), t_i);
            in_j = transform_plane(PlaneCP(world_cp), t_j);
        } catch (const SingularPlane&) {
            continue;
        }
        const Mat3 cov = 1e-4 * Mat3::Identity();
        const Pose earlier_in_later = t_j.inverse() * t_i;
        const auto innov = plane_innovation(make_obs(in_i.cp(), cov), make_obs(in_j.cp(), cov),
                                            earlier_in_later);
        CHECK(innov.delta.norm() < 1e-9);
        CHECK(innov.mahalanobis < 1e-9);
    }
}

TEST_CASE("floor change of three meters produces a three-meter innovation") {
    // key-frame i over the upper floor, key-frame i+1 at the same pose but
    // observing the lower floor three meters further down
    const auto obs_i = make_obs(Vec3(0, 0, -1.5), 1e-4 * Mat3::Identity());
    const auto obs_j = make_obs(Vec3(0, 0, -4.5), 1e-4 * Mat3::Identity());
    const auto innov = plane_innovation(obs_i, obs_j, Pose());
    CHECK(innov.delta.norm() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(innov.mahalanobis > 100.0 * kChiSquare95Dof3);
}

TEST_CASE("monte-carlo mahalanobis follows chi-square with three dof") {
    std::mt19937 rng(503);
    const Vec3 world_cp(0.4, -0.3, -1.6);
    const Pose t_i(yaw_matrix(0.3), Vec3(1.0, 0.5, 0.0));
    const Pose t_j(yaw_matrix(-0.2), Vec3(3.0, -0.5, 0.1));
    const PlaneCP in_i = transform_plane(PlaneCP(world_cp), t_i);
    const PlaneCP in_j = transform_plane(PlaneCP(world_cp), t_j);
    const Pose earlier_in_later = t_j.inverse() * t_i;

    const Mat3 cov_i = random_spd(rng, 5e-6, 5e-5);
    const Mat3 cov_j = random_spd(rng, 5e-6, 5e-5);

    double sum = 0.0;
    const int trials = 10000;
    for (int k = 0; k < trials; ++k) {
        const auto noisy_i = make_obs(in_i.cp() + sample_gaussian(rng, cov_i), cov_i);
        const auto noisy_j = make_obs(in_j.cp() + sample_gaussian(rng, cov_j), cov_j);
        sum += plane_innovation(noisy_i, noisy_j, earlier_in_later).mahalanobis;
    }
    const double mean = sum / trials;
    CHECK(mean > 2.7);
    CHECK(mean < 3.3);
}

TEST_CASE("innovation scalar is invariant to a common world transform") {
    std::mt19937 rng(509);
    const Vec3 world_cp(0.2, 0.7, -1.8);
    const Pose t_i(yaw_matrix(0.4), Vec3(0.5, 0.0, 0.1));
    const Pose t_j(yaw_matrix(0.9), Vec3(2.5, 1.0, -0.1));
    const auto obs_i = make_obs(transform_plane(PlaneCP(world_cp), t_i).cp(),
                                random_spd(rng, 1e-5, 1e-4));
    const auto obs_j = make_obs(transform_plane(PlaneCP(world_cp), t_j).cp() + Vec3(0.01, 0, 0.02),
                                random_spd(rng, 1e-5, 1e-4));

    const auto base = plane_innovation(obs_i, obs_j, t_j.inverse() * t_i);
    for (int k = 0; k < 20; ++k) {
        const Pose g = random_pose(rng, 10.0);
        const Pose rel = (g * t_j).inverse() * (g * t_i);
        const auto moved = plane_innovation(obs_i, obs_j, rel);
        CHECK(moved.mahalanobis ==
              doctest::Approx(base.mahalanobis).epsilon(1e-9));
    }
}

TEST_CASE("gate decision rules") {
    PlaneInnovation innov;
    innov.mahalanobis = 0.0;
    CHECK(associate_or_spawn(7, innov, kChiSquare95Dof3).same_plane);
    CHECK(associate_or_spawn(7, innov, kChiSquare95Dof3).landmark_id == 7);

    innov.mahalanobis = 100.0;
    CHECK_FALSE(associate_or_spawn(7, innov, kChiSquare95Dof3).same_plane);

    // boundary is inclusive
    innov.mahalanobis = kChiSquare95Dof3;
    CHECK(associate_or_spawn(3, innov, kChiSquare95Dof3).same_plane);

    // monotone in the gate
    innov.mahalanobis = 5.0;
    CHECK(associate_or_spawn(1, innov, 5.0).same_plane);
    CHECK(associate_or_spawn(1, innov, 50.0).same_plane);
    CHECK_FALSE(associate_or_spawn(1, innov, 4.999).same_plane);

    CHECK_THROWS_AS(associate_or_spawn(1, innov, 0.0), ConfigError);
}

TEST_CASE("degenerate covariances are flagged") {
    const auto obs_i = make_obs(Vec3(0, 0, -1.5), Mat3::Zero());
    const auto obs_j = make_obs(Vec3(0, 0, -1.5), Mat3::Zero());
    CHECK_THROWS_AS(plane_innovation(obs_i, obs_j, Pose()), NonInvertibleCovariance);
}

TEST_CASE("pose-noise inflation widens the covariance") {
    const Mat3 cov = 1e-4 * Mat3::Identity();
    const auto obs_i = make_obs(Vec3(0.02, 0, -1.5), cov);
    const auto obs_j = make_obs(Vec3(0, 0, -1.5), cov);
    const auto tight = plane_innovation(obs_i, obs_j, Pose());
    const auto wide = plane_innovation(obs_i, obs_j, Pose(), 1e-3);
    CHECK(wide.mahalanobis < tight.mahalanobis);
}

}  // TEST_SUITE
