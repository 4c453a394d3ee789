#include <doctest.h>

#include <random>

#include "gcslam/sim.hpp"
#include "test_helpers.hpp"

using namespace gcslam;
using namespace gcslam::testing;

namespace {

WorldModel single_floor(double z = 0.0, double extent = 200.0) {
    WorldModel w;
    w.surfaces.push_back(make_floor(-extent, extent, -extent, extent, z));
    return w;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("bias model anchor points") {
    CHECK(bias(0.0, 0.2) == 0.0);
    CHECK(bias(M_PI / 4, 0.2) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(bias(M_PI / 2 - 1e-6, 0.2) == doctest::Approx(0.2).epsilon(1e-5));
    CHECK(bias(85.0 * M_PI / 180.0, 0.2) == doctest::Approx(0.19848).epsilon(1e-3));

    // monotone non-decreasing on [0, pi/2)
    for (const auto model : {BiasModel::Sin2, BiasModel::OneMinusCos, BiasModel::Quadratic}) {
        double prev = -1.0;
        for (double a = 0.0; a < M_PI / 2; a += 0.01) {
            const double b = bias(a, 0.2, model);
            CHECK(b >= prev);
            prev = b;
        }
        CHECK(bias(0.0, 0.2, model) == 0.0);
    }
}

TEST_CASE("noiseless floor returns sit exactly on the plane") {
    SensorModel sensor;
    sensor.range_noise_sigma = 0.0;
    sensor.bias_max = 0.0;
    const Pose pose(Mat3::Identity(), Vec3(0, 0, 1.5));
    const auto sim = raycast_scan(single_floor(), sensor, pose);
    REQUIRE(sim.scan.size() > 500);
    for (const auto& p : sim.scan.points) CHECK(std::abs(p.z() + 1.5) < 1e-9);
}

TEST_CASE("normal incidence carries no bias even when bias_max is large") {
    WorldModel w;
    // wall dead ahead, normal facing the sensor
    w.surfaces.push_back(make_wall({5.0, -10.0}, {5.0, 10.0}, -5.0, 5.0));
    SensorModel sensor;
    sensor.range_noise_sigma = 0.0;
    sensor.bias_max = 0.2;
    sensor.n_beams_vertical = 1;
    sensor.vertical_fov_min = sensor.vertical_fov_max = 0.0;
    const auto sim = raycast_scan(w, sensor, Pose());
    REQUIRE(!sim.scan.empty());
    // the beam straight along +x hits at normal incidence: range stays 5
    double best_abs_azim = 1e9;
    Vec3 frontal;
    double frontal_incidence = 0.0;
    for (std::size_t i = 0; i < sim.scan.size(); ++i) {
        const double azim = std::atan2(sim.scan.points[i].y(), sim.scan.points[i].x());
        if (std::abs(azim) < best_abs_azim) {
            best_abs_azim = std::abs(azim);
            frontal = sim.scan.points[i];
            frontal_incidence = sim.incidence[i];
        }
    }
    CHECK(frontal.norm() ==
          doctest::Approx(5.0 / std::cos(best_abs_azim) + bias(frontal_incidence, 0.2))
              .epsilon(1e-9));
    CHECK(bias(frontal_incidence, 0.2) < 1e-3);
}

TEST_CASE("range bias pushes floor returns below the true plane by bias*cos(incidence)") {
    SensorModel sensor;
    sensor.range_noise_sigma = 0.0;
    sensor.bias_max = 0.2;
    const Pose pose(Mat3::Identity(), Vec3(0, 0, 1.5));
    const auto sim = raycast_scan(single_floor(), sensor, pose);
    int grazing = 0;
    for (std::size_t i = 0; i < sim.scan.size(); ++i) {
        const double inc = sim.incidence[i];
        const double expected_z = -1.5 - bias(inc, 0.2) * std::cos(inc);
        CHECK(sim.scan.points[i].z() == doctest::Approx(expected_z).epsilon(1e-9));
        if (inc > 80.0 * M_PI / 180.0 && inc < 86.0 * M_PI / 180.0) {
            ++grazing;
            CHECK(sim.scan.points[i].z() < -1.5 - 0.005);
        }
    }
    CHECK(grazing > 50);
}

TEST_CASE("same seed gives bit-identical scans, different salt differs") {
    SensorModel sensor;
    sensor.range_noise_sigma = 0.02;
    const Pose pose(Mat3::Identity(), Vec3(0, 0, 1.5));
    const auto a = raycast_scan(single_floor(), sensor, pose, 7);
    const auto b = raycast_scan(single_floor(), sensor, pose, 7);
    REQUIRE(a.scan.size() == b.scan.size());
    for (std::size_t i = 0; i < a.scan.size(); ++i)
        CHECK(a.scan.points[i] == b.scan.points[i]);

    const auto c = raycast_scan(single_floor(), sensor, pose, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < std::min(a.scan.size(), c.scan.size()); ++i)
        if (a.scan.points[i] != c.scan.points[i]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("trajectory interpolation is piecewise constant-velocity") {
    TrajectorySpec spec;
    spec.add(0.0, Pose(Mat3::Identity(), Vec3(0, 0, 0)));
    spec.add(2.0, Pose(yaw_matrix(1.0), Vec3(4, 0, 0)));
    const Pose mid = spec.sample(1.0);
    CHECK((mid.translation() - Vec3(2, 0, 0)).norm() < 1e-12);
    CHECK((mid.rotation() - yaw_matrix(0.5)).norm() < 1e-12);
    CHECK_THROWS_AS(spec.sample(2.5), OutOfSpan);
    CHECK_THROWS_AS(spec.add(1.5, Pose()), ConfigError);
}

TEST_CASE("motion prior contracts") {
    TrajectorySpec spec;
    spec.add(0.0, Pose(Mat3::Identity(), Vec3(0, 0, 0)));
    spec.add(10.0, Pose(yaw_matrix(0.5), Vec3(20, 0, 0)));

    MotionNoise none;
    const Pose exact = motion_prior(spec, 1.0, 2.0, none, 5);
    const Pose expected = spec.sample(1.0).inverse() * spec.sample(2.0);
    CHECK(exact.is_approx(expected, 1e-12));

    MotionNoise noisy{0.01, 0.05};
    CHECK(motion_prior(spec, 3.0, 3.0, noisy, 5).is_approx(Pose(), 1e-15));
    const Pose p1 = motion_prior(spec, 1.0, 2.0, noisy, 77);
    const Pose p2 = motion_prior(spec, 1.0, 2.0, noisy, 77);
    CHECK(p1.rotation() == p2.rotation());
    CHECK(p1.translation() == p2.translation());
    CHECK_FALSE(p1.is_approx(exact, 1e-6));

    CHECK_THROWS_AS(motion_prior(spec, -1.0, 2.0, none, 5), OutOfSpan);
}

TEST_CASE("corridor scenario builds the documented surfaces") {
    ScenarioParams p;
    p.length = 100.0;
    const Scenario sc = generate_scenario("corridor", p);
    int floors = 0, walls = 0, ceilings = 0;
    for (const auto& s : sc.world.surfaces) {
        CHECK(s.area() > 0.0);
        if (s.tag == SurfacePatch::Tag::Floor) {
            ++floors;
            CHECK(s.normal().z() > 0.999);
        }
        if (s.tag == SurfacePatch::Tag::Wall) ++walls;
        if (s.tag == SurfacePatch::Tag::Ceiling) ++ceilings;
    }
    CHECK(floors == 1);
    CHECK(walls >= 2);
    CHECK(ceilings == 1);
    CHECK(sc.trajectory.end_time() > sc.trajectory.start_time());
}

TEST_CASE("two-floor garage has exactly two parallel floor planes at the given spacing") {
    ScenarioParams p;
    p.floor_spacing = 3.0;
    const Scenario sc = generate_scenario("two_floor_garage", p);
    // floor patches may be split around the ramp cutout; collect the
    // distinct planes they lie on
    std::vector<double> levels;
    for (const auto& s : sc.world.surfaces) {
        if (s.tag != SurfacePatch::Tag::Floor) continue;
        CHECK((s.normal() - Vec3::UnitZ()).norm() < 1e-12);
        const double z = s.center.z();
        bool known = false;
        for (double l : levels)
            if (std::abs(l - z) < 1e-9) known = true;
        if (!known) levels.push_back(z);
    }
    REQUIRE(levels.size() == 2);
    CHECK(std::abs(levels[0] - levels[1]) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("scenario names and parameter ranges are validated") {
    CHECK_THROWS_AS(generate_scenario("warehouse"), UnknownScenario);
    ScenarioParams bad;
    bad.length = 3.0;
    CHECK_THROWS_AS(generate_scenario("corridor", bad), ConfigError);
    CHECK_NOTHROW(generate_scenario("square_loop"));
    CHECK_NOTHROW(generate_scenario("bowl_road"));
    CHECK_NOTHROW(generate_scenario("ramp_junction"));
}

TEST_CASE("sequence generation: zero prior noise reproduces ground truth increments") {
    ScenarioParams p;
    p.length = 12.0;
    const Scenario sc = generate_scenario("corridor", p);
    SensorModel sensor;
    sensor.n_beams_vertical = 8;
    sensor.horizontal_step = 15.0 * M_PI / 180.0;
    const auto seq = simulate_sequence(sc, sensor, MotionNoise{}, 11);
    REQUIRE(seq.scans.size() == seq.ground_truth.size());
    REQUIRE(seq.scans.size() == seq.prior.size());
    const Pose g0 = seq.ground_truth.front().pose;
    for (std::size_t k = 0; k < seq.prior.size(); ++k) {
        const Pose expect = g0.inverse() * seq.ground_truth[k].pose;
        CHECK(seq.prior[k].pose.is_approx(expect, 1e-9));
    }
}

}  // TEST_SUITE
