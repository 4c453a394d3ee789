#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "gcslam/registration.hpp"
#include "test_helpers.hpp"

using namespace gcslam;
using namespace gcslam::testing;

namespace {

/// Three orthogonal planes meeting at a corner: z=0, x=0, y=0 grids.
std::vector<Vec3> corner_cloud(double extent = 5.0, double spacing = 0.25) {
    std::vector<Vec3> pts;
    for (double a = 0.0; a <= extent; a += spacing)
        for (double b = 0.0; b <= extent; b += spacing) {
            pts.emplace_back(a, b, 0.0);
            pts.emplace_back(0.0, a, b + spacing);
            pts.emplace_back(a + spacing, 0.0, b + spacing);
        }
    return pts;
}

std::vector<Vec3> flat_grid(double extent = 6.0, double spacing = 0.25, double z = 0.0) {
    std::vector<Vec3> pts;
    for (double a = -extent; a <= extent; a += spacing)
        for (double b = -extent; b <= extent; b += spacing) pts.emplace_back(a, b, z);
    return pts;
}

/// Room-like cloud: floor, two walls, one pillar. Denser and closer to a
/// real indoor scan than the bare corner.
std::vector<Vec3> room_cloud() {
    std::vector<Vec3> pts = flat_grid(6.0, 0.2, -1.5);
    for (double a = -6.0; a <= 6.0; a += 0.2)
        for (double z = -1.5; z <= 1.5; z += 0.2) {
            pts.emplace_back(a, 6.0, z);
            pts.emplace_back(-6.0, a, z);
        }
    for (double a = -0.4; a <= 0.4; a += 0.2)
        for (double z = -1.5; z <= 1.0; z += 0.2) {
            pts.emplace_back(3.0 + a, 1.6, z);
            pts.emplace_back(3.0 + a, 2.4, z);
            pts.emplace_back(2.6, 2.0 + a, z);
            pts.emplace_back(3.4, 2.0 + a, z);
        }
    return pts;
}

Scan scan_from(const std::vector<Vec3>& pts, double sigma = 0.0, std::mt19937* rng = nullptr) {
    Scan s;
    std::normal_distribution<double> g(0.0, sigma);
    for (const auto& p : pts) {
        Vec3 q = p;
        if (rng && sigma > 0.0) q += Vec3(g(*rng), g(*rng), g(*rng));
        s.push_back(q, Mat3::Identity() * 1e-6);
    }
    return s;
}

SlidingMap map_from(const std::vector<Vec3>& pts) {
    SlidingMap m;
    for (const auto& p : pts) m.points.push_back({p, Mat3::Identity() * 1e-6, 0});
    return m;
}

std::vector<Vec3> subsample(const std::vector<Vec3>& pts, int stride) {
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < pts.size(); i += stride) out.push_back(pts[i]);
    return out;
}

}  // namespace

TEST_SUITE("registration") {

TEST_CASE("self-registration returns identity and converges") {
    const auto cloud = corner_cloud();
    RegistrationTarget target(map_from(cloud));
    const Scan source = scan_from(subsample(cloud, 2));

    const auto res = register_point_to_plane(source, target, Pose());
    CHECK(res.converged);
    CHECK(res.transform.translation().norm() < 1e-8);
    CHECK((res.transform.rotation() - Mat3::Identity()).norm() < 1e-8);
    CHECK(res.rms_residual < 1e-9);
}

TEST_CASE("recovers a known translation of the target") {
    const auto cloud = corner_cloud();
    std::vector<Vec3> shifted = cloud;
    for (auto& p : shifted) p += Vec3(0.1, 0.0, 0.0);
    RegistrationTarget target(map_from(shifted));
    const Scan source = scan_from(cloud);

    const auto res = register_point_to_plane(source, target, Pose());
    CHECK(res.converged);
    CHECK((res.transform.translation() - Vec3(0.1, 0.0, 0.0)).norm() < 1e-6);
    CHECK((res.transform.rotation() - Mat3::Identity()).norm() < 1e-6);
}

TEST_CASE("tiny source scan is rejected") {
    const auto cloud = corner_cloud();
    RegistrationTarget target(map_from(cloud));
    Scan source = scan_from({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)});
    CHECK_THROWS_AS(register_point_to_plane(source, target, Pose()),
                    InsufficientCorrespondences);
}

TEST_CASE("collinear target geometry fails normal estimation") {
    std::vector<Vec3> line;
    for (int k = 0; k < 120; ++k) line.emplace_back(0.1 * k, 0.0, 0.0);
    RegistrationTarget target(map_from(line));
    const Scan source = scan_from(subsample(line, 2));
    CHECK_THROWS_AS(register_point_to_plane(source, target, Pose()), DegenerateNormals);
}

TEST_CASE("identity recovered from any initial guess inside the basin") {
    const auto cloud = room_cloud();
    RegistrationTarget target(map_from(cloud));
    const Scan source = scan_from(subsample(cloud, 3));

    std::mt19937 rng(211);
    std::uniform_real_distribution<double> ut(0.0, 0.29), ua(0.0, 9.5 * M_PI / 180.0);
    for (int k = 0; k < 20; ++k) {
        const Pose init(so3_exp(ua(rng) * random_unit(rng)), ut(rng) * random_unit(rng));
        const auto res = register_point_to_plane(source, target, init);
        CHECK(res.converged);
        CHECK(res.transform.translation().norm() < 1e-6);
        CHECK((res.transform.rotation() - Mat3::Identity()).norm() < 1e-6);
    }
}

TEST_CASE("result is bit-identical under source point permutation") {
    const auto cloud = corner_cloud();
    RegistrationTarget target(map_from(cloud));

    std::mt19937 rng(223);
    auto pts = subsample(cloud, 2);
    Scan a = scan_from(pts, 0.005, &rng);
    Scan b = a;
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        b.points[i] = a.points[perm[i]];
        b.covariances[i] = a.covariances[perm[i]];
    }

    const Pose init(so3_exp(Vec3(0.0, 0.0, 0.01)), Vec3(0.02, -0.01, 0.0));
    const auto ra = register_point_to_plane(a, target, init);
    const auto rb = register_point_to_plane(b, target, init);
    CHECK(ra.transform.rotation() == rb.transform.rotation());
    CHECK(ra.transform.translation() == rb.transform.translation());
    CHECK(ra.rms_residual == rb.rms_residual);
}

TEST_CASE("covariance of a single-plane system clamps the three free directions") {
    // analytic normal matrix over a flat grid: rows J = [(q x n); n], n = +z
    const auto grid = flat_grid();
    Mat6 h = Mat6::Zero();
    for (const auto& q : grid) {
        Vec6 j;
        j.head<3>() = q.cross(Vec3::UnitZ());
        j.tail<3>() = Vec3::UnitZ();
        h += j * j.transpose();
    }
    const auto est = estimate_registration_covariance(h, 1e-4, 1e-6);
    CHECK(est.clamped_directions == 3);

    // unconstrained: x translation, y translation, yaw
    CHECK(est.covariance.trans_cov(0, 0) > 1e3 * est.covariance.trans_cov(2, 2));
    CHECK(est.covariance.trans_cov(1, 1) > 1e3 * est.covariance.trans_cov(2, 2));
    CHECK(est.covariance.rot_cov(2, 2) > 1e3 * est.covariance.rot_cov(0, 0));
}

TEST_CASE("covariance scales exactly with residual variance and is symmetric PSD") {
    const auto cloud = corner_cloud();
    Mat6 h = Mat6::Zero();
    std::mt19937 rng(227);
    for (const auto& q : cloud) {
        const Vec3 n = random_unit(rng);
        Vec6 j;
        j.head<3>() = q.cross(n);
        j.tail<3>() = n;
        h += j * j.transpose();
    }
    const auto one = estimate_registration_covariance(h, 2e-4);
    const auto two = estimate_registration_covariance(h, 4e-4);
    CHECK((two.covariance.rot_cov - 2.0 * one.covariance.rot_cov).norm() <
          1e-12 * one.covariance.rot_cov.norm() + 1e-18);
    CHECK((two.covariance.trans_cov - 2.0 * one.covariance.trans_cov).norm() <
          1e-12 * one.covariance.trans_cov.norm() + 1e-18);

    const auto zero = estimate_registration_covariance(h, 0.0);
    CHECK(zero.covariance.rot_cov.norm() == 0.0);
    CHECK(zero.covariance.trans_cov.norm() == 0.0);

    Eigen::SelfAdjointEigenSolver<Mat3> er(one.covariance.rot_cov);
    Eigen::SelfAdjointEigenSolver<Mat3> et(one.covariance.trans_cov);
    CHECK(er.eigenvalues().minCoeff() >= 0.0);
    CHECK(et.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("corner geometry covariance matches Monte-Carlo within factor 3") {
    const auto base = corner_cloud(5.0, 0.2);
    RegistrationTarget target(map_from(base));
    const auto src_pts = subsample(base, 2);

    std::mt19937 rng(229);
    const double sigma = 0.01;

    PoseCovariance censi;
    Mat3 mc_rot = Mat3::Zero(), mc_trans = Mat3::Zero();
    const int trials = 30;
    for (int t = 0; t < trials; ++t) {
        const Scan source = scan_from(src_pts, sigma, &rng);
        const auto res = register_point_to_plane(source, target, Pose());
        REQUIRE(res.converged);
        if (t == 0) {
            censi = res.covariance;
            CHECK(censi.rot_cov.trace() + censi.trans_cov.trace() < 1e-3);
        }
        const Vec3 w = so3_log(res.transform.rotation());
        const Vec3 dt = res.transform.translation();
        mc_rot += w * w.transpose();
        mc_trans += dt * dt.transpose();
    }
    mc_rot /= trials;
    mc_trans /= trials;

    const double rot_ratio = mc_rot.trace() / censi.rot_cov.trace();
    const double trans_ratio = mc_trans.trace() / censi.trans_cov.trace();
    CHECK(rot_ratio > 1.0 / 3.0);
    CHECK(rot_ratio < 3.0);
    CHECK(trans_ratio > 1.0 / 3.0);
    CHECK(trans_ratio < 3.0);
}

}  // TEST_SUITE
