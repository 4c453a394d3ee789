#include <doctest.h>

#include <random>

#include "gcslam/plane.hpp"
#include "test_helpers.hpp"

using namespace gcslam;
using namespace gcslam::testing;

namespace {

/// Independent oracle: transform three non-collinear on-plane points with
/// the point map and refit the plane through them.
PlaneCP refit_oracle(const PlaneCP& plane, const Pose& pose_b_in_a) {
    const Vec3 n = plane.normal();
    Vec3 any = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 u = (any - any.dot(n) * n).normalized();
    const Vec3 v = n.cross(u);
    const Vec3 base = plane.cp();
    const Vec3 pa = base + 1.3 * u;
    const Vec3 pb = base - 0.7 * u + 2.1 * v;
    const Vec3 pc = base + 0.4 * u - 1.6 * v;
    // points in frame A map to frame B through the inverse of pose_b_in_a
    const Pose to_b = pose_b_in_a.inverse();
    const Vec3 qa = to_b.apply(pa), qb = to_b.apply(pb), qc = to_b.apply(pc);
    Vec3 nb = (qb - qa).cross(qc - qa).normalized();
    const double db = nb.dot(qa);
    return PlaneCP(db * nb);
}

Mat3 jacobian_fd(const PlaneCP& plane, const Pose& pose) {
    const double h = 1e-6 * std::max(1.0, plane.cp().norm());
    Mat3 jac;
    for (int c = 0; c < 3; ++c) {
        Vec3 dp = Vec3::Zero();
        dp[c] = h;
        const Vec3 plus = transform_plane(PlaneCP(plane.cp() + dp), pose).cp();
        const Vec3 minus = transform_plane(PlaneCP(plane.cp() - dp), pose).cp();
        jac.col(c) = (plus - minus) / (2.0 * h);
    }
    return jac;
}

}  // namespace

TEST_SUITE("plane") {

TEST_CASE("cp to hf worked examples") {
    const PlaneHF a = cp_to_hf(PlaneCP(Vec3(0, 0, -1.5)));
    CHECK((a.normal - Vec3(0, 0, -1)).norm() < 1e-12);
    CHECK(a.dist == doctest::Approx(1.5).epsilon(1e-12));

    const PlaneHF b = cp_to_hf(PlaneCP(Vec3(3, 0, 4)));
    CHECK((b.normal - Vec3(0.6, 0, 0.8)).norm() < 1e-12);
    CHECK(b.dist == doctest::Approx(5.0).epsilon(1e-12));

    CHECK_THROWS_AS(PlaneCP(Vec3(1e-3, 0, 0)), SingularPlane);
}

TEST_CASE("hf canonical sign flips a negative distance") {
    const PlaneHF hf(Vec3(0, 0, 1), -2.0);
    CHECK(hf.dist == doctest::Approx(2.0));
    CHECK((hf.normal - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("cp/hf round trip over the documented range") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> d(kCpMinNorm, 200.0);
    for (int k = 0; k < 300; ++k) {
        const Vec3 cp = d(rng) * random_unit(rng);
        const Vec3 back = hf_to_cp(cp_to_hf(PlaneCP(cp))).cp();
        CHECK((back - cp).norm() < 1e-12 * std::max(1.0, cp.norm()));
    }
}

TEST_CASE("transform_plane identity and worked example") {
    const PlaneCP floor(Vec3(0, 0, -1.5));
    CHECK((transform_plane(floor, Pose()).cp() - Vec3(0, 0, -1.5)).norm() == 0.0);

    const Pose up(Mat3::Identity(), Vec3(0, 0, 1));
    CHECK((transform_plane(floor, up).cp() - Vec3(0, 0, -2.5)).norm() < 1e-15);

    // oracle agreement on the same case
    CHECK((refit_oracle(floor, up).cp() - Vec3(0, 0, -2.5)).norm() < 1e-12);
}

TEST_CASE("pure yaw leaves a horizontal plane unchanged") {
    const PlaneCP floor(Vec3(0, 0, -1.5));
    std::mt19937 rng(43);
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    for (int k = 0; k < 20; ++k) {
        const Pose yaw(yaw_matrix(u(rng)), Vec3::Zero());
        CHECK((transform_plane(floor, yaw).cp() - floor.cp()).norm() < 1e-12);
    }
}

TEST_CASE("transform matches the three-point refit oracle") {
    std::mt19937 rng(47);
    for (int k = 0; k < 200; ++k) {
        const PlaneCP plane{random_cp(rng, 1.0, 30.0)};
        const Pose pose = random_pose(rng, 3.0);
        PlaneCP moved{Vec3::UnitZ()};
        try {
            moved = transform_plane(plane, pose);
        } catch (const SingularPlane&) {
            continue;
        }
        const PlaneCP oracle = refit_oracle(plane, pose);
        CHECK((moved.cp() - oracle.cp()).norm() < 1e-9 * std::max(1.0, oracle.cp().norm()));
    }
}

TEST_CASE("transform round-trips through the inverse pose") {
    std::mt19937 rng(53);
    for (int k = 0; k < 200; ++k) {
        const PlaneCP plane{random_cp(rng, 1.0, 30.0)};
        const Pose pose = random_pose(rng, 3.0);
        try {
            const PlaneCP there = transform_plane(plane, pose);
            const PlaneCP back = transform_plane(there, pose.inverse());
            CHECK((back.cp() - plane.cp()).norm() < 1e-9 * std::max(1.0, plane.cp().norm()));
        } catch (const SingularPlane&) {
        }
    }
}

TEST_CASE("transform obeys the composition law") {
    std::mt19937 rng(59);
    int checked = 0;
    for (int k = 0; k < 300 && checked < 100; ++k) {
        const PlaneCP plane{random_cp(rng, 2.0, 30.0)};
        const Pose t1 = random_pose(rng, 2.0), t2 = random_pose(rng, 2.0);
        try {
            const Vec3 direct = transform_plane(plane, compose(t1, t2)).cp();
            const Vec3 chained = transform_plane(transform_plane(plane, t1), t2).cp();
            CHECK((direct - chained).norm() < 1e-9 * std::max(1.0, direct.norm()));
            ++checked;
        } catch (const SingularPlane&) {
        }
    }
    CHECK(checked == 100);
}

TEST_CASE("on-plane points stay on the transformed plane") {
    std::mt19937 rng(61);
    std::normal_distribution<double> g(0.0, 4.0);
    int checked = 0;
    for (int k = 0; k < 300 && checked < 100; ++k) {
        const PlaneCP plane{random_cp(rng, 1.0, 20.0)};
        const Pose pose = random_pose(rng, 3.0);
        try {
            const PlaneHF moved = cp_to_hf(transform_plane(plane, pose));
            const Vec3 n = plane.normal();
            const Vec3 u = (std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(n).normalized();
            const Vec3 v = n.cross(u);
            for (int j = 0; j < 5; ++j) {
                const Vec3 p_a = plane.cp() + g(rng) * u + g(rng) * v;
                const Vec3 p_b = pose.inverse().apply(p_a);
                CHECK(std::abs(moved.normal.dot(p_b) - moved.dist) < 1e-9);
            }
            ++checked;
        } catch (const SingularPlane&) {
        }
    }
    CHECK(checked == 100);
}

TEST_CASE("transform jacobian special cases") {
    const PlaneCP plane(Vec3(0.3, -0.2, -1.7));
    CHECK((transform_plane_jacobian(plane, Pose()) - Mat3::Identity()).norm() < 1e-12);

    std::mt19937 rng(67);
    for (int k = 0; k < 20; ++k) {
        const Mat3 r = random_rotation(rng);
        const Pose rot_only(r, Vec3::Zero());
        CHECK((transform_plane_jacobian(plane, rot_only) - r.transpose()).norm() < 1e-12);
    }
}

TEST_CASE("transform jacobian matches central differences") {
    std::mt19937 rng(71);
    int checked = 0;
    double worst = 0.0;
    while (checked < 1000) {
        const PlaneCP plane{random_cp(rng, 1.0, 30.0)};
        const Pose pose = random_pose(rng, 3.0);
        try {
            const Mat3 analytic = transform_plane_jacobian(plane, pose);
            const Mat3 numeric = jacobian_fd(plane, pose);
            const double rel = (analytic - numeric).norm() / std::max(1.0, numeric.norm());
            worst = std::max(worst, rel);
            ++checked;
        } catch (const SingularPlane&) {
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("singular transforms are rejected") {
    // plane through the new origin: sensor dropped onto the floor plane
    const PlaneCP floor(Vec3(0, 0, -1.5));
    const Pose onto_floor(Mat3::Identity(), Vec3(0, 0, -1.5));
    CHECK_THROWS_AS(transform_plane(floor, onto_floor), SingularPlane);
}

}  // TEST_SUITE
