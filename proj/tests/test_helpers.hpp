#pragma once

#include <random>

#include "gcslam/plane.hpp"
#include "gcslam/se3.hpp"

namespace gcslam::testing {

inline Vec3 random_unit(std::mt19937& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 v(g(rng), g(rng), g(rng));
    while (v.norm() < 1e-6) v = Vec3(g(rng), g(rng), g(rng));
    return v.normalized();
}

inline Mat3 random_rotation(std::mt19937& rng, double max_angle = M_PI * 0.95) {
    std::uniform_real_distribution<double> u(0.0, max_angle);
    return so3_exp(u(rng) * random_unit(rng));
}

inline Pose random_pose(std::mt19937& rng, double trans_scale = 5.0) {
    std::normal_distribution<double> g(0.0, trans_scale);
    return Pose(random_rotation(rng), Vec3(g(rng), g(rng), g(rng)));
}

inline Vec3 random_cp(std::mt19937& rng, double min_d = 0.5, double max_d = 20.0) {
    std::uniform_real_distribution<double> u(min_d, max_d);
    return u(rng) * random_unit(rng);
}

inline Mat3 yaw_matrix(double angle) {
    Mat3 r;
    r << std::cos(angle), -std::sin(angle), 0.0,
         std::sin(angle), std::cos(angle), 0.0,
         0.0, 0.0, 1.0;
    return r;
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline Mat3 random_spd(std::mt19937& rng, double lo = 1e-4, double hi = 1e-2) {
    std::uniform_real_distribution<double> u(lo, hi);
    const Mat3 r = random_rotation(rng);
    return r * Eigen::DiagonalMatrix<double, 3>(u(rng), u(rng), u(rng)) * r.transpose();
}

/// Draws a zero-mean sample with the given covariance.
inline Vec3 sample_gaussian(std::mt19937& rng, const Mat3& cov) {
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::LLT<Mat3> llt(cov);
    return llt.matrixL() * Vec3(g(rng), g(rng), g(rng));
}

}  // namespace gcslam::testing
