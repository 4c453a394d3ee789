#pragma once

#include "gcslam/ground.hpp"
#include "gcslam/plane.hpp"
#include "gcslam/se3.hpp"

namespace gcslam {

/// 0.95 quantile of chi-square with 3 degrees of freedom.
inline constexpr double kChiSquare95Dof3 = 7.815;

struct PlaneInnovation {
    Vec3 delta = Vec3::Zero();
    Mat3 information = Mat3::Zero();
    double mahalanobis = 0.0;
};

/// Relative CP change between two consecutive key-frames' ground
/// observations, whitened by the propagated fit uncertainties.
///
/// `earlier_in_later` is the pose of the earlier key-frame expressed in the
/// later key-frame's sensor frame (the transform that carries earlier-frame
/// points into the later frame). The relative-pose uncertainty is neglected;
/// pose_noise_inflation adds an isotropic variance term instead when the
/// caller wants robustness against that assumption.
inline PlaneInnovation plane_innovation(const GroundObservation& earlier,
                                        const GroundObservation& later,
                                        const Pose& earlier_in_later,
                                        double pose_noise_inflation = 0.0) {
    const PlaneCP predicted = transform_plane(later.plane, earlier_in_later);
    const Mat3 f_jac = transform_plane_jacobian(later.plane, earlier_in_later);

    PlaneInnovation innov;
    innov.delta = earlier.plane.cp() - predicted.cp();
    Mat3 cov = earlier.covariance + f_jac * later.covariance * f_jac.transpose();
    if (pose_noise_inflation > 0.0) cov += pose_noise_inflation * Mat3::Identity();

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.eigenvalues().minCoeff() <= 0.0)
        throw NonInvertibleCovariance();
    innov.information = eig.eigenvectors() *
                        eig.eigenvalues().cwiseInverse().asDiagonal() *
                        eig.eigenvectors().transpose();
    innov.mahalanobis = innov.delta.dot(innov.information * innov.delta);
    return innov;
}

struct AssociationDecision {
    bool same_plane = false;
    int landmark_id = -1;  // the retained landmark when same_plane
};

/// Same landmark iff the whitened innovation is inside the gate (inclusive);
/// otherwise a fresh landmark is spawned by the caller.
inline AssociationDecision associate_or_spawn(int prev_landmark_id,
                                              const PlaneInnovation& innovation, double gate) {
    if (gate <= 0.0) throw ConfigError("association gate must be positive");
    if (innovation.mahalanobis <= gate) return {true, prev_landmark_id};
    return {false, -1};
}

}  // namespace gcslam
