#pragma once

#include <cmath>

#include "gcslam/se3.hpp"

namespace gcslam {

/// Planes closer than this to the frame origin are rejected: the
/// closest-point parameterization degenerates there. Ground planes seen
/// from a vehicle-mounted sensor stay well above this bound.
inline constexpr double kCpMinNorm = 0.1;

/// Infinite plane as the point on it closest to the frame origin.
class PlaneCP {
public:
    explicit PlaneCP(const Vec3& cp, double min_norm = kCpMinNorm) : cp_(cp) {
        if (cp_.norm() < min_norm) throw SingularPlane();
    }

    const Vec3& cp() const { return cp_; }
    double distance() const { return cp_.norm(); }
    Vec3 normal() const { return cp_.normalized(); }

    /// Signed distance of a point to the plane.
    double point_distance(const Vec3& p) const {
        const double d = cp_.norm();
        return p.dot(cp_) / d - d;
    }

private:
    Vec3 cp_;
};

/// Hesse form: unit normal plus distance, canonicalized to dist >= 0 so
/// the conversion to and from CP is a bijection away from the singularity.
struct PlaneHF {
    Vec3 normal = Vec3::UnitZ();
    double dist = 0.0;

    PlaneHF() = default;
    PlaneHF(const Vec3& n, double d) {
        normal = n.normalized();
        dist = d;
        if (dist < 0.0) {
            normal = -normal;
            dist = -dist;
        }
    }
};

inline PlaneHF cp_to_hf(const PlaneCP& p) {
    const double d = p.cp().norm();
    return PlaneHF(p.cp() / d, d);
}

inline PlaneCP hf_to_cp(const PlaneHF& hf, double min_norm = kCpMinNorm) {
    return PlaneCP(hf.dist * hf.normal, min_norm);
}

/// Transforms a plane expressed in frame A into frame B.
///
/// `pose_b_in_a` is the pose of frame B expressed in frame A, i.e. the
/// transform that maps B coordinates into A coordinates. With
/// plane (0,0,-1.5) in A and B one meter above A (R = I, t = (0,0,1)),
/// the result is (0,0,-2.5).
inline PlaneCP transform_plane(const PlaneCP& plane_a, const Pose& pose_b_in_a,
                               double min_norm = kCpMinNorm) {
    const PlaneHF hf_a = cp_to_hf(plane_a);
    const Vec3 n_b = pose_b_in_a.rotation().transpose() * hf_a.normal;
    const double d_b = hf_a.dist - hf_a.normal.dot(pose_b_in_a.translation());
    return PlaneCP(d_b * n_b, min_norm);
}

/// Derivative of transform_plane with respect to the source CP vector,
/// evaluated at `plane_a`.
inline Mat3 transform_plane_jacobian(const PlaneCP& plane_a, const Pose& pose_b_in_a) {
    const Mat3 rt = pose_b_in_a.rotation().transpose();
    const Vec3& t = pose_b_in_a.translation();
    const Vec3& cp = plane_a.cp();
    const double n2 = cp.squaredNorm();
    const double cp_dot_t = cp.dot(t);
    return rt
         - (rt * cp * t.transpose() + cp_dot_t * rt) / n2
         + (2.0 * cp_dot_t / (n2 * n2)) * (rt * cp) * cp.transpose();
}

/// Angle between two plane normals, sign-insensitive.
inline double plane_normal_angle(const PlaneCP& a, const PlaneCP& b) {
    const double c = std::min(1.0, std::abs(a.normal().dot(b.normal())));
    return std::acos(c);
}

}  // namespace gcslam
