#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gcslam/errors.hpp"

namespace gcslam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// skew(v) * u == v x u
inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

/// Rodrigues formula with a second-order series below 1e-6 rad.
inline Mat3 so3_exp(const Vec3& w) {
    const double theta = w.norm();
    const Mat3 wx = skew(w);
    if (theta < 1e-6) {
        return Mat3::Identity() + wx + 0.5 * wx * wx;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * wx + b * wx * wx;
}

inline Vec3 vee(const Mat3& m) {
    return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

/// Inverse of Rodrigues. Near angle pi the sine expression degenerates,
/// so the axis is recovered from R + I instead.
inline Vec3 so3_log(const Mat3& r) {
    const double cos_theta = std::min(1.0, std::max(-1.0, (r.trace() - 1.0) * 0.5));
    const double theta = std::acos(cos_theta);
    if (theta < 1e-6) {
        // log(R) ~ vee(R - R^T)/2 for small angles
        return vee(r - r.transpose()) * 0.5;
    }
    if (theta > M_PI - 1e-4) {
        // columns of (R + I) are parallel to the rotation axis
        const Mat3 m = r + Mat3::Identity();
        int best = 0;
        for (int c = 1; c < 3; ++c)
            if (m.col(c).squaredNorm() > m.col(best).squaredNorm()) best = c;
        Vec3 axis = m.col(best).normalized();
        // fix the sign from the antisymmetric part where it is still informative
        const Vec3 v = vee(r - r.transpose());
        if (v.dot(axis) < 0.0) axis = -axis;
        return theta * axis;
    }
    return theta / (2.0 * std::sin(theta)) * vee(r - r.transpose());
}

/// Closest rotation matrix in the Frobenius sense (polar factor).
inline Mat3 orthonormalize_rotation(const Mat3& r) {
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (u * v.transpose()).determinant() > 0.0 ? 1.0 : -1.0;
    return u * d * v.transpose();
}

/// Rigid transform. Acts on points as q = R p + t.
///
/// A pose built from a quaternion remembers it, so text formats that store
/// quaternions can round-trip bit-exactly (matrix-to-quaternion conversion
/// is not bitwise stable).
class Pose {
public:
    Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

    Pose(const Mat3& rotation, const Vec3& translation)
        : rotation_(rotation), translation_(translation) {
        renormalize_if_drifted();
    }

    static Pose identity() { return Pose(); }

    static Pose from_rt(const Mat3& r, const Vec3& t) { return Pose(r, t); }

    static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
        Pose p(q.toRotationMatrix(), t);
        Eigen::Quaterniond canon = q;
        if (canon.w() < 0.0) canon.coeffs() = -canon.coeffs();
        p.cached_quat_ = canon.coeffs();
        p.has_cached_quat_ = true;
        return p;
    }

    /// Canonical (w >= 0) quaternion of the rotation; bit-exact when the
    /// pose was built from a quaternion.
    Eigen::Quaterniond quaternion() const {
        if (has_cached_quat_)
            return Eigen::Quaterniond(cached_quat_[3], cached_quat_[0], cached_quat_[1],
                                      cached_quat_[2]);
        Eigen::Quaterniond q(rotation_);
        if (q.w() < 0.0) q.coeffs() = -q.coeffs();
        return q;
    }

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

    /// compose(a, b) applies b first, then a.
    friend Pose compose(const Pose& a, const Pose& b) {
        return Pose(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_);
    }

    Pose operator*(const Pose& other) const { return compose(*this, other); }

    Pose inverse() const {
        const Mat3 rt = rotation_.transpose();
        return Pose(rt, -(rt * translation_));
    }

    double rotation_angle() const { return so3_log(rotation_).norm(); }

    bool is_approx(const Pose& other, double tol = 1e-9) const {
        return (rotation_ - other.rotation_).norm() < tol &&
               (translation_ - other.translation_).norm() < tol;
    }

private:
    void renormalize_if_drifted() {
        const double drift = (rotation_.transpose() * rotation_ - Mat3::Identity()).norm();
        if (drift > 1e-9) rotation_ = orthonormalize_rotation(rotation_);
    }

    Mat3 rotation_;
    Vec3 translation_;
    Eigen::Vector4d cached_quat_ = Eigen::Vector4d::Zero();  // x y z w
    bool has_cached_quat_ = false;
};

/// Two-block pose uncertainty: a 3x3 covariance over left so(3)
/// perturbations and a 3x3 covariance over translation.
struct PoseCovariance {
    Mat3 rot_cov = Mat3::Zero();
    Mat3 trans_cov = Mat3::Zero();

    static PoseCovariance zero() { return {}; }

    static PoseCovariance isotropic(double rot_var, double trans_var) {
        PoseCovariance c;
        c.rot_cov = rot_var * Mat3::Identity();
        c.trans_cov = trans_var * Mat3::Identity();
        return c;
    }

    PoseCovariance operator+(const PoseCovariance& o) const {
        PoseCovariance c;
        c.rot_cov = rot_cov + o.rot_cov;
        c.trans_cov = trans_cov + o.trans_cov;
        return c;
    }

    double trace() const { return rot_cov.trace() + trans_cov.trace(); }
};

/// Covariance of inverse(T) given the covariance of T, both under left
/// so(3) + translation perturbations. Cross blocks are dropped.
inline PoseCovariance invert_covariance(const Pose& t, const PoseCovariance& cov) {
    const Mat3 rt = t.rotation().transpose();
    const Mat3 tx = skew(t.translation());
    PoseCovariance out;
    out.rot_cov = rt * cov.rot_cov * rt.transpose();
    out.trans_cov = rt * (cov.trans_cov + tx * cov.rot_cov * tx.transpose()) * rt.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// TUM trajectory format: "timestamp tx ty tz qx qy qz qw", '#' comments.
// ---------------------------------------------------------------------------

struct StampedPose {
    double timestamp = 0.0;
    Pose pose;
};

using Trajectory = std::vector<StampedPose>;

inline Pose pose_from_quaternion(double qx, double qy, double qz, double qw, const Vec3& t) {
    Eigen::Quaterniond q(qw, qx, qy, qz);
    q.normalize();
    return Pose::from_quaternion(q, t);
}

inline Trajectory read_tum(std::istream& in) {
    Trajectory out;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
            throw IoError("malformed TUM line: " + line);
        out.push_back({ts, pose_from_quaternion(qx, qy, qz, qw, Vec3(tx, ty, tz))});
    }
    return out;
}

inline Trajectory read_tum_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory file: " + path);
    return read_tum(in);
}

inline void write_tum(std::ostream& out, const Trajectory& traj) {
    for (const auto& sp : traj) {
        const Eigen::Quaterniond q = sp.pose.quaternion();
        const Vec3& t = sp.pose.translation();
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n",
                      sp.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
        out << buf;
    }
}

inline void write_tum_file(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trajectory file: " + path);
    write_tum(out, traj);
}

}  // namespace gcslam
