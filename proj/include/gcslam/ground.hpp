#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gcslam/plane.hpp"
#include "gcslam/se3.hpp"
#include "gcslam/sliding_map.hpp"

namespace gcslam {

struct GroundCandidate {
    Vec3 point;
    Mat3 covariance;
};

/// A fitted ground plane at a key-frame: CP parameter in the key-frame's
/// sensor frame plus the fit covariance.
struct GroundObservation {
    PlaneCP plane;
    Mat3 covariance = Mat3::Zero();
    int support_count = 0;
    double mean_residual = 0.0;
};

struct GroundConfig {
    double box_xy = 10.0;          // half extent of the candidate box, meters
    double band = 0.5;             // half height of the candidate band, meters
    double ground_z_prior = -1.5;  // expected ground height in the sensor frame
    int min_ground_points = 100;
    int ransac_iterations = 200;
    double ransac_inlier_dist = 0.05;
    std::uint64_t ransac_seed = 13;
    int wls_max_iter = 20;
    double wls_update_tol = 1e-8;
    double wls_fail_tol = 1e-4;
    double max_tilt_deg = 35.0;    // reject fits whose normal leans past this
    double fit_max_offset = 0.3;   // reject fits far from the expected ground height
    double cp_min_norm = kCpMinNorm;
};

/// Points inside a sensor-centered box around the expected ground height:
/// |x| <= box_xy, |y| <= box_xy, z within band of the prior.
inline std::vector<GroundCandidate> segment_ground_candidates(const SlidingMap& map,
                                                              double ground_z_prior,
                                                              const GroundConfig& cfg = {}) {
    std::vector<GroundCandidate> out;
    for (const auto& mp : map.points) {
        const Vec3& p = mp.position;
        if (std::abs(p.x()) > cfg.box_xy || std::abs(p.y()) > cfg.box_xy) continue;
        if (std::abs(p.z() - ground_z_prior) > cfg.band) continue;
        out.push_back({p, mp.covariance});
    }
    if (static_cast<int>(out.size()) < cfg.min_ground_points)
        throw NoGroundCandidates(std::to_string(out.size()) + " ground candidates, need " +
                                 std::to_string(cfg.min_ground_points));
    return out;
}

/// Best-consensus plane from seeded 3-point hypotheses, as a CP vector.
inline PlaneCP ransac_plane_seed(const std::vector<GroundCandidate>& candidates, int iterations,
                                 double inlier_dist, std::uint64_t seed,
                                 double cp_min_norm = kCpMinNorm) {
    const int n = static_cast<int>(candidates.size());
    if (n < 3) throw DegenerateCandidates("need at least 3 candidate points");

    std::mt19937_64 rng(seed);
    auto draw = [&](int bound) { return static_cast<int>(rng() % static_cast<std::uint64_t>(bound)); };

    int best_count = -1;
    Vec3 best_normal = Vec3::Zero();
    double best_offset = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const int ia = draw(n);
        int ib = draw(n);
        int ic = draw(n);
        if (ia == ib || ia == ic || ib == ic) continue;
        const Vec3& a = candidates[ia].point;
        const Vec3 e1 = candidates[ib].point - a;
        const Vec3 e2 = candidates[ic].point - a;
        Vec3 normal = e1.cross(e2);
        const double nn = normal.norm();
        if (nn < 1e-12 * std::max(1.0, e1.norm() * e2.norm())) continue;  // collinear sample
        normal /= nn;
        const double offset = normal.dot(a);
        int count = 0;
        for (const auto& c : candidates)
            if (std::abs(normal.dot(c.point) - offset) <= inlier_dist) ++count;
        if (count > best_count) {
            best_count = count;
            best_normal = normal;
            best_offset = offset;
        }
    }
    if (best_count < 0) throw DegenerateCandidates("all sampled hypotheses were collinear");
    if (std::abs(best_offset) < cp_min_norm) throw SingularPlane();
    return PlaneCP(best_offset * best_normal, cp_min_norm);
}

namespace detail {

/// Residual of a point against a CP plane: r = p.Pi/|Pi| - |Pi|.
inline double plane_point_residual(const Vec3& p, const Vec3& cp) {
    const double d = cp.norm();
    return p.dot(cp) / d - d;
}

/// d r / d Pi as a row vector.
inline Eigen::RowVector3d plane_point_jacobian(const Vec3& p, const Vec3& cp) {
    const double d = cp.norm();
    return p.transpose() / d - cp.transpose() / d - (p.dot(cp) / (d * d * d)) * cp.transpose();
}

/// Scalar information of the residual: inverse of the point noise projected
/// onto the plane normal at the linearization point.
inline double plane_point_weight(const Mat3& point_cov, const Vec3& cp) {
    const double var = cp.dot(point_cov * cp) / cp.squaredNorm();
    return 1.0 / std::max(var, 1e-15);
}

inline double wls_cost(const std::vector<GroundCandidate>& pts, const Vec3& cp) {
    double cost = 0.0;
    for (const auto& c : pts) {
        const double r = plane_point_residual(c.point, cp);
        cost += r * plane_point_weight(c.covariance, cp) * r;
    }
    return cost;
}

}  // namespace detail

/// Gauss-Newton refinement of the CP plane over weighted point-to-plane
/// distances. Weights are re-evaluated at each linearization point; steps
/// are halved until the weighted objective does not increase.
inline GroundObservation refine_plane_wls(const std::vector<GroundCandidate>& candidates,
                                          const PlaneCP& seed, const GroundConfig& cfg = {}) {
    if (static_cast<int>(candidates.size()) < cfg.min_ground_points)
        throw NoGroundCandidates(std::to_string(candidates.size()) + " points for refinement");

    Vec3 cp = seed.cp();
    double last_step = 0.0;
    bool converged = false;
    Mat3 h = Mat3::Zero();

    for (int iter = 0; iter < cfg.wls_max_iter; ++iter) {
        h.setZero();
        Vec3 g = Vec3::Zero();
        for (const auto& c : candidates) {
            const double r = detail::plane_point_residual(c.point, cp);
            const Eigen::RowVector3d j = detail::plane_point_jacobian(c.point, cp);
            const double w = detail::plane_point_weight(c.covariance, cp);
            h += j.transpose() * w * j;
            g += j.transpose() * (w * r);
        }
        Eigen::LDLT<Mat3> ldlt(h);
        if (ldlt.info() != Eigen::Success) throw NonConvergence("singular plane-fit system");
        const Vec3 delta = -ldlt.solve(g);
        if (!delta.allFinite()) throw NonConvergence("non-finite plane-fit step");

        // backtracking keeps the weighted objective non-increasing
        const double cost0 = detail::wls_cost(candidates, cp);
        double alpha = 1.0;
        Vec3 next = cp + delta;
        while (next.norm() < cfg.cp_min_norm ||
               (detail::wls_cost(candidates, next) > cost0 && alpha > 1.0 / 1024.0)) {
            alpha *= 0.5;
            next = cp + alpha * delta;
            if (alpha <= 1.0 / 2048.0) break;
        }
        if (next.norm() < cfg.cp_min_norm) throw SingularPlane();
        if (detail::wls_cost(candidates, next) > cost0) {
            // no admissible decrease; treat current point as the fixed point
            last_step = (alpha * delta).norm();
            converged = last_step < cfg.wls_fail_tol;
            break;
        }
        cp = next;
        last_step = (alpha * delta).norm();
        if (last_step < cfg.wls_update_tol) {
            converged = true;
            break;
        }
    }
    if (!converged && last_step > cfg.wls_fail_tol)
        throw NonConvergence("plane fit step still " + std::to_string(last_step) +
                             " after iteration cap");

    // final system at the solution for the covariance
    h.setZero();
    double abs_residual_sum = 0.0;
    for (const auto& c : candidates) {
        const Eigen::RowVector3d j = detail::plane_point_jacobian(c.point, cp);
        const double w = detail::plane_point_weight(c.covariance, cp);
        h += j.transpose() * w * j;
        abs_residual_sum += std::abs(detail::plane_point_residual(c.point, cp));
    }
    Eigen::LDLT<Mat3> ldlt(h);
    if (ldlt.info() != Eigen::Success) throw NonConvergence("singular plane-fit system");

    GroundObservation obs{PlaneCP(cp, cfg.cp_min_norm)};
    obs.covariance = ldlt.solve(Mat3::Identity());
    obs.covariance = 0.5 * (obs.covariance + obs.covariance.transpose()).eval();
    obs.support_count = static_cast<int>(candidates.size());
    obs.mean_residual = abs_residual_sum / static_cast<double>(candidates.size());
    return obs;
}

/// Full key-frame ground extraction: segment the candidate box, seed with
/// RANSAC, keep the consensus inliers, refine. Fits whose normal leans more
/// than max_tilt_deg from the sensor vertical are rejected as non-ground.
inline GroundObservation extract_ground(const SlidingMap& local_map, const GroundConfig& cfg) {
    const auto candidates = segment_ground_candidates(local_map, cfg.ground_z_prior, cfg);
    const PlaneCP seed =
        ransac_plane_seed(candidates, cfg.ransac_iterations, cfg.ransac_inlier_dist,
                          cfg.ransac_seed, cfg.cp_min_norm);

    const double tilt = std::acos(std::min(1.0, std::abs(seed.normal().z())));
    if (tilt > cfg.max_tilt_deg * M_PI / 180.0)
        throw NoGroundCandidates("best candidate plane is tilted " +
                                 std::to_string(tilt * 180.0 / M_PI) + " deg from vertical");

    std::vector<GroundCandidate> inliers;
    inliers.reserve(candidates.size());
    for (const auto& c : candidates)
        if (std::abs(seed.point_distance(c.point)) <= cfg.ransac_inlier_dist)
            inliers.push_back(c);
    if (static_cast<int>(inliers.size()) < cfg.min_ground_points)
        throw NoGroundCandidates(std::to_string(inliers.size()) + " consensus inliers");

    GroundObservation obs = refine_plane_wls(inliers, seed, cfg);
    // a fit that is not at the expected height is structure caught inside
    // the candidate band (an old floor seen from a ramp, a ledge), not the
    // supporting ground
    if (std::abs(obs.plane.distance() - std::abs(cfg.ground_z_prior)) > cfg.fit_max_offset)
        throw NoGroundCandidates("fitted plane sits " + std::to_string(obs.plane.distance()) +
                                 " m from the origin, expected about " +
                                 std::to_string(std::abs(cfg.ground_z_prior)));
    return obs;
}

}  // namespace gcslam
