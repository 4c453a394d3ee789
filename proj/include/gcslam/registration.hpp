#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "gcslam/kdtree.hpp"
#include "gcslam/scan.hpp"
#include "gcslam/se3.hpp"
#include "gcslam/sliding_map.hpp"

namespace gcslam {

struct RegistrationConfig {
    double max_corr_dist = 1.0;  // correspondence distance gate, meters
    double max_point_range = 40.0;  // source points beyond this range are not registered
    int normal_k = 8;            // neighbors for target normal estimation
    double normal_radius = 0.5;  // neighbors beyond this distance are ignored
    double planarity_max = 0.05;  // reject normals when lambda_min/lambda_max exceeds this
    double trim_quantile = 0.9;  // residual-scale estimate for the robust trim
    double trim_mult = 6.0;      // drop residuals beyond this many times that scale
    double trim_floor = 0.002;   // but never trim below this residual, meters
    int min_inliers = 50;
    int max_iter = 30;
    double update_tol = 1e-6;
    double cond_floor = 1e-6;    // relative eigenvalue clamp for the covariance
    double step_floor = 1e-6;    // relative eigenvalue truncation for the GN step
};

struct RegistrationResult {
    Pose transform;                 // maps source-frame points into the target frame
    PoseCovariance covariance;
    int inlier_count = 0;
    double rms_residual = 0.0;
    bool converged = false;
    int clamped_directions = 0;     // near-unconstrained directions in the final system
    Mat6 normal_matrix = Mat6::Zero();  // final Gauss-Newton system, [rot, trans] order
    double residual_variance = 0.0;
};

struct CovarianceEstimate {
    PoseCovariance covariance;
    int clamped_directions = 0;
};

/// Censi-style estimate: residual-variance-scaled pseudo-inverse of the
/// final normal matrix. Eigenvalues below cond_floor (relative to the
/// largest) are clamped so degenerate directions get large finite variance.
inline CovarianceEstimate estimate_registration_covariance(const Mat6& normal_matrix,
                                                           double residual_variance,
                                                           double cond_floor = 1e-6) {
    Eigen::SelfAdjointEigenSolver<Mat6> eig(normal_matrix);
    const auto& vals = eig.eigenvalues();
    const auto& vecs = eig.eigenvectors();
    const double lam_max = std::max(vals.maxCoeff(), 0.0);

    CovarianceEstimate out;
    if (lam_max <= 0.0) {
        out.clamped_directions = 6;
        const double huge = residual_variance > 0.0 ? residual_variance * 1e12 : 0.0;
        out.covariance.rot_cov = huge * Mat3::Identity();
        out.covariance.trans_cov = huge * Mat3::Identity();
        return out;
    }
    const double floor = cond_floor * lam_max;
    Mat6 cov = Mat6::Zero();
    for (int i = 0; i < 6; ++i) {
        double lam = vals[i];
        if (lam < floor) {
            lam = floor;
            ++out.clamped_directions;
        }
        cov += (residual_variance / lam) * vecs.col(i) * vecs.col(i).transpose();
    }
    out.covariance.rot_cov = cov.topLeftCorner<3, 3>();
    out.covariance.trans_cov = cov.bottomRightCorner<3, 3>();
    return out;
}

/// Target side of a registration: positions, exact NN index, and lazily
/// cached local-plane normals from the k nearest neighbors of each point.
class RegistrationTarget {
public:
    RegistrationTarget(std::vector<Vec3> positions, int normal_k, double planarity_max = 0.05,
                       double normal_radius = 0.5)
        : positions_(std::move(positions)),
          normal_k_(normal_k),
          planarity_max_(planarity_max),
          normal_radius_(normal_radius),
          tree_(positions_) {
        normals_.resize(positions_.size());
        normal_state_.assign(positions_.size(), 0);
    }

    explicit RegistrationTarget(const SlidingMap& map, int normal_k = 8,
                                double planarity_max = 0.05, double normal_radius = 0.5)
        : RegistrationTarget(map.positions(), normal_k, planarity_max, normal_radius) {}

    std::size_t size() const { return positions_.size(); }
    const std::vector<Vec3>& positions() const { return positions_; }
    const KdTree3& tree() const { return tree_; }

    /// Unit normal of the local plane around point `index`, or nullopt when
    /// the neighborhood is too small or collinear.
    std::optional<Vec3> normal(int index) const {
        if (normal_state_[index] == 0) compute_normal(index);
        if (normal_state_[index] == 2) return std::nullopt;
        return normals_[index];
    }

private:
    void compute_normal(int index) const {
        auto neighbors = tree_.knn(positions_[index], normal_k_);
        // a tight neighborhood: distant neighbors describe other structure
        const double r2 = normal_radius_ * normal_radius_;
        neighbors.erase(std::remove_if(neighbors.begin(), neighbors.end(),
                                       [&](const KdTree3::Neighbor& nb) {
                                           return nb.sq_dist > r2;
                                       }),
                        neighbors.end());
        if (neighbors.size() < 4) {
            normal_state_[index] = 2;  // too sparse to trust
            return;
        }
        Vec3 mean = Vec3::Zero();
        for (const auto& nb : neighbors) mean += positions_[nb.index];
        mean /= static_cast<double>(neighbors.size());
        Mat3 cov = Mat3::Zero();
        for (const auto& nb : neighbors) {
            const Vec3 d = positions_[nb.index] - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const Vec3 evals = eig.eigenvalues();  // ascending
        if (evals[2] <= 0.0 || evals[1] <= 0.02 * evals[2]) {
            // needs genuine two-dimensional spread; a single scan column or a
            // line-plus-stray configuration leaves the normal ill-defined
            normal_state_[index] = 2;
            return;
        }
        if (evals[0] > planarity_max_ * evals[2]) {
            normal_state_[index] = 2;  // neighborhood not planar (corner or seam)
            return;
        }
        Vec3 n = eig.eigenvectors().col(0);
        // orient toward the sensor origin of the target frame
        if (n.dot(positions_[index]) > 0.0) n = -n;
        normals_[index] = n;
        normal_state_[index] = 1;
    }

    std::vector<Vec3> positions_;
    int normal_k_;
    double planarity_max_;
    double normal_radius_;
    KdTree3 tree_;
    mutable std::vector<Vec3> normals_;
    mutable std::vector<char> normal_state_;  // 0 unknown, 1 ok, 2 failed
};

namespace detail {

struct IcpRow {
    int target_index;
    Vec3 source_point;   // original source-frame point, for canonical ordering
    Vec3 moved;          // source point mapped by the current estimate
    Vec3 normal;
    double residual;
};

/// Rows sorted by (target index, source point) so the accumulated system is
/// bit-identical under any permutation of the source scan.
inline bool row_less(const IcpRow& a, const IcpRow& b) {
    if (a.target_index != b.target_index) return a.target_index < b.target_index;
    if (a.source_point.x() != b.source_point.x()) return a.source_point.x() < b.source_point.x();
    if (a.source_point.y() != b.source_point.y()) return a.source_point.y() < b.source_point.y();
    return a.source_point.z() < b.source_point.z();
}

struct IcpSystem {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    double squared_residual_sum = 0.0;
    int matched = 0;        // correspondences inside the distance gate
    int with_normal = 0;    // matched with a valid target normal
    int usable = 0;         // surviving the robust residual trim
};

inline IcpSystem build_system(const std::vector<Vec3>& source, const RegistrationTarget& target,
                              const Pose& estimate, const RegistrationConfig& cfg) {
    std::vector<IcpRow> rows;
    rows.reserve(source.size());
    const double gate_sq = cfg.max_corr_dist * cfg.max_corr_dist;
    int matched = 0;
    for (const auto& p : source) {
        const Vec3 moved = estimate.apply(p);
        const auto nn = target.tree().nearest(moved);
        if (nn.index < 0 || nn.sq_dist > gate_sq) continue;
        ++matched;
        const auto n = target.normal(nn.index);
        if (!n) continue;
        IcpRow row;
        row.target_index = nn.index;
        row.source_point = p;
        row.moved = moved;
        row.normal = *n;
        row.residual = n->dot(moved - target.positions()[nn.index]);
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(), row_less);

    IcpSystem sys;
    sys.matched = matched;
    sys.with_normal = static_cast<int>(rows.size());

    // residual trim: correspondences far outside the consensus residual
    // scale are mismatches (seams, sparsely sampled structure)
    double threshold = std::numeric_limits<double>::infinity();
    if (!rows.empty()) {
        std::vector<double> mags;
        mags.reserve(rows.size());
        for (const auto& row : rows) mags.push_back(std::abs(row.residual));
        const std::size_t q = std::min(rows.size() - 1,
                                       static_cast<std::size_t>(cfg.trim_quantile * rows.size()));
        std::nth_element(mags.begin(), mags.begin() + q, mags.end());
        threshold = std::max(cfg.trim_mult * mags[q], cfg.trim_floor);
    }
    for (const auto& row : rows) {
        if (std::abs(row.residual) > threshold) continue;
        ++sys.usable;
        Vec6 j;
        j.head<3>() = row.moved.cross(row.normal);
        j.tail<3>() = row.normal;
        sys.h += j * j.transpose();
        sys.g += j * row.residual;
        sys.squared_residual_sum += row.residual * row.residual;
    }
    return sys;
}

/// Solves H x = -g through a truncated eigen-decomposition: directions with
/// eigenvalue below step_floor (relative) do not move, so degenerate
/// geometry leaves the estimate pinned to its initial guess there.
inline Vec6 solve_truncated(const Mat6& h, const Vec6& g, double step_floor) {
    Eigen::SelfAdjointEigenSolver<Mat6> eig(h);
    const auto& vals = eig.eigenvalues();
    const auto& vecs = eig.eigenvectors();
    const double lam_max = std::max(vals.maxCoeff(), 0.0);
    if (lam_max <= 0.0) return Vec6::Zero();
    const double floor = step_floor * lam_max;
    Vec6 x = Vec6::Zero();
    for (int i = 0; i < 6; ++i) {
        if (vals[i] < floor) continue;
        x += (vecs.col(i).dot(-g) / vals[i]) * vecs.col(i);
    }
    return x;
}

}  // namespace detail

/// Scan-to-map point-to-plane ICP. Returns the pose mapping source-frame
/// points into the target frame, with a Censi-style covariance of the
/// estimate split into rotation and translation blocks.
inline RegistrationResult register_point_to_plane(const Scan& source,
                                                  const RegistrationTarget& target,
                                                  const Pose& initial_guess,
                                                  const RegistrationConfig& cfg = {}) {
    if (static_cast<int>(source.size()) < cfg.min_inliers)
        throw InsufficientCorrespondences("source scan has " + std::to_string(source.size()) +
                                          " points, need " + std::to_string(cfg.min_inliers));
    if (target.size() == 0)
        throw InsufficientCorrespondences("target map is empty");

    // distant returns sit on sparsely sampled structure whose map normals
    // are unreliable; they stay in the map but do not drive the estimate
    std::vector<Vec3> used;
    used.reserve(source.points.size());
    for (const auto& p : source.points)
        if (p.norm() <= cfg.max_point_range) used.push_back(p);
    if (static_cast<int>(used.size()) < cfg.min_inliers)
        throw InsufficientCorrespondences(std::to_string(used.size()) +
                                          " in-range points, need " +
                                          std::to_string(cfg.min_inliers));

    Pose estimate = initial_guess;
    bool converged = false;
    detail::IcpSystem sys;

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        sys = detail::build_system(used, target, estimate, cfg);
        if (sys.matched < cfg.min_inliers)
            throw InsufficientCorrespondences(std::to_string(sys.matched) +
                                              " correspondences, need " +
                                              std::to_string(cfg.min_inliers));
        if (sys.with_normal * 2 < sys.matched)
            throw DegenerateNormals();

        const Vec6 delta = detail::solve_truncated(sys.h, sys.g, cfg.step_floor);
        const Mat3 dr = so3_exp(delta.head<3>());
        estimate = Pose(dr * estimate.rotation(),
                        dr * estimate.translation() + delta.tail<3>());
        if (delta.norm() < cfg.update_tol) {
            converged = true;
            break;
        }
    }

    // Final linearization at the returned pose.
    sys = detail::build_system(used, target, estimate, cfg);
    if (sys.matched < cfg.min_inliers)
        throw InsufficientCorrespondences(std::to_string(sys.matched) +
                                          " correspondences at the final pose");

    RegistrationResult result;
    result.transform = estimate;
    result.inlier_count = sys.usable;
    result.converged = converged;
    result.normal_matrix = sys.h;
    result.rms_residual =
        sys.usable > 0 ? std::sqrt(sys.squared_residual_sum / sys.usable) : 0.0;
    result.residual_variance =
        sys.squared_residual_sum / std::max(1, sys.usable - 6);
    const auto cov = estimate_registration_covariance(sys.h, result.residual_variance,
                                                      cfg.cond_floor);
    result.covariance = cov.covariance;
    result.clamped_directions = cov.clamped_directions;
    return result;
}

}  // namespace gcslam
