#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcslam/kdtree.hpp"
#include "gcslam/scan.hpp"
#include "gcslam/se3.hpp"

namespace gcslam {

struct MapPoint {
    Vec3 position = Vec3::Zero();
    Mat3 covariance = Mat3::Zero();
    int birth_frame = 0;
};

/// Sensor-centric local map: every point is expressed in the sensor frame
/// identified by frame_id and carries a propagated position covariance.
struct SlidingMap {
    std::vector<MapPoint> points;
    int frame_id = 0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    std::vector<Vec3> positions() const {
        std::vector<Vec3> out;
        out.reserve(points.size());
        for (const auto& mp : points) out.push_back(mp.position);
        return out;
    }
};

struct MaintenanceConfig {
    double assoc_dist = 0.3;            // association gate, meters
    bool mahalanobis_gate = false;      // gate on whitened distance instead
    double mahalanobis_threshold = 7.815;
    double elimination_threshold = 0.25;  // max covariance trace, m^2
    double density_radius = 0.2;        // min spacing of appended points
};

/// Re-expresses the map in the next sensor frame and grows each point
/// covariance by the registration uncertainty: with p' = R p + t and a
/// left so(3) perturbation of R,
///   S' = J_R S_R J_R^T + R S_p R^T + S_t,   J_R = -(R p)^.
inline SlidingMap recenter(const SlidingMap& map, const Pose& transform_old_to_new,
                           const PoseCovariance& pose_cov) {
    SlidingMap out;
    out.frame_id = map.frame_id + 1;
    out.points.reserve(map.points.size());
    const Mat3& r = transform_old_to_new.rotation();
    for (const auto& mp : map.points) {
        MapPoint moved;
        moved.position = transform_old_to_new.apply(mp.position);
        const Mat3 j_r = -skew(r * mp.position);
        moved.covariance = j_r * pose_cov.rot_cov * j_r.transpose()
                         + r * mp.covariance * r.transpose()
                         + pose_cov.trans_cov;
        moved.birth_frame = mp.birth_frame;
        out.points.push_back(moved);
    }
    return out;
}

/// Observation-based maintenance:
///  1) associate registered scan points with map points by nearest neighbor
///     within the gate (each scan point claims at most its single nearest
///     map point);
///  2) reset associated map points' covariances to the observing scan
///     point's covariance;
///  3) drop map points whose covariance trace exceeds the threshold;
///  4) append unassociated scan points, spaced at least density_radius
///     apart so the map density stays bounded.
inline SlidingMap maintain(const SlidingMap& map, const Scan& registered_scan,
                           const MaintenanceConfig& cfg = {}) {
    const std::vector<Vec3> map_positions = map.positions();
    KdTree3 tree(map_positions);

    // For each map point, the best (closest, then lowest-index) observing scan point.
    std::vector<int> observer(map.points.size(), -1);
    std::vector<double> observer_dist(map.points.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> scan_associated(registered_scan.size(), false);

    for (std::size_t s = 0; s < registered_scan.size(); ++s) {
        if (tree.empty()) break;
        const auto nn = tree.nearest(registered_scan.points[s]);
        if (nn.index < 0) continue;
        bool accept = false;
        if (cfg.mahalanobis_gate) {
            const Vec3 delta = registered_scan.points[s] - map.points[nn.index].position;
            const Mat3 cov = map.points[nn.index].covariance + registered_scan.covariances[s];
            Eigen::LDLT<Mat3> ldlt(cov);
            if (ldlt.info() == Eigen::Success) {
                const double m2 = delta.dot(ldlt.solve(delta));
                accept = m2 <= cfg.mahalanobis_threshold &&
                         nn.sq_dist <= cfg.assoc_dist * cfg.assoc_dist;
            }
        } else {
            accept = nn.sq_dist <= cfg.assoc_dist * cfg.assoc_dist;
        }
        if (!accept) continue;
        scan_associated[s] = true;
        const double d = std::sqrt(nn.sq_dist);
        if (d < observer_dist[nn.index]) {
            observer_dist[nn.index] = d;
            observer[nn.index] = static_cast<int>(s);
        }
    }

    SlidingMap out;
    out.frame_id = map.frame_id;
    out.points.reserve(map.points.size() + registered_scan.size());

    for (std::size_t m = 0; m < map.points.size(); ++m) {
        MapPoint kept = map.points[m];
        if (observer[m] >= 0) kept.covariance = registered_scan.covariances[observer[m]];
        if (kept.covariance.trace() > cfg.elimination_threshold) continue;
        out.points.push_back(kept);
    }

    // Spacing filter over appended points: scan order, keep a point only if
    // no retained or previously appended point lies within density_radius.
    // density_radius < assoc_dist guarantees a dropped point re-associates
    // on a repeated pass, which makes maintenance idempotent.
    struct CellHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& c) const {
            std::size_t h = 1469598103934665603ull;
            for (auto v : c) {
                h ^= static_cast<std::size_t>(v);
                h *= 1099511628211ull;
            }
            return h;
        }
    };
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<int>, CellHash> grid;
    const double cell = std::max(cfg.density_radius, 1e-6);
    auto cell_of = [&](const Vec3& p) {
        return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                           static_cast<std::int64_t>(std::floor(p.y() / cell)),
                                           static_cast<std::int64_t>(std::floor(p.z() / cell))};
    };
    auto has_neighbor = [&](const Vec3& p) {
        const auto c = cell_of(p);
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    const auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == grid.end()) continue;
                    for (int idx : it->second)
                        if ((out.points[idx].position - p).norm() < cfg.density_radius)
                            return true;
                }
        return false;
    };
    for (std::size_t i = 0; i < out.points.size(); ++i)
        grid[cell_of(out.points[i].position)].push_back(static_cast<int>(i));

    for (std::size_t s = 0; s < registered_scan.size(); ++s) {
        if (scan_associated[s]) continue;
        const Vec3& p = registered_scan.points[s];
        if (has_neighbor(p)) continue;
        MapPoint fresh;
        fresh.position = p;
        fresh.covariance = registered_scan.covariances[s];
        fresh.birth_frame = map.frame_id;
        out.points.push_back(fresh);
        grid[cell_of(p)].push_back(static_cast<int>(out.points.size()) - 1);
    }
    return out;
}

/// Range-based baseline: drop points beyond the cutoff, append the whole
/// scan. No covariance bookkeeping.
inline SlidingMap maintain_range_based(const SlidingMap& map, const Scan& registered_scan,
                                       double cutoff) {
    SlidingMap out;
    out.frame_id = map.frame_id;
    out.points.reserve(map.points.size() + registered_scan.size());
    for (const auto& mp : map.points)
        if (mp.position.norm() <= cutoff) out.points.push_back(mp);
    for (std::size_t s = 0; s < registered_scan.size(); ++s) {
        MapPoint fresh;
        fresh.position = registered_scan.points[s];
        fresh.covariance = registered_scan.covariances[s];
        fresh.birth_frame = map.frame_id;
        out.points.push_back(fresh);
    }
    return out;
}

/// Debug snapshot: x y z plus the covariance upper triangle.
inline void write_map_ply(std::ostream& out, const SlidingMap& map) {
    out << "ply\nformat ascii 1.0\nelement vertex " << map.points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property double cxx\nproperty double cxy\nproperty double cxz\n"
           "property double cyy\nproperty double cyz\nproperty double czz\nend_header\n";
    char buf[256];
    for (const auto& mp : map.points) {
        const Mat3& c = mp.covariance;
        std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.9g %.9g %.9g %.9g %.9g %.9g\n",
                      mp.position.x(), mp.position.y(), mp.position.z(),
                      c(0, 0), c(0, 1), c(0, 2), c(1, 1), c(1, 2), c(2, 2));
        out << buf;
    }
}

inline void write_map_ply_file(const std::string& path, const SlidingMap& map) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write map PLY: " + path);
    write_map_ply(out, map);
}

}  // namespace gcslam
