#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gcslam/scan.hpp"
#include "gcslam/se3.hpp"

namespace gcslam {

// ---------------------------------------------------------------------------
// World: bounded planar patches
// ---------------------------------------------------------------------------

struct SurfacePatch {
    enum class Tag { Floor, Wall, Ceiling, Ramp };

    Vec3 center = Vec3::Zero();
    Vec3 axis_u = Vec3::UnitX();  // orthonormal in-plane axes
    Vec3 axis_v = Vec3::UnitY();
    double half_u = 1.0;
    double half_v = 1.0;
    Tag tag = Tag::Floor;

    Vec3 normal() const { return axis_u.cross(axis_v); }
    double area() const { return 4.0 * half_u * half_v; }
};

struct WorldModel {
    std::vector<SurfacePatch> surfaces;
};

inline SurfacePatch make_patch(const Vec3& center, const Vec3& u_dir, const Vec3& v_dir,
                               double half_u, double half_v, SurfacePatch::Tag tag) {
    SurfacePatch p;
    p.center = center;
    p.axis_u = u_dir.normalized();
    p.axis_v = (v_dir - v_dir.dot(p.axis_u) * p.axis_u).normalized();
    p.half_u = half_u;
    p.half_v = half_v;
    p.tag = tag;
    return p;
}

/// Horizontal rectangle spanning [x0,x1] x [y0,y1] at height z whose normal
/// points up.
inline SurfacePatch make_floor(double x0, double x1, double y0, double y1, double z,
                               SurfacePatch::Tag tag = SurfacePatch::Tag::Floor) {
    return make_patch(Vec3(0.5 * (x0 + x1), 0.5 * (y0 + y1), z), Vec3::UnitX(), Vec3::UnitY(),
                      0.5 * (x1 - x0), 0.5 * (y1 - y0), tag);
}

inline SurfacePatch make_ceiling(double x0, double x1, double y0, double y1, double z) {
    SurfacePatch p = make_floor(x0, x1, y0, y1, z, SurfacePatch::Tag::Ceiling);
    p.axis_v = -p.axis_v;  // normal down
    return p;
}

/// Vertical rectangle along the segment (a -> b) spanning [z0, z1].
inline SurfacePatch make_wall(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double z0,
                              double z1) {
    const Eigen::Vector2d mid = 0.5 * (a + b);
    const Eigen::Vector2d along = (b - a).normalized();
    return make_patch(Vec3(mid.x(), mid.y(), 0.5 * (z0 + z1)), Vec3(along.x(), along.y(), 0.0),
                      Vec3::UnitZ(), 0.5 * (b - a).norm(), 0.5 * (z1 - z0),
                      SurfacePatch::Tag::Wall);
}

// ---------------------------------------------------------------------------
// Sensor
// ---------------------------------------------------------------------------

enum class BiasModel { Sin2, OneMinusCos, Quadratic };

struct SensorModel {
    int n_beams_vertical = 40;
    double horizontal_step = 1.0 * M_PI / 180.0;
    double max_range = 80.0;
    double min_range = 0.5;
    double range_noise_sigma = 0.01;
    double bias_max = 0.0;
    BiasModel bias_model = BiasModel::Sin2;
    std::uint64_t rng_seed = 42;
    double vertical_fov_min = -25.0 * M_PI / 180.0;
    double vertical_fov_max = 15.0 * M_PI / 180.0;
    double horizontal_fov = 2.0 * M_PI;  // centered on +x
    double cov_iso_floor = 1e-6;
};

/// Range bias versus beam-surface incidence angle: zero at normal
/// incidence, saturating at bias_max toward grazing.
inline double bias(double incidence_angle, double bias_max, BiasModel model = BiasModel::Sin2) {
    const double s = std::sin(incidence_angle);
    switch (model) {
        case BiasModel::Sin2: return bias_max * s * s;
        case BiasModel::OneMinusCos: return bias_max * (1.0 - std::cos(incidence_angle));
        case BiasModel::Quadratic: {
            const double x = incidence_angle / (0.5 * M_PI);
            return bias_max * x * x;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Trajectory: waypoints with piecewise constant-velocity interpolation
// ---------------------------------------------------------------------------

struct TrajectorySpec {
    std::vector<StampedPose> waypoints;

    void add(double t, const Pose& p) {
        if (!waypoints.empty() && t <= waypoints.back().timestamp)
            throw ConfigError("trajectory timestamps must be strictly increasing");
        waypoints.push_back({t, p});
    }

    double start_time() const { return waypoints.front().timestamp; }
    double end_time() const { return waypoints.back().timestamp; }

    Pose sample(double t) const {
        if (waypoints.empty()) throw OutOfSpan("empty trajectory");
        if (t < start_time() - 1e-12 || t > end_time() + 1e-12)
            throw OutOfSpan("time " + std::to_string(t) + " outside trajectory span");
        if (t <= start_time()) return waypoints.front().pose;
        if (t >= end_time()) return waypoints.back().pose;
        std::size_t hi = 1;
        while (waypoints[hi].timestamp < t) ++hi;
        const auto& a = waypoints[hi - 1];
        const auto& b = waypoints[hi];
        const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);
        const Vec3 t_interp =
            (1.0 - alpha) * a.pose.translation() + alpha * b.pose.translation();
        const Vec3 w = so3_log(a.pose.rotation().transpose() * b.pose.rotation());
        return Pose(a.pose.rotation() * so3_exp(alpha * w), t_interp);
    }
};

// ---------------------------------------------------------------------------
// Raycasting
// ---------------------------------------------------------------------------

struct SimulatedScan {
    Scan scan;                      // points in the sensor frame
    std::vector<double> incidence;  // ground-truth incidence angle per point
    std::vector<int> surface;       // index of the hit patch per point
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed ^ (salt + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return x;
}

}  // namespace detail

/// Casts the full beam pattern from `pose` (sensor frame -> world). Beams
/// that hit nothing within max_range are omitted. Deterministic for a given
/// (sensor seed, frame_salt).
inline SimulatedScan raycast_scan(const WorldModel& world, const SensorModel& sensor,
                                  const Pose& pose, std::uint64_t frame_salt = 0,
                                  double timestamp = 0.0) {
    SimulatedScan out;
    out.scan.timestamp = timestamp;
    std::mt19937_64 rng(detail::mix_seed(sensor.rng_seed, frame_salt));
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int n_cols = std::max(1, static_cast<int>(std::round(sensor.horizontal_fov /
                                                               sensor.horizontal_step)));
    const Vec3 origin = pose.translation();

    for (int row = 0; row < sensor.n_beams_vertical; ++row) {
        const double elev =
            sensor.n_beams_vertical == 1
                ? 0.5 * (sensor.vertical_fov_min + sensor.vertical_fov_max)
                : sensor.vertical_fov_min + (sensor.vertical_fov_max - sensor.vertical_fov_min) *
                                                row / (sensor.n_beams_vertical - 1.0);
        for (int col = 0; col < n_cols; ++col) {
            const double azim = -0.5 * sensor.horizontal_fov + (col + 0.5) * sensor.horizontal_step;
            const Vec3 dir_sensor(std::cos(elev) * std::cos(azim),
                                  std::cos(elev) * std::sin(azim), std::sin(elev));
            const Vec3 dir_world = pose.rotation() * dir_sensor;

            double best_range = sensor.max_range;
            int best_patch = -1;
            for (std::size_t s = 0; s < world.surfaces.size(); ++s) {
                const auto& patch = world.surfaces[s];
                const Vec3 n = patch.normal();
                const double denom = dir_world.dot(n);
                if (std::abs(denom) < 1e-12) continue;
                const double range = (patch.center - origin).dot(n) / denom;
                if (range < sensor.min_range || range >= best_range) continue;
                const Vec3 hit = origin + range * dir_world;
                const Vec3 rel = hit - patch.center;
                if (std::abs(rel.dot(patch.axis_u)) > patch.half_u) continue;
                if (std::abs(rel.dot(patch.axis_v)) > patch.half_v) continue;
                best_range = range;
                best_patch = static_cast<int>(s);
            }
            // one noise draw per beam keeps the stream aligned across hits and misses
            const double noise = sensor.range_noise_sigma > 0.0
                                     ? sensor.range_noise_sigma * gauss(rng)
                                     : 0.0;
            if (best_patch < 0) continue;

            const Vec3 n = world.surfaces[best_patch].normal();
            const double cos_inc = std::min(1.0, std::abs(dir_world.dot(n)));
            const double incidence = std::acos(cos_inc);
            const double range =
                best_range + bias(incidence, sensor.bias_max, sensor.bias_model) + noise;
            const Vec3 p = range * dir_sensor;
            out.scan.push_back(p, beam_covariance(p, sensor.range_noise_sigma,
                                                  sensor.cov_iso_floor));
            out.incidence.push_back(incidence);
            out.surface.push_back(best_patch);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Motion prior: the noisy high-rate odometry stand-in
// ---------------------------------------------------------------------------

struct MotionNoise {
    double rot_sigma = 0.0;    // white noise, rad per second
    double trans_sigma = 0.0;  // white noise, m per second
    // slowly wandering rate error, the way encoder/IMU odometry drifts:
    // a random walk on the per-second error rate
    double rot_walk_sigma = 0.0;    // rad/s of drift rate, per sqrt(second)
    double trans_walk_sigma = 0.0;  // m/s of drift rate, per sqrt(second)
};

/// Ground-truth relative pose between t0 and t1 (the pose of the t1 frame
/// expressed in the t0 frame), perturbed by seeded Gaussian noise scaled
/// with the elapsed time.
inline Pose motion_prior(const TrajectorySpec& spec, double t0, double t1,
                         const MotionNoise& noise, std::uint64_t seed) {
    if (t1 < t0) throw OutOfSpan("prior interval is reversed");
    const Pose rel = spec.sample(t0).inverse() * spec.sample(t1);
    const double dt = t1 - t0;
    if (dt <= 0.0 || (noise.rot_sigma <= 0.0 && noise.trans_sigma <= 0.0)) return rel;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 dw, dtr;
    for (int k = 0; k < 3; ++k) dw[k] = noise.rot_sigma * dt * gauss(rng);
    for (int k = 0; k < 3; ++k) dtr[k] = noise.trans_sigma * dt * gauss(rng);
    return Pose(so3_exp(dw) * rel.rotation(), rel.translation() + dtr);
}

// ---------------------------------------------------------------------------
// Named scenarios
// ---------------------------------------------------------------------------

struct ScenarioParams {
    double length = 100.0;        // corridor, bowl_road
    double side = 15.0;           // square_loop
    double floor_spacing = 3.0;   // two_floor_garage
    double corridor_width = 8.0;
    double sensor_height = 1.5;
    double scan_step = 0.5;       // meters of travel between scans
    double scan_period = 0.1;     // seconds between scans

    void validate() const {
        if (length < 10.0 || length > 1000.0) throw ConfigError("scenario length outside [10, 1000]");
        if (side < 8.0 || side > 500.0) throw ConfigError("scenario side outside [8, 500]");
        if (floor_spacing < 2.5 || floor_spacing > 10.0)
            throw ConfigError("floor spacing outside [2.5, 10]");
        if (corridor_width < 4.0 || corridor_width > 40.0)
            throw ConfigError("corridor width outside [4, 40]");
        if (sensor_height < 0.5 || sensor_height > 3.0)
            throw ConfigError("sensor height outside [0.5, 3]");
        if (scan_step <= 0.0 || scan_period <= 0.0)
            throw ConfigError("scan step and period must be positive");
    }
};

struct Scenario {
    WorldModel world;
    TrajectorySpec trajectory;
};

namespace detail {

inline Pose heading_pose(const Vec3& position, double yaw) {
    Mat3 r;
    r << std::cos(yaw), -std::sin(yaw), 0.0,
         std::sin(yaw), std::cos(yaw), 0.0,
         0.0, 0.0, 1.0;
    return Pose(r, position);
}

/// Waypoints along a 2D polyline at the given height profile: straight
/// segments with the heading of each leg, turning over turn_span meters of
/// path before each corner.
inline void polyline_trajectory(TrajectorySpec& traj, const std::vector<Eigen::Vector3d>& pts,
                                double speed, double turn_span = 1.5) {
    double dist = 0.0;
    auto yaw_of = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
        return std::atan2(b.y() - a.y(), b.x() - a.x());
    };
    traj.add(0.0, heading_pose(pts[0], yaw_of(pts[0], pts[1])));
    for (std::size_t leg = 0; leg + 1 < pts.size(); ++leg) {
        const Eigen::Vector3d delta = pts[leg + 1] - pts[leg];
        const double len = delta.norm();
        const double yaw = yaw_of(pts[leg], pts[leg + 1]);
        const bool last = leg + 2 == pts.size();
        const double straight = last ? len : std::max(len - turn_span, 0.5 * len);
        dist += straight;
        traj.add(dist / speed, heading_pose(pts[leg] + delta * (straight / len), yaw));
        if (!last) {
            dist += len - straight;
            traj.add(dist / speed,
                     heading_pose(pts[leg + 1], yaw_of(pts[leg + 1], pts[leg + 2])));
        }
    }
}

/// Square-footprint pillar made of four wall patches.
inline void add_pillar(WorldModel& world, double x, double y, double half, double z0, double z1) {
    world.surfaces.push_back(make_wall({x - half, y - half}, {x + half, y - half}, z0, z1));
    world.surfaces.push_back(make_wall({x + half, y - half}, {x + half, y + half}, z0, z1));
    world.surfaces.push_back(make_wall({x + half, y + half}, {x - half, y + half}, z0, z1));
    world.surfaces.push_back(make_wall({x - half, y + half}, {x - half, y - half}, z0, z1));
}

inline Scenario make_corridor(const ScenarioParams& p) {
    Scenario sc;
    const double l = p.length, w = p.corridor_width, h = p.sensor_height;
    sc.world.surfaces.push_back(make_floor(-5.0, l + 5.0, -w / 2, w / 2, 0.0));
    sc.world.surfaces.push_back(make_wall({-5.0, -w / 2}, {l + 5.0, -w / 2}, 0.0, 3.0));
    sc.world.surfaces.push_back(make_wall({-5.0, w / 2}, {l + 5.0, w / 2}, 0.0, 3.0));
    sc.world.surfaces.push_back(make_ceiling(-5.0, l + 5.0, -w / 2, w / 2, 3.0));
    sc.world.surfaces.push_back(make_wall({l + 5.0, -w / 2}, {l + 5.0, w / 2}, 0.0, 3.0));

    const double span = l - 4.0;
    const double speed = p.scan_step / p.scan_period;
    sc.trajectory.add(0.0, heading_pose(Vec3(2.0, 0.0, h), 0.0));
    sc.trajectory.add(span / speed, heading_pose(Vec3(l - 2.0, 0.0, h), 0.0));
    return sc;
}

inline Scenario make_bowl_road(const ScenarioParams& p) {
    Scenario sc;
    const double l = p.length, h = p.sensor_height;
    sc.world.surfaces.push_back(make_floor(-20.0, l + 20.0, -14.0, 14.0, 0.0));
    for (double x = -10.0; x <= l + 10.0; x += 15.0) {
        add_pillar(sc.world, x, -6.0, 0.25, 0.0, 2.5);
        add_pillar(sc.world, x + 7.5, 6.0, 0.25, 0.0, 2.5);
    }
    const double speed = p.scan_step / p.scan_period;
    sc.trajectory.add(0.0, heading_pose(Vec3(0.0, 0.0, h), 0.0));
    sc.trajectory.add(l / speed, heading_pose(Vec3(l, 0.0, h), 0.0));
    return sc;
}

/// Open parking lot with sparse posts: weakly anchored horizontally, so
/// odometry error genuinely accumulates around the circuit and the
/// revisit at the end carries real drift for loop closure to remove.
inline Scenario make_square_loop(const ScenarioParams& p) {
    Scenario sc;
    const double s = p.side, h = p.sensor_height;
    const double margin = 14.0;
    sc.world.surfaces.push_back(
        make_floor(-margin, s + margin, -margin, s + margin, 0.0));
    // sparse post grid across the lot, clear of the driving line
    for (double x = -8.0; x <= s + 8.0; x += 11.0)
        for (double y = -8.0; y <= s + 8.0; y += 11.0) {
            const bool near_path =
                (std::abs(y) < 2.5 && x > -4.0 && x < s + 4.0) ||
                (std::abs(y - s) < 2.5 && x > -4.0 && x < s + 4.0) ||
                (std::abs(x) < 2.5 && y > -4.0 && y < s + 4.0) ||
                (std::abs(x - s) < 2.5 && y > -4.0 && y < s + 4.0);
            if (near_path) continue;
            add_pillar(sc.world, x, y, 0.25, 0.0, 2.2);
        }

    // two full circuits, so the closing legs revisit the opening ones
    const double speed = p.scan_step / p.scan_period;
    std::vector<Eigen::Vector3d> path = {Eigen::Vector3d(0, 0, h)};
    for (int lap = 0; lap < 2; ++lap) {
        path.emplace_back(s, 0, h);
        path.emplace_back(s, s, h);
        path.emplace_back(0, s, h);
        path.emplace_back(0, 0, h);
    }
    polyline_trajectory(sc.trajectory, path, speed, 3.0);
    return sc;
}

inline Scenario make_two_floor_garage(const ScenarioParams& p) {
    Scenario sc;
    const double h = p.sensor_height, drop = p.floor_spacing;
    const double upper_len = 40.0, ramp_len = 6.0, lower_len = 40.0;
    const double x_ramp0 = upper_len, x_ramp1 = upper_len + ramp_len;
    const double x_end = x_ramp1 + lower_len;
    const double w = 8.0;  // drivable width

    // upper floor surrounds the ramp cutout; lower floor runs under the ramp
    sc.world.surfaces.push_back(make_floor(-5.0, x_ramp0, -w, w, 0.0));
    sc.world.surfaces.push_back(make_floor(x_ramp0, x_ramp1, -w, -3.0, 0.0));
    sc.world.surfaces.push_back(make_floor(x_ramp0, x_ramp1, 3.0, w, 0.0));
    sc.world.surfaces.push_back(make_floor(x_ramp0 - 8.0, x_end + 5.0, -w, w, -drop));
    // ramp: inclined rectangle joining the floors, 6 m wide
    {
        const Vec3 a(x_ramp0, 0.0, 0.0), b(x_ramp1, 0.0, -drop);
        const Vec3 mid = 0.5 * (a + b);
        const Vec3 along = (b - a).normalized();
        SurfacePatch ramp = make_patch(mid, along, Vec3::UnitY(), 0.5 * (b - a).norm(), 3.0,
                                       SurfacePatch::Tag::Ramp);
        if (ramp.normal().z() < 0.0) std::swap(ramp.axis_u, ramp.axis_v);
        sc.world.surfaces.push_back(ramp);
    }
    // side walls along the whole run, both levels
    sc.world.surfaces.push_back(make_wall({-5.0, -w}, {x_end + 5.0, -w}, -drop, 3.0));
    sc.world.surfaces.push_back(make_wall({-5.0, w}, {x_end + 5.0, w}, -drop, 3.0));
    sc.world.surfaces.push_back(make_wall({x_end + 5.0, -w}, {x_end + 5.0, w}, -drop, 3.0));
    sc.world.surfaces.push_back(make_wall({-5.0, -w}, {-5.0, w}, -drop, 3.0));
    // ceilings
    sc.world.surfaces.push_back(make_ceiling(-5.0, x_ramp0, -w, w, 2.8));
    sc.world.surfaces.push_back(make_ceiling(x_ramp1, x_end + 5.0, -w, w, 2.8 - drop));
    // pillars on both floors
    for (double x = 6.0; x < x_ramp0 - 4.0; x += 8.0) {
        add_pillar(sc.world, x, -5.0, 0.3, 0.0, 2.6);
        add_pillar(sc.world, x + 4.0, 5.0, 0.3, 0.0, 2.6);
    }
    for (double x = x_ramp1 + 4.0; x < x_end - 2.0; x += 8.0) {
        add_pillar(sc.world, x, -5.0, 0.3, -drop, 2.6 - drop);
        add_pillar(sc.world, x + 4.0, 5.0, 0.3, -drop, 2.6 - drop);
    }

    // level sensor attitude; height follows the surface below. Each level
    // is toured around its aisles and revisits its own entry area before
    // moving on, the way a mapping run of a garage actually drives; the
    // revisits close loops on both levels.
    const double speed = p.scan_step / p.scan_period;
    const double zu = h, zl = h - drop;
    polyline_trajectory(sc.trajectory,
                        {Eigen::Vector3d(2.0, -4.0, zu), Eigen::Vector3d(32.0, -4.0, zu),
                         Eigen::Vector3d(32.0, 4.0, zu), Eigen::Vector3d(4.0, 4.0, zu),
                         Eigen::Vector3d(4.0, 0.0, zu), Eigen::Vector3d(37.0, 0.0, zu),
                         Eigen::Vector3d(x_ramp0, 0.0, zu),
                         Eigen::Vector3d(x_ramp1, 0.0, zl),
                         Eigen::Vector3d(x_ramp1 + 4.0, 0.0, zl),
                         Eigen::Vector3d(x_ramp1 + 8.0, -4.0, zl),
                         Eigen::Vector3d(x_end - 6.0, -4.0, zl),
                         Eigen::Vector3d(x_end - 6.0, 4.0, zl),
                         Eigen::Vector3d(x_ramp1 + 6.0, 4.0, zl),
                         Eigen::Vector3d(x_ramp1 + 2.0, 1.0, zl),
                         Eigen::Vector3d(x_ramp1 + 10.0, 1.0, zl)},
                        speed, 1.5);
    return sc;
}

inline Scenario make_ramp_junction(const ScenarioParams& p) {
    Scenario sc;
    const double h = p.sensor_height;
    const double slope = 10.0 * M_PI / 180.0;
    const double flat_len = 30.0, ramp_len = 30.0, w = 8.0;

    sc.world.surfaces.push_back(make_floor(-flat_len - 5.0, 0.0, -w, w, 0.0));
    {
        const Vec3 a(0.0, 0.0, 0.0);
        const Vec3 b(ramp_len * std::cos(slope), 0.0, ramp_len * std::sin(slope));
        const Vec3 mid = 0.5 * (a + b);
        SurfacePatch ramp = make_patch(mid, (b - a).normalized(), Vec3::UnitY(),
                                       0.5 * ramp_len, w, SurfacePatch::Tag::Ramp);
        if (ramp.normal().z() < 0.0) std::swap(ramp.axis_u, ramp.axis_v);
        sc.world.surfaces.push_back(ramp);
    }
    for (double x = -flat_len; x < ramp_len * std::cos(slope) - 2.0; x += 10.0) {
        const double z0 = x > 0.0 ? x * std::tan(slope) : 0.0;
        add_pillar(sc.world, x, -6.0, 0.3, z0, z0 + 2.4);
        add_pillar(sc.world, x + 5.0, 6.0, 0.3, z0, z0 + 2.4);
    }

    const double speed = p.scan_step / p.scan_period;
    const double x_end = ramp_len * std::cos(slope) - 4.0;
    double dist = 0.0;
    sc.trajectory.add(0.0, heading_pose(Vec3(-flat_len + 2.0, 0.0, h), 0.0));
    dist += flat_len - 2.0;
    sc.trajectory.add(dist / speed, heading_pose(Vec3(0.0, 0.0, h), 0.0));
    dist += x_end / std::cos(slope);
    sc.trajectory.add(dist / speed,
                      heading_pose(Vec3(x_end, 0.0, x_end * std::tan(slope) + h), 0.0));
    return sc;
}

}  // namespace detail

inline Scenario generate_scenario(const std::string& name, const ScenarioParams& params = {}) {
    params.validate();
    if (name == "corridor") return detail::make_corridor(params);
    if (name == "square_loop") return detail::make_square_loop(params);
    if (name == "bowl_road") return detail::make_bowl_road(params);
    if (name == "two_floor_garage") return detail::make_two_floor_garage(params);
    if (name == "ramp_junction") return detail::make_ramp_junction(params);
    throw UnknownScenario(name);
}

// ---------------------------------------------------------------------------
// Sequence generation: scans, ground truth, and the noisy prior trajectory
// ---------------------------------------------------------------------------

struct SimulatedSequence {
    std::vector<Scan> scans;
    Trajectory ground_truth;
    Trajectory prior;  // noisy pose chain built from motion priors
};

inline SimulatedSequence simulate_sequence(const Scenario& scenario, const SensorModel& sensor,
                                           const MotionNoise& prior_noise,
                                           std::uint64_t prior_seed, int max_frames = -1,
                                           double period = 0.1) {
    SimulatedSequence seq;
    const double t0 = scenario.trajectory.start_time();
    const double t1 = scenario.trajectory.end_time();
    int n = static_cast<int>(std::floor((t1 - t0) / period)) + 1;
    if (max_frames > 0) n = std::min(n, max_frames);

    Pose prior_pose;  // first prior frame is the identity, like the estimate
    std::mt19937_64 walk_rng(detail::mix_seed(prior_seed, 0x77616c6bull));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 rot_rate = Vec3::Zero(), trans_rate = Vec3::Zero();
    for (int k = 0; k < n; ++k) {
        const double t = t0 + k * period;
        const Pose gt = scenario.trajectory.sample(t);
        seq.ground_truth.push_back({t, gt});
        const auto sim = raycast_scan(scenario.world, sensor, gt,
                                      static_cast<std::uint64_t>(k), t);
        seq.scans.push_back(sim.scan);
        if (k == 0) {
            seq.prior.push_back({t, prior_pose});
        } else {
            Pose rel = motion_prior(scenario.trajectory, t - period, t, prior_noise,
                                    detail::mix_seed(prior_seed, static_cast<std::uint64_t>(k)));
            if (prior_noise.rot_walk_sigma > 0.0 || prior_noise.trans_walk_sigma > 0.0) {
                const double sqdt = std::sqrt(period);
                for (int c = 0; c < 3; ++c) {
                    rot_rate[c] += prior_noise.rot_walk_sigma * sqdt * gauss(walk_rng);
                    trans_rate[c] += prior_noise.trans_walk_sigma * sqdt * gauss(walk_rng);
                }
                rel = Pose(so3_exp(rot_rate * period) * rel.rotation(),
                           rel.translation() + trans_rate * period);
            }
            prior_pose = prior_pose * rel;
            seq.prior.push_back({t, prior_pose});
        }
    }
    return seq;
}

}  // namespace gcslam
