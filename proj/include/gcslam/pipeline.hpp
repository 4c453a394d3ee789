#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gcslam/association.hpp"
#include "gcslam/ground.hpp"
#include "gcslam/pose_graph.hpp"
#include "gcslam/registration.hpp"
#include "gcslam/scan.hpp"
#include "gcslam/se3.hpp"
#include "gcslam/sim.hpp"
#include "gcslam/sliding_map.hpp"

namespace gcslam {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class MaintenanceMode { RangeBased, ObservationBased };

struct PipelineConfig {
    RegistrationConfig registration;
    MaintenanceConfig maintenance;
    double range_cutoff = 80.0;
    GroundConfig ground;
    double assoc_gate = kChiSquare95Dof3;
    // Eq-13-style fit covariances shrink like 1/N and reach tens of microns
    // on dense ground patches, far below the station-to-station variation of
    // biased range data; the gate needs this isotropic term to associate
    // same-floor observations (2 cm sigma).
    double pose_noise_inflation = 4e-4;
    double kf_trans_thresh = 2.0;
    double kf_rot_thresh_deg = 15.0;
    // systematic-error floors applied to factor covariances: registration
    // and plane-fit covariances shrink with point count and understate the
    // range-bias inconsistency, which sits at millimeter scale
    double odom_trans_sigma_floor = 8e-3;   // meters per key-frame link
    double odom_rot_sigma_floor = 1e-4;     // radians per key-frame link
    double ground_obs_sigma_floor = 5e-3;   // meters on the observed CP
    // per-frame floor on the pose covariance used when re-centering the
    // sliding map: keeps unobserved points expiring after tens of frames,
    // which registration covariances alone are too optimistic to do
    double recenter_trans_sigma_floor = 0.03;  // meters per frame
    double recenter_rot_sigma_floor = 3e-4;    // radians per frame
    LoopClosureConfig loop;
    OptimizeConfig lm;
    SensorModel sensor;
    ScenarioParams scenario;
    MotionNoise prior_noise;
    std::uint64_t seed = 42;

    PipelineConfig() {
        loop.registration.max_corr_dist = 2.0;  // wider basin for loop verification
        // the residual trim would discard the sparse displaced structure that
        // carries the lateral alignment when drift is large; verification
        // relies on the gates and covariance floors instead
        loop.registration.trim_floor = 1.0;
    }

    /// The master seed drives the sensor RNG and the prior noise stream.
    void apply_seed(std::uint64_t s) {
        seed = s;
        sensor.rng_seed = s;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ConfigError("config key '" + key + "': cannot parse number '" + v + "'");
    }
}

inline long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ConfigError("config key '" + key + "': cannot parse integer '" + v + "'");
    }
}

inline double positive(const std::string& key, double v) {
    if (v <= 0.0) throw ConfigError("config key '" + key + "' must be positive");
    return v;
}

inline double non_negative(const std::string& key, double v) {
    if (v < 0.0) throw ConfigError("config key '" + key + "' must be non-negative");
    return v;
}

}  // namespace detail

/// One `key = value` assignment. Unknown keys are rejected.
inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::non_negative;
    using detail::positive;
    using detail::to_double;
    using detail::to_int;
    const auto d = [&] { return to_double(key, value); };
    const auto i = [&] { return to_int(key, value); };

    // registration
    if (key == "max_corr_dist") cfg.registration.max_corr_dist = positive(key, d());
    else if (key == "reg_max_point_range") cfg.registration.max_point_range = positive(key, d());
    else if (key == "icp_trim_quantile") {
        cfg.registration.trim_quantile = d();
        if (cfg.registration.trim_quantile <= 0.0 || cfg.registration.trim_quantile >= 1.0)
            throw ConfigError("icp_trim_quantile must lie in (0, 1)");
    }
    else if (key == "icp_trim_mult") cfg.registration.trim_mult = positive(key, d());
    else if (key == "icp_trim_floor") cfg.registration.trim_floor = positive(key, d());
    else if (key == "normal_k") cfg.registration.normal_k = static_cast<int>(positive(key, i()));
    else if (key == "planarity_max") cfg.registration.planarity_max = positive(key, d());
    else if (key == "normal_radius") cfg.registration.normal_radius = positive(key, d());
    else if (key == "min_inliers") cfg.registration.min_inliers = static_cast<int>(positive(key, i()));
    else if (key == "icp_max_iter") cfg.registration.max_iter = static_cast<int>(positive(key, i()));
    else if (key == "icp_update_tol") cfg.registration.update_tol = positive(key, d());
    else if (key == "cond_floor") cfg.registration.cond_floor = positive(key, d());
    else if (key == "step_floor") cfg.registration.step_floor = positive(key, d());
    // sliding-map maintenance
    else if (key == "assoc_dist") cfg.maintenance.assoc_dist = positive(key, d());
    else if (key == "assoc_metric") {
        if (value == "euclidean") cfg.maintenance.mahalanobis_gate = false;
        else if (value == "mahalanobis") cfg.maintenance.mahalanobis_gate = true;
        else throw ConfigError("assoc_metric must be euclidean or mahalanobis");
    }
    else if (key == "assoc_mahalanobis_gate") cfg.maintenance.mahalanobis_threshold = positive(key, d());
    else if (key == "elimination_threshold") cfg.maintenance.elimination_threshold = positive(key, d());
    else if (key == "density_radius") cfg.maintenance.density_radius = positive(key, d());
    else if (key == "range_cutoff") cfg.range_cutoff = positive(key, d());
    // ground extraction
    else if (key == "ground_box_xy") cfg.ground.box_xy = positive(key, d());
    else if (key == "ground_band") cfg.ground.band = positive(key, d());
    else if (key == "ground_z_prior") cfg.ground.ground_z_prior = d();
    else if (key == "min_ground_points") cfg.ground.min_ground_points = static_cast<int>(positive(key, i()));
    else if (key == "ransac_iterations") cfg.ground.ransac_iterations = static_cast<int>(positive(key, i()));
    else if (key == "ransac_inlier_dist") cfg.ground.ransac_inlier_dist = positive(key, d());
    else if (key == "ransac_seed") cfg.ground.ransac_seed = static_cast<std::uint64_t>(i());
    else if (key == "wls_max_iter") cfg.ground.wls_max_iter = static_cast<int>(positive(key, i()));
    else if (key == "wls_update_tol") cfg.ground.wls_update_tol = positive(key, d());
    else if (key == "wls_fail_tol") cfg.ground.wls_fail_tol = positive(key, d());
    else if (key == "ground_max_tilt_deg") cfg.ground.max_tilt_deg = positive(key, d());
    else if (key == "ground_fit_max_offset") cfg.ground.fit_max_offset = positive(key, d());
    else if (key == "cp_min_norm") {
        cfg.ground.cp_min_norm = positive(key, d());
        cfg.lm.cp_min_norm = cfg.ground.cp_min_norm;
    }
    // plane association
    else if (key == "assoc_gate") cfg.assoc_gate = positive(key, d());
    else if (key == "pose_noise_inflation") cfg.pose_noise_inflation = non_negative(key, d());
    // key-frames
    else if (key == "kf_trans_thresh") cfg.kf_trans_thresh = positive(key, d());
    else if (key == "kf_rot_thresh_deg") cfg.kf_rot_thresh_deg = positive(key, d());
    else if (key == "odom_trans_sigma_floor") cfg.odom_trans_sigma_floor = non_negative(key, d());
    else if (key == "odom_rot_sigma_floor") cfg.odom_rot_sigma_floor = non_negative(key, d());
    else if (key == "ground_obs_sigma_floor") cfg.ground_obs_sigma_floor = non_negative(key, d());
    else if (key == "recenter_trans_sigma_floor") cfg.recenter_trans_sigma_floor = non_negative(key, d());
    else if (key == "recenter_rot_sigma_floor") cfg.recenter_rot_sigma_floor = non_negative(key, d());
    // loop closure
    else if (key == "loop_radius") cfg.loop.radius = positive(key, d());
    else if (key == "loop_min_gap") cfg.loop.min_gap = static_cast<int>(positive(key, i()));
    else if (key == "loop_rms_max") cfg.loop.rms_max = positive(key, d());
    else if (key == "loop_min_inlier_frac") cfg.loop.min_inlier_frac = positive(key, d());
    else if (key == "loop_max_corr_dist") cfg.loop.registration.max_corr_dist = positive(key, d());
    else if (key == "loop_trans_sigma_floor") cfg.loop.trans_sigma_floor = non_negative(key, d());
    else if (key == "loop_rot_sigma_floor") cfg.loop.rot_sigma_floor = non_negative(key, d());
    // optimizer
    else if (key == "lm_lambda_init") cfg.lm.lambda_init = positive(key, d());
    else if (key == "lm_max_iter") cfg.lm.max_iter = static_cast<int>(positive(key, i()));
    else if (key == "lm_rel_tol") cfg.lm.rel_tol = positive(key, d());
    else if (key == "huber_delta") cfg.lm.huber_delta = positive(key, d());
    // simulated sensor
    else if (key == "n_beams_vertical") cfg.sensor.n_beams_vertical = static_cast<int>(positive(key, i()));
    else if (key == "horizontal_step_deg") cfg.sensor.horizontal_step = positive(key, d()) * M_PI / 180.0;
    else if (key == "max_range") cfg.sensor.max_range = positive(key, d());
    else if (key == "min_range") cfg.sensor.min_range = positive(key, d());
    else if (key == "range_noise_sigma") cfg.sensor.range_noise_sigma = non_negative(key, d());
    else if (key == "bias_max") cfg.sensor.bias_max = non_negative(key, d());
    else if (key == "bias_model") {
        if (value == "sin2") cfg.sensor.bias_model = BiasModel::Sin2;
        else if (value == "one_minus_cos") cfg.sensor.bias_model = BiasModel::OneMinusCos;
        else if (value == "quadratic") cfg.sensor.bias_model = BiasModel::Quadratic;
        else throw ConfigError("bias_model must be sin2, one_minus_cos, or quadratic");
    }
    else if (key == "vertical_fov_min_deg") cfg.sensor.vertical_fov_min = d() * M_PI / 180.0;
    else if (key == "vertical_fov_max_deg") cfg.sensor.vertical_fov_max = d() * M_PI / 180.0;
    else if (key == "horizontal_fov_deg") cfg.sensor.horizontal_fov = positive(key, d()) * M_PI / 180.0;
    // scenarios
    else if (key == "scenario_length") cfg.scenario.length = positive(key, d());
    else if (key == "scenario_side") cfg.scenario.side = positive(key, d());
    else if (key == "floor_spacing") cfg.scenario.floor_spacing = positive(key, d());
    else if (key == "corridor_width") cfg.scenario.corridor_width = positive(key, d());
    else if (key == "sensor_height") cfg.scenario.sensor_height = positive(key, d());
    else if (key == "scan_step") cfg.scenario.scan_step = positive(key, d());
    else if (key == "scan_period") cfg.scenario.scan_period = positive(key, d());
    // motion prior noise
    else if (key == "prior_rot_noise") cfg.prior_noise.rot_sigma = non_negative(key, d());
    else if (key == "prior_trans_noise") cfg.prior_noise.trans_sigma = non_negative(key, d());
    else if (key == "seed") cfg.apply_seed(static_cast<std::uint64_t>(i()));
    else throw ConfigError("unknown config key: " + key);
}

/// Plain-text config: `key = value` lines, '#' starts a comment.
inline PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        apply_config_entry(cfg, detail::trim(body.substr(0, eq)),
                           detail::trim(body.substr(eq + 1)));
    }
    return cfg;
}

inline PipelineConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return parse_config(in);
}

// ---------------------------------------------------------------------------
// Key-frames
// ---------------------------------------------------------------------------

struct KeyFrame {
    int id = 0;
    int frame_index = 0;
    double timestamp = 0.0;
    Pose lo_pose;                           // odometry estimate, first-frame coords
    SlidingMap local_map;                   // sliding-map snapshot in the sensor frame
    std::optional<GroundObservation> ground;
};

inline bool should_create_keyframe(const Pose& last_kf_pose, const Pose& current_pose,
                                   double trans_thresh = 2.0, double rot_thresh_deg = 15.0) {
    const Pose rel = last_kf_pose.inverse() * current_pose;
    if (rel.translation().norm() > trans_thresh) return true;
    return rel.rotation_angle() > rot_thresh_deg * M_PI / 180.0;
}

// ---------------------------------------------------------------------------
// Odometry
// ---------------------------------------------------------------------------

struct FrameStat {
    int frame = 0;
    double timestamp = 0.0;
    std::size_t map_points = 0;
    double wall_ms = 0.0;
};

struct OdometryResult {
    Trajectory trajectory;                 // pose per frame, first sensor frame = identity
    std::vector<FrameStat> stats;
    std::vector<Pose> rel;                 // rel[k]: pose of frame k in frame k-1 (rel[0] = I)
    std::vector<PoseCovariance> rel_cov;
    SlidingMap final_map;
    std::vector<KeyFrame> keyframes;
};

namespace detail {

inline OdometryResult run_odometry_core(const std::vector<Scan>& scans,
                                        const std::vector<Pose>& rel_priors,
                                        const PipelineConfig& cfg, MaintenanceMode mode,
                                        bool collect_keyframes, bool extract_ground_at_kf) {
    if (scans.empty()) throw Error("empty scan stream");

    OdometryResult out;
    SlidingMap map;
    Pose pose;
    Pose last_rel;

    auto make_keyframe = [&](int frame_index) {
        KeyFrame kf;
        kf.id = static_cast<int>(out.keyframes.size());
        kf.frame_index = frame_index;
        kf.timestamp = scans[frame_index].timestamp;
        kf.lo_pose = pose;
        kf.local_map = map;
        if (extract_ground_at_kf) {
            try {
                kf.ground = extract_ground(kf.local_map, cfg.ground);
            } catch (const Error&) {
                kf.ground.reset();  // key-frame without a usable ground plane
            }
        }
        out.keyframes.push_back(std::move(kf));
    };

    for (std::size_t k = 0; k < scans.size(); ++k) {
        const auto t_start = std::chrono::steady_clock::now();
        if (k == 0) {
            out.rel.push_back(Pose());
            out.rel_cov.push_back(PoseCovariance::zero());
        } else {
            const Pose prior = rel_priors.empty()
                                   ? last_rel
                                   : rel_priors.at(k - 1);
            RegistrationResult res;
            try {
                RegistrationTarget target(map, cfg.registration.normal_k,
                                          cfg.registration.planarity_max,
                                          cfg.registration.normal_radius);
                res = register_point_to_plane(scans[k], target, prior, cfg.registration);
            } catch (const Error& e) {
                throw RegistrationFailure("frame " + std::to_string(k) + ": " + e.what());
            }
            last_rel = res.transform;
            pose = pose * res.transform;
            out.rel.push_back(res.transform);
            out.rel_cov.push_back(res.covariance);
            PoseCovariance step_cov = invert_covariance(res.transform, res.covariance);
            step_cov.rot_cov += cfg.recenter_rot_sigma_floor * cfg.recenter_rot_sigma_floor *
                                Mat3::Identity();
            step_cov.trans_cov += cfg.recenter_trans_sigma_floor *
                                  cfg.recenter_trans_sigma_floor * Mat3::Identity();
            map = recenter(map, res.transform.inverse(), step_cov);
        }
        if (mode == MaintenanceMode::ObservationBased)
            map = maintain(map, scans[k], cfg.maintenance);
        else
            map = maintain_range_based(map, scans[k], cfg.range_cutoff);

        out.trajectory.push_back({scans[k].timestamp, pose});
        const auto t_end = std::chrono::steady_clock::now();
        FrameStat stat;
        stat.frame = static_cast<int>(k);
        stat.timestamp = scans[k].timestamp;
        stat.map_points = map.size();
        stat.wall_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
        out.stats.push_back(stat);

        if (collect_keyframes) {
            if (out.keyframes.empty()) {
                make_keyframe(static_cast<int>(k));
            } else if (should_create_keyframe(out.keyframes.back().lo_pose, pose,
                                              cfg.kf_trans_thresh, cfg.kf_rot_thresh_deg)) {
                make_keyframe(static_cast<int>(k));
            }
        }
    }
    out.final_map = std::move(map);
    return out;
}

}  // namespace detail

/// Sequential register -> recenter -> maintain loop. `mode` selects the
/// sliding-map maintenance method; rel_priors supply per-step initial
/// guesses (constant-velocity fallback when empty).
inline OdometryResult run_odometry(const std::vector<Scan>& scans,
                                   const std::vector<Pose>& rel_priors,
                                   const PipelineConfig& cfg,
                                   MaintenanceMode mode = MaintenanceMode::ObservationBased) {
    return detail::run_odometry_core(scans, rel_priors, cfg, mode, false, false);
}

inline void write_stats_csv(std::ostream& out, const std::vector<FrameStat>& stats) {
    out << "frame,timestamp,map_points,time_ms\n";
    char buf[128];
    for (const auto& s : stats) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%zu,%.3f\n", s.frame, s.timestamp,
                      s.map_points, s.wall_ms);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Full SLAM: odometry -> key-frames -> ground landmarks -> two-step graph
// optimization with loop closures
// ---------------------------------------------------------------------------

struct SlamToggles {
    bool ground_constraints = true;
    bool loop_closure = true;
};

struct SlamResult {
    Trajectory trajectory;
    std::vector<FrameStat> stats;
    PoseGraph graph;
    OptimizeReport ground_step;
    OptimizeReport loop_step;
    std::vector<KeyFrame> keyframes;       // odometry poses and ground observations
    std::vector<int> keyframe_landmark;    // landmark id per key-frame, -1 if none
    std::map<int, Vec3> initial_landmarks; // landmark CPs as first lifted, before optimization
    int loop_factor_count = 0;
    SlidingMap final_map;
    bool optimized = false;

    Pose optimized_keyframe_pose(int kf_id) const { return graph.pose(kf_id); }
};

namespace detail {

inline Mat3 robust_inverse3(const Mat3& m, double floor = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (m + m.transpose()));
    Vec3 vals = eig.eigenvalues().cwiseMax(floor);
    return eig.eigenvectors() * vals.cwiseInverse().asDiagonal() *
           eig.eigenvectors().transpose();
}

}  // namespace detail

inline SlamResult run_slam(const std::vector<Scan>& scans, const std::vector<Pose>& rel_priors,
                           const PipelineConfig& cfg, const SlamToggles& toggles = {}) {
    SlamResult out;
    OdometryResult odo = detail::run_odometry_core(scans, rel_priors, cfg,
                                                   MaintenanceMode::ObservationBased, true,
                                                   toggles.ground_constraints);
    out.stats = odo.stats;
    out.final_map = std::move(odo.final_map);

    // graph over key-frames
    for (const auto& kf : odo.keyframes) out.graph.add_pose(kf.id, kf.lo_pose);
    for (std::size_t k = 1; k < odo.keyframes.size(); ++k) {
        const auto& a = odo.keyframes[k - 1];
        const auto& b = odo.keyframes[k];
        const Pose rel = a.lo_pose.inverse() * b.lo_pose;
        PoseCovariance cov;
        for (int f = a.frame_index + 1; f <= b.frame_index; ++f) cov = cov + odo.rel_cov[f];
        cov.rot_cov += cfg.odom_rot_sigma_floor * cfg.odom_rot_sigma_floor * Mat3::Identity();
        cov.trans_cov +=
            cfg.odom_trans_sigma_floor * cfg.odom_trans_sigma_floor * Mat3::Identity();
        Mat6 info = Mat6::Zero();
        info.topLeftCorner<3, 3>() = detail::robust_inverse3(cov.rot_cov);
        info.bottomRightCorner<3, 3>() = detail::robust_inverse3(cov.trans_cov);
        out.graph.add_factor(Factor::odometry(a.id, b.id, rel, info));
    }

    // ground landmarks via consecutive-key-frame association
    out.keyframe_landmark.assign(odo.keyframes.size(), -1);
    int next_landmark = 0;
    int last_ground_kf = -1;
    int last_landmark = -1;
    if (toggles.ground_constraints) {
        for (const auto& kf : odo.keyframes) {
            if (!kf.ground) continue;
            int lm_id = -1;
            if (last_ground_kf >= 0) {
                const auto& prev = odo.keyframes[last_ground_kf];
                const Pose earlier_in_later = kf.lo_pose.inverse() * prev.lo_pose;
                try {
                    const auto innov =
                        plane_innovation(*prev.ground, *kf.ground, earlier_in_later,
                                         cfg.pose_noise_inflation);
                    const auto decision =
                        associate_or_spawn(last_landmark, innov, cfg.assoc_gate);
                    if (decision.same_plane) lm_id = decision.landmark_id;
                } catch (const Error&) {
                    lm_id = -1;  // singular transform or covariance; spawn fresh
                }
            }
            if (lm_id < 0) {
                lm_id = next_landmark++;
                const PlaneCP world_plane =
                    transform_plane(kf.ground->plane, kf.lo_pose.inverse(),
                                    cfg.ground.cp_min_norm);
                out.graph.add_plane(lm_id, world_plane.cp(), cfg.ground.cp_min_norm);
            }
            const Mat3 f_jac = transform_plane_jacobian(kf.ground->plane, kf.lo_pose.inverse());
            const Mat3 obs_cov =
                kf.ground->covariance +
                cfg.ground_obs_sigma_floor * cfg.ground_obs_sigma_floor * Mat3::Identity();
            const Mat3 info3 = detail::robust_inverse3(f_jac * obs_cov * f_jac.transpose());
            out.graph.add_factor(Factor::plane_observation(kf.id, lm_id, *kf.ground, info3));
            out.keyframe_landmark[kf.id] = lm_id;
            last_ground_kf = kf.id;
            last_landmark = lm_id;
        }
    }

    for (const auto& [id, cp] : out.graph.planes()) out.initial_landmarks[id] = cp;

    // step 1: compress drift with ground constraints
    if (out.graph.count_factors(FactorKind::PlaneObservation) > 0) {
        out.ground_step = optimize(out.graph, cfg.lm);
        out.optimized = true;
    }

    // step 2: loop closures on the refreshed estimates
    if (toggles.loop_closure && odo.keyframes.size() >= 2) {
        std::vector<LoopCandidate> candidates;
        candidates.reserve(odo.keyframes.size());
        for (const auto& kf : odo.keyframes)
            candidates.push_back({kf.id, out.graph.pose(kf.id), &kf.local_map});
        const auto loops = detect_loop_closures(candidates, cfg.loop);
        out.loop_factor_count = static_cast<int>(loops.size());
        if (!loops.empty()) {
            for (const auto& f : loops) out.graph.add_factor(f);
            out.loop_step = optimize(out.graph, cfg.lm);
            out.optimized = true;
        }
    }

    // full-frame trajectory: correct each frame relative to its key-frame
    if (!out.optimized) {
        out.trajectory = odo.trajectory;  // bit-identical to plain odometry
    } else {
        out.trajectory.reserve(odo.trajectory.size());
        std::size_t kf_idx = 0;
        for (std::size_t f = 0; f < odo.trajectory.size(); ++f) {
            while (kf_idx + 1 < odo.keyframes.size() &&
                   odo.keyframes[kf_idx + 1].frame_index <= static_cast<int>(f))
                ++kf_idx;
            const auto& kf = odo.keyframes[kf_idx];
            const Pose correction = out.graph.pose(kf.id) * kf.lo_pose.inverse();
            out.trajectory.push_back(
                {odo.trajectory[f].timestamp, correction * odo.trajectory[f].pose});
        }
    }
    out.keyframes = std::move(odo.keyframes);
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory evaluation
// ---------------------------------------------------------------------------

struct AteReport {
    double rmse_total_m = 0.0;
    double rmse_x_m = 0.0;
    double rmse_y_m = 0.0;
    double rmse_z_m = 0.0;
    double rot_rmse_deg = 0.0;
    double rot_roll_deg = 0.0;
    double rot_pitch_deg = 0.0;
    double rot_yaw_deg = 0.0;
    struct FrameError {
        double timestamp = 0.0;
        Vec3 trans_error = Vec3::Zero();    // aligned-estimate minus ground truth
        Vec3 rpy_error_deg = Vec3::Zero();
    };
    std::vector<FrameError> per_frame;
};

namespace detail {

/// roll-pitch-yaw of R = Rz(yaw) Ry(pitch) Rx(roll)
inline Vec3 rotation_rpy(const Mat3& r) {
    const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    const double roll = std::atan2(r(2, 1), r(2, 2));
    const double yaw = std::atan2(r(1, 0), r(0, 0));
    return Vec3(roll, pitch, yaw);
}

}  // namespace detail

/// Absolute trajectory error after timestamp association and optional
/// rigid (scale-one) alignment of the estimate onto the ground truth.
inline AteReport evaluate_ate(const Trajectory& estimated, const Trajectory& ground_truth,
                              bool align, double max_dt = 0.01) {
    std::vector<std::pair<const StampedPose*, const StampedPose*>> matches;
    std::size_t g = 0;
    for (const auto& est : estimated) {
        while (g + 1 < ground_truth.size() &&
               std::abs(ground_truth[g + 1].timestamp - est.timestamp) <=
                   std::abs(ground_truth[g].timestamp - est.timestamp))
            ++g;
        if (g < ground_truth.size() &&
            std::abs(ground_truth[g].timestamp - est.timestamp) <= max_dt)
            matches.push_back({&est, &ground_truth[g]});
    }
    if (matches.size() < 2)
        throw NoOverlap("only " + std::to_string(matches.size()) + " associable frames");

    Mat3 r_align = Mat3::Identity();
    Vec3 t_align = Vec3::Zero();
    if (align) {
        Vec3 mu_e = Vec3::Zero(), mu_g = Vec3::Zero();
        for (const auto& [e, gt] : matches) {
            mu_e += e->pose.translation();
            mu_g += gt->pose.translation();
        }
        mu_e /= static_cast<double>(matches.size());
        mu_g /= static_cast<double>(matches.size());
        Mat3 w = Mat3::Zero();
        for (const auto& [e, gt] : matches)
            w += (gt->pose.translation() - mu_g) * (e->pose.translation() - mu_e).transpose();
        Eigen::JacobiSVD<Mat3> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat3 d = Mat3::Identity();
        if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
        r_align = svd.matrixU() * d * svd.matrixV().transpose();
        t_align = mu_g - r_align * mu_e;
    }

    AteReport report;
    report.per_frame.reserve(matches.size());
    Vec3 sq_trans = Vec3::Zero();
    Vec3 sq_rpy = Vec3::Zero();
    for (const auto& [e, gt] : matches) {
        const Vec3 p = r_align * e->pose.translation() + t_align;
        const Vec3 err = p - gt->pose.translation();
        const Mat3 r_err = gt->pose.rotation().transpose() * (r_align * e->pose.rotation());
        const Vec3 rpy = detail::rotation_rpy(r_err) * (180.0 / M_PI);
        sq_trans += err.cwiseAbs2();
        sq_rpy += rpy.cwiseAbs2();
        report.per_frame.push_back({e->timestamp, err, rpy});
    }
    const double n = static_cast<double>(matches.size());
    report.rmse_x_m = std::sqrt(sq_trans.x() / n);
    report.rmse_y_m = std::sqrt(sq_trans.y() / n);
    report.rmse_z_m = std::sqrt(sq_trans.z() / n);
    report.rmse_total_m = std::sqrt(sq_trans.sum() / n);
    report.rot_roll_deg = std::sqrt(sq_rpy.x() / n);
    report.rot_pitch_deg = std::sqrt(sq_rpy.y() / n);
    report.rot_yaw_deg = std::sqrt(sq_rpy.z() / n);
    report.rot_rmse_deg = std::sqrt(sq_rpy.sum() / n);
    return report;
}

inline void write_ate_report(std::ostream& out, const AteReport& r) {
    char buf[96];
    const auto emit = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s = %.9f\n", key, v);
        out << buf;
    };
    emit("rmse_total_m", r.rmse_total_m);
    emit("rmse_x_m", r.rmse_x_m);
    emit("rmse_y_m", r.rmse_y_m);
    emit("rmse_z_m", r.rmse_z_m);
    emit("rot_rmse_deg", r.rot_rmse_deg);
    emit("rot_roll_deg", r.rot_roll_deg);
    emit("rot_pitch_deg", r.rot_pitch_deg);
    emit("rot_yaw_deg", r.rot_yaw_deg);
    out << "matched_frames = " << r.per_frame.size() << "\n";
}

/// Relative priors (pose of frame k in frame k-1) from an absolute prior
/// trajectory, e.g. the simulator's noisy prior output.
inline std::vector<Pose> relative_priors_from_trajectory(const Trajectory& prior) {
    std::vector<Pose> rels;
    for (std::size_t k = 1; k < prior.size(); ++k)
        rels.push_back(prior[k - 1].pose.inverse() * prior[k].pose);
    return rels;
}

}  // namespace gcslam
