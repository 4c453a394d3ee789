#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "gcslam/ground.hpp"
#include "gcslam/plane.hpp"
#include "gcslam/registration.hpp"
#include "gcslam/se3.hpp"
#include "gcslam/sliding_map.hpp"

namespace gcslam {

// ---------------------------------------------------------------------------
// SO(3) log-map Jacobians used by the relative-pose factors.
// ---------------------------------------------------------------------------

inline Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
    const double theta = phi.norm();
    const Mat3 px = skew(phi);
    if (theta < 1e-6) return Mat3::Identity() - 0.5 * px + (1.0 / 12.0) * px * px;
    const double c =
        1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    return Mat3::Identity() - 0.5 * px + c * px * px;
}

inline Mat3 so3_right_jacobian_inverse(const Vec3& phi) {
    return so3_left_jacobian_inverse(-phi);
}

// ---------------------------------------------------------------------------
// Factors
// ---------------------------------------------------------------------------

enum class FactorKind { Odometry, PlaneObservation, LoopClosure };

/// One graph constraint. Odometry and loop-closure factors carry a relative
/// pose (frame node_b expressed in frame node_a) with a 6x6 information in
/// [rotation, translation] order. Plane-observation factors tie pose node_a
/// to plane landmark node_b through a ground observation made in node_a's
/// sensor frame, with a 3x3 information over the CP residual.
struct Factor {
    FactorKind kind = FactorKind::Odometry;
    int node_a = -1;
    int node_b = -1;

    Pose measurement;
    Mat6 information = Mat6::Identity();

    Vec3 observed_cp = Vec3::Zero();
    Mat3 observed_cov = Mat3::Zero();
    int observed_support = 0;
    double observed_mean_residual = 0.0;
    Mat3 information3 = Mat3::Identity();

    static Factor odometry(int a, int b, const Pose& rel, const Mat6& info) {
        Factor f;
        f.kind = FactorKind::Odometry;
        f.node_a = a;
        f.node_b = b;
        f.measurement = rel;
        f.information = info;
        return f;
    }

    static Factor loop(int a, int b, const Pose& rel, const Mat6& info) {
        Factor f = odometry(a, b, rel, info);
        f.kind = FactorKind::LoopClosure;
        return f;
    }

    static Factor plane_observation(int pose_id, int plane_id, const GroundObservation& obs,
                                    const Mat3& info) {
        Factor f;
        f.kind = FactorKind::PlaneObservation;
        f.node_a = pose_id;
        f.node_b = plane_id;
        f.observed_cp = obs.plane.cp();
        f.observed_cov = obs.covariance;
        f.observed_support = obs.support_count;
        f.observed_mean_residual = obs.mean_residual;
        f.information3 = info;
        return f;
    }
};

// ---------------------------------------------------------------------------
// SE3-plane residual and Jacobians
// ---------------------------------------------------------------------------

/// CP residual between the estimated world plane and the observation lifted
/// through the observing pose:
///   r = Pi_w - d_obs * m - (m . t) m,   m = R n_obs.
inline Vec3 plane_residual(const Vec3& plane_world_cp, const Pose& pose, const PlaneHF& obs,
                           double cp_min_norm = kCpMinNorm) {
    const Vec3 m = pose.rotation() * obs.normal;
    const double d_pred = obs.dist + m.dot(pose.translation());
    if (std::abs(d_pred) < cp_min_norm)
        throw SingularPlane("predicted world plane passes near the origin");
    return plane_world_cp - d_pred * m;
}

inline Vec3 plane_residual(const Vec3& plane_world_cp, const Pose& pose,
                           const GroundObservation& obs, double cp_min_norm = kCpMinNorm) {
    return plane_residual(plane_world_cp, pose, cp_to_hf(obs.plane), cp_min_norm);
}

struct PlaneFactorJacobians {
    Mat3 j_plane = Mat3::Identity();  // d r / d Pi_w, exactly identity
    Mat3 j_rot = Mat3::Zero();        // d r / d(left so(3) perturbation of R)
    Mat3 j_trans = Mat3::Zero();      // d r / d t
};

/// The rotation block keeps only the dominant term d_obs * skew(m); its
/// translation-dependent remainder is dropped, so it is exact at t = 0.
/// The translation block -m m^T is exact.
inline PlaneFactorJacobians plane_factor_jacobians(const Vec3& plane_world_cp, const Pose& pose,
                                                   const PlaneHF& obs,
                                                   double cp_min_norm = kCpMinNorm) {
    (void)plane_world_cp;
    const Vec3 m = pose.rotation() * obs.normal;
    const double d_pred = obs.dist + m.dot(pose.translation());
    if (std::abs(d_pred) < cp_min_norm)
        throw SingularPlane("predicted world plane passes near the origin");
    PlaneFactorJacobians j;
    j.j_rot = obs.dist * skew(m);
    j.j_trans = -m * m.transpose();
    return j;
}

/// Full rotation derivative including the translation-dependent terms. The
/// truncated form above biases the solver's fixed point once poses sit far
/// from the origin (the dropped term scales with |t|), so the optimizer
/// uses this one.
inline PlaneFactorJacobians plane_factor_jacobians_exact(const Vec3& plane_world_cp,
                                                         const Pose& pose, const PlaneHF& obs,
                                                         double cp_min_norm = kCpMinNorm) {
    PlaneFactorJacobians j = plane_factor_jacobians(plane_world_cp, pose, obs, cp_min_norm);
    const Vec3 m = pose.rotation() * obs.normal;
    const Vec3& t = pose.translation();
    j.j_rot = m * t.transpose() * skew(m) + (obs.dist + m.dot(t)) * skew(m);
    return j;
}

inline PlaneFactorJacobians plane_factor_jacobians(const Vec3& plane_world_cp, const Pose& pose,
                                                   const GroundObservation& obs,
                                                   double cp_min_norm = kCpMinNorm) {
    return plane_factor_jacobians(plane_world_cp, pose, cp_to_hf(obs.plane), cp_min_norm);
}

/// Relative-pose residual: rotation part log(Z^T R_a^T R_b), translation
/// part R_a^T (t_b - t_a) - t_Z.
inline Vec6 relative_pose_residual(const Pose& a, const Pose& b, const Pose& measurement) {
    Vec6 r;
    r.head<3>() = so3_log(measurement.rotation().transpose() * a.rotation().transpose() *
                          b.rotation());
    r.tail<3>() =
        a.rotation().transpose() * (b.translation() - a.translation()) - measurement.translation();
    return r;
}

struct RelativePoseJacobians {
    Mat6 j_a = Mat6::Zero();  // d r / d [left so(3) of a, t_a]
    Mat6 j_b = Mat6::Zero();  // d r / d [left so(3) of b, t_b]
};

inline RelativePoseJacobians relative_pose_jacobians(const Pose& a, const Pose& b,
                                                     const Pose& measurement) {
    const Vec3 e_rot = so3_log(measurement.rotation().transpose() * a.rotation().transpose() *
                               b.rotation());
    const Mat3 rat = a.rotation().transpose();
    RelativePoseJacobians j;
    j.j_a.topLeftCorner<3, 3>() = -so3_right_jacobian_inverse(e_rot) * b.rotation().transpose();
    j.j_a.bottomLeftCorner<3, 3>() = rat * skew(b.translation() - a.translation());
    j.j_a.bottomRightCorner<3, 3>() = -rat;
    j.j_b.topLeftCorner<3, 3>() =
        so3_left_jacobian_inverse(e_rot) * measurement.rotation().transpose() * rat;
    j.j_b.bottomRightCorner<3, 3>() = rat;
    return j;
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

class PoseGraph {
public:
    void add_pose(int id, const Pose& pose) { poses_[id] = pose; }

    void add_plane(int id, const Vec3& cp, double cp_min_norm = kCpMinNorm) {
        if (cp.norm() < cp_min_norm) throw SingularPlane("plane landmark near origin");
        planes_[id] = cp;
    }

    void add_factor(const Factor& f) {
        if (!poses_.count(f.node_a)) throw Error("factor references unknown pose " +
                                                 std::to_string(f.node_a));
        if (f.kind == FactorKind::PlaneObservation) {
            if (!planes_.count(f.node_b))
                throw Error("factor references unknown plane " + std::to_string(f.node_b));
        } else if (!poses_.count(f.node_b)) {
            throw Error("factor references unknown pose " + std::to_string(f.node_b));
        }
        factors_.push_back(f);
    }

    const std::map<int, Pose>& poses() const { return poses_; }
    const std::map<int, Vec3>& planes() const { return planes_; }
    const std::vector<Factor>& factors() const { return factors_; }

    Pose& pose(int id) { return poses_.at(id); }
    const Pose& pose(int id) const { return poses_.at(id); }
    Vec3& plane(int id) { return planes_.at(id); }
    const Vec3& plane(int id) const { return planes_.at(id); }

    std::size_t count_factors(FactorKind kind) const {
        std::size_t n = 0;
        for (const auto& f : factors_)
            if (f.kind == kind) ++n;
        return n;
    }

private:
    std::map<int, Pose> poses_;
    std::map<int, Vec3> planes_;
    std::vector<Factor> factors_;
};

// ---------------------------------------------------------------------------
// Levenberg-Marquardt optimization of Eq-style total cost
//   F(x) = sum r^T Omega r   (Huber-robustified on loop factors)
// ---------------------------------------------------------------------------

struct OptimizeConfig {
    double lambda_init = 1e-4;
    int max_iter = 100;
    double rel_tol = 1e-9;
    double huber_delta = 1.0;  // whitened units, loop-closure factors only
    int gauge_id = -1;         // pose held fixed; -1 means the lowest pose id
    double cp_min_norm = kCpMinNorm;
};

struct OptimizeReport {
    std::vector<double> costs;  // initial cost, then cost after each accepted step
    int iterations = 0;
    bool converged = false;
    double initial_cost() const { return costs.empty() ? 0.0 : costs.front(); }
    double final_cost() const { return costs.empty() ? 0.0 : costs.back(); }
};

namespace detail {

struct GraphState {
    std::map<int, Pose> poses;
    std::map<int, Vec3> planes;
};

inline double huber_cost(double chi2, double delta) {
    const double chi = std::sqrt(std::max(chi2, 0.0));
    if (chi <= delta) return chi2;
    return 2.0 * delta * chi - delta * delta;
}

inline double huber_weight(double chi2, double delta) {
    const double chi = std::sqrt(std::max(chi2, 0.0));
    if (chi <= delta) return 1.0;
    return delta / chi;
}

inline double factor_cost(const Factor& f, const GraphState& s, const OptimizeConfig& cfg) {
    if (f.kind == FactorKind::PlaneObservation) {
        const Vec3 r = plane_residual(s.planes.at(f.node_b), s.poses.at(f.node_a),
                                      PlaneHF(f.observed_cp, f.observed_cp.norm()),
                                      cfg.cp_min_norm);
        return r.dot(f.information3 * r);
    }
    const Vec6 r = relative_pose_residual(s.poses.at(f.node_a), s.poses.at(f.node_b),
                                          f.measurement);
    const double chi2 = r.dot(f.information * r);
    if (f.kind == FactorKind::LoopClosure) return huber_cost(chi2, cfg.huber_delta);
    return chi2;
}

inline double total_cost(const std::vector<Factor>& factors, const GraphState& s,
                         const OptimizeConfig& cfg) {
    double cost = 0.0;
    for (const auto& f : factors) cost += factor_cost(f, s, cfg);
    return cost;
}

}  // namespace detail

inline OptimizeReport optimize(PoseGraph& graph, const OptimizeConfig& cfg = {}) {
    using detail::GraphState;

    if (graph.poses().empty()) return {};
    const int gauge_id = cfg.gauge_id >= 0 ? cfg.gauge_id : graph.poses().begin()->first;

    // variable layout: non-gauge poses (6 each) in id order, then planes (3 each)
    std::map<int, int> pose_col, plane_col;
    int cols = 0;
    for (const auto& [id, p] : graph.poses()) {
        (void)p;
        if (id == gauge_id) continue;
        pose_col[id] = cols;
        cols += 6;
    }
    for (const auto& [id, cp] : graph.planes()) {
        (void)cp;
        plane_col[id] = cols;
        cols += 3;
    }

    GraphState state{graph.poses(), graph.planes()};
    OptimizeReport report;
    double cost = detail::total_cost(graph.factors(), state, cfg);
    report.costs.push_back(cost);
    if (cols == 0) {
        report.converged = true;
        return report;
    }

    using MatX = Eigen::MatrixXd;
    using VecX = Eigen::VectorXd;

    auto build_system = [&](const GraphState& s, MatX& h, VecX& g) {
        h.setZero(cols, cols);
        g.setZero(cols);
        for (const auto& f : graph.factors()) {
            if (f.kind == FactorKind::PlaneObservation) {
                const Pose& pose = s.poses.at(f.node_a);
                const PlaneHF obs_hf(f.observed_cp, f.observed_cp.norm());
                const Vec3 r = plane_residual(s.planes.at(f.node_b), pose, obs_hf,
                                              cfg.cp_min_norm);
                const auto jac = plane_factor_jacobians_exact(s.planes.at(f.node_b), pose,
                                                              obs_hf, cfg.cp_min_norm);
                const Mat3& omega = f.information3;

                const int pc = plane_col.at(f.node_b);
                h.block<3, 3>(pc, pc) += jac.j_plane.transpose() * omega * jac.j_plane;
                g.segment<3>(pc) += jac.j_plane.transpose() * (omega * r);

                const auto it = pose_col.find(f.node_a);
                if (it != pose_col.end()) {
                    Eigen::Matrix<double, 3, 6> jp;
                    jp.leftCols<3>() = jac.j_rot;
                    jp.rightCols<3>() = jac.j_trans;
                    h.block<6, 6>(it->second, it->second) += jp.transpose() * omega * jp;
                    g.segment<6>(it->second) += jp.transpose() * (omega * r);
                    const Eigen::Matrix<double, 6, 3> cross = jp.transpose() * omega * jac.j_plane;
                    h.block<6, 3>(it->second, pc) += cross;
                    h.block<3, 6>(pc, it->second) += cross.transpose();
                }
                continue;
            }

            const Pose& pa = s.poses.at(f.node_a);
            const Pose& pb = s.poses.at(f.node_b);
            const Vec6 r = relative_pose_residual(pa, pb, f.measurement);
            double w = 1.0;
            if (f.kind == FactorKind::LoopClosure)
                w = detail::huber_weight(r.dot(f.information * r), cfg.huber_delta);
            const Mat6 omega = w * f.information;

            const auto jac = relative_pose_jacobians(pa, pb, f.measurement);
            const Mat6& ja = jac.j_a;
            const Mat6& jb = jac.j_b;

            const auto ia = pose_col.find(f.node_a);
            const auto ib = pose_col.find(f.node_b);
            if (ia != pose_col.end()) {
                h.block<6, 6>(ia->second, ia->second) += ja.transpose() * omega * ja;
                g.segment<6>(ia->second) += ja.transpose() * (omega * r);
            }
            if (ib != pose_col.end()) {
                h.block<6, 6>(ib->second, ib->second) += jb.transpose() * omega * jb;
                g.segment<6>(ib->second) += jb.transpose() * (omega * r);
            }
            if (ia != pose_col.end() && ib != pose_col.end()) {
                const Mat6 cross = ja.transpose() * omega * jb;
                h.block<6, 6>(ia->second, ib->second) += cross;
                h.block<6, 6>(ib->second, ia->second) += cross.transpose();
            }
        }
    };

    auto apply_step = [&](const GraphState& s, const VecX& dx) {
        GraphState next = s;
        for (const auto& [id, col] : pose_col) {
            const Mat3 dr = so3_exp(dx.segment<3>(col));
            Pose& p = next.poses.at(id);
            p = Pose(dr * p.rotation(), p.translation() + dx.segment<3>(col + 3));
        }
        for (const auto& [id, col] : plane_col) {
            Vec3& cp = next.planes.at(id);
            cp += dx.segment<3>(col);
            if (cp.norm() < cfg.cp_min_norm) throw SingularPlane("plane update crossed origin");
        }
        return next;
    };

    MatX h(cols, cols);
    VecX g(cols);
    double lambda = cfg.lambda_init;

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        report.iterations = iter + 1;
        build_system(state, h, g);

        const double max_diag = h.diagonal().maxCoeff();
        for (const auto& [id, col] : pose_col)
            if (h.diagonal().segment<6>(col).maxCoeff() <= 1e-12 * std::max(max_diag, 1.0))
                throw RankDeficient("pose node " + std::to_string(id) + " is unconstrained");
        for (const auto& [id, col] : plane_col)
            if (h.diagonal().segment<3>(col).maxCoeff() <= 1e-12 * std::max(max_diag, 1.0))
                throw RankDeficient("plane node " + std::to_string(id) + " is unconstrained");
        if (iter == 0) {
            // soft modes are fine; only a numerically non-positive system
            // indicates an under-constrained graph
            Eigen::LLT<MatX> llt(h);
            if (llt.info() != Eigen::Success)
                throw RankDeficient("normal matrix singular beyond gauge");
        }

        if (g.lpNorm<Eigen::Infinity>() < 1e-13 * (1.0 + cost)) {
            report.converged = true;
            break;
        }

        bool accepted = false;
        while (lambda < 1e14) {
            MatX damped = h;
            damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
            const VecX dx = damped.ldlt().solve(-g);
            if (!dx.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            GraphState candidate;
            double new_cost = std::numeric_limits<double>::infinity();
            try {
                candidate = apply_step(state, dx);
                new_cost = detail::total_cost(graph.factors(), candidate, cfg);
            } catch (const SingularPlane&) {
                new_cost = std::numeric_limits<double>::infinity();
            }
            if (new_cost < cost) {
                state = std::move(candidate);
                const double decrease = (cost - new_cost) / std::max(cost, 1e-300);
                cost = new_cost;
                report.costs.push_back(cost);
                lambda = std::max(lambda * 0.1, 1e-12);
                accepted = true;
                if (decrease < cfg.rel_tol) report.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            report.converged = true;
            break;
        }
        if (report.converged) break;
    }

    for (const auto& [id, p] : state.poses) graph.pose(id) = p;
    for (const auto& [id, cp] : state.planes) graph.plane(id) = cp;
    return report;
}

// ---------------------------------------------------------------------------
// Loop-closure detection over key-frame local maps
// ---------------------------------------------------------------------------

struct LoopClosureConfig {
    double radius = 5.0;         // candidate gate on estimated translation distance
    int min_gap = 20;            // minimum key-frame index separation
    double rms_max = 0.1;        // verification: max RMS point-to-plane residual
    double min_inlier_frac = 0.5;
    double trans_sigma_floor = 0.02;  // honest floor on the measurement covariance
    double rot_sigma_floor = 2e-3;
    RegistrationConfig registration;  // wider gate than odometry by default
};

struct LoopCandidate {
    int node_id = -1;
    Pose estimate;
    const SlidingMap* local_map = nullptr;
};

/// Pose-proximity loop candidates verified by registering the later
/// key-frame's local map against the earlier one's.
inline std::vector<Factor> detect_loop_closures(const std::vector<LoopCandidate>& frames,
                                                const LoopClosureConfig& cfg = {}) {
    std::vector<Factor> out;
    std::map<std::size_t, std::unique_ptr<RegistrationTarget>> targets;

    for (std::size_t j = 0; j < frames.size(); ++j) {
        for (std::size_t i = 0; i + static_cast<std::size_t>(cfg.min_gap) < j; ++i) {
            const double dist =
                (frames[i].estimate.translation() - frames[j].estimate.translation()).norm();
            if (dist >= cfg.radius) continue;

            auto& target = targets[i];
            if (!target)
                target = std::make_unique<RegistrationTarget>(
                    *frames[i].local_map, cfg.registration.normal_k,
                    cfg.registration.planarity_max, cfg.registration.normal_radius);

            Scan source;
            source.points = frames[j].local_map->positions();
            source.covariances.reserve(source.points.size());
            for (const auto& mp : frames[j].local_map->points)
                source.covariances.push_back(mp.covariance);

            const Pose init = frames[i].estimate.inverse() * frames[j].estimate;
            RegistrationResult res;
            try {
                res = register_point_to_plane(source, *target, init, cfg.registration);
            } catch (const Error&) {
                continue;
            }
            if (!res.converged) continue;
            if (res.rms_residual >= cfg.rms_max) continue;
            if (res.inlier_count <
                cfg.min_inlier_frac * static_cast<double>(source.points.size()))
                continue;

            Mat6 info = Mat6::Zero();
            const Mat3 rot_cov = res.covariance.rot_cov +
                                 cfg.rot_sigma_floor * cfg.rot_sigma_floor * Mat3::Identity();
            const Mat3 trans_cov = res.covariance.trans_cov +
                                   cfg.trans_sigma_floor * cfg.trans_sigma_floor * Mat3::Identity();
            info.topLeftCorner<3, 3>() = rot_cov.inverse();
            info.bottomRightCorner<3, 3>() = trans_cov.inverse();
            out.push_back(Factor::loop(frames[i].node_id, frames[j].node_id, res.transform, info));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plain-text graph serialization, lossless at 17 significant digits.
// ---------------------------------------------------------------------------

namespace detail {

inline void print_g17(std::ostream& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    out << buf;
}

inline void print_pose(std::ostream& out, const Pose& p) {
    const Eigen::Quaterniond q = p.quaternion();
    for (int k = 0; k < 3; ++k) print_g17(out, p.translation()[k]);
    print_g17(out, q.x());
    print_g17(out, q.y());
    print_g17(out, q.z());
    print_g17(out, q.w());
}

inline void print_sym3(std::ostream& out, const Mat3& m) {
    for (int r = 0; r < 3; ++r)
        for (int c = r; c < 3; ++c) print_g17(out, m(r, c));
}

inline void print_sym6(std::ostream& out, const Mat6& m) {
    for (int r = 0; r < 6; ++r)
        for (int c = r; c < 6; ++c) print_g17(out, m(r, c));
}

}  // namespace detail

inline void write_graph(std::ostream& out, const PoseGraph& graph) {
    for (const auto& [id, pose] : graph.poses()) {
        out << "POSE " << id;
        detail::print_pose(out, pose);
        out << "\n";
    }
    for (const auto& [id, cp] : graph.planes()) {
        out << "PLANE " << id;
        for (int k = 0; k < 3; ++k) detail::print_g17(out, cp[k]);
        out << "\n";
    }
    for (const auto& f : graph.factors()) {
        out << "FACTOR ";
        switch (f.kind) {
            case FactorKind::Odometry: out << "ODOMETRY"; break;
            case FactorKind::LoopClosure: out << "LOOP"; break;
            case FactorKind::PlaneObservation: out << "PLANEOBS"; break;
        }
        out << " " << f.node_a << " " << f.node_b;
        if (f.kind == FactorKind::PlaneObservation) {
            for (int k = 0; k < 3; ++k) detail::print_g17(out, f.observed_cp[k]);
            detail::print_sym3(out, f.observed_cov);
            out << " " << f.observed_support;
            detail::print_g17(out, f.observed_mean_residual);
            detail::print_sym3(out, f.information3);
        } else {
            detail::print_pose(out, f.measurement);
            detail::print_sym6(out, f.information);
        }
        out << "\n";
    }
}

inline void write_graph_file(const std::string& path, const PoseGraph& graph) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write graph file: " + path);
    write_graph(out, graph);
}

namespace detail {

inline Pose parse_pose(std::istringstream& ss) {
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
        throw IoError("malformed pose in graph file");
    // written values are already normalized; keep them verbatim
    return Pose::from_quaternion(Eigen::Quaterniond(qw, qx, qy, qz), Vec3(tx, ty, tz));
}

inline Mat3 parse_sym3(std::istringstream& ss) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = r; c < 3; ++c) {
            double v;
            if (!(ss >> v)) throw IoError("malformed 3x3 block in graph file");
            m(r, c) = v;
            m(c, r) = v;
        }
    return m;
}

inline Mat6 parse_sym6(std::istringstream& ss) {
    Mat6 m;
    for (int r = 0; r < 6; ++r)
        for (int c = r; c < 6; ++c) {
            double v;
            if (!(ss >> v)) throw IoError("malformed 6x6 block in graph file");
            m(r, c) = v;
            m(c, r) = v;
        }
    return m;
}

}  // namespace detail

inline PoseGraph read_graph(std::istream& in) {
    PoseGraph graph;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "POSE") {
            int id;
            if (!(ss >> id)) throw IoError("malformed POSE line");
            graph.add_pose(id, detail::parse_pose(ss));
        } else if (tag == "PLANE") {
            int id;
            double x, y, z;
            if (!(ss >> id >> x >> y >> z)) throw IoError("malformed PLANE line");
            graph.add_plane(id, Vec3(x, y, z));
        } else if (tag == "FACTOR") {
            std::string kind;
            int a, b;
            if (!(ss >> kind >> a >> b)) throw IoError("malformed FACTOR line");
            if (kind == "PLANEOBS") {
                Factor f;
                f.kind = FactorKind::PlaneObservation;
                f.node_a = a;
                f.node_b = b;
                double x, y, z;
                if (!(ss >> x >> y >> z)) throw IoError("malformed PLANEOBS factor");
                f.observed_cp = Vec3(x, y, z);
                f.observed_cov = detail::parse_sym3(ss);
                if (!(ss >> f.observed_support >> f.observed_mean_residual))
                    throw IoError("malformed PLANEOBS factor");
                f.information3 = detail::parse_sym3(ss);
                graph.add_factor(f);
            } else if (kind == "ODOMETRY" || kind == "LOOP") {
                const Pose rel = detail::parse_pose(ss);
                const Mat6 info = detail::parse_sym6(ss);
                graph.add_factor(kind == "LOOP" ? Factor::loop(a, b, rel, info)
                                                : Factor::odometry(a, b, rel, info));
            } else {
                throw IoError("unknown factor kind: " + kind);
            }
        } else {
            throw IoError("unknown graph element: " + tag);
        }
    }
    return graph;
}

inline PoseGraph read_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open graph file: " + path);
    return read_graph(in);
}

}  // namespace gcslam
