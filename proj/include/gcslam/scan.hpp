#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gcslam/se3.hpp"

namespace gcslam {

/// One LiDAR scan in the sensor frame: points with per-point 3x3
/// position covariances and a capture timestamp.
struct Scan {
    std::vector<Vec3> points;
    std::vector<Mat3> covariances;
    double timestamp = 0.0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    void push_back(const Vec3& p, const Mat3& cov) {
        points.push_back(p);
        covariances.push_back(cov);
    }
};

/// Range noise acts along the beam; a small isotropic floor keeps the
/// covariance invertible.
inline Mat3 beam_covariance(const Vec3& point, double range_sigma, double iso_floor = 1e-6) {
    const double n = point.norm();
    Mat3 cov = iso_floor * Mat3::Identity();
    if (n > 1e-12) {
        const Vec3 dir = point / n;
        cov += (range_sigma * range_sigma) * dir * dir.transpose();
    }
    return cov;
}

// ---------------------------------------------------------------------------
// ASCII PLY, points only.
// ---------------------------------------------------------------------------

inline void write_ply_points(std::ostream& out, const std::vector<Vec3>& points) {
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    char buf[128];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", p.x(), p.y(), p.z());
        out << buf;
    }
}

inline void write_ply_points_file(const std::string& path, const std::vector<Vec3>& points) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write PLY file: " + path);
    write_ply_points(out, points);
}

// ---------------------------------------------------------------------------
// Framed binary scan container. Per frame: u32 frame index, f64 timestamp,
// u32 point count, then count little-endian float32 (x, y, z) triples.
// ---------------------------------------------------------------------------

inline void write_scan_frame(std::ostream& out, std::uint32_t frame_index, const Scan& scan) {
    const double ts = scan.timestamp;
    const std::uint32_t count = static_cast<std::uint32_t>(scan.points.size());
    out.write(reinterpret_cast<const char*>(&frame_index), sizeof(frame_index));
    out.write(reinterpret_cast<const char*>(&ts), sizeof(ts));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& p : scan.points) {
        const float xyz[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                              static_cast<float>(p.z())};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
}

inline void write_scan_container(const std::string& path, const std::vector<Scan>& scans) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scan container: " + path);
    for (std::size_t i = 0; i < scans.size(); ++i)
        write_scan_frame(out, static_cast<std::uint32_t>(i), scans[i]);
}

/// Reads every frame. Point covariances are reconstructed from the given
/// beam range sigma since the container stores coordinates only.
inline std::vector<Scan> read_scan_container(const std::string& path, double range_sigma,
                                             double iso_floor = 1e-6) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scan container: " + path);
    std::vector<Scan> scans;
    while (true) {
        std::uint32_t frame_index = 0, count = 0;
        double ts = 0.0;
        in.read(reinterpret_cast<char*>(&frame_index), sizeof(frame_index));
        if (in.gcount() == 0) break;
        if (in.gcount() != sizeof(frame_index)) throw IoError("truncated scan container header");
        in.read(reinterpret_cast<char*>(&ts), sizeof(ts));
        in.read(reinterpret_cast<char*>(&count), sizeof(count));
        if (!in) throw IoError("truncated scan container header");
        Scan scan;
        scan.timestamp = ts;
        scan.points.reserve(count);
        scan.covariances.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            float xyz[3];
            in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
            if (!in) throw IoError("truncated scan container frame");
            const Vec3 p(xyz[0], xyz[1], xyz[2]);
            scan.push_back(p, beam_covariance(p, range_sigma, iso_floor));
        }
        scans.push_back(std::move(scan));
    }
    return scans;
}

}  // namespace gcslam
