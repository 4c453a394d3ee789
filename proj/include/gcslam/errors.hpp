#pragma once

#include <stdexcept>
#include <string>

namespace gcslam {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularPlane : Error {
    explicit SingularPlane(const std::string& msg = "plane passes too close to the frame origin")
        : Error(msg) {}
};

struct InsufficientCorrespondences : Error {
    explicit InsufficientCorrespondences(const std::string& msg = "too few ICP correspondences")
        : Error(msg) {}
};

struct DegenerateNormals : Error {
    explicit DegenerateNormals(const std::string& msg = "normal estimation failed for most correspondences")
        : Error(msg) {}
};

struct NoGroundCandidates : Error {
    explicit NoGroundCandidates(const std::string& msg = "too few ground candidate points")
        : Error(msg) {}
};

struct DegenerateCandidates : Error {
    explicit DegenerateCandidates(const std::string& msg = "candidate points are collinear")
        : Error(msg) {}
};

struct NonConvergence : Error {
    explicit NonConvergence(const std::string& msg = "iteration limit reached without convergence")
        : Error(msg) {}
};

struct NonInvertibleCovariance : Error {
    explicit NonInvertibleCovariance(const std::string& msg = "covariance sum is not positive definite")
        : Error(msg) {}
};

struct RankDeficient : Error {
    explicit RankDeficient(const std::string& msg = "normal matrix singular beyond gauge; graph under-constrained")
        : Error(msg) {}
};

struct UnknownScenario : Error {
    explicit UnknownScenario(const std::string& name) : Error("unknown scenario: " + name) {}
};

struct OutOfSpan : Error {
    explicit OutOfSpan(const std::string& msg = "query time outside trajectory span") : Error(msg) {}
};

struct NoOverlap : Error {
    explicit NoOverlap(const std::string& msg = "trajectories share fewer than two associable frames")
        : Error(msg) {}
};

struct RegistrationFailure : Error {
    explicit RegistrationFailure(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace gcslam
