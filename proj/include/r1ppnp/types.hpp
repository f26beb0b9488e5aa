#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace r1ppnp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// 2D observation in pixels, relative to the principal point. Carries the
// focal length so the homogeneous form [u, v, f] is self-contained.
struct ImagePoint {
    double u = 0.0;
    double v = 0.0;
    double f = 1.0;

    Vec3 homogeneous() const { return {u, v, f}; }
};

struct CameraIntrinsics {
    double f = 1000.0;
    double cu = 0.0;
    double cv = 0.0;
    int width = 640;
    int height = 480;
};

// One 3D world point paired with one 2D image observation.
struct Correspondence {
    Vec3 world = Vec3::Zero();
    ImagePoint image;
};

// Rigid camera pose: X_camera = rotation * X_world + translation.
// det(rotation) = +1 on every pose returned by the solvers.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonPositiveDepth : Error { using Error::Error; };
struct NonPositiveScale : Error { using Error::Error; };
struct ZeroEstimate : Error { using Error::Error; };
struct DegenerateConfiguration : Error { using Error::Error; };
struct DegenerateScale : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct NoSolution : Error { using Error::Error; };
struct DegenerateSample : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace r1ppnp
