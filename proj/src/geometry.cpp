#include "r1ppnp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace r1ppnp {

ImagePoint project(const Vec3& camera_point, double focal) {
    if (camera_point.z() <= 0.0) {
        throw NonPositiveDepth("project: point depth must be positive");
    }
    ImagePoint ip;
    ip.u = focal * camera_point.x() / camera_point.z();
    ip.v = focal * camera_point.y() / camera_point.z();
    ip.f = focal;
    return ip;
}

Vec3 recover_translation(const Mat3& rotation, double mu,
                         const Correspondence& control) {
    if (mu <= 0.0) {
        throw NonPositiveScale("recover_translation: scale factor must be positive");
    }
    return control.image.homogeneous() / mu - rotation * control.world;
}

double rotation_error_deg(const Mat3& r_true, const Mat3& r_est) {
    double sum_sq = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double half_chord =
            std::min(1.0, 0.5 * (r_true.col(k) - r_est.col(k)).norm());
        const double angle = 2.0 * std::asin(half_chord);
        sum_sq += angle * angle;
    }
    return std::sqrt(sum_sq) * 180.0 / M_PI;
}

double translation_error_pct(const Vec3& t_true, const Vec3& t_est) {
    const double denom = t_est.norm();
    if (denom == 0.0) {
        throw ZeroEstimate("translation_error_pct: estimated translation is zero");
    }
    return (t_true - t_est).norm() / denom * 100.0;
}

double reprojection_error(const Pose& pose, const Correspondence& c) {
    const Vec3 cam = pose.rotation * c.world + pose.translation;
    if (cam.z() <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double u = c.image.f * cam.x() / cam.z();
    const double v = c.image.f * cam.y() / cam.z();
    return std::hypot(u - c.image.u, v - c.image.v);
}

bool is_orthonormal(const Mat3& r, double tol) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace r1ppnp
