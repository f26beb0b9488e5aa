#pragma once

#include <vector>

#include "r1ppnp/types.hpp"

namespace r1ppnp {

// Pinhole projection of a camera-frame point. Throws NonPositiveDepth if the
// point is on or behind the principal plane.
ImagePoint project(const Vec3& camera_point, double focal);

// Translation from the converged rotation, scale factor and control point:
// t = (1/mu) * x_o - R * X_o.  Throws NonPositiveScale if mu <= 0.
Vec3 recover_translation(const Mat3& rotation, double mu,
                         const Correspondence& control);

// Column-wise angular distance between two rotations, in degrees:
// || [angle(r_k_true, r_k_est)]_{k=1,2,3} || * 180/pi.
// Evaluated as 2*asin(||r_true - r_est||/2) per column, which equals the
// clamped acos of the column dot product but stays exact near zero.
double rotation_error_deg(const Mat3& r_true, const Mat3& r_est);

// ||t_true - t_est|| / ||t_est|| * 100.  The denominator is the estimated
// translation. Throws ZeroEstimate if ||t_est|| = 0.
double translation_error_pct(const Vec3& t_true, const Vec3& t_est);

// Pixel distance between the projected world point and the observation.
// Returns +infinity when the transformed point has non-positive depth, so
// such a point can never count as an inlier.
double reprojection_error(const Pose& pose, const Correspondence& c);

bool is_orthonormal(const Mat3& r, double tol = 1e-9);

}  // namespace r1ppnp
