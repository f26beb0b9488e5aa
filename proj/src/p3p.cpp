#include "r1ppnp/p3p.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "r1ppnp/geometry.hpp"

namespace r1ppnp {

namespace {

// Real roots of a polynomial (highest-degree coefficient first) via the
// companion-matrix eigenvalues. Near-zero leading coefficients are dropped.
std::vector<double> real_polynomial_roots(std::vector<double> coeffs,
                                          double imaginary_tolerance) {
    const double scale = std::accumulate(
        coeffs.begin(), coeffs.end(), 0.0,
        [](double m, double c) { return std::max(m, std::abs(c)); });
    if (scale == 0.0) return {};
    std::size_t first = 0;
    while (first < coeffs.size() && std::abs(coeffs[first]) < 1e-14 * scale) {
        ++first;
    }
    coeffs.erase(coeffs.begin(), coeffs.begin() + first);
    const int degree = static_cast<int>(coeffs.size()) - 1;
    if (degree < 1) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
    for (int i = 0; i < degree; ++i) {
        companion(0, i) = -coeffs[i + 1] / coeffs[0];
        if (i + 1 < degree) companion(i + 1, i) = 1.0;
    }
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    std::vector<double> roots;
    for (int i = 0; i < degree; ++i) {
        const std::complex<double> z = solver.eigenvalues()(i);
        if (std::abs(z.imag()) <=
            imaginary_tolerance * std::max(1.0, std::abs(z.real()))) {
            roots.push_back(z.real());
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

// Proper-rotation Kabsch on exact point pairs (camera = R * world + t).
Pose rigid_from_three(const std::array<Vec3, 3>& world,
                      const std::array<Vec3, 3>& camera) {
    const Vec3 cw = (world[0] + world[1] + world[2]) / 3.0;
    const Vec3 cc = (camera[0] + camera[1] + camera[2]) / 3.0;
    Mat3 cross = Mat3::Zero();
    for (int i = 0; i < 3; ++i) {
        cross += (camera[i] - cc) * (world[i] - cw).transpose();
    }
    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0
                  ? -1.0
                  : 1.0;
    Pose pose;
    pose.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    pose.translation = cc - pose.rotation * cw;
    return pose;
}

// Joint Newton polish of the two distance-ratio equations; rescues
// ill-conditioned near-double roots of the quartic.
void refine_ratios(double a, double b, double c, double p, double q, double r,
                   double& x, double& y) {
    for (int it = 0; it < 8; ++it) {
        const double f1 =
            b * (1.0 + x * x - 2.0 * x * p) - a * (1.0 + y * y - 2.0 * y * q);
        const double f2 = b * (x * x + y * y - 2.0 * x * y * r) -
                          c * (1.0 + y * y - 2.0 * y * q);
        const double j11 = 2.0 * b * (x - p);
        const double j12 = -2.0 * a * (y - q);
        const double j21 = 2.0 * b * (x - y * r);
        const double j22 = 2.0 * b * (y - x * r) - 2.0 * c * (y - q);
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-14) break;
        x -= (j22 * f1 - j12 * f2) / det;
        y -= (-j21 * f1 + j11 * f2) / det;
    }
}

}  // namespace

std::vector<Pose> solve_p3p(const std::array<Correspondence, 3>& sample,
                            double focal) {
    const std::array<Vec3, 3> world = {sample[0].world, sample[1].world,
                                       sample[2].world};
    const Vec3 span1 = world[1] - world[0];
    const Vec3 span2 = world[2] - world[0];
    const double area = span1.cross(span2).norm();
    if (area <= 1e-12 * std::max(1.0, span1.norm() * span2.norm())) {
        throw DegenerateSample("collinear world points");
    }

    std::array<Vec3, 3> rays;
    for (int i = 0; i < 3; ++i) {
        rays[i] = Vec3(sample[i].image.u, sample[i].image.v, focal).normalized();
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            if (rays[i].dot(rays[j]) > 1.0 - 1e-14) {
                throw DegenerateSample("repeated image observations");
            }
        }
    }

    // Squared inter-point distances and bearing cosines.
    const double a = (world[0] - world[1]).squaredNorm();
    const double b = (world[0] - world[2]).squaredNorm();
    const double c = (world[1] - world[2]).squaredNorm();
    const double p = rays[0].dot(rays[1]);
    const double q = rays[0].dot(rays[2]);
    const double r = rays[1].dot(rays[2]);

    // Quartic in y = s3/s1 from the resultant of the two ratio equations.
    const double a4 = (a + b - c) * (a + b - c) - 4.0 * a * b * r * r;
    const double a3 =
        4.0 * (-a * a * q + a * b * p * r + 2.0 * a * b * q * r * r -
               a * b * q + 2.0 * a * c * q - b * b * p * r + b * c * p * r +
               b * c * q - c * c * q);
    const double a2 =
        2.0 * (2.0 * a * a * q * q + a * a - 4.0 * a * b * p * q * r -
               2.0 * a * b * r * r - 4.0 * a * c * q * q - 2.0 * a * c +
               2.0 * b * b * p * p + 2.0 * b * b * r * r - b * b -
               2.0 * b * c * p * p - 4.0 * b * c * p * q * r +
               2.0 * c * c * q * q + c * c);
    const double a1 =
        4.0 * (-a * a * q + a * b * p * r + a * b * q + 2.0 * a * c * q -
               b * b * p * r + 2.0 * b * c * p * p * q + b * c * p * r -
               b * c * q - c * c * q);
    const double a0 = (a - b - c) * (a - b - c) - 4.0 * b * c * p * p;

    const std::vector<double> roots =
        real_polynomial_roots({a4, a3, a2, a1, a0}, 1e-8);

    std::vector<Pose> solutions;
    std::vector<std::pair<double, double>> accepted;
    for (double y0 : roots) {
        double y = y0;
        const double num =
            -(a + b - c) * y * y + 2.0 * q * (a - c) * y - a + b + c;
        const double den = 2.0 * b * (p - r * y);
        std::vector<double> x_candidates;
        if (std::abs(den) > 1e-10 * std::max(std::abs(num), b)) {
            x_candidates.push_back(num / den);
        } else {
            // x drops out of the linear relation; fall back to the first
            // ratio equation, quadratic in x.
            const double c0 = b - a * (1.0 + y * y - 2.0 * y * q);
            const double disc = b * b * p * p - b * c0;
            if (disc < 0.0) continue;
            const double sq = std::sqrt(disc);
            x_candidates.push_back((b * p + sq) / b);
            x_candidates.push_back((b * p - sq) / b);
        }
        for (double x0 : x_candidates) {
            double x = x0;
            double yy = y;
            refine_ratios(a, b, c, p, q, r, x, yy);
            if (!(x > 0.0) || !(yy > 0.0)) continue;
            bool duplicate = false;
            for (const auto& [ax, ay] : accepted) {
                if (std::abs(x - ax) < 1e-7 * std::max(1.0, std::abs(ax)) &&
                    std::abs(yy - ay) < 1e-7 * std::max(1.0, std::abs(ay))) {
                    duplicate = true;
                    break;
                }
            }
            if (duplicate) continue;
            const double s1_sq = b / (1.0 + yy * yy - 2.0 * yy * q);
            if (!(s1_sq > 0.0)) continue;
            const double s1 = std::sqrt(s1_sq);
            const std::array<Vec3, 3> camera = {s1 * rays[0], x * s1 * rays[1],
                                                yy * s1 * rays[2]};
            const Pose pose = rigid_from_three(world, camera);
            bool in_front = true;
            for (const Vec3& w : world) {
                if ((pose.rotation * w + pose.translation).z() <= 0.0) {
                    in_front = false;
                    break;
                }
            }
            if (!in_front) continue;
            accepted.emplace_back(x, yy);
            solutions.push_back(pose);
        }
    }
    return solutions;
}

RobustResult ransac_p3p(const std::vector<Correspondence>& correspondences,
                        const RobustConfig& config) {
    const int n = static_cast<int>(correspondences.size());
    if (n < 4) {
        throw ValidationError("at least 4 correspondences required");
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    int best_count = -1;
    double best_mean_error = std::numeric_limits<double>::infinity();
    Pose best_pose;
    int best_anchor = -1;
    int trials = 0;
    int needed = config.max_sample_trials;

    while (trials < std::min(needed, config.max_sample_trials)) {
        ++trials;
        int i0 = pick(rng);
        int i1 = pick(rng);
        while (i1 == i0) i1 = pick(rng);
        int i2 = pick(rng);
        while (i2 == i0 || i2 == i1) i2 = pick(rng);

        std::vector<Pose> candidates;
        try {
            candidates = solve_p3p(
                {correspondences[i0], correspondences[i1], correspondences[i2]},
                correspondences[i0].image.f);
        } catch (const DegenerateSample&) {
            continue;
        }

        for (const Pose& pose : candidates) {
            int count = 0;
            double error_sum = 0.0;
            for (const Correspondence& c : correspondences) {
                const double e = reprojection_error(pose, c);
                if (e <= config.inlier_threshold) {
                    ++count;
                    error_sum += e;
                }
            }
            const double mean_error =
                count > 0 ? error_sum / count
                          : std::numeric_limits<double>::infinity();
            if (count > best_count ||
                (count == best_count && mean_error < best_mean_error)) {
                best_count = count;
                best_mean_error = mean_error;
                best_pose = pose;
                best_anchor = i0;
                needed = ransac_trials_needed(
                    config.certainty, static_cast<double>(count) / n, 3,
                    config.max_sample_trials);
            }
        }
    }

    if (best_count < 4) {
        throw NoSolution("no 3-point sample produced at least 4 inliers");
    }

    RobustResult result;
    result.pose = best_pose;
    result.control_index = best_anchor;
    result.trials_used = trials;
    result.total_iterations = 0;
    result.inlier_mask.assign(n, false);
    int count = 0;
    double error_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = reprojection_error(best_pose, correspondences[i]);
        if (e <= config.inlier_threshold) {
            result.inlier_mask[i] = true;
            ++count;
            error_sum += e;
        }
    }
    result.mean_inlier_reprojection_error = count > 0 ? error_sum / count : 0.0;
    return result;
}

}  // namespace r1ppnp
