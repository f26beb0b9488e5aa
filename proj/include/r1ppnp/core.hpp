#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "r1ppnp/types.hpp"

namespace r1ppnp {

struct CoreConfig {
    int max_iterations = 100;
    double rotation_tolerance = 1e-5;  // Frobenius norm of R_k - R_{k-1}
    double initial_mu = 1e-4;
    bool use_depth_weighting = true;   // 1/lambda_i factors in the objective
    int max_mirror_flips = 2;          // det(R) = -1 convergences tolerated
    double lambda_floor = 1e-6;        // keeps 1/lambda_i finite for wild poses
};

// Shape of the point cloud relative to the control point, plus the cached
// homogeneous image vectors. Built once per (correspondences, control).
class ShapeContext {
  public:
    ShapeContext(const std::vector<Correspondence>& correspondences,
                 int control_index);

    int size() const { return static_cast<int>(shapes_.size()); }
    int control() const { return control_; }
    double focal() const { return focal_; }
    const Vec3& image_ray(int i) const { return rays_[i]; }       // x_i
    const Vec3& shape(int i) const { return shapes_[i]; }         // X_i - X_o
    const Vec3& control_ray() const { return rays_[control_]; }   // x_o
    const Correspondence& control_point() const { return control_point_; }

  private:
    int control_;
    double focal_;
    std::vector<Vec3> rays_;
    std::vector<Vec3> shapes_;
    Correspondence control_point_;
};

// Iteration state. lambdas are the relative depths (control entry fixed at
// 1); weights are the per-point soft weights (all 1 in the outlier-free core).
struct SolverState {
    Mat3 rotation = Mat3::Identity();
    double mu = 1e-4;
    std::vector<double> lambdas;
    std::vector<double> weights;
    int iteration = 0;
};

// Virtual object points p_i = x_o + mu * R * S_i (control slot holds x_o).
std::vector<Vec3> compute_virtual_points(const Mat3& rotation, double mu,
                                         const ShapeContext& shape);

// q-stage: orthogonal projection of each p_i onto its line of sight,
// lambda_i = x_i' p_i / x_i' x_i, floored at lambda_floor. The control
// entry is left at 1.
std::vector<double> project_depths(const std::vector<Vec3>& virtual_points,
                                   const ShapeContext& shape,
                                   double lambda_floor);

// p-stage rotation: R = U V' from svd(A S') where the A and S columns are
// w_i (q_i - x_o) / lambda_i and w_i S_i / lambda_i (1/lambda omitted when
// depth weighting is off). det(R) may be -1; the sign is deliberately not
// corrected. Throws DegenerateConfiguration when A S' drops below rank 2.
Mat3 fit_rotation(const std::vector<double>& lambdas,
                  const ShapeContext& shape,
                  const std::vector<double>& weights,
                  bool use_depth_weighting);

// Weighted orthogonal fit used by fit_rotation: the orthogonal matrix
// minimizing sum_i ||w_i (target_i - R source_i)||^2. Exposed for testing.
Mat3 weighted_orthogonal_fit(const std::vector<Vec3>& targets,
                             const std::vector<Vec3>& sources,
                             const std::vector<double>& weights);

// p-stage scale: mu_new = mu_old * ||vec(C)|| / ||vec(B)|| with B columns
// w_i (v_i - x_o), C columns w_i (x_i - x_o), v_i the image projection of
// p_i. Points with non-positive p_z are skipped. Throws DegenerateScale when
// ||vec(B)|| < 1e-12.
double update_scale(const std::vector<Vec3>& virtual_points,
                    const ShapeContext& shape,
                    const std::vector<double>& weights, double mu_old);

// sum_{i != o} (w_eff ||p_i - q_i||)^2 with w_eff = 1/lambda_i when depth
// weighting is enabled, 1 otherwise.
double objective_value(const std::vector<Vec3>& virtual_points,
                       const std::vector<Vec3>& ray_points,
                       const std::vector<double>& lambdas, int control_index,
                       bool use_depth_weighting);

// q_i = lambda_i * x_i for all points (control slot: x_o).
std::vector<Vec3> make_ray_points(const std::vector<double>& lambdas,
                                  const ShapeContext& shape);

// Mirror flip (local-minima escape): lambda_i <- 1/lambda_i for i != o.
void mirror_flip(std::vector<double>& lambdas, int control_index);

// Pixel reprojection errors of the virtual points against the observations
// under the current (R, mu): ||v_i - x_i|| with v_i = f p_i / p_z. Behind-
// camera points get +infinity; the control entry is 0 by construction.
std::vector<double> virtual_point_errors(const std::vector<Vec3>& virtual_points,
                                         const ShapeContext& shape);

// Per-iteration snapshot for instrumentation.
struct CoreTrace {
    int iteration = 0;
    Mat3 rotation;
    double mu = 0.0;
    double objective = 0.0;
    // Right-triangle identity residual max_i | ||p-q_new||^2 -
    // (||p-q_old||^2 - ||q_new-q_old||^2) |, over points where the depth
    // floor did not engage (the floored foot point is not orthogonal).
    double max_triangle_residual = 0.0;
    double q_change_sq = 0.0;  // sum_i ||q_new - q_old||^2
    int floored_depths = 0;
    bool flipped = false;      // mirror flip applied at the end of this sweep
};
using CoreObserver = std::function<void(const CoreTrace&)>;

// Optional warm start. When lambdas are provided the first sweep skips the
// q-stage and fits directly to the given depths.
struct CoreInit {
    Mat3 rotation = Mat3::Identity();
    double mu = 1e-4;
    std::optional<std::vector<double>> lambdas;
};

struct CoreResult {
    Pose pose;
    double objective = 0.0;
    int iterations = 0;
    int mirror_flips = 0;
    bool converged = false;
};

// Outlier-free R1PPnP core: alternates the q- and p-stages from R = I,
// mu = initial_mu until ||R_k - R_{k-1}||_F < rotation_tolerance. A det = -1
// convergence triggers a mirror flip (up to max_mirror_flips); exceeding the
// flip budget or exhausting max_iterations with det = -1 throws NoConvergence.
CoreResult solve_core(const std::vector<Correspondence>& correspondences,
                      int control_index, const CoreConfig& config,
                      const CoreInit* init = nullptr,
                      const CoreObserver& observer = nullptr);

}  // namespace r1ppnp
