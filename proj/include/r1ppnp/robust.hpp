#pragma once

#include <cstdint>
#include <vector>

#include "r1ppnp/core.hpp"
#include "r1ppnp/types.hpp"

namespace r1ppnp {

struct RobustConfig {
    double inlier_threshold = 10.0;         // H, pixels
    double certainty = 0.99;                // p in the trial-count formula
    double early_stop_inlier_fraction = 0.60;
    int stall_window = 20;                  // termination A window
    CoreConfig core;
    int max_control_trials = 0;             // 1-point trial cap; 0 means N
    int max_sample_trials = 10000;          // minimal-sample (s >= 3) trial cap
    std::uint64_t seed = 0;                 // consumed by ransac_p3p sampling
    unsigned trial_concurrency = 1;         // >1: batch-parallel control trials
};

struct RobustResult {
    Pose pose;
    std::vector<bool> inlier_mask;
    int control_index = -1;
    int trials_used = 0;
    int total_iterations = 0;  // winning trial + refinement
    double mean_inlier_reprojection_error = 0.0;
};

// Soft re-weighting: w = 1 for e <= H, H/e beyond, 0 for the +infinity
// behind-camera sentinel.
std::vector<double> compute_weights(const std::vector<double>& errors,
                                    double threshold);

// Control-point candidate order: ascending pixel distance to the centroid of
// all image points, ties broken by the original index.
std::vector<int> control_point_order(
    const std::vector<Correspondence>& correspondences);

// Standard RANSAC termination count ceil(log(1-p) / log(1 - w^s)), clamped
// to [1, cap]; returns cap when w^s underflows the log.
int ransac_trials_needed(double certainty, double inlier_fraction,
                         int sample_size, int cap);

struct TrialResult {
    SolverState state;                    // state after the last sweep
    std::vector<int> inlier_count_history;
    std::vector<bool> best_inlier_mask;   // mask at the best-count iteration
    int best_inlier_count = 0;
    double best_mean_inlier_error = 0.0;
    Mat3 best_rotation = Mat3::Identity();
    double best_mu = 0.0;
    int iterations = 0;
    int mirror_flips = 0;
};

// One re-weighted R1PPnP trial with the given control point: weights are
// recomputed from the current reprojection errors every sweep, inliers are
// counted under the current (R, mu), and the loop stops when the inlier
// count has not grown over stall_window iterations (termination A) or at
// max_iterations.
TrialResult run_trial(const std::vector<Correspondence>& correspondences,
                      int control_index, const RobustConfig& config);

// Full pipeline: center-outward 1-point RANSAC over control points, best
// trial kept by inlier count (ties by mean inlier error), early stop at
// early_stop_inlier_fraction or the Eq.-21 count with s = 1; then an
// unweighted refinement on the detected inliers and a final mask recompute
// under the refined pose. Throws NoSolution when no trial reaches 4 inliers.
RobustResult solve_robust(const std::vector<Correspondence>& correspondences,
                          const RobustConfig& config);

}  // namespace r1ppnp
