#pragma once

#include <array>
#include <vector>

#include "r1ppnp/robust.hpp"
#include "r1ppnp/types.hpp"

namespace r1ppnp {

// Minimal three-point resection: all real solutions of the classical
// distance-ratio quartic, each returned as a proper rotation (det = +1) with
// positive depths for the three sample points. Throws DegenerateSample on
// collinear world points or repeated image observations.
std::vector<Pose> solve_p3p(const std::array<Correspondence, 3>& sample,
                            double focal);

// Classic hypothesize-and-verify baseline: uniform 3-point samples drawn
// with config.seed, every P3P candidate scored by inlier count at the H
// threshold, termination by the standard count with s = 3 (capped at
// config.max_sample_trials). No refinement. Throws NoSolution when no
// sample reaches 4 inliers within the budget.
RobustResult ransac_p3p(const std::vector<Correspondence>& correspondences,
                        const RobustConfig& config);

}  // namespace r1ppnp
