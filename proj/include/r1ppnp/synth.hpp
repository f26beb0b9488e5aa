#pragma once

#include <cstdint>
#include <vector>

#include "r1ppnp/types.hpp"

namespace r1ppnp {

enum class SceneRegime {
    OrdinaryThreeD,  // camera-frame cube [-2,2] x [-2,2] x [4,8]
    QuasiSingular,   // off-axis sliver   [ 1,2] x [ 1,2] x [4,8]
};

struct SceneConfig {
    SceneRegime regime = SceneRegime::OrdinaryThreeD;
    int n_inliers = 100;
    int n_outliers = 0;
    double noise_sigma = 0.0;  // pixels, per image axis
    double focal = 1000.0;
    int width = 640;
    int height = 480;
    std::uint64_t seed = 0;
};

struct SyntheticInstance {
    SceneConfig config;
    std::vector<Correspondence> correspondences;
    Pose truth_pose;
    std::vector<bool> truth_inlier_mask;
};

// Seeded scene synthesis: camera-frame points uniform in the regime's cube, a
// uniform random ground-truth pose mapping them to the world frame, exact
// projections plus per-axis Gaussian noise for inliers (redrawn in the
// vanishingly rare case the radial offset exceeds 6 sigma), outliers built by
// randomly re-matching scene points (the 2D side of an outlier is the noisy
// observation of an unrelated scene point), and a seeded shuffle.
SyntheticInstance generate(const SceneConfig& config);

// Reprojection error of every correspondence under the given pose.
std::vector<double> regenerate_errors(const SyntheticInstance& instance,
                                      const Pose& pose);

// Deterministic stream split for derived seeds (cells, trials, solvers).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);

}  // namespace r1ppnp
