#include "r1ppnp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "r1ppnp/geometry.hpp"

namespace r1ppnp {

namespace {

struct CubeBounds {
    double x_lo, x_hi, y_lo, y_hi, z_lo, z_hi;
};

CubeBounds regime_cube(SceneRegime regime) {
    if (regime == SceneRegime::QuasiSingular) {
        return {1.0, 2.0, 1.0, 2.0, 4.0, 8.0};
    }
    return {-2.0, 2.0, -2.0, 2.0, 4.0, 8.0};
}

Vec3 draw_cube_point(std::mt19937_64& rng, const CubeBounds& cube) {
    std::uniform_real_distribution<double> dx(cube.x_lo, cube.x_hi);
    std::uniform_real_distribution<double> dy(cube.y_lo, cube.y_hi);
    std::uniform_real_distribution<double> dz(cube.z_lo, cube.z_hi);
    const double x = dx(rng);
    const double y = dy(rng);
    const double z = dz(rng);
    return {x, y, z};
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    double w, x, y, z, norm;
    do {
        w = gauss(rng);
        x = gauss(rng);
        y = gauss(rng);
        z = gauss(rng);
        norm = std::sqrt(w * w + x * x + y * y + z * z);
    } while (norm < 1e-12);
    w /= norm;
    x /= norm;
    y /= norm;
    z /= norm;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

}  // namespace

SyntheticInstance generate(const SceneConfig& config) {
    if (config.n_inliers < 4) {
        throw ValidationError("at least 4 inliers required");
    }
    if (config.n_outliers < 0 || config.noise_sigma < 0.0 ||
        !(config.focal > 0.0) || config.width <= 0 || config.height <= 0) {
        throw ValidationError("invalid scene configuration");
    }

    std::mt19937_64 rng(config.seed);
    const CubeBounds cube = regime_cube(config.regime);

    SyntheticInstance instance;
    instance.config = config;
    instance.truth_pose.rotation = random_rotation(rng);
    {
        std::uniform_real_distribution<double> dt(-1.0, 1.0);
        const double tx = dt(rng);
        const double ty = dt(rng);
        const double tz = dt(rng);
        instance.truth_pose.translation = Vec3(tx, ty, tz);
    }
    const Mat3& rot = instance.truth_pose.rotation;
    const Vec3& trans = instance.truth_pose.translation;

    const int total = config.n_inliers + config.n_outliers;
    std::vector<Correspondence> points;
    std::vector<bool> mask;
    points.reserve(total);
    mask.reserve(total);

    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (int i = 0; i < config.n_inliers; ++i) {
        const Vec3 camera_point = draw_cube_point(rng, cube);
        Correspondence c;
        c.world = rot.transpose() * (camera_point - trans);
        c.image = project(camera_point, config.focal);
        if (config.noise_sigma > 0.0) {
            double du, dv;
            do {
                du = noise(rng);
                dv = noise(rng);
            } while (std::hypot(du, dv) > 6.0 * config.noise_sigma);
            c.image.u += du;
            c.image.v += dv;
        }
        points.push_back(c);
        mask.push_back(true);
    }

    // Mismatches: the 3D side of each outlier is one fresh scene point, the
    // 2D side is the (noisy) observation of a different, independent scene
    // point — a random re-matching of plausible features.
    for (int i = 0; i < config.n_outliers; ++i) {
        const Vec3 camera_point = draw_cube_point(rng, cube);
        const Vec3 unrelated = draw_cube_point(rng, cube);
        Correspondence c;
        c.world = rot.transpose() * (camera_point - trans);
        c.image = project(unrelated, config.focal);
        if (config.noise_sigma > 0.0) {
            c.image.u += noise(rng);
            c.image.v += noise(rng);
        }
        points.push_back(c);
        mask.push_back(false);
    }

    std::vector<int> order(total);
    for (int i = 0; i < total; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    instance.correspondences.reserve(total);
    instance.truth_inlier_mask.reserve(total);
    for (int i : order) {
        instance.correspondences.push_back(points[i]);
        instance.truth_inlier_mask.push_back(mask[i]);
    }
    return instance;
}

std::vector<double> regenerate_errors(const SyntheticInstance& instance,
                                      const Pose& pose) {
    std::vector<double> errors;
    errors.reserve(instance.correspondences.size());
    for (const Correspondence& c : instance.correspondences) {
        errors.push_back(reprojection_error(pose, c));
    }
    return errors;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer applied over the combined stream labels.
    auto split = [](std::uint64_t v) {
        v += 0x9e3779b97f4a7c15ULL;
        v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
        v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
        return v ^ (v >> 31);
    };
    return split(split(split(base) ^ (a + 1)) ^ (b + 1));
}

}  // namespace r1ppnp
