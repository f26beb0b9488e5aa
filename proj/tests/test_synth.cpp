#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "r1ppnp/geometry.hpp"
#include "r1ppnp/synth.hpp"

using namespace r1ppnp;

namespace {

SceneConfig base_config() {
    SceneConfig config;
    config.n_inliers = 100;
    config.n_outliers = 0;
    config.noise_sigma = 0.0;
    config.seed = 11;
    return config;
}

}  // namespace

TEST_CASE("noise-free instances reproject exactly under the truth pose") {
    const SyntheticInstance instance = generate(base_config());
    for (const Correspondence& c : instance.correspondences) {
        CHECK(reprojection_error(instance.truth_pose, c) < 1e-9);
    }
}

TEST_CASE("outlier bookkeeping matches the construction") {
    SceneConfig config = base_config();
    config.n_outliers = 100;
    config.noise_sigma = 5.0;
    const SyntheticInstance instance = generate(config);
    const int trues =
        static_cast<int>(std::count(instance.truth_inlier_mask.begin(),
                                    instance.truth_inlier_mask.end(), true));
    CHECK(trues == 100);
    CHECK(instance.correspondences.size() == 200);
    // p_outlier = N_out / (N_in + N_out)
    CHECK(static_cast<double>(config.n_outliers) /
              instance.correspondences.size() ==
          doctest::Approx(0.5));
}

TEST_CASE("per-axis noise sigma is statistically correct") {
    // 10,000 noise samples across 100 seeded instances.
    double sum_u = 0.0, sum_uu = 0.0, sum_v = 0.0, sum_vv = 0.0;
    int n = 0;
    for (int s = 0; s < 100; ++s) {
        SceneConfig config = base_config();
        config.noise_sigma = 5.0;
        config.seed = 1000 + s;
        const SyntheticInstance instance = generate(config);
        for (std::size_t i = 0; i < instance.correspondences.size(); ++i) {
            const Correspondence& c = instance.correspondences[i];
            const Vec3 cam = instance.truth_pose.rotation * c.world +
                             instance.truth_pose.translation;
            const double du = c.image.u - config.focal * cam.x() / cam.z();
            const double dv = c.image.v - config.focal * cam.y() / cam.z();
            sum_u += du;
            sum_uu += du * du;
            sum_v += dv;
            sum_vv += dv * dv;
            ++n;
        }
    }
    REQUIRE(n == 10000);
    const double sigma_u = std::sqrt(sum_uu / n - (sum_u / n) * (sum_u / n));
    const double sigma_v = std::sqrt(sum_vv / n - (sum_v / n) * (sum_v / n));
    CHECK(std::abs(sigma_u - 5.0) / 5.0 < 0.02);
    CHECK(std::abs(sigma_v - 5.0) / 5.0 < 0.02);
}

TEST_CASE("same seed reproduces the instance bit for bit") {
    SceneConfig config = base_config();
    config.n_outliers = 50;
    config.noise_sigma = 3.0;
    const SyntheticInstance a = generate(config);
    const SyntheticInstance b = generate(config);
    REQUIRE(a.correspondences.size() == b.correspondences.size());
    CHECK(a.truth_pose.rotation == b.truth_pose.rotation);
    CHECK(a.truth_pose.translation == b.truth_pose.translation);
    for (std::size_t i = 0; i < a.correspondences.size(); ++i) {
        CHECK(a.correspondences[i].world == b.correspondences[i].world);
        CHECK(a.correspondences[i].image.u == b.correspondences[i].image.u);
        CHECK(a.correspondences[i].image.v == b.correspondences[i].image.v);
        CHECK(a.truth_inlier_mask[i] == b.truth_inlier_mask[i]);
    }
    SceneConfig other = config;
    other.seed = config.seed + 1;
    const SyntheticInstance c = generate(other);
    CHECK(c.truth_pose.translation != a.truth_pose.translation);
}

TEST_CASE("camera-frame points respect the regime cube") {
    for (const SceneRegime regime :
         {SceneRegime::OrdinaryThreeD, SceneRegime::QuasiSingular}) {
        SceneConfig config = base_config();
        config.regime = regime;
        config.n_outliers = 40;
        config.seed = 77;
        const SyntheticInstance instance = generate(config);
        const double x_lo = regime == SceneRegime::QuasiSingular ? 1.0 : -2.0;
        for (std::size_t i = 0; i < instance.correspondences.size(); ++i) {
            const Vec3 cam =
                instance.truth_pose.rotation *
                    instance.correspondences[i].world +
                instance.truth_pose.translation;
            CHECK(cam.z() >= 4.0 - 1e-9);
            CHECK(cam.z() <= 8.0 + 1e-9);
            CHECK(cam.x() >= x_lo - 1e-9);
            CHECK(cam.x() <= 2.0 + 1e-9);
            CHECK(cam.y() >= x_lo - 1e-9);
            CHECK(cam.y() <= 2.0 + 1e-9);
        }
    }
}

TEST_CASE("regenerate_errors against the truth pose") {
    SceneConfig config = base_config();
    config.n_outliers = 100;
    config.noise_sigma = 5.0;
    config.seed = 31;

    int noisy_inliers_in_6_sigma = 0;
    int inliers_total = 0;
    int outliers_over_threshold = 0;
    int outliers_total = 0;
    for (int s = 0; s < 50; ++s) {
        config.seed = 4000 + s;
        const SyntheticInstance instance = generate(config);
        const auto errors = regenerate_errors(instance, instance.truth_pose);
        for (std::size_t i = 0; i < errors.size(); ++i) {
            if (instance.truth_inlier_mask[i]) {
                ++inliers_total;
                if (errors[i] < 6.0 * config.noise_sigma) {
                    ++noisy_inliers_in_6_sigma;
                }
            } else {
                ++outliers_total;
                if (errors[i] > 10.0) ++outliers_over_threshold;
            }
        }
    }
    // 6-sigma bound holds by construction; >= 99% asserted.
    CHECK(noisy_inliers_in_6_sigma >= static_cast<int>(0.99 * inliers_total));
    CHECK(outliers_over_threshold >= static_cast<int>(0.99 * outliers_total));

    SUBCASE("noise-free inlier errors vanish") {
        SceneConfig clean = base_config();
        const SyntheticInstance instance = generate(clean);
        for (double e : regenerate_errors(instance, instance.truth_pose)) {
            CHECK(e < 1e-9);
        }
    }
}

TEST_CASE("outlier image points are independent of their world points") {
    // Correlation between the outlier observation and the projection of its
    // paired world point, over many instances.
    double sxy_u = 0.0, sx_u = 0.0, sy_u = 0.0, sxx_u = 0.0, syy_u = 0.0;
    int n = 0;
    SceneConfig config = base_config();
    config.n_inliers = 4;
    config.n_outliers = 100;
    for (int s = 0; s < 100; ++s) {
        config.seed = 9000 + s;
        const SyntheticInstance instance = generate(config);
        for (std::size_t i = 0; i < instance.correspondences.size(); ++i) {
            if (instance.truth_inlier_mask[i]) continue;
            const Correspondence& c = instance.correspondences[i];
            const Vec3 cam = instance.truth_pose.rotation * c.world +
                             instance.truth_pose.translation;
            const double projected_u = config.focal * cam.x() / cam.z();
            const double observed_u = c.image.u;
            sxy_u += projected_u * observed_u;
            sx_u += projected_u;
            sy_u += observed_u;
            sxx_u += projected_u * projected_u;
            syy_u += observed_u * observed_u;
            ++n;
        }
    }
    REQUIRE(n == 10000);
    const double cov = sxy_u / n - (sx_u / n) * (sy_u / n);
    const double var_x = sxx_u / n - (sx_u / n) * (sx_u / n);
    const double var_y = syy_u / n - (sy_u / n) * (sy_u / n);
    const double corr = cov / std::sqrt(var_x * var_y);
    CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("mix_seed separates streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {0ULL, 1ULL, 42ULL}) {
        for (std::uint64_t a = 0; a < 10; ++a) {
            for (std::uint64_t b = 0; b < 10; ++b) {
                seen.insert(mix_seed(base, a, b));
                CHECK(mix_seed(base, a, b) == mix_seed(base, a, b));
            }
        }
    }
    CHECK(seen.size() == 300);
}

TEST_CASE("generate validates its configuration") {
    SceneConfig bad = base_config();
    bad.n_inliers = 3;
    CHECK_THROWS_AS(generate(bad), ValidationError);
    bad = base_config();
    bad.noise_sigma = -1.0;
    CHECK_THROWS_AS(generate(bad), ValidationError);
}
