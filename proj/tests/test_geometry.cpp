#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "r1ppnp/geometry.hpp"
#include "test_support.hpp"

using namespace r1ppnp;

TEST_CASE("project follows the pinhole ratios") {
    const ImagePoint a = project({0.0, 0.0, 4.0}, 1000.0);
    CHECK(a.u == doctest::Approx(0.0));
    CHECK(a.v == doctest::Approx(0.0));

    const ImagePoint b = project({2.0, -1.0, 4.0}, 1000.0);
    CHECK(b.u == doctest::Approx(500.0));
    CHECK(b.v == doctest::Approx(-250.0));
    CHECK(b.f == doctest::Approx(1000.0));

    const ImagePoint c = project({0.5, 0.5, 5.0}, 1000.0);
    CHECK(c.u == doctest::Approx(100.0));
    CHECK(c.v == doctest::Approx(100.0));

    CHECK_THROWS_AS(project({0.0, 0.0, 0.0}, 1000.0), NonPositiveDepth);
    CHECK_THROWS_AS(project({1.0, 1.0, -2.0}, 1000.0), NonPositiveDepth);
}

TEST_CASE("project/backproject identity along the ray") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pix(-320.0, 320.0);
    std::uniform_real_distribution<double> depth(0.1, 50.0);
    for (int i = 0; i < 200; ++i) {
        const double u = pix(rng);
        const double v = pix(rng);
        const double f = 1000.0;
        const double lambda = depth(rng);
        const Vec3 point = lambda * Vec3(u, v, f) / f;
        const ImagePoint back = project(point, f);
        CHECK(std::abs(back.u - u) < 1e-9);
        CHECK(std::abs(back.v - v) < 1e-9);
    }
}

TEST_CASE("recover_translation substitutions") {
    Correspondence control;
    control.world = Vec3::Zero();
    control.image = {0.0, 0.0, 1.0};

    const Vec3 t1 = recover_translation(Mat3::Identity(), 1.0, control);
    CHECK((t1 - Vec3(0, 0, 1)).norm() == doctest::Approx(0.0));

    const Vec3 t2 = recover_translation(Mat3::Identity(), 0.25, control);
    CHECK((t2 - Vec3(0, 0, 4)).norm() == doctest::Approx(0.0));

    CHECK_THROWS_AS(recover_translation(Mat3::Identity(), 0.0, control),
                    NonPositiveScale);
    CHECK_THROWS_AS(recover_translation(Mat3::Identity(), -1.0, control),
                    NonPositiveScale);
}

TEST_CASE("recover_translation forward-synthesis oracle") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const oracle::Scene scene = oracle::make_scene(rng, 10, 0, 0.0);
        const int o = trial % 10;
        const double lambda_star = scene.camera_points[o].z() / scene.focal;
        const Vec3 t = recover_translation(scene.truth.rotation,
                                           1.0 / lambda_star,
                                           scene.correspondences[o]);
        CHECK((t - scene.truth.translation).norm() < 1e-9);
    }
}

TEST_CASE("rotation_error_deg values") {
    std::mt19937_64 rng(31);
    const Mat3 r = oracle::random_rotation(rng);
    CHECK(rotation_error_deg(r, r) == doctest::Approx(0.0));

    // 10 degrees about z: two columns deviate by 10 degrees, the third by 0.
    const Mat3 rz = oracle::axis_angle({0, 0, 1}, 10.0 * M_PI / 180.0);
    CHECK(rotation_error_deg(Mat3::Identity(), rz) ==
          doctest::Approx(std::sqrt(200.0)).epsilon(1e-9));

    const Mat3 rx = oracle::axis_angle({1, 0, 0}, M_PI);
    CHECK(rotation_error_deg(Mat3::Identity(), rx) ==
          doctest::Approx(std::sqrt(2.0) * 180.0).epsilon(1e-9));
}

TEST_CASE("rotation_error_deg is symmetric and zero iff equal") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 100; ++i) {
        const Mat3 a = oracle::random_rotation(rng);
        const Mat3 b = oracle::random_rotation(rng);
        CHECK(rotation_error_deg(a, b) ==
              doctest::Approx(rotation_error_deg(b, a)).epsilon(1e-12));
        if ((a - b).norm() > 1e-6) {
            CHECK(rotation_error_deg(a, b) > 0.0);
        }
        CHECK(rotation_error_deg(a, a) == doctest::Approx(0.0));
    }
}

TEST_CASE("rotation_error_deg matches the clamped-acos form") {
    std::mt19937_64 rng(43);
    for (int i = 0; i < 200; ++i) {
        const Mat3 a = oracle::random_rotation(rng);
        const Mat3 b = oracle::random_rotation(rng);
        double sum_sq = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double d =
                std::clamp(a.col(k).dot(b.col(k)), -1.0, 1.0);
            sum_sq += std::acos(d) * std::acos(d);
        }
        const double reference = std::sqrt(sum_sq) * 180.0 / M_PI;
        CHECK(rotation_error_deg(a, b) ==
              doctest::Approx(reference).epsilon(1e-10));
    }
}

TEST_CASE("translation_error_pct") {
    const Vec3 t(1.0, -2.0, 3.0);
    CHECK(translation_error_pct(t, t) == doctest::Approx(0.0));
    CHECK(translation_error_pct({0, 0, 5}, {0, 0, 4}) ==
          doctest::Approx(25.0));
    CHECK(translation_error_pct({3, 0, 0}, {0, 4, 0}) ==
          doctest::Approx(125.0));
    CHECK_THROWS_AS(translation_error_pct({1, 0, 0}, {0, 0, 0}), ZeroEstimate);
}

TEST_CASE("translation_error_pct is scale covariant") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> comp(-5.0, 5.0);
    std::uniform_real_distribution<double> scale(0.1, 100.0);
    for (int i = 0; i < 100; ++i) {
        const Vec3 a(comp(rng), comp(rng), comp(rng));
        Vec3 b(comp(rng), comp(rng), comp(rng));
        if (b.norm() < 1e-6) b = Vec3(1, 1, 1);
        const double s = scale(rng);
        CHECK(translation_error_pct(a, b) ==
              doctest::Approx(translation_error_pct(s * a, s * b))
                  .epsilon(1e-10));
    }
}

TEST_CASE("reprojection_error") {
    std::mt19937_64 rng(61);
    const oracle::Scene scene = oracle::make_scene(rng, 10, 0, 0.0);
    for (const Correspondence& c : scene.correspondences) {
        CHECK(reprojection_error(scene.truth, c) < 1e-9);
    }

    // Observation displaced by a 3-4-5 triangle.
    Correspondence shifted = scene.correspondences[0];
    shifted.image.u += 3.0;
    shifted.image.v += 4.0;
    CHECK(reprojection_error(scene.truth, shifted) == doctest::Approx(5.0));

    // Behind the camera: +infinity sentinel.
    Correspondence behind = scene.correspondences[0];
    behind.world =
        scene.truth.rotation.transpose() *
        (Vec3(0.0, 0.0, -5.0) - scene.truth.translation);
    CHECK(std::isinf(reprojection_error(scene.truth, behind)));
}

TEST_CASE("is_orthonormal") {
    std::mt19937_64 rng(71);
    CHECK(is_orthonormal(Mat3::Identity()));
    CHECK(is_orthonormal(oracle::random_rotation(rng)));
    Mat3 skewed = Mat3::Identity();
    skewed(0, 1) = 1e-3;
    CHECK_FALSE(is_orthonormal(skewed));
}
