#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "r1ppnp/harness.hpp"
#include "r1ppnp/io.hpp"
#include "r1ppnp/p3p.hpp"

using namespace r1ppnp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("r1ppnp_test_" + name);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentSpec small_spec() {
    ExperimentSpec spec;
    spec.sweep = SweepVariable::OutlierFraction;
    spec.sweep_values = {0.0, 0.5};
    spec.base_scene.n_inliers = 50;
    spec.base_scene.noise_sigma = 5.0;
    spec.solvers = {SolverKind::R1PPnP, SolverKind::RansacP3P};
    spec.trials_per_cell = 4;
    spec.base_seed = 321;
    return spec;
}

}  // namespace

TEST_CASE("run_experiment cardinality and pairing") {
    ExperimentSpec spec = small_spec();
    const auto records = run_experiment(spec);
    CHECK(records.size() == spec.sweep_values.size() * spec.trials_per_cell *
                                spec.solvers.size());
    // Paired seeds: both solvers of a cell-trial share the scene seed.
    for (std::size_t i = 0; i + 1 < records.size(); i += 2) {
        CHECK(records[i].scene.seed == records[i + 1].scene.seed);
        CHECK(records[i].solver == SolverKind::R1PPnP);
        CHECK(records[i + 1].solver == SolverKind::RansacP3P);
    }
    // The outlier fraction resolves the outlier count.
    for (const auto& rec : records) {
        if (rec.cell_index == 1) CHECK(rec.scene.n_outliers == 50);
        if (rec.cell_index == 0) CHECK(rec.scene.n_outliers == 0);
    }
}

TEST_CASE("run_experiment is deterministic across runs and thread counts") {
    const ExperimentSpec spec = small_spec();
    const auto a = run_experiment(spec, 1);
    const auto b = run_experiment(spec, 1);
    const auto c = run_experiment(spec, 4);

    const auto path_a = temp_file("records_a.csv");
    const auto path_b = temp_file("records_b.csv");
    const auto path_c = temp_file("records_c.csv");
    emit_records_csv(a, path_a.string());
    emit_records_csv(b, path_b.string());
    emit_records_csv(c, path_c.string());
    CHECK(slurp(path_a) == slurp(path_b));
    CHECK(slurp(path_a) == slurp(path_c));

    const auto summaries_a = aggregate(spec, a);
    const auto summaries_c = aggregate(spec, c);
    const auto sum_a = temp_file("summary_a.csv");
    const auto sum_c = temp_file("summary_c.csv");
    emit_summary_csv(summaries_a, sum_a.string());
    emit_summary_csv(summaries_c, sum_c.string());
    CHECK(slurp(sum_a) == slurp(sum_c));
}

TEST_CASE("aggregate means and medians") {
    ExperimentSpec spec = small_spec();
    spec.solvers = {SolverKind::R1PPnP};
    spec.sweep_values = {0.0};
    spec.trials_per_cell = 1;

    ExperimentRecord rec;
    rec.solver = SolverKind::R1PPnP;
    rec.cell_index = 0;
    rec.sweep_value = 0.0;
    rec.ok = true;
    rec.e_rot_deg = 1.5;
    rec.e_trans_pct = 2.5;
    rec.trials_used = 3;

    SUBCASE("single record summarizes to itself") {
        const auto summaries = aggregate(spec, {rec});
        REQUIRE(summaries.size() == 1);
        CHECK(summaries[0].mean_e_rot == doctest::Approx(1.5));
        CHECK(summaries[0].median_e_rot == doctest::Approx(1.5));
        CHECK(summaries[0].std_e_rot == doctest::Approx(0.0));
        CHECK(summaries[0].n_ok == 1);
    }

    SUBCASE("two records average") {
        ExperimentRecord other = rec;
        other.e_rot_deg = 3.0;
        rec.e_rot_deg = 1.0;
        const auto summaries = aggregate(spec, {rec, other});
        REQUIRE(summaries.size() == 1);
        CHECK(summaries[0].mean_e_rot == doctest::Approx(2.0));
        CHECK(summaries[0].median_e_rot == doctest::Approx(2.0));
    }

    SUBCASE("summary rows are cells times solvers") {
        ExperimentSpec wide = small_spec();
        wide.trials_per_cell = 2;
        const auto records = run_experiment(wide);
        const auto summaries = aggregate(wide, records);
        CHECK(summaries.size() ==
              wide.sweep_values.size() * wide.solvers.size());
    }
}

TEST_CASE("failed trials are isolated rows") {
    ExperimentSpec spec = small_spec();
    spec.sweep_values = {0.8};
    spec.solvers = {SolverKind::RansacP3P, SolverKind::R1PPnP};
    spec.trials_per_cell = 2;
    spec.robust.max_sample_trials = 1;  // starve the 3-point solver
    const auto records = run_experiment(spec);
    REQUIRE(records.size() == 4);
    int p3p_failures = 0;
    for (const auto& rec : records) {
        if (rec.solver == SolverKind::RansacP3P && !rec.ok) {
            ++p3p_failures;
            CHECK(rec.error == "NoSolution");
        }
        if (rec.solver == SolverKind::R1PPnP) CHECK(rec.ok);
    }
    CHECK(p3p_failures >= 1);

    const auto summaries = aggregate(spec, records);
    for (const auto& s : summaries) {
        if (s.solver == SolverKind::RansacP3P) {
            CHECK(s.n_failed >= 1);
            CHECK(s.failure_rate ==
                  doctest::Approx(static_cast<double>(s.n_failed) /
                                  (s.n_ok + s.n_failed)));
        }
    }
}

TEST_CASE("records CSV round-trips") {
    const ExperimentSpec spec = small_spec();
    const auto records = run_experiment(spec);
    const auto path = temp_file("roundtrip.csv");
    emit_records_csv(records, path.string());
    const auto parsed = parse_records_csv(path.string());
    REQUIRE(parsed.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(parsed[i].solver == records[i].solver);
        CHECK(parsed[i].cell_index == records[i].cell_index);
        CHECK(parsed[i].sweep_value == records[i].sweep_value);
        CHECK(parsed[i].scene.seed == records[i].scene.seed);
        CHECK(parsed[i].ok == records[i].ok);
        CHECK(parsed[i].e_rot_deg == records[i].e_rot_deg);
        CHECK(parsed[i].e_trans_pct == records[i].e_trans_pct);
        CHECK(parsed[i].trials_used == records[i].trials_used);
        CHECK(parsed[i].inliers_found == records[i].inliers_found);
    }

    SUBCASE("empty record stream writes a header-only file") {
        const auto empty_path = temp_file("empty.csv");
        emit_records_csv({}, empty_path.string());
        const std::string content = slurp(empty_path);
        CHECK(content.find("solver,cell_index") == 0);
        CHECK(std::count(content.begin(), content.end(), '\n') == 1);
        CHECK(parse_records_csv(empty_path.string()).empty());
    }
}

TEST_CASE("curve files carry one row per cell and solver") {
    const ExperimentSpec spec = small_spec();
    const auto records = run_experiment(spec);
    const auto summaries = aggregate(spec, records);
    const auto path = temp_file("curve.csv");
    emit_curve_csv(summaries, CurveMetric::RotationError, path.string());
    const std::string content = slurp(path);
    CHECK(std::count(content.begin(), content.end(), '\n') ==
          1 + static_cast<long>(summaries.size()));
    CHECK(content.rfind("solver,x,mean,std\n", 0) == 0);
}

TEST_CASE("correspondence files ingest and validate") {
    SceneConfig config;
    config.n_inliers = 100;
    config.noise_sigma = 2.0;
    config.seed = 5;
    const SyntheticInstance instance = generate(config);
    const CorrespondenceSet set = to_correspondence_set(instance);

    SUBCASE("JSON round-trip is bitwise") {
        const auto path = temp_file("set.json");
        write_correspondences_json(set, path.string());
        const CorrespondenceSet loaded =
            ingest_correspondences(path.string());
        REQUIRE(loaded.points.size() == set.points.size());
        CHECK(loaded.intrinsics.f == set.intrinsics.f);
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            CHECK(loaded.points[i].world == set.points[i].world);
            CHECK(loaded.points[i].image.u == set.points[i].image.u);
            CHECK(loaded.points[i].image.v == set.points[i].image.v);
        }
    }

    SUBCASE("CSV round-trip is bitwise") {
        const auto path = temp_file("set.csv");
        write_correspondences_csv(set, path.string());
        const CorrespondenceSet loaded =
            ingest_correspondences(path.string());
        REQUIRE(loaded.points.size() == set.points.size());
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            CHECK(loaded.points[i].world == set.points[i].world);
            CHECK(loaded.points[i].image.u == set.points[i].image.u);
            CHECK(loaded.points[i].image.v == set.points[i].image.v);
        }
    }

    SUBCASE("ingested data solves bitwise-identically to in-memory data") {
        const auto path = temp_file("solve.json");
        write_correspondences_json(set, path.string());
        const CorrespondenceSet loaded =
            ingest_correspondences(path.string());
        RobustConfig robust;
        robust.inlier_threshold = 10.0;
        const RobustResult direct = solve_robust(set.points, robust);
        const RobustResult via_file = solve_robust(loaded.points, robust);
        CHECK(direct.pose.rotation == via_file.pose.rotation);
        CHECK(direct.pose.translation == via_file.pose.translation);
        CHECK(direct.inlier_mask == via_file.inlier_mask);
    }

    SUBCASE("zero focal length is rejected") {
        const auto path = temp_file("bad_focal.json");
        std::ofstream out(path);
        out << R"({"intrinsics": {"f": 0.0, "cu": 0, "cv": 0},
                  "points": [{"X":0,"Y":0,"Z":5,"u":0,"v":0},
                             {"X":1,"Y":0,"Z":5,"u":10,"v":0},
                             {"X":0,"Y":1,"Z":5,"u":0,"v":10},
                             {"X":1,"Y":1,"Z":6,"u":8,"v":8}]})";
        out.close();
        CHECK_THROWS_AS(ingest_correspondences(path.string()),
                        ValidationError);
    }

    SUBCASE("too few points are rejected") {
        const auto path = temp_file("short.json");
        std::ofstream out(path);
        out << R"({"intrinsics": {"f": 1000.0},
                  "points": [{"X":0,"Y":0,"Z":5,"u":0,"v":0}]})";
        out.close();
        CHECK_THROWS_AS(ingest_correspondences(path.string()),
                        ValidationError);
    }

    SUBCASE("malformed JSON reports a parse error") {
        const auto path = temp_file("broken.json");
        std::ofstream out(path);
        out << "{\"intrinsics\": {";
        out.close();
        CHECK_THROWS_AS(ingest_correspondences(path.string()), ParseError);
    }

    SUBCASE("malformed CSV reports the offending line") {
        const auto path = temp_file("broken.csv");
        std::ofstream out(path);
        out << "f,cu,cv,width,height,X,Y,Z,u,v\n";
        out << "1000,0,0,640,480,1,2,3,4\n";  // nine fields
        out.close();
        try {
            ingest_correspondences(path.string());
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
}

TEST_CASE("experiment spec loads from JSON") {
    const auto path = temp_file("spec.json");
    std::ofstream out(path);
    out << R"({
      "sweep": {"variable": "outlier_fraction", "values": [0.0, 0.25, 0.5]},
      "scene": {"regime": "quasi_singular", "n_inliers": 64, "noise_sigma": 2.5},
      "solvers": ["r1ppnp", "ransac_p3p", "r1ppnp_core"],
      "trials_per_cell": 7,
      "base_seed": 99,
      "robust": {"inlier_threshold": 5.0, "core": {"rotation_tolerance": 1e-6}}
    })";
    out.close();
    const ExperimentSpec spec = load_spec_json(path.string());
    CHECK(spec.sweep == SweepVariable::OutlierFraction);
    CHECK(spec.sweep_values.size() == 3);
    CHECK(spec.base_scene.regime == SceneRegime::QuasiSingular);
    CHECK(spec.base_scene.n_inliers == 64);
    CHECK(spec.base_scene.noise_sigma == doctest::Approx(2.5));
    CHECK(spec.solvers.size() == 3);
    CHECK(spec.trials_per_cell == 7);
    CHECK(spec.base_seed == 99);
    CHECK(spec.robust.inlier_threshold == doctest::Approx(5.0));
    CHECK(spec.robust.core.rotation_tolerance == doctest::Approx(1e-6));
}
