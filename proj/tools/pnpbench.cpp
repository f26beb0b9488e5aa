// Command-line front end: one-shot solving of correspondence files, synthetic
// scene generation, and seeded benchmark sweeps with CSV output.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "r1ppnp/geometry.hpp"
#include "r1ppnp/harness.hpp"
#include "r1ppnp/io.hpp"
#include "r1ppnp/p3p.hpp"
#include "r1ppnp/robust.hpp"
#include "r1ppnp/synth.hpp"

namespace {

using nlohmann::json;
using namespace r1ppnp;

json pose_to_json(const Pose& pose) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        json row = json::array();
        for (int c = 0; c < 3; ++c) row.push_back(pose.rotation(r, c));
        rot.push_back(std::move(row));
    }
    return {{"rotation", std::move(rot)},
            {"translation",
             {pose.translation.x(), pose.translation.y(),
              pose.translation.z()}}};
}

int run_solve(const std::string& input, const std::string& format_name,
              const std::string& solver_name, double threshold,
              std::uint64_t seed, const std::string& output) {
    CorrespondenceFormat format = CorrespondenceFormat::Auto;
    if (format_name == "json") format = CorrespondenceFormat::Json;
    if (format_name == "csv") format = CorrespondenceFormat::Csv;

    CorrespondenceSet set;
    try {
        set = ingest_correspondences(input, format);
    } catch (const Error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    }

    RobustConfig config;
    config.inlier_threshold = threshold;
    config.seed = seed;

    RobustResult result;
    try {
        result = solver_name == "p3p" ? ransac_p3p(set.points, config)
                                      : solve_robust(set.points, config);
    } catch (const NoSolution& e) {
        std::cerr << "no solution: " << e.what() << '\n';
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "solver failed: " << e.what() << '\n';
        return 1;
    }

    json doc;
    doc["solver"] = solver_name == "p3p" ? "ransac_p3p" : "r1ppnp";
    doc["pose"] = pose_to_json(result.pose);
    doc["num_points"] = set.points.size();
    doc["num_inliers"] =
        std::count(result.inlier_mask.begin(), result.inlier_mask.end(), true);
    doc["inlier_mask"] = result.inlier_mask;
    doc["control_index"] = result.control_index;
    doc["trials_used"] = result.trials_used;
    doc["total_iterations"] = result.total_iterations;
    doc["mean_inlier_reprojection_error"] =
        result.mean_inlier_reprojection_error;

    if (output.empty()) {
        std::cout << doc.dump(2) << '\n';
    } else {
        std::ofstream out(output);
        if (!out) {
            std::cerr << "cannot write " << output << '\n';
            return 2;
        }
        out << doc.dump(2) << '\n';
    }
    return 0;
}

int run_synth(const std::string& regime_name, int inliers, int outliers,
              double sigma, std::uint64_t seed, const std::string& output,
              const std::string& truth_path, const std::string& format_name,
              double focal, int width, int height) {
    SceneConfig config;
    config.regime = regime_name == "quasi" ? SceneRegime::QuasiSingular
                                           : SceneRegime::OrdinaryThreeD;
    config.n_inliers = inliers;
    config.n_outliers = outliers;
    config.noise_sigma = sigma;
    config.seed = seed;
    config.focal = focal;
    config.width = width;
    config.height = height;

    try {
        const SyntheticInstance instance = generate(config);
        const CorrespondenceSet set = to_correspondence_set(instance);
        if (format_name == "csv") {
            write_correspondences_csv(set, output);
        } else {
            write_correspondences_json(set, output);
        }
        if (!truth_path.empty()) write_truth_json(instance, truth_path);
    } catch (const Error& e) {
        std::cerr << "synth failed: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

int run_bench(const std::string& spec_path, const std::string& output_dir,
              unsigned threads) {
    namespace fs = std::filesystem;
    ExperimentSpec spec;
    try {
        spec = load_spec_json(spec_path);
    } catch (const Error& e) {
        std::cerr << "spec error: " << e.what() << '\n';
        return 2;
    }
    try {
        fs::create_directories(output_dir);
        const std::vector<ExperimentRecord> records =
            run_experiment(spec, threads);
        const std::vector<CellSummary> summaries = aggregate(spec, records);
        const fs::path dir(output_dir);
        emit_records_csv(records, (dir / "records.csv").string());
        emit_timings_csv(records, (dir / "timings.csv").string());
        emit_summary_csv(summaries, (dir / "summary.csv").string());
        for (CurveMetric m :
             {CurveMetric::RotationError, CurveMetric::TranslationError,
              CurveMetric::Trials, CurveMetric::Iterations,
              CurveMetric::Inliers}) {
            emit_curve_csv(summaries, m,
                           (dir / ("curve_" + to_string(m) + ".csv")).string());
        }
        std::cout << "sweep " << to_string(spec.sweep) << ", "
                  << spec.sweep_values.size() << " cells x "
                  << spec.trials_per_cell << " trials\n";
        for (const CellSummary& s : summaries) {
            std::cout << to_string(s.solver) << " @ " << s.sweep_value
                      << ": mean e_rot " << s.mean_e_rot << " deg, mean e_trans "
                      << s.mean_e_trans << " %, mean trials " << s.mean_trials
                      << ", failures " << s.n_failed << ", mean time "
                      << s.mean_time_ms << " ms\n";
        }
    } catch (const Error& e) {
        std::cerr << "bench failed: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

unsigned default_threads() {
    if (const char* env = std::getenv("PNPBENCH_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"R1PPnP camera pose estimation toolkit"};
    app.require_subcommand(1);

    // solve
    std::string input;
    std::string format_name = "auto";
    std::string solver_name = "r1ppnp";
    std::string output;
    double threshold = 5.0;
    std::uint64_t seed = 0;
    CLI::App* solve = app.add_subcommand(
        "solve", "Estimate a pose from a correspondence file");
    solve->add_option("--input", input, "correspondence file (JSON or CSV)")
        ->required();
    solve->add_option("--format", format_name, "auto|json|csv")
        ->check(CLI::IsMember({"auto", "json", "csv"}));
    solve->add_option("--threshold", threshold, "inlier threshold H, pixels");
    solve->add_option("--solver", solver_name, "r1ppnp|p3p")
        ->check(CLI::IsMember({"r1ppnp", "p3p"}));
    solve->add_option("--seed", seed, "RNG seed (p3p sampling)");
    solve->add_option("--output", output, "write the result JSON here");

    // synth
    std::string regime_name = "ordinary";
    int inliers = 100;
    int outliers = 0;
    double sigma = 0.0;
    std::uint64_t synth_seed = 0;
    std::string synth_output;
    std::string truth_path;
    std::string synth_format = "json";
    double focal = 1000.0;
    int width = 640;
    int height = 480;
    CLI::App* synth = app.add_subcommand(
        "synth", "Generate a synthetic correspondence file");
    synth->add_option("--regime", regime_name, "ordinary|quasi")
        ->check(CLI::IsMember({"ordinary", "quasi"}));
    synth->add_option("--inliers", inliers, "number of inliers")->required();
    synth->add_option("--outliers", outliers, "number of outliers");
    synth->add_option("--sigma", sigma, "image noise sigma, pixels");
    synth->add_option("--seed", synth_seed, "RNG seed");
    synth->add_option("--output", synth_output, "output file")->required();
    synth->add_option("--truth", truth_path, "ground-truth sidecar JSON");
    synth->add_option("--format", synth_format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    synth->add_option("--focal", focal, "focal length, pixels");
    synth->add_option("--width", width, "image width, pixels");
    synth->add_option("--height", height, "image height, pixels");

    // bench
    std::string spec_path;
    std::string output_dir;
    unsigned threads = default_threads();
    CLI::App* bench =
        app.add_subcommand("bench", "Run a seeded benchmark sweep");
    bench->add_option("--spec", spec_path, "experiment spec JSON")->required();
    bench->add_option("--output-dir", output_dir, "output directory")
        ->required();
    bench->add_option("--threads", threads,
                      "worker threads (overrides PNPBENCH_THREADS)");

    CLI11_PARSE(app, argc, argv);

    if (solve->parsed()) {
        return run_solve(input, format_name, solver_name, threshold, seed,
                         output);
    }
    if (synth->parsed()) {
        return run_synth(regime_name, inliers, outliers, sigma, synth_seed,
                         synth_output, truth_path, synth_format, focal, width,
                         height);
    }
    return run_bench(spec_path, output_dir, threads);
}
