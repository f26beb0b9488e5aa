#include "r1ppnp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "r1ppnp/geometry.hpp"
#include "r1ppnp/p3p.hpp"

namespace r1ppnp {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string regime_to_string(SceneRegime r) {
    return r == SceneRegime::QuasiSingular ? "quasi_singular" : "ordinary";
}

SceneRegime regime_from_string(const std::string& name) {
    if (name == "ordinary") return SceneRegime::OrdinaryThreeD;
    if (name == "quasi_singular" || name == "quasi") {
        return SceneRegime::QuasiSingular;
    }
    throw ValidationError("unknown scene regime '" + name + "'");
}

std::string error_token(const Error& e) {
    if (dynamic_cast<const NoSolution*>(&e)) return "NoSolution";
    if (dynamic_cast<const NoConvergence*>(&e)) return "NoConvergence";
    if (dynamic_cast<const DegenerateConfiguration*>(&e)) {
        return "DegenerateConfiguration";
    }
    if (dynamic_cast<const DegenerateScale*>(&e)) return "DegenerateScale";
    if (dynamic_cast<const DegenerateSample*>(&e)) return "DegenerateSample";
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const NonPositiveScale*>(&e)) return "NonPositiveScale";
    if (dynamic_cast<const NonPositiveDepth*>(&e)) return "NonPositiveDepth";
    if (dynamic_cast<const ZeroEstimate*>(&e)) return "ZeroEstimate";
    return "Error";
}

SceneConfig resolve_cell(const ExperimentSpec& spec, double value) {
    SceneConfig scene = spec.base_scene;
    switch (spec.sweep) {
        case SweepVariable::NoiseSigma:
            scene.noise_sigma = value;
            break;
        case SweepVariable::OutlierFraction: {
            if (!(value >= 0.0 && value < 1.0)) {
                throw ValidationError("outlier fraction must lie in [0, 1)");
            }
            scene.n_outliers = static_cast<int>(
                std::lround(value / (1.0 - value) * scene.n_inliers));
            break;
        }
        case SweepVariable::PointCount:
            scene.n_inliers = static_cast<int>(value);
            break;
    }
    return scene;
}

struct SolveOutcome {
    Pose pose;
    std::vector<bool> mask;
    int trials_used = 1;
    int total_iterations = 0;
};

SolveOutcome run_solver(SolverKind solver,
                        const std::vector<Correspondence>& correspondences,
                        const RobustConfig& config) {
    SolveOutcome out;
    switch (solver) {
        case SolverKind::R1PPnP: {
            const RobustResult res = solve_robust(correspondences, config);
            out.pose = res.pose;
            out.mask = res.inlier_mask;
            out.trials_used = res.trials_used;
            out.total_iterations = res.total_iterations;
            break;
        }
        case SolverKind::RansacP3P: {
            const RobustResult res = ransac_p3p(correspondences, config);
            out.pose = res.pose;
            out.mask = res.inlier_mask;
            out.trials_used = res.trials_used;
            out.total_iterations = res.total_iterations;
            break;
        }
        case SolverKind::R1PPnPCore: {
            const int control = control_point_order(correspondences)[0];
            const CoreResult res =
                solve_core(correspondences, control, config.core);
            out.pose = res.pose;
            out.total_iterations = res.iterations;
            out.mask.assign(correspondences.size(), false);
            for (std::size_t i = 0; i < correspondences.size(); ++i) {
                out.mask[i] = reprojection_error(out.pose, correspondences[i]) <=
                              config.inlier_threshold;
            }
            break;
        }
    }
    return out;
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 == 1 ? values[m]
                                  : 0.5 * (values[m - 1] + values[m]);
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double std_of(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double m = mean_of(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
}

}  // namespace

std::string to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::NoiseSigma: return "noise_sigma";
        case SweepVariable::OutlierFraction: return "outlier_fraction";
        case SweepVariable::PointCount: return "n_points";
    }
    return "?";
}

std::string to_string(SolverKind s) {
    switch (s) {
        case SolverKind::R1PPnP: return "r1ppnp";
        case SolverKind::RansacP3P: return "ransac_p3p";
        case SolverKind::R1PPnPCore: return "r1ppnp_core";
    }
    return "?";
}

SweepVariable sweep_variable_from_string(const std::string& name) {
    if (name == "noise_sigma") return SweepVariable::NoiseSigma;
    if (name == "outlier_fraction") return SweepVariable::OutlierFraction;
    if (name == "n_points") return SweepVariable::PointCount;
    throw ValidationError("unknown sweep variable '" + name + "'");
}

SolverKind solver_from_string(const std::string& name) {
    if (name == "r1ppnp") return SolverKind::R1PPnP;
    if (name == "ransac_p3p" || name == "p3p") return SolverKind::RansacP3P;
    if (name == "r1ppnp_core") return SolverKind::R1PPnPCore;
    throw ValidationError("unknown solver '" + name + "'");
}

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec,
                                             unsigned threads) {
    if (spec.sweep_values.empty() || spec.solvers.empty() ||
        spec.trials_per_cell < 1) {
        throw ValidationError("experiment spec incomplete");
    }

    struct Task {
        int cell = 0;
        int trial = 0;
    };
    std::vector<Task> tasks;
    tasks.reserve(spec.sweep_values.size() * spec.trials_per_cell);
    for (int cell = 0; cell < static_cast<int>(spec.sweep_values.size());
         ++cell) {
        for (int trial = 0; trial < spec.trials_per_cell; ++trial) {
            tasks.push_back({cell, trial});
        }
    }

    std::vector<std::vector<ExperimentRecord>> slots(tasks.size());
    const auto run_task = [&](const Task& task,
                              std::vector<ExperimentRecord>& records) {
        const double value = spec.sweep_values[task.cell];
        SceneConfig scene = resolve_cell(spec, value);
        scene.seed = mix_seed(spec.base_seed, task.cell, task.trial);
        const SyntheticInstance instance = generate(scene);

        for (std::size_t s = 0; s < spec.solvers.size(); ++s) {
            const SolverKind solver = spec.solvers[s];
            ExperimentRecord rec;
            rec.solver = solver;
            rec.cell_index = task.cell;
            rec.sweep_value = value;
            rec.scene = scene;
            rec.trial = task.trial;
            RobustConfig config = spec.robust;
            config.seed = mix_seed(scene.seed, 0x50335033ULL, s);
            const auto start = std::chrono::steady_clock::now();
            try {
                const SolveOutcome out =
                    run_solver(solver, instance.correspondences, config);
                rec.ok = true;
                rec.e_rot_deg = rotation_error_deg(
                    instance.truth_pose.rotation, out.pose.rotation);
                rec.e_trans_pct = translation_error_pct(
                    instance.truth_pose.translation, out.pose.translation);
                rec.trials_used = out.trials_used;
                rec.total_iterations = out.total_iterations;
                for (std::size_t i = 0; i < out.mask.size(); ++i) {
                    if (!out.mask[i]) continue;
                    ++rec.inliers_found;
                    if (instance.truth_inlier_mask[i]) {
                        ++rec.inliers_true_positive;
                    }
                }
            } catch (const Error& e) {
                rec.ok = false;
                rec.error = error_token(e);
            }
            const auto stop = std::chrono::steady_clock::now();
            rec.time_ms =
                std::chrono::duration<double, std::milli>(stop - start).count();
            records.push_back(std::move(rec));
        }
    };

    const unsigned workers =
        std::max(1u, std::min<unsigned>(threads, tasks.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            run_task(tasks[i], slots[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < tasks.size();
                     i = next.fetch_add(1)) {
                    run_task(tasks[i], slots[i]);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    std::vector<ExperimentRecord> records;
    records.reserve(tasks.size() * spec.solvers.size());
    for (std::vector<ExperimentRecord>& slot : slots) {
        for (ExperimentRecord& rec : slot) records.push_back(std::move(rec));
    }
    return records;
}

std::vector<CellSummary> aggregate(
    const ExperimentSpec& spec, const std::vector<ExperimentRecord>& records) {
    if (records.empty()) {
        throw ValidationError("no records to aggregate");
    }
    std::vector<CellSummary> summaries;
    for (int cell = 0; cell < static_cast<int>(spec.sweep_values.size());
         ++cell) {
        for (SolverKind solver : spec.solvers) {
            CellSummary s;
            s.solver = solver;
            s.cell_index = cell;
            s.sweep_value = spec.sweep_values[cell];
            std::vector<double> e_rot, e_trans, trials, iters, inliers, tp;
            double time_sum = 0.0;
            for (const ExperimentRecord& rec : records) {
                if (rec.cell_index != cell || rec.solver != solver) continue;
                if (!rec.ok) {
                    ++s.n_failed;
                    continue;
                }
                ++s.n_ok;
                e_rot.push_back(rec.e_rot_deg);
                e_trans.push_back(rec.e_trans_pct);
                trials.push_back(rec.trials_used);
                iters.push_back(rec.total_iterations);
                inliers.push_back(rec.inliers_found);
                tp.push_back(rec.inliers_true_positive);
                time_sum += rec.time_ms;
            }
            const int total = s.n_ok + s.n_failed;
            s.failure_rate =
                total > 0 ? static_cast<double>(s.n_failed) / total : 0.0;
            s.mean_e_rot = mean_of(e_rot);
            s.median_e_rot = median_of(e_rot);
            s.std_e_rot = std_of(e_rot);
            s.mean_e_trans = mean_of(e_trans);
            s.median_e_trans = median_of(e_trans);
            s.std_e_trans = std_of(e_trans);
            s.mean_trials = mean_of(trials);
            s.median_trials = median_of(trials);
            s.std_trials = std_of(trials);
            s.mean_iterations = mean_of(iters);
            s.median_iterations = median_of(iters);
            s.std_iterations = std_of(iters);
            s.mean_inliers = mean_of(inliers);
            s.median_inliers = median_of(inliers);
            s.std_inliers = std_of(inliers);
            s.mean_true_positive = mean_of(tp);
            s.median_true_positive = median_of(tp);
            s.std_true_positive = std_of(tp);
            s.mean_time_ms = s.n_ok > 0 ? time_sum / s.n_ok : 0.0;
            summaries.push_back(std::move(s));
        }
    }
    return summaries;
}

static const char* kRecordHeader =
    "solver,cell_index,sweep_value,regime,n_inliers,n_outliers,noise_sigma,"
    "focal,width,height,trial,seed,status,error,e_rot_deg,e_trans_pct,"
    "trials_used,total_iterations,inliers_found,inliers_true_positive";

void emit_records_csv(const std::vector<ExperimentRecord>& records,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << kRecordHeader << '\n';
    for (const ExperimentRecord& r : records) {
        out << to_string(r.solver) << ',' << r.cell_index << ','
            << format_double(r.sweep_value) << ','
            << regime_to_string(r.scene.regime) << ',' << r.scene.n_inliers
            << ',' << r.scene.n_outliers << ','
            << format_double(r.scene.noise_sigma) << ','
            << format_double(r.scene.focal) << ',' << r.scene.width << ','
            << r.scene.height << ',' << r.trial << ',' << r.scene.seed << ','
            << (r.ok ? "ok" : "failed") << ',' << r.error << ','
            << format_double(r.e_rot_deg) << ','
            << format_double(r.e_trans_pct) << ',' << r.trials_used << ','
            << r.total_iterations << ',' << r.inliers_found << ','
            << r.inliers_true_positive << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<ExperimentRecord> parse_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRecordHeader) {
        throw ParseError(path + ":1: unexpected header");
    }
    std::vector<ExperimentRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 20) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected 20 fields");
        }
        ExperimentRecord r;
        r.solver = solver_from_string(f[0]);
        r.cell_index = std::stoi(f[1]);
        r.sweep_value = std::stod(f[2]);
        r.scene.regime = regime_from_string(f[3]);
        r.scene.n_inliers = std::stoi(f[4]);
        r.scene.n_outliers = std::stoi(f[5]);
        r.scene.noise_sigma = std::stod(f[6]);
        r.scene.focal = std::stod(f[7]);
        r.scene.width = std::stoi(f[8]);
        r.scene.height = std::stoi(f[9]);
        r.trial = std::stoi(f[10]);
        r.scene.seed = std::stoull(f[11]);
        r.ok = f[12] == "ok";
        r.error = f[13];
        r.e_rot_deg = std::stod(f[14]);
        r.e_trans_pct = std::stod(f[15]);
        r.trials_used = std::stoi(f[16]);
        r.total_iterations = std::stoi(f[17]);
        r.inliers_found = std::stoi(f[18]);
        r.inliers_true_positive = std::stoi(f[19]);
        records.push_back(std::move(r));
    }
    return records;
}

void emit_timings_csv(const std::vector<ExperimentRecord>& records,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "solver,cell_index,sweep_value,trial,time_ms\n";
    for (const ExperimentRecord& r : records) {
        out << to_string(r.solver) << ',' << r.cell_index << ','
            << format_double(r.sweep_value) << ',' << r.trial << ','
            << format_double(r.time_ms) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

void emit_summary_csv(const std::vector<CellSummary>& summaries,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "solver,cell_index,sweep_value,n_ok,n_failed,failure_rate,"
           "mean_e_rot_deg,median_e_rot_deg,std_e_rot_deg,"
           "mean_e_trans_pct,median_e_trans_pct,std_e_trans_pct,"
           "mean_trials_used,median_trials_used,std_trials_used,"
           "mean_total_iterations,median_total_iterations,"
           "std_total_iterations,mean_inliers_found,median_inliers_found,"
           "std_inliers_found,mean_inliers_true_positive,"
           "median_inliers_true_positive,std_inliers_true_positive\n";
    for (const CellSummary& s : summaries) {
        out << to_string(s.solver) << ',' << s.cell_index << ','
            << format_double(s.sweep_value) << ',' << s.n_ok << ','
            << s.n_failed << ',' << format_double(s.failure_rate) << ','
            << format_double(s.mean_e_rot) << ','
            << format_double(s.median_e_rot) << ','
            << format_double(s.std_e_rot) << ','
            << format_double(s.mean_e_trans) << ','
            << format_double(s.median_e_trans) << ','
            << format_double(s.std_e_trans) << ','
            << format_double(s.mean_trials) << ','
            << format_double(s.median_trials) << ','
            << format_double(s.std_trials) << ','
            << format_double(s.mean_iterations) << ','
            << format_double(s.median_iterations) << ','
            << format_double(s.std_iterations) << ','
            << format_double(s.mean_inliers) << ','
            << format_double(s.median_inliers) << ','
            << format_double(s.std_inliers) << ','
            << format_double(s.mean_true_positive) << ','
            << format_double(s.median_true_positive) << ','
            << format_double(s.std_true_positive) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

std::string to_string(CurveMetric m) {
    switch (m) {
        case CurveMetric::RotationError: return "e_rot_deg";
        case CurveMetric::TranslationError: return "e_trans_pct";
        case CurveMetric::Trials: return "trials_used";
        case CurveMetric::Iterations: return "total_iterations";
        case CurveMetric::Inliers: return "inliers_found";
    }
    return "?";
}

void emit_curve_csv(const std::vector<CellSummary>& summaries, CurveMetric m,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "solver,x,mean,std\n";
    for (const CellSummary& s : summaries) {
        double mean = 0.0;
        double sd = 0.0;
        switch (m) {
            case CurveMetric::RotationError:
                mean = s.mean_e_rot;
                sd = s.std_e_rot;
                break;
            case CurveMetric::TranslationError:
                mean = s.mean_e_trans;
                sd = s.std_e_trans;
                break;
            case CurveMetric::Trials:
                mean = s.mean_trials;
                sd = s.std_trials;
                break;
            case CurveMetric::Iterations:
                mean = s.mean_iterations;
                sd = s.std_iterations;
                break;
            case CurveMetric::Inliers:
                mean = s.mean_inliers;
                sd = s.std_inliers;
                break;
        }
        out << to_string(s.solver) << ',' << format_double(s.sweep_value)
            << ',' << format_double(mean) << ',' << format_double(sd) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

ExperimentSpec load_spec_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    ExperimentSpec spec;
    try {
        const json& sweep = doc.at("sweep");
        spec.sweep =
            sweep_variable_from_string(sweep.at("variable").get<std::string>());
        spec.sweep_values = sweep.at("values").get<std::vector<double>>();

        if (doc.contains("scene")) {
            const json& scene = doc["scene"];
            spec.base_scene.regime =
                regime_from_string(scene.value("regime", "ordinary"));
            spec.base_scene.n_inliers = scene.value("n_inliers", 100);
            spec.base_scene.n_outliers = scene.value("n_outliers", 0);
            spec.base_scene.noise_sigma = scene.value("noise_sigma", 0.0);
            spec.base_scene.focal = scene.value("focal", 1000.0);
            spec.base_scene.width = scene.value("width", 640);
            spec.base_scene.height = scene.value("height", 480);
        }
        for (const json& s : doc.at("solvers")) {
            spec.solvers.push_back(solver_from_string(s.get<std::string>()));
        }
        spec.trials_per_cell = doc.value("trials_per_cell", 100);
        spec.base_seed = doc.value("base_seed", 0ULL);
        if (doc.contains("robust")) {
            const json& r = doc["robust"];
            spec.robust.inlier_threshold = r.value("inlier_threshold", 10.0);
            spec.robust.certainty = r.value("certainty", 0.99);
            spec.robust.early_stop_inlier_fraction =
                r.value("early_stop_inlier_fraction", 0.60);
            spec.robust.stall_window = r.value("stall_window", 20);
            spec.robust.max_control_trials = r.value("max_control_trials", 0);
            spec.robust.max_sample_trials =
                r.value("max_sample_trials", 10000);
            if (r.contains("core")) {
                const json& c = r["core"];
                spec.robust.core.max_iterations = c.value("max_iterations", 100);
                spec.robust.core.rotation_tolerance =
                    c.value("rotation_tolerance", 1e-5);
                spec.robust.core.initial_mu = c.value("initial_mu", 1e-4);
                spec.robust.core.use_depth_weighting =
                    c.value("use_depth_weighting", true);
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (spec.sweep_values.empty()) {
        throw ValidationError("sweep value list must not be empty");
    }
    if (spec.trials_per_cell < 1) {
        throw ValidationError("trials_per_cell must be at least 1");
    }
    return spec;
}

}  // namespace r1ppnp
