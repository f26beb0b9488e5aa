#pragma once

#include <string>
#include <vector>

#include "r1ppnp/robust.hpp"
#include "r1ppnp/synth.hpp"

namespace r1ppnp {

enum class SweepVariable { NoiseSigma, OutlierFraction, PointCount };
enum class SolverKind { R1PPnP, RansacP3P, R1PPnPCore };

std::string to_string(SweepVariable v);
std::string to_string(SolverKind s);
SweepVariable sweep_variable_from_string(const std::string& name);
SolverKind solver_from_string(const std::string& name);

struct ExperimentSpec {
    SweepVariable sweep = SweepVariable::OutlierFraction;
    std::vector<double> sweep_values;
    SceneConfig base_scene;  // fixed fields; the sweep overrides one of them
    std::vector<SolverKind> solvers;
    int trials_per_cell = 100;
    std::uint64_t base_seed = 0;
    RobustConfig robust;
};

// One row per (cell, trial, solver). time_ms is kept in memory but written
// to a separate timings file so the benchmark CSVs stay byte-deterministic.
struct ExperimentRecord {
    SolverKind solver = SolverKind::R1PPnP;
    int cell_index = 0;
    double sweep_value = 0.0;
    SceneConfig scene;  // resolved cell configuration (seed = trial seed)
    int trial = 0;
    bool ok = false;
    std::string error;  // error type token when !ok
    double e_rot_deg = 0.0;
    double e_trans_pct = 0.0;
    double time_ms = 0.0;
    int trials_used = 0;
    int total_iterations = 0;
    int inliers_found = 0;
    int inliers_true_positive = 0;
};

struct CellSummary {
    SolverKind solver = SolverKind::R1PPnP;
    int cell_index = 0;
    double sweep_value = 0.0;
    int n_ok = 0;
    int n_failed = 0;
    double failure_rate = 0.0;
    // mean / median / std per metric, over ok trials
    double mean_e_rot = 0.0, median_e_rot = 0.0, std_e_rot = 0.0;
    double mean_e_trans = 0.0, median_e_trans = 0.0, std_e_trans = 0.0;
    double mean_trials = 0.0, median_trials = 0.0, std_trials = 0.0;
    double mean_iterations = 0.0, median_iterations = 0.0, std_iterations = 0.0;
    double mean_inliers = 0.0, median_inliers = 0.0, std_inliers = 0.0;
    double mean_true_positive = 0.0, median_true_positive = 0.0,
           std_true_positive = 0.0;
    double mean_time_ms = 0.0;  // informational; not written to summary.csv
};

// Runs every (cell, trial, solver) with the deterministic child seed
// mix_seed(base_seed, cell, trial); all solvers of one cell-trial consume the
// identical instance. Solver errors become failed records, never aborts.
// Records are returned in (cell, trial, solver) order regardless of the
// number of worker threads.
std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec,
                                             unsigned threads = 1);

std::vector<CellSummary> aggregate(const ExperimentSpec& spec,
                                   const std::vector<ExperimentRecord>& records);

void emit_records_csv(const std::vector<ExperimentRecord>& records,
                      const std::string& path);
std::vector<ExperimentRecord> parse_records_csv(const std::string& path);
void emit_timings_csv(const std::vector<ExperimentRecord>& records,
                      const std::string& path);
void emit_summary_csv(const std::vector<CellSummary>& summaries,
                      const std::string& path);

// Plot-ready curve file for one metric: solver,x,mean,std rows.
enum class CurveMetric { RotationError, TranslationError, Trials, Iterations,
                         Inliers };
std::string to_string(CurveMetric m);
void emit_curve_csv(const std::vector<CellSummary>& summaries, CurveMetric m,
                    const std::string& path);

ExperimentSpec load_spec_json(const std::string& path);

}  // namespace r1ppnp
