#include "r1ppnp/robust.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "r1ppnp/geometry.hpp"

namespace r1ppnp {

std::vector<double> compute_weights(const std::vector<double>& errors,
                                    double threshold) {
    if (!(threshold > 0.0)) {
        throw ValidationError("inlier threshold must be positive");
    }
    std::vector<double> weights(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const double e = errors[i];
        if (std::isinf(e)) {
            weights[i] = 0.0;
        } else if (e <= threshold) {
            weights[i] = 1.0;
        } else {
            weights[i] = threshold / e;
        }
    }
    return weights;
}

std::vector<int> control_point_order(
    const std::vector<Correspondence>& correspondences) {
    const int n = static_cast<int>(correspondences.size());
    double cu = 0.0;
    double cv = 0.0;
    for (const Correspondence& c : correspondences) {
        cu += c.image.u;
        cv += c.image.v;
    }
    cu /= n;
    cv /= n;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> dist(n);
    for (int i = 0; i < n; ++i) {
        dist[i] = std::hypot(correspondences[i].image.u - cu,
                             correspondences[i].image.v - cv);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dist[a] < dist[b]; });
    return order;
}

int ransac_trials_needed(double certainty, double inlier_fraction,
                         int sample_size, int cap) {
    if (!(certainty > 0.0 && certainty < 1.0) || sample_size < 1 || cap < 1) {
        throw ValidationError("invalid RANSAC termination parameters");
    }
    if (inlier_fraction >= 1.0) return 1;
    if (inlier_fraction <= 0.0) return cap;
    const double success = std::pow(inlier_fraction, sample_size);
    const double denom = std::log1p(-success);
    if (!(denom < 0.0)) return cap;  // w^s underflowed
    const double needed = std::log1p(-certainty) / denom;
    if (!(needed < static_cast<double>(cap))) return cap;
    return std::max(1, static_cast<int>(std::ceil(needed)));
}

TrialResult run_trial(const std::vector<Correspondence>& correspondences,
                      int control_index, const RobustConfig& config) {
    if (config.stall_window < 1) {
        throw ValidationError("stall window must be at least 1");
    }
    const double threshold = config.inlier_threshold;
    const CoreConfig& core = config.core;
    const ShapeContext shape(correspondences, control_index);
    const int n = shape.size();

    TrialResult trial;
    trial.state.rotation = Mat3::Identity();
    trial.state.mu = core.initial_mu;
    trial.state.lambdas.assign(n, 1.0);
    trial.state.weights.assign(n, 1.0);
    trial.best_inlier_count = -1;

    std::vector<Vec3> virtual_points = compute_virtual_points(
        trial.state.rotation, trial.state.mu, shape);
    std::vector<double> errors = virtual_point_errors(virtual_points, shape);

    bool skip_q_stage = false;
    for (int k = 1; k <= core.max_iterations; ++k) {
        // The first sweep runs unweighted: before any meaningful pose exists
        // every reprojection error is huge and Eq.-20 weights would hand the
        // fit to whichever points sit near the control's pixel.
        if (k > 1) {
            trial.state.weights = compute_weights(errors, threshold);
        }
        const Mat3 previous_rotation = trial.state.rotation;

        if (!skip_q_stage) {
            trial.state.lambdas =
                project_depths(virtual_points, shape, core.lambda_floor);
        }
        skip_q_stage = false;
        trial.state.rotation =
            fit_rotation(trial.state.lambdas, shape, trial.state.weights,
                         core.use_depth_weighting);
        virtual_points = compute_virtual_points(trial.state.rotation,
                                                trial.state.mu, shape);
        trial.state.mu = update_scale(virtual_points, shape,
                                      trial.state.weights, trial.state.mu);
        virtual_points = compute_virtual_points(trial.state.rotation,
                                                trial.state.mu, shape);
        trial.state.iteration = k;
        trial.iterations = k;

        errors = virtual_point_errors(virtual_points, shape);
        int count = 0;
        double error_sum = 0.0;
        for (double e : errors) {
            if (e <= threshold) {
                ++count;
                error_sum += e;
            }
        }
        trial.inlier_count_history.push_back(count);

        const double mean_error =
            count > 0 ? error_sum / count
                      : std::numeric_limits<double>::infinity();
        if (count > trial.best_inlier_count ||
            (count == trial.best_inlier_count &&
             mean_error < trial.best_mean_inlier_error)) {
            trial.best_inlier_count = count;
            trial.best_mean_inlier_error = mean_error;
            trial.best_rotation = trial.state.rotation;
            trial.best_mu = trial.state.mu;
            trial.best_inlier_mask.assign(n, false);
            for (int i = 0; i < n; ++i) {
                if (errors[i] <= threshold) trial.best_inlier_mask[i] = true;
            }
        }

        // A stable rotation with det = -1 is a mirror convergence; flip and
        // keep iterating. Checked ahead of the stall rule so a recoverable
        // mirror basin is not cut off by termination A.
        if ((trial.state.rotation - previous_rotation).norm() <
                core.rotation_tolerance &&
            trial.state.rotation.determinant() < 0.0 &&
            trial.mirror_flips < core.max_mirror_flips) {
            ++trial.mirror_flips;
            mirror_flip(trial.state.lambdas, control_index);
            skip_q_stage = true;
            continue;
        }

        // Termination A: the detected inlier count has not grown over the
        // stall window.
        const int w = config.stall_window;
        if (k > w && trial.inlier_count_history[k - 1] -
                             trial.inlier_count_history[k - 1 - w] <=
                         0) {
            break;
        }
    }
    return trial;
}

namespace {

struct TrialCandidate {
    int control = -1;
    std::optional<TrialResult> result;
};

// Evaluates run_trial for a batch of control points, optionally in
// parallel. Per-trial failures are recorded as empty results.
void evaluate_batch(const std::vector<Correspondence>& correspondences,
                    const RobustConfig& config,
                    std::vector<TrialCandidate>& batch) {
    const auto evaluate = [&](TrialCandidate& candidate) {
        try {
            candidate.result =
                run_trial(correspondences, candidate.control, config);
        } catch (const Error&) {
            candidate.result.reset();
        }
    };
    if (config.trial_concurrency <= 1 || batch.size() <= 1) {
        for (TrialCandidate& candidate : batch) evaluate(candidate);
        return;
    }
    std::atomic<std::size_t> next{0};
    const unsigned workers = std::min<std::size_t>(
        config.trial_concurrency, batch.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < batch.size();
                 i = next.fetch_add(1)) {
                evaluate(batch[i]);
            }
        });
    }
    for (std::thread& t : pool) t.join();
}

}  // namespace

RobustResult solve_robust(const std::vector<Correspondence>& correspondences,
                          const RobustConfig& config) {
    const int n = static_cast<int>(correspondences.size());
    if (n < 4) {
        throw ValidationError("at least 4 correspondences required");
    }
    const std::vector<int> order = control_point_order(correspondences);
    const int control_cap =
        config.max_control_trials > 0
            ? std::min(config.max_control_trials, n)
            : n;

    int trials = 0;
    int best_control = -1;
    TrialResult best;
    best.best_inlier_count = -1;
    bool stop = false;

    const std::size_t batch_size = std::max(1u, config.trial_concurrency);
    for (int begin = 0; begin < control_cap && !stop;
         begin += static_cast<int>(batch_size)) {
        const int end =
            std::min(control_cap, begin + static_cast<int>(batch_size));
        std::vector<TrialCandidate> batch(end - begin);
        for (int i = begin; i < end; ++i) batch[i - begin].control = order[i];
        evaluate_batch(correspondences, config, batch);

        // Sequential fold: stopping decisions see trials in candidate order,
        // so the outcome is identical to a fully sequential run.
        for (TrialCandidate& candidate : batch) {
            ++trials;
            if (candidate.result) {
                TrialResult& trial = *candidate.result;
                if (trial.best_inlier_count > best.best_inlier_count ||
                    (trial.best_inlier_count == best.best_inlier_count &&
                     trial.best_mean_inlier_error <
                         best.best_mean_inlier_error)) {
                    best = std::move(trial);
                    best_control = candidate.control;
                }
            }
            const double fraction =
                best.best_inlier_count > 0
                    ? static_cast<double>(best.best_inlier_count) / n
                    : 0.0;
            if (fraction >= config.early_stop_inlier_fraction) {
                stop = true;
                break;
            }
            if (trials >= ransac_trials_needed(config.certainty, fraction, 1,
                                               control_cap)) {
                stop = true;
                break;
            }
        }
    }

    if (best_control < 0 || best.best_inlier_count < 4) {
        throw NoSolution("no control point produced at least 4 inliers");
    }

    // Refinement: rerun the core on the detected inliers only, unit weights,
    // warm-started from the winning trial.
    std::vector<Correspondence> inliers;
    inliers.reserve(best.best_inlier_count);
    int control_in_subset = -1;
    for (int i = 0; i < n; ++i) {
        if (!best.best_inlier_mask[i]) continue;
        if (i == best_control) {
            control_in_subset = static_cast<int>(inliers.size());
        }
        inliers.push_back(correspondences[i]);
    }

    Pose pose;
    int refinement_iterations = 0;
    bool refined = false;
    if (control_in_subset >= 0 && static_cast<int>(inliers.size()) >= 4) {
        CoreInit init;
        init.rotation = best.best_rotation;
        init.mu = best.best_mu;
        try {
            const CoreResult refined_result =
                solve_core(inliers, control_in_subset, config.core, &init);
            pose = refined_result.pose;
            refinement_iterations = refined_result.iterations;
            refined = true;
        } catch (const Error&) {
            refined = false;
        }
    }
    if (!refined) {
        if (best.best_rotation.determinant() < 0.0) {
            throw NoSolution("winning trial converged to a mirror pose");
        }
        pose.rotation = best.best_rotation;
        pose.translation = recover_translation(
            best.best_rotation, best.best_mu, correspondences[best_control]);
    }

    RobustResult result;
    result.pose = pose;
    result.control_index = best_control;
    result.trials_used = trials;
    result.total_iterations = best.iterations + refinement_iterations;
    result.inlier_mask.assign(n, false);
    int final_count = 0;
    double error_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = reprojection_error(pose, correspondences[i]);
        if (e <= config.inlier_threshold) {
            result.inlier_mask[i] = true;
            ++final_count;
            error_sum += e;
        }
    }
    if (final_count < 4) {
        throw NoSolution("refined pose keeps fewer than 4 inliers");
    }
    result.mean_inlier_reprojection_error = error_sum / final_count;
    return result;
}

}  // namespace r1ppnp
