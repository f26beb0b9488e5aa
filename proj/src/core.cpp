#include "r1ppnp/core.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

#include "r1ppnp/geometry.hpp"

namespace r1ppnp {

namespace {

void validate_weights(const std::vector<double>& weights, int n) {
    if (static_cast<int>(weights.size()) != n) {
        throw ValidationError("weight array size mismatch");
    }
}

// Statistics collected during one sweep for the instrumentation trace.
struct SweepStats {
    double max_triangle_residual = 0.0;
    double q_change_sq = 0.0;
    int floored_depths = 0;
};

// One full iteration: q-stage (optionally skipped after a mirror flip),
// rotation fit, scale update, refresh of the virtual points.
void core_sweep(SolverState& state, std::vector<Vec3>& virtual_points,
                const ShapeContext& shape, const CoreConfig& config,
                bool skip_q_stage, SweepStats* stats) {
    const int n = shape.size();
    const int o = shape.control();

    if (!skip_q_stage) {
        std::vector<double> updated =
            project_depths(virtual_points, shape, config.lambda_floor);
        if (stats) {
            for (int i = 0; i < n; ++i) {
                if (i == o) continue;
                if (updated[i] <= config.lambda_floor) {
                    ++stats->floored_depths;
                    continue;
                }
                const Vec3& x = shape.image_ray(i);
                const Vec3 q_old = state.lambdas[i] * x;
                const Vec3 q_new = updated[i] * x;
                const Vec3& p = virtual_points[i];
                const double lhs = (p - q_new).squaredNorm();
                const double rhs =
                    (p - q_old).squaredNorm() - (q_new - q_old).squaredNorm();
                stats->max_triangle_residual =
                    std::max(stats->max_triangle_residual, std::abs(lhs - rhs));
                stats->q_change_sq += (q_new - q_old).squaredNorm();
            }
        }
        state.lambdas = std::move(updated);
    }

    state.rotation = fit_rotation(state.lambdas, shape, state.weights,
                                  config.use_depth_weighting);
    virtual_points =
        compute_virtual_points(state.rotation, state.mu, shape);
    const double mu_image =
        update_scale(virtual_points, shape, state.weights, state.mu);

    double mu_next = mu_image;
    if (!config.use_depth_weighting) {
        // The image-ratio update is not a descent step for the 3D objective;
        // in the unweighted mode (where monotone descent is guaranteed) fall
        // back to the least-squares scale whenever it would increase the
        // fixed-q cost.
        const std::vector<Vec3> q = make_ray_points(state.lambdas, shape);
        const auto cost = [&](double mu) {
            double f = 0.0;
            for (int i = 0; i < n; ++i) {
                if (i == o) continue;
                const Vec3 p = shape.control_ray() +
                               mu * (state.rotation * shape.shape(i));
                f += state.weights[i] * state.weights[i] *
                     (p - q[i]).squaredNorm();
            }
            return f;
        };
        double num = 0.0;
        double den = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == o) continue;
            const double w2 = state.weights[i] * state.weights[i];
            const Vec3 rs = state.rotation * shape.shape(i);
            num += w2 * (q[i] - shape.control_ray()).dot(rs);
            den += w2 * rs.squaredNorm();
        }
        double best_cost = cost(mu_image);
        if (den > 0.0 && num > 0.0) {
            const double mu_ls = num / den;
            const double c = cost(mu_ls);
            if (c < best_cost) {
                best_cost = c;
                mu_next = mu_ls;
            }
        }
        if (cost(state.mu) < best_cost) {
            mu_next = state.mu;
        }
    }

    state.mu = mu_next;
    virtual_points = compute_virtual_points(state.rotation, state.mu, shape);
}

}  // namespace

ShapeContext::ShapeContext(const std::vector<Correspondence>& correspondences,
                           int control_index) {
    const int n = static_cast<int>(correspondences.size());
    if (n < 4) {
        throw ValidationError("at least 4 correspondences required");
    }
    if (control_index < 0 || control_index >= n) {
        throw ValidationError("control index out of range");
    }
    control_ = control_index;
    control_point_ = correspondences[control_index];
    focal_ = control_point_.image.f;
    rays_.reserve(n);
    shapes_.reserve(n);
    for (const Correspondence& c : correspondences) {
        if (!(c.image.f > 0.0)) {
            throw ValidationError("focal length must be positive");
        }
        if (!c.world.allFinite() || !std::isfinite(c.image.u) ||
            !std::isfinite(c.image.v)) {
            throw ValidationError("non-finite correspondence");
        }
        rays_.push_back(c.image.homogeneous());
        shapes_.push_back(c.world - control_point_.world);
    }
}

std::vector<Vec3> compute_virtual_points(const Mat3& rotation, double mu,
                                         const ShapeContext& shape) {
    std::vector<Vec3> p(shape.size());
    for (int i = 0; i < shape.size(); ++i) {
        p[i] = shape.control_ray() + mu * (rotation * shape.shape(i));
    }
    return p;
}

std::vector<double> project_depths(const std::vector<Vec3>& virtual_points,
                                   const ShapeContext& shape,
                                   double lambda_floor) {
    std::vector<double> lambdas(shape.size(), 1.0);
    for (int i = 0; i < shape.size(); ++i) {
        if (i == shape.control()) continue;
        const Vec3& x = shape.image_ray(i);
        lambdas[i] =
            std::max(x.dot(virtual_points[i]) / x.squaredNorm(), lambda_floor);
    }
    return lambdas;
}

Mat3 weighted_orthogonal_fit(const std::vector<Vec3>& targets,
                             const std::vector<Vec3>& sources,
                             const std::vector<double>& weights) {
    Mat3 cross = Mat3::Zero();
    int active = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double w2 = weights[i] * weights[i];
        if (w2 > 0.0) ++active;
        cross += w2 * targets[i] * sources[i].transpose();
    }
    if (active < 3) {
        throw DegenerateConfiguration("fewer than 3 points with nonzero weight");
    }
    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (sv(1) <= 1e-10 * sv(0) || sv(0) <= 0.0) {
        throw DegenerateConfiguration("rank-deficient shape (collinear points)");
    }
    return svd.matrixU() * svd.matrixV().transpose();
}

Mat3 fit_rotation(const std::vector<double>& lambdas, const ShapeContext& shape,
                  const std::vector<double>& weights, bool use_depth_weighting) {
    const int n = shape.size();
    validate_weights(weights, n);
    std::vector<Vec3> targets;
    std::vector<Vec3> sources;
    std::vector<double> column_weights;
    targets.reserve(n - 1);
    sources.reserve(n - 1);
    column_weights.reserve(n - 1);
    for (int i = 0; i < n; ++i) {
        if (i == shape.control()) continue;
        const double w =
            use_depth_weighting ? weights[i] / lambdas[i] : weights[i];
        targets.push_back(lambdas[i] * shape.image_ray(i) - shape.control_ray());
        sources.push_back(shape.shape(i));
        column_weights.push_back(w);
    }
    return weighted_orthogonal_fit(targets, sources, column_weights);
}

double update_scale(const std::vector<Vec3>& virtual_points,
                    const ShapeContext& shape,
                    const std::vector<double>& weights, double mu_old) {
    const int n = shape.size();
    validate_weights(weights, n);
    double b_sq = 0.0;
    double c_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == shape.control()) continue;
        const double w = weights[i];
        if (w <= 0.0) continue;
        const Vec3& p = virtual_points[i];
        if (p.z() <= 0.0) continue;
        const Vec3& x = shape.image_ray(i);
        const Vec3 v = (x.z() / p.z()) * p;
        b_sq += w * w * (v - shape.control_ray()).squaredNorm();
        c_sq += w * w * (x - shape.control_ray()).squaredNorm();
    }
    const double b_norm = std::sqrt(b_sq);
    if (b_norm < 1e-12) {
        throw DegenerateScale("projected point spread vanished");
    }
    const double mu_new = mu_old * std::sqrt(c_sq) / b_norm;
    if (!(mu_new > 0.0) || !std::isfinite(mu_new)) {
        throw DegenerateScale("scale update left the positive range");
    }
    return mu_new;
}

double objective_value(const std::vector<Vec3>& virtual_points,
                       const std::vector<Vec3>& ray_points,
                       const std::vector<double>& lambdas, int control_index,
                       bool use_depth_weighting) {
    double f = 0.0;
    for (std::size_t i = 0; i < virtual_points.size(); ++i) {
        if (static_cast<int>(i) == control_index) continue;
        const double d = (virtual_points[i] - ray_points[i]).norm();
        const double w = use_depth_weighting ? 1.0 / lambdas[i] : 1.0;
        f += (w * d) * (w * d);
    }
    return f;
}

std::vector<Vec3> make_ray_points(const std::vector<double>& lambdas,
                                  const ShapeContext& shape) {
    std::vector<Vec3> q(shape.size());
    for (int i = 0; i < shape.size(); ++i) {
        q[i] = lambdas[i] * shape.image_ray(i);
    }
    q[shape.control()] = shape.control_ray();
    return q;
}

void mirror_flip(std::vector<double>& lambdas, int control_index) {
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (static_cast<int>(i) == control_index) continue;
        lambdas[i] = 1.0 / lambdas[i];
    }
}

std::vector<double> virtual_point_errors(
    const std::vector<Vec3>& virtual_points, const ShapeContext& shape) {
    std::vector<double> errors(shape.size(), 0.0);
    for (int i = 0; i < shape.size(); ++i) {
        if (i == shape.control()) continue;
        const Vec3& p = virtual_points[i];
        if (p.z() <= 0.0) {
            errors[i] = std::numeric_limits<double>::infinity();
            continue;
        }
        const Vec3& x = shape.image_ray(i);
        const double scale = x.z() / p.z();
        errors[i] =
            std::hypot(scale * p.x() - x.x(), scale * p.y() - x.y());
    }
    return errors;
}

CoreResult solve_core(const std::vector<Correspondence>& correspondences,
                      int control_index, const CoreConfig& config,
                      const CoreInit* init, const CoreObserver& observer) {
    if (config.max_iterations < 1 || !(config.rotation_tolerance > 0.0) ||
        !(config.initial_mu > 0.0)) {
        throw ValidationError("invalid core configuration");
    }
    const ShapeContext shape(correspondences, control_index);
    const int n = shape.size();

    SolverState state;
    state.mu = init ? init->mu : config.initial_mu;
    state.rotation = init ? init->rotation : Mat3::Identity();
    if (!(state.mu > 0.0)) {
        throw NonPositiveScale("initial scale factor must be positive");
    }
    state.lambdas.assign(n, 1.0);
    state.weights.assign(n, 1.0);
    bool skip_q_stage = false;
    if (init && init->lambdas) {
        if (static_cast<int>(init->lambdas->size()) != n) {
            throw ValidationError("initial depth array size mismatch");
        }
        state.lambdas = *init->lambdas;
        state.lambdas[control_index] = 1.0;
        skip_q_stage = true;
    }

    std::vector<Vec3> virtual_points =
        compute_virtual_points(state.rotation, state.mu, shape);

    int flips = 0;
    bool converged = false;
    for (int k = 1; k <= config.max_iterations && !converged; ++k) {
        const Mat3 previous_rotation = state.rotation;
        SweepStats stats;
        core_sweep(state, virtual_points, shape, config, skip_q_stage,
                   observer ? &stats : nullptr);
        skip_q_stage = false;
        state.iteration = k;

        CoreTrace trace;
        if (observer) {
            // Snapshot before any flip mutates the depths.
            trace.iteration = k;
            trace.rotation = state.rotation;
            trace.mu = state.mu;
            trace.objective = objective_value(
                virtual_points, make_ray_points(state.lambdas, shape),
                state.lambdas, control_index, config.use_depth_weighting);
            trace.max_triangle_residual = stats.max_triangle_residual;
            trace.q_change_sq = stats.q_change_sq;
            trace.floored_depths = stats.floored_depths;
        }

        if ((state.rotation - previous_rotation).norm() <
            config.rotation_tolerance) {
            if (state.rotation.determinant() > 0.0) {
                converged = true;
            } else {
                ++flips;
                if (flips > config.max_mirror_flips) {
                    throw NoConvergence(
                        "mirror flip budget exhausted with det(R) = -1");
                }
                mirror_flip(state.lambdas, control_index);
                skip_q_stage = true;
                trace.flipped = true;
            }
        }

        if (observer) observer(trace);
    }

    if (!converged && state.rotation.determinant() < 0.0) {
        throw NoConvergence("iteration budget exhausted with det(R) = -1");
    }

    CoreResult result;
    result.pose.rotation = state.rotation;
    result.pose.translation =
        recover_translation(state.rotation, state.mu, shape.control_point());
    result.objective = objective_value(
        virtual_points, make_ray_points(state.lambdas, shape), state.lambdas,
        control_index, config.use_depth_weighting);
    result.iterations = state.iteration;
    result.mirror_flips = flips;
    result.converged = converged;
    return result;
}

}  // namespace r1ppnp
