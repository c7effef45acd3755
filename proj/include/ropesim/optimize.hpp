#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ropesim/checkpoint.hpp"
#include "ropesim/losses.hpp"
#include "ropesim/pipeline.hpp"
#include "ropesim/solver.hpp"

namespace ropesim {

/// What a scalar optimization variable feeds in the solve.
enum class VariableTarget {
    EtaXS,
    EtaQS,
    EtaQB,
    EtaXD,
    EtaXG,
    EtaXGBending,
    EtaXGTensioned,
    EtaSOR,
    ControlX,
    ControlY,
    ControlZ,
};

struct OptVariable {
    std::string name;
    VariableTarget target = VariableTarget::EtaXG;
    double initial = 0.0;
    double lower = -1e300;
    double upper = 1e300;
    double step = 1e-2;
};

std::vector<OptVariable> default_eta_variables(const SolverParams& initial, bool split_gravity_regimes);
std::vector<OptVariable> control_point_variables(const Vec3& initial);

struct OptimizeOptions {
    int max_outer_iterations = 500;
    double relative_tolerance = 1e-6; ///< relative loss change over the stall window
    int stall_window = 5;
    int max_backtracks = 20;
    double grad_tolerance = 1e-6;
    double momentum = 0.0;
    double success_loss_threshold = std::numeric_limits<double>::infinity();
    CheckpointConfig checkpoint;
};

struct OptimizationResult {
    std::vector<std::string> names;
    std::vector<double> initial_values;
    std::vector<double> values;
    std::vector<double> loss_trace;
    std::vector<double> grad_norm_trace;
    bool converged = false;
    int iterations = 0;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    double wall_time_seconds = 0.0;
};

/// Loss reached NaN/inf; carries the partial trace for diagnosis.
struct DivergenceError : SimError {
    DivergenceError(const std::string& what, OptimizationResult partial_result)
        : SimError(what), partial(std::move(partial_result)) {}
    OptimizationResult partial;
};

/// One frame's differentiable pipeline: bind the variable vector into solver
/// weights and the control-point position, build the pinned initial
/// configuration, run the quasi-static solve, and evaluate the loss. The
/// same templated path serves plain forward evaluation (double) and taped
/// runs (DiffVar), so finite differences of evaluate() probe exactly the
/// function the tape differentiates.
struct FrameProblem {
    const ObservationFrame* frame = nullptr; ///< null for target-point losses
    const RopeState* base = nullptr;
    const RopeSpec* spec = nullptr;
    SolverParams params;
    std::span<const OptVariable> variables;
    Objective objective;
    const std::vector<std::pair<int, Vec3>>* targets = nullptr;

    template <class T>
    SolverParamsT<T> bind_params(std::span<const T> theta) const {
        SolverParamsT<T> p;
        p.eta_x_S = T(params.eta_x_S);
        p.eta_q_S = T(params.eta_q_S);
        p.eta_q_B = T(params.eta_q_B);
        p.eta_x_D = T(params.eta_x_D);
        p.eta_x_G = T(params.eta_x_G);
        p.eta_sor = T(params.eta_sor);
        p.gravity = params.gravity;
        p.dt = params.dt;
        p.iterations = params.iterations;
        p.distance_mode = params.distance_mode;
        p.thomas_outer_iterations = params.thomas_outer_iterations;
        p.thomas_tolerance = params.thomas_tolerance;
        p.alpha_shear = params.alpha_shear;
        p.alpha_bend = params.alpha_bend;
        p.alpha_distance = params.alpha_distance;
        p.accumulate_lambda = params.accumulate_lambda;
        p.distance_gradient_mode = params.distance_gradient_mode;

        Regime regime = frame ? frame->regime : Regime::Default;
        for (std::size_t i = 0; i < variables.size(); ++i) {
            const T& v = theta[i];
            switch (variables[i].target) {
                case VariableTarget::EtaXS: p.eta_x_S = v; break;
                case VariableTarget::EtaQS: p.eta_q_S = v; break;
                case VariableTarget::EtaQB: p.eta_q_B = v; break;
                case VariableTarget::EtaXD: p.eta_x_D = v; break;
                case VariableTarget::EtaSOR: p.eta_sor = v; break;
                case VariableTarget::EtaXG: p.eta_x_G = v; break;
                case VariableTarget::EtaXGBending:
                    if (regime != Regime::Tensioned) p.eta_x_G = v;
                    break;
                case VariableTarget::EtaXGTensioned:
                    if (regime == Regime::Tensioned) p.eta_x_G = v;
                    break;
                default: break;
            }
        }
        return p;
    }

    template <class T>
    Vec3T<T> bind_control(std::span<const T> theta) const {
        Vec3 start = frame ? frame->control_position()
                           : base->rest_x[static_cast<std::size_t>(spec->control_index)];
        Vec3T<T> c = to_vec3t<T>(start);
        for (std::size_t i = 0; i < variables.size(); ++i) {
            switch (variables[i].target) {
                case VariableTarget::ControlX: c.x = theta[i]; break;
                case VariableTarget::ControlY: c.y = theta[i]; break;
                case VariableTarget::ControlZ: c.z = theta[i]; break;
                default: break;
            }
        }
        return c;
    }

    std::pair<Vec3, Vec3> solve_endpoints() const {
        if (frame) return frame->endpoints;
        return {base->rest_x.front(), base->rest_x.back()};
    }

    template <class T>
    T loss_from_state(const RopeStateT<T>& s) const {
        if (targets) {
            T total(0.0);
            for (const auto& [idx, goal] : *targets) {
                Vec3T<T> d = s.x[static_cast<std::size_t>(idx)] - to_vec3t<T>(goal);
                total += norm_sq(d);
            }
            return total;
        }
        PolylineModel<T> model = polyline_from(s);
        return objective.evaluate(*frame, model);
    }

    template <class T>
    T evaluate(std::span<const T> theta) const {
        SolverParamsT<T> p = bind_params(theta);
        Vec3T<T> control = bind_control(theta);
        auto pins = frame_pins(*spec, *base, solve_endpoints(), control);
        RopeStateT<T> s = make_pinned_state<T>(*base, pins);
        gravity_predict(s, p);
        LambdaSetT<T> lambdas;
        LambdaSetT<T>* lam = nullptr;
        if (p.accumulate_lambda) {
            lambdas = LambdaSetT<T>::zeros(s.particle_count());
            lam = &lambdas;
        }
        for (int it = 0; it < p.iterations; ++it) solver_iteration(s, p, lam);
        return loss_from_state(s);
    }

    /// Segmented form of evaluate() for checkpointed differentiation. The
    /// program closes over this problem; keep it alive while running.
    SegmentedProgram make_program() const;

    /// Loss and gradient with respect to the bound variables.
    SegmentedResult loss_and_gradient(std::span<const double> theta, const CheckpointPolicy& policy) const;
};

struct IdentifyProblem {
    RopeSpec rope;
    SolverParams params;
    Objective objective;
    std::vector<OptVariable> variables; ///< empty = default eta set
    OptimizeOptions options;
};

/// Projected gradient descent with backtracking on the mean objective over
/// all frames; each frame's loss is one full quasi-static solve.
OptimizationResult identify_parameters(std::span<const ObservationFrame> frames, const IdentifyProblem& problem);

struct EstimateProblem {
    RopeSpec rope;
    SolverParams params;
    Objective objective;
    Vec3 initial_control{};
    OptimizeOptions options;
};

/// Optimizes the 3D position of the zero-inverse-mass control particle to
/// minimize the chosen objective on one frame.
OptimizationResult estimate_control_point(const ObservationFrame& frame, const EstimateProblem& problem);

struct ShapeControlProblem {
    RopeSpec rope;
    SolverParams params;
    std::vector<std::pair<int, Vec3>> targets;
    Vec3 initial_control{};
    OptimizeOptions options;
};

/// Minimizes the summed squared distance of selected particles to target
/// points over the control-point position.
OptimizationResult shape_control(const ShapeControlProblem& problem);

struct GridAxis {
    OptVariable variable;
    std::vector<double> values;
};

struct GridSearchProblem {
    RopeSpec rope;
    SolverParams params;
    Objective objective;
    std::vector<GridAxis> axes;
};

/// Exhaustive evaluation over the cartesian product of the axes; ties keep
/// the lexicographically first grid point (axis order = significance).
OptimizationResult grid_search(std::span<const ObservationFrame> frames, const GridSearchProblem& problem);

/// Thomas mode cannot hold an extensible rope; reject the combination early.
void validate_rope_solver_combo(const RopeSpec& rope, const SolverParams& params);

} // namespace ropesim
