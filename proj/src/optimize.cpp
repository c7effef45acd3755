#include "ropesim/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace ropesim {

namespace {

template <class T>
std::vector<T> flatten_state(const RopeStateT<T>& s, const LambdaSetT<T>* lam) {
    std::vector<T> out;
    out.reserve(s.x.size() * 3 + s.q.size() * 4);
    for (const auto& p : s.x) {
        out.push_back(p.x);
        out.push_back(p.y);
        out.push_back(p.z);
    }
    for (const auto& r : s.q) {
        out.push_back(r.w);
        out.push_back(r.v.x);
        out.push_back(r.v.y);
        out.push_back(r.v.z);
    }
    if (lam) {
        for (const auto& l : lam->shear) { out.push_back(l.x); out.push_back(l.y); out.push_back(l.z); }
        for (const auto& l : lam->bend) { out.push_back(l.x); out.push_back(l.y); out.push_back(l.z); }
        for (const auto& l : lam->distance) out.push_back(l);
    }
    return out;
}

template <class T>
void unflatten_state(std::span<const T> in, const RopeState& skeleton, RopeStateT<T>& s, LambdaSetT<T>* lam) {
    const std::size_t k = skeleton.x.size();
    s.rest_x = skeleton.rest_x;
    s.rest_q = skeleton.rest_q;
    s.inv_mass = skeleton.inv_mass;
    s.inv_inertia = skeleton.inv_inertia;
    s.x.resize(k);
    s.q.resize(k - 1);
    std::size_t at = 0;
    for (std::size_t i = 0; i < k; ++i) {
        s.x[i] = {in[at], in[at + 1], in[at + 2]};
        at += 3;
    }
    for (std::size_t i = 0; i + 1 < k; ++i) {
        s.q[i] = {in[at], in[at + 1], in[at + 2], in[at + 3]};
        at += 4;
    }
    if (lam) {
        *lam = LambdaSetT<T>::zeros(static_cast<int>(k));
        for (auto& l : lam->shear) { l = {in[at], in[at + 1], in[at + 2]}; at += 3; }
        for (auto& l : lam->bend) { l = {in[at], in[at + 1], in[at + 2]}; at += 3; }
        for (auto& l : lam->distance) l = in[at++];
    }
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

SegmentedProgram FrameProblem::make_program() const {
    SegmentedProgram prog;
    prog.steps = params.iterations;
    const bool with_lambda = params.accumulate_lambda;
    prog.init = [this, with_lambda](std::span<const DiffVar> leaves) {
        SolverParamsT<DiffVar> p = bind_params(leaves);
        Vec3T<DiffVar> control = bind_control(leaves);
        auto pins = frame_pins(*spec, *base, solve_endpoints(), control);
        RopeStateT<DiffVar> s = make_pinned_state<DiffVar>(*base, pins);
        gravity_predict(s, p);
        if (with_lambda) {
            LambdaSetT<DiffVar> lam = LambdaSetT<DiffVar>::zeros(s.particle_count());
            return flatten_state(s, &lam);
        }
        return flatten_state(s, static_cast<LambdaSetT<DiffVar>*>(nullptr));
    };
    prog.step = [this, with_lambda](std::span<const DiffVar> state, std::span<const DiffVar> leaves) {
        SolverParamsT<DiffVar> p = bind_params(leaves);
        RopeStateT<DiffVar> s;
        LambdaSetT<DiffVar> lam;
        unflatten_state(state, *base, s, with_lambda ? &lam : nullptr);
        solver_iteration(s, p, with_lambda ? &lam : nullptr);
        return flatten_state(s, with_lambda ? &lam : nullptr);
    };
    prog.loss = [this, with_lambda](std::span<const DiffVar> state, std::span<const DiffVar> /*leaves*/) {
        RopeStateT<DiffVar> s;
        LambdaSetT<DiffVar> lam;
        unflatten_state(state, *base, s, with_lambda ? &lam : nullptr);
        return loss_from_state(s);
    };
    return prog;
}

SegmentedResult FrameProblem::loss_and_gradient(std::span<const double> theta,
                                                const CheckpointPolicy& policy) const {
    SegmentedProgram prog = make_program();
    return run_segmented(prog, theta, policy);
}

std::vector<OptVariable> default_eta_variables(const SolverParams& initial, bool split_gravity_regimes) {
    std::vector<OptVariable> vars;
    auto add = [&vars](const char* name, VariableTarget target, double init) {
        vars.push_back(OptVariable{name, target, init, 0.0, 100.0, 1e-2});
    };
    add("eta_x_S", VariableTarget::EtaXS, initial.eta_x_S);
    add("eta_q_S", VariableTarget::EtaQS, initial.eta_q_S);
    add("eta_q_B", VariableTarget::EtaQB, initial.eta_q_B);
    add("eta_x_D", VariableTarget::EtaXD, initial.eta_x_D);
    if (split_gravity_regimes) {
        add("eta_x_G_bending", VariableTarget::EtaXGBending, initial.eta_x_G);
        add("eta_x_G_tensioned", VariableTarget::EtaXGTensioned, initial.eta_x_G);
    } else {
        add("eta_x_G", VariableTarget::EtaXG, initial.eta_x_G);
    }
    add("eta_SOR", VariableTarget::EtaSOR, initial.eta_sor);
    return vars;
}

std::vector<OptVariable> control_point_variables(const Vec3& initial) {
    return {
        OptVariable{"control_x", VariableTarget::ControlX, initial.x, -1e300, 1e300, 1e-3},
        OptVariable{"control_y", VariableTarget::ControlY, initial.y, -1e300, 1e300, 1e-3},
        OptVariable{"control_z", VariableTarget::ControlZ, initial.z, -1e300, 1e300, 1e-3},
    };
}

void validate_rope_solver_combo(const RopeSpec& rope, const SolverParams& params) {
    if (rope.extensible && params.distance_mode == DistanceMode::Thomas)
        throw ConfigError("Thomas distance mode enforces inextensibility and diverges on extensible "
                          "ropes; use the Jacobi mode for extensible configurations");
}

namespace {

struct MultiFrameObjective {
    std::vector<FrameProblem> problems; ///< one per frame (regime-dependent bindings)
    CheckpointPolicy policy;

    double loss(std::span<const double> theta) const {
        double total = 0.0;
        for (const FrameProblem& p : problems) total += p.evaluate<double>(theta);
        return total / static_cast<double>(problems.size());
    }

    SegmentedResult loss_and_gradient(std::span<const double> theta) const {
        SegmentedResult mean;
        mean.gradients.assign(theta.size(), 0.0);
        for (const FrameProblem& p : problems) {
            SegmentedResult r = p.loss_and_gradient(theta, policy);
            mean.loss += r.loss;
            for (std::size_t i = 0; i < theta.size(); ++i) mean.gradients[i] += r.gradients[i];
        }
        const double inv = 1.0 / static_cast<double>(problems.size());
        mean.loss *= inv;
        for (double& g : mean.gradients) g *= inv;
        return mean;
    }
};

OptimizationResult run_projected_gd(const MultiFrameObjective& objective,
                                    std::span<const OptVariable> variables,
                                    const OptimizeOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();

    OptimizationResult result;
    std::vector<double> theta;
    for (const OptVariable& v : variables) {
        if (v.lower > v.upper)
            throw ConfigError("optimize: infeasible bounds for variable '" + v.name + "'");
        result.names.push_back(v.name);
        theta.push_back(std::clamp(v.initial, v.lower, v.upper));
    }
    result.initial_values = theta;

    auto project = [&variables](std::vector<double>& t) {
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = std::clamp(t[i], variables[i].lower, variables[i].upper);
    };

    auto finish = [&](double loss, bool criteria_met) {
        result.values = theta;
        result.final_loss = loss;
        result.converged = criteria_met && loss <= options.success_loss_threshold;
        result.wall_time_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return result;
    };

    double loss = objective.loss(theta);
    result.loss_trace.push_back(loss);
    if (!std::isfinite(loss)) {
        result.values = theta;
        result.final_loss = loss;
        throw DivergenceError("optimize: initial loss is not finite", result);
    }

    std::vector<double> velocity(theta.size(), 0.0);
    double last_scale = 1.0; // line-search memory: retry near the last accepted scale
    for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
        SegmentedResult eval = objective.loss_and_gradient(theta);
        for (double g : eval.gradients)
            if (!std::isfinite(g)) throw DivergenceError("optimize: gradient diverged", result);
        double gnorm = l2_norm(eval.gradients);
        result.grad_norm_trace.push_back(gnorm);
        result.iterations = outer + 1;

        if (gnorm <= options.grad_tolerance) return finish(loss, true);

        for (std::size_t i = 0; i < theta.size(); ++i)
            velocity[i] = options.momentum * velocity[i] + eval.gradients[i];

        bool accepted = false;
        double scale = std::min(last_scale * 2.0, 65536.0);
        std::vector<double> candidate(theta.size());
        for (int bt = 0; bt <= options.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < theta.size(); ++i)
                candidate[i] = theta[i] - scale * variables[i].step * velocity[i];
            project(candidate);
            // a candidate the solver cannot evaluate (singular system, NaN)
            // counts as not decreasing
            double cand_loss;
            try {
                cand_loss = objective.loss(candidate);
            } catch (const SimError&) {
                cand_loss = std::numeric_limits<double>::quiet_NaN();
            }
            if (std::isfinite(cand_loss) && cand_loss < loss) {
                theta = candidate;
                loss = cand_loss;
                last_scale = scale;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) return finish(loss, gnorm <= options.grad_tolerance);

        result.loss_trace.push_back(loss);

        const int w = options.stall_window;
        if (static_cast<int>(result.loss_trace.size()) > w) {
            double then = result.loss_trace[result.loss_trace.size() - 1 - static_cast<std::size_t>(w)];
            double change = std::abs(then - loss);
            if (change <= options.relative_tolerance * std::max(std::abs(then), 1e-300))
                return finish(loss, true);
        }
    }
    return finish(loss, false);
}

} // namespace

OptimizationResult identify_parameters(std::span<const ObservationFrame> frames, const IdentifyProblem& problem) {
    if (frames.empty()) throw ConfigError("identify: no frames");
    validate_rope_solver_combo(problem.rope, problem.params);
    RopeState base = make_rope(problem.rope);

    std::vector<OptVariable> variables = problem.variables;
    if (variables.empty()) {
        bool tagged = std::any_of(frames.begin(), frames.end(),
                                  [](const ObservationFrame& f) { return f.regime != Regime::Default; });
        variables = default_eta_variables(problem.params, tagged);
    }

    MultiFrameObjective objective;
    objective.policy = make_checkpoint_policy(problem.options.checkpoint);
    objective.problems.reserve(frames.size());
    for (const ObservationFrame& f : frames) {
        FrameProblem fp;
        fp.frame = &f;
        fp.base = &base;
        fp.spec = &problem.rope;
        fp.params = problem.params;
        fp.variables = variables;
        fp.objective = problem.objective;
        objective.problems.push_back(fp);
    }
    return run_projected_gd(objective, variables, problem.options);
}

OptimizationResult estimate_control_point(const ObservationFrame& frame, const EstimateProblem& problem) {
    validate_rope_solver_combo(problem.rope, problem.params);
    RopeState base = make_rope(problem.rope);
    std::vector<OptVariable> variables = control_point_variables(problem.initial_control);

    MultiFrameObjective objective;
    objective.policy = make_checkpoint_policy(problem.options.checkpoint);
    FrameProblem fp;
    fp.frame = &frame;
    fp.base = &base;
    fp.spec = &problem.rope;
    fp.params = problem.params;
    fp.variables = variables;
    fp.objective = problem.objective;
    objective.problems.push_back(fp);
    return run_projected_gd(objective, variables, problem.options);
}

OptimizationResult shape_control(const ShapeControlProblem& problem) {
    validate_rope_solver_combo(problem.rope, problem.params);
    if (problem.targets.empty()) throw ConfigError("shape_control: no target points");
    for (const auto& [idx, goal] : problem.targets)
        if (idx < 0 || idx >= problem.rope.particle_count)
            throw ConfigError("shape_control: target index out of range");

    RopeState base = make_rope(problem.rope);
    std::vector<OptVariable> variables = control_point_variables(problem.initial_control);

    OptimizeOptions options = problem.options;
    if (!std::isfinite(options.success_loss_threshold)) {
        double l = base.rest_total_length();
        options.success_loss_threshold =
            static_cast<double>(problem.targets.size()) * (0.01 * l) * (0.01 * l);
    }

    MultiFrameObjective objective;
    objective.policy = make_checkpoint_policy(options.checkpoint);
    FrameProblem fp;
    fp.frame = nullptr;
    fp.base = &base;
    fp.spec = &problem.rope;
    fp.params = problem.params;
    fp.variables = variables;
    fp.targets = &problem.targets;
    objective.problems.push_back(fp);
    return run_projected_gd(objective, variables, options);
}

OptimizationResult grid_search(std::span<const ObservationFrame> frames, const GridSearchProblem& problem) {
    if (frames.empty()) throw ConfigError("grid_search: no frames");
    if (problem.axes.empty()) throw ConfigError("grid_search: empty grid");
    for (const GridAxis& axis : problem.axes)
        if (axis.values.empty()) throw ConfigError("grid_search: empty grid axis '" + axis.variable.name + "'");
    validate_rope_solver_combo(problem.rope, problem.params);

    const auto t_start = std::chrono::steady_clock::now();
    RopeState base = make_rope(problem.rope);

    std::vector<OptVariable> variables;
    variables.reserve(problem.axes.size());
    for (const GridAxis& axis : problem.axes) variables.push_back(axis.variable);

    std::vector<FrameProblem> problems;
    problems.reserve(frames.size());
    for (const ObservationFrame& f : frames) {
        FrameProblem fp;
        fp.frame = &f;
        fp.base = &base;
        fp.spec = &problem.rope;
        fp.params = problem.params;
        fp.variables = variables;
        fp.objective = problem.objective;
        problems.push_back(fp);
    }

    OptimizationResult result;
    for (const OptVariable& v : variables) result.names.push_back(v.name);
    for (const GridAxis& axis : problem.axes) result.initial_values.push_back(axis.values.front());

    std::vector<std::size_t> index(problem.axes.size(), 0);
    std::vector<double> theta(problem.axes.size());
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> best_theta;

    bool done = false;
    while (!done) {
        for (std::size_t a = 0; a < problem.axes.size(); ++a) theta[a] = problem.axes[a].values[index[a]];
        double total = 0.0;
        for (const FrameProblem& p : problems) total += p.evaluate<double>(theta);
        total /= static_cast<double>(problems.size());
        result.loss_trace.push_back(total);
        if (total < best_loss) {
            best_loss = total;
            best_theta = theta;
        }
        // Advance the last axis fastest so iteration order is lexicographic.
        done = true;
        for (std::size_t a = problem.axes.size(); a-- > 0;) {
            if (++index[a] < problem.axes[a].values.size()) {
                done = false;
                break;
            }
            index[a] = 0;
        }
    }

    result.values = best_theta;
    result.final_loss = best_loss;
    result.converged = true;
    result.iterations = static_cast<int>(result.loss_trace.size());
    result.grad_norm_trace.assign(result.loss_trace.size(), 0.0);
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

} // namespace ropesim
