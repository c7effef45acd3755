#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ropesim/io.hpp"

namespace fs = std::filesystem;
using namespace ropesim;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> objective;
    std::optional<std::string> distance_mode;
    std::optional<int> iterations;
    bool sweep = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "path to the JSON run manifest");
    if (config_required) opt->required();
    cmd->add_option("--out", args.out_dir, "output directory (default: config output_dir)");
    cmd->add_option("--seed", args.seed, "seed override");
    cmd->add_option("--objective", args.objective, "objective override (OBJ1..OBJ9)");
    cmd->add_option("--distance-mode", args.distance_mode, "distance solver override (jacobi|thomas)");
    cmd->add_option("--iterations", args.iterations, "solver iteration override");
}

RunConfig load_config(const CommonArgs& args) {
    if (!fs::exists(args.config_path)) throw ConfigError("config file does not exist: " + args.config_path);
    RunConfig c = run_config_from_json_file(args.config_path);
    if (args.seed) c.seed = *args.seed;
    if (args.objective) c.objective = Objective(objective_from_name(*args.objective));
    if (args.distance_mode) {
        if (*args.distance_mode == "jacobi") c.solver.distance_mode = DistanceMode::Jacobi;
        else if (*args.distance_mode == "thomas") c.solver.distance_mode = DistanceMode::Thomas;
        else throw ConfigError("unknown --distance-mode '" + *args.distance_mode + "'");
    }
    if (args.iterations) c.solver.iterations = *args.iterations;
    if (!args.out_dir.empty()) c.output_dir = args.out_dir;
    c.solver.validate();
    make_rope(c.rope); // validates the rope spec
    validate_rope_solver_combo(c.rope, c.solver);
    if (args.sweep) c.sweep_objectives = true;
    return c;
}

void write_file(const fs::path& dir, const std::string& name, const std::string& content) {
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw SimError("cannot write output file: " + (dir / name).string());
    out << content;
}

RopeState initial_state_for(const RunConfig& config, const RopeState& base, const Vec3& control) {
    auto pins = frame_pins<double>(config.rope, base,
                                   {config.rope.control_index == 0 ? control : base.rest_x.front(),
                                    config.rope.control_index == config.rope.particle_count - 1
                                        ? control
                                        : base.rest_x.back()},
                                   control);
    return make_pinned_state<double>(base, pins);
}

int cmd_simulate(const RunConfig& config) {
    RopeState base = make_rope(config.rope);
    RopeState init = config.simulate_control_position
                         ? initial_state_for(config, base, *config.simulate_control_position)
                         : base;
    auto [eq, report] = simulate_quasi_static(init, config.solver);
    write_file(config.output_dir, "equilibrium.json", rope_state_to_json(eq));
    write_file(config.output_dir, "step_report.csv", step_report_to_csv(report));
    const IterationStats& last = report.per_iteration.back();
    std::cout << "simulate: iterations=" << report.iteration_count << " length=" << report.final_length
              << " max_CS=" << last.max_shear << " max_CB=" << last.max_bend
              << " max_CD=" << last.max_distance << "\n";
    return 0;
}

void report_result(const RunConfig& config, const OptimizationResult& r, const std::string& stem) {
    write_file(config.output_dir, stem + ".json", optimization_result_to_json(r, config.emit_timing));
    write_file(config.output_dir, stem + "_trace.csv", optimization_result_to_csv(r));
    std::cout << stem << ": final_loss=" << r.final_loss << " converged=" << (r.converged ? "true" : "false")
              << " iterations=" << r.iterations << "\n";
    for (std::size_t i = 0; i < r.names.size(); ++i)
        std::cout << "  " << r.names[i] << " = " << r.values[i] << "\n";
}

int cmd_identify(const RunConfig& config) {
    std::vector<ObservationFrame> frames = load_frames(config);
    if (frames.empty()) throw ConfigError("identify: no frames configured");
    IdentifyProblem problem;
    problem.rope = config.rope;
    problem.params = config.solver;
    problem.objective = config.objective;
    problem.options = config.optimize;
    if (config.split_gravity_regimes)
        problem.variables = default_eta_variables(config.solver, *config.split_gravity_regimes);
    OptimizationResult r = identify_parameters(frames, problem);
    report_result(config, r, "identify");
    return 0;
}

int cmd_estimate(const RunConfig& config) {
    std::vector<ObservationFrame> frames = load_frames(config);
    if (frames.empty()) throw ConfigError("estimate: no frames configured");
    if (config.estimate_frame_index < 0 || config.estimate_frame_index >= static_cast<int>(frames.size()))
        throw ConfigError("estimate: frame_index out of range");
    const ObservationFrame& frame = frames[static_cast<std::size_t>(config.estimate_frame_index)];

    EstimateProblem problem;
    problem.rope = config.rope;
    problem.params = config.solver;
    problem.options = config.optimize;
    problem.initial_control = config.estimate_initial_control.value_or(frame.control_position());

    if (config.sweep_objectives) {
        for (int i = 0; i < 9; ++i) {
            problem.objective = Objective(static_cast<ObjectiveKind>(i));
            OptimizationResult r = estimate_control_point(frame, problem);
            report_result(config, r, std::string("estimate_") + problem.objective.name());
        }
        return 0;
    }
    problem.objective = config.objective;
    OptimizationResult r = estimate_control_point(frame, problem);
    report_result(config, r, "estimate");
    return 0;
}

int cmd_control(const RunConfig& config) {
    if (config.control_targets.empty()) throw ConfigError("control: no targets configured");
    ShapeControlProblem problem;
    problem.rope = config.rope;
    problem.params = config.solver;
    problem.targets = config.control_targets;
    problem.options = config.optimize;
    RopeState base = make_rope(config.rope);
    problem.initial_control =
        config.control_initial.value_or(base.rest_x[static_cast<std::size_t>(config.rope.control_index)]);
    OptimizationResult r = shape_control(problem);
    report_result(config, r, "control");
    return 0;
}

int cmd_gridsearch(const RunConfig& config) {
    std::vector<ObservationFrame> frames = load_frames(config);
    if (frames.empty()) throw ConfigError("gridsearch: no frames configured");
    if (config.grid_axes.empty()) throw ConfigError("gridsearch: empty grid");
    GridSearchProblem problem;
    problem.rope = config.rope;
    problem.params = config.solver;
    problem.objective = config.objective;
    problem.axes = config.grid_axes;
    OptimizationResult r = grid_search(frames, problem);
    report_result(config, r, "gridsearch");
    return 0;
}

int cmd_compare_solvers(const RunConfig& config) {
    std::vector<ObservationFrame> frames = load_frames(config);
    if (frames.empty()) throw ConfigError("compare-solvers: no frames configured");

    RopeState base = make_rope(config.rope);
    const double rest_len = base.rest_total_length();

    std::ostringstream csv;
    csv << "frame,jacobi_length_dev,thomas_length_dev";
    if (config.compare_estimate_control) csv << ",jacobi_control_dev,thomas_control_dev";
    csv << "\n";

    char buf[64];
    for (const ObservationFrame& frame : frames) {
        double length_dev[2] = {0.0, 0.0};
        double control_dev[2] = {0.0, 0.0};
        for (int m = 0; m < 2; ++m) {
            SolverParams params = config.solver;
            params.distance_mode = m == 0 ? DistanceMode::Jacobi : DistanceMode::Thomas;
            validate_rope_solver_combo(config.rope, params);

            auto pins = frame_pins<double>(config.rope, base, frame.endpoints, frame.control_position());
            RopeState init = make_pinned_state<double>(base, pins);
            auto [eq, report] = simulate_quasi_static(init, params);
            length_dev[m] = std::abs(report.final_length - rest_len) / rest_len;

            if (config.compare_estimate_control) {
                EstimateProblem problem;
                problem.rope = config.rope;
                problem.params = params;
                problem.objective = config.objective;
                problem.options = config.optimize;
                problem.options.max_outer_iterations = config.compare_estimate_max_outer;
                problem.initial_control = frame.control_position() + config.compare_initial_offset;
                OptimizationResult r = estimate_control_point(frame, problem);
                Vec3 estimated{r.values[0], r.values[1], r.values[2]};
                control_dev[m] = norm(estimated - frame.control_position());
            }
        }
        csv << frame.frame_id;
        for (int m = 0; m < 2; ++m) {
            std::snprintf(buf, sizeof(buf), ",%.17g", length_dev[m]);
            csv << buf;
        }
        if (config.compare_estimate_control)
            for (int m = 0; m < 2; ++m) {
                std::snprintf(buf, sizeof(buf), ",%.17g", control_dev[m]);
                csv << buf;
            }
        csv << "\n";
    }
    write_file(config.output_dir, "compare.csv", csv.str());
    std::cout << "compare-solvers: " << frames.size() << " frames written to compare.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable compliant position-based dynamics for rope-like objects"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* c_sim = app.add_subcommand("simulate", "quasi-static solve; writes equilibrium state and residual report");
    add_common(c_sim, args);
    CLI::App* c_id = app.add_subcommand("identify", "fit stiffness weights to observation frames");
    add_common(c_id, args);
    CLI::App* c_est = app.add_subcommand("estimate", "estimate the control-point position for one frame");
    add_common(c_est, args);
    c_est->add_flag("--sweep", args.sweep, "run all nine objectives, one result file each");
    CLI::App* c_ctl = app.add_subcommand("control", "optimize the control point toward target shape points");
    add_common(c_ctl, args);
    CLI::App* c_grid = app.add_subcommand("gridsearch", "exhaustive parameter search over a config grid");
    add_common(c_grid, args);
    CLI::App* c_cmp = app.add_subcommand("compare-solvers", "per-frame jacobi vs thomas deviation table");
    add_common(c_cmp, args);
    CLI::App* c_schema = app.add_subcommand("config-schema", "print the config manifest schema with defaults");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_schema->parsed()) {
            std::cout << config_schema_text();
            return 0;
        }
        RunConfig config = load_config(args);
        if (c_sim->parsed()) return cmd_simulate(config);
        if (c_id->parsed()) return cmd_identify(config);
        if (c_est->parsed()) return cmd_estimate(config);
        if (c_ctl->parsed()) return cmd_control(config);
        if (c_grid->parsed()) return cmd_gridsearch(config);
        if (c_cmp->parsed()) return cmd_compare_solvers(config);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
