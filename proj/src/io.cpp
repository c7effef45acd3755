#include "ropesim/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ropesim {

using nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 vec2_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(what) + ": expected [u, v]");
    return {j[0].get<double>(), j[1].get<double>()};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

Regime regime_from_string(const std::string& s) {
    if (s == "default") return Regime::Default;
    if (s == "bending") return Regime::Bending;
    if (s == "tensioned") return Regime::Tensioned;
    throw ConfigError("unknown regime '" + s + "' (expected default|bending|tensioned)");
}

const char* regime_to_string(Regime r) {
    switch (r) {
        case Regime::Bending: return "bending";
        case Regime::Tensioned: return "tensioned";
        default: return "default";
    }
}

template <class Fn>
void if_has(const json& j, const char* key, Fn&& fn) {
    auto it = j.find(key);
    if (it != j.end() && !it->is_null()) fn(*it);
}

} // namespace

std::string rope_state_to_json(const RopeState& s) {
    json j;
    auto dump_positions = [](const std::vector<Vec3>& v) {
        json arr = json::array();
        for (const Vec3& p : v) arr.push_back(vec3_to_json(p));
        return arr;
    };
    auto dump_quats = [](const std::vector<Quat>& v) {
        json arr = json::array();
        for (const Quat& q : v) arr.push_back(json::array({q.w, q.v.x, q.v.y, q.v.z}));
        return arr;
    };
    j["positions"] = dump_positions(s.x);
    j["quaternions"] = dump_quats(s.q);
    j["rest_positions"] = dump_positions(s.rest_x);
    j["rest_quaternions"] = dump_quats(s.rest_q);
    j["inv_mass"] = s.inv_mass;
    j["inv_inertia"] = s.inv_inertia;
    return j.dump(2) + "\n";
}

RopeState rope_state_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("rope state: invalid JSON: ") + e.what());
    }
    RopeState s;
    auto load_positions = [](const json& arr, std::vector<Vec3>& out, const char* what) {
        for (const auto& e : arr) out.push_back(vec3_from_json(e, what));
    };
    auto load_quats = [](const json& arr, std::vector<Quat>& out, const char* what) {
        for (const auto& e : arr) {
            if (!e.is_array() || e.size() != 4) throw ConfigError(std::string(what) + ": expected [w, x, y, z]");
            out.push_back(Quat{e[0].get<double>(), e[1].get<double>(), e[2].get<double>(), e[3].get<double>()});
        }
    };
    load_positions(j.at("positions"), s.x, "positions");
    load_quats(j.at("quaternions"), s.q, "quaternions");
    load_positions(j.at("rest_positions"), s.rest_x, "rest_positions");
    load_quats(j.at("rest_quaternions"), s.rest_q, "rest_quaternions");
    s.inv_mass = j.at("inv_mass").get<std::vector<double>>();
    s.inv_inertia = j.at("inv_inertia").get<std::vector<double>>();
    s.validate();
    return s;
}

std::vector<Vec3> points_from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV: " + path.string());
    std::vector<Vec3> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Vec3 p;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.x, &p.y, &p.z) != 3)
            throw ConfigError("bad CSV row in " + path.string() + ": " + line);
        out.push_back(p);
    }
    return out;
}

RawFrame raw_frame_from_json_file(const std::filesystem::path& path) {
    json j = read_json_file(path);
    RawFrame f;
    if_has(j, "frame_id", [&](const json& v) { f.frame_id = v.get<int>(); });
    if_has(j, "timestamp", [&](const json& v) { f.timestamp = v.get<double>(); });

    if (j.contains("points3d_csv")) {
        f.points3d = points_from_csv(path.parent_path() / j["points3d_csv"].get<std::string>());
    } else {
        for (const auto& e : j.at("points3d")) f.points3d.push_back(vec3_from_json(e, "points3d"));
    }
    if_has(j, "centerline2d", [&](const json& v) {
        for (const auto& e : v) f.centerline2d.push_back(vec2_from_json(e, "centerline2d"));
    });

    const json& ends = j.at("endpoints");
    if (!ends.is_array() || ends.size() != 2) throw ConfigError("endpoints: expected two points");
    f.endpoints = {vec3_from_json(ends[0], "endpoints"), vec3_from_json(ends[1], "endpoints")};
    f.gravity = vec3_from_json(j.at("gravity"), "gravity");

    if_has(j, "camera", [&](const json& v) {
        if (!v.is_array() || v.size() != 12) throw ConfigError("camera: expected 12 row-major numbers");
        std::array<double, 12> cam{};
        for (std::size_t i = 0; i < 12; ++i) cam[i] = v[i].get<double>();
        f.camera = cam;
    });
    if_has(j, "control_point", [&](const json& v) { f.control_point = vec3_from_json(v, "control_point"); });
    if_has(j, "regime", [&](const json& v) { f.regime = regime_from_string(v.get<std::string>()); });
    if_has(j, "exclude_indices", [&](const json& v) { f.exclude_indices = v.get<std::vector<int>>(); });
    return f;
}

std::string raw_frame_to_json(const RawFrame& f) {
    json j;
    j["frame_id"] = f.frame_id;
    j["timestamp"] = f.timestamp;
    json pts = json::array();
    for (const Vec3& p : f.points3d) pts.push_back(vec3_to_json(p));
    j["points3d"] = pts;
    if (!f.centerline2d.empty()) {
        json c = json::array();
        for (const Vec2& p : f.centerline2d) c.push_back(json::array({p.u, p.v}));
        j["centerline2d"] = c;
    }
    j["endpoints"] = json::array({vec3_to_json(f.endpoints.first), vec3_to_json(f.endpoints.second)});
    j["gravity"] = vec3_to_json(f.gravity);
    if (f.camera) j["camera"] = *f.camera;
    if (f.control_point) j["control_point"] = vec3_to_json(*f.control_point);
    if (f.regime != Regime::Default) j["regime"] = regime_to_string(f.regime);
    if (!f.exclude_indices.empty()) j["exclude_indices"] = f.exclude_indices;
    return j.dump(2) + "\n";
}

std::string step_report_to_csv(const StepReport& report) {
    std::ostringstream out;
    out << "iteration,max_CS,max_CB,max_CD,length\n";
    for (std::size_t i = 0; i < report.per_iteration.size(); ++i) {
        const IterationStats& st = report.per_iteration[i];
        out << (i + 1) << ',' << format_double(st.max_shear) << ',' << format_double(st.max_bend) << ','
            << format_double(st.max_distance) << ',' << format_double(st.length) << '\n';
    }
    return out.str();
}

std::string optimization_result_to_json(const OptimizationResult& r, bool emit_timing) {
    json j;
    json values = json::object();
    for (std::size_t i = 0; i < r.names.size(); ++i) values[r.names[i]] = r.values[i];
    j["values"] = values;
    if (r.initial_values.size() == r.names.size()) {
        json initials = json::object();
        for (std::size_t i = 0; i < r.names.size(); ++i) initials[r.names[i]] = r.initial_values[i];
        j["initial_values"] = initials;
    }
    j["loss_trace"] = r.loss_trace;
    j["grad_norm_trace"] = r.grad_norm_trace;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["final_loss"] = r.final_loss;
    if (emit_timing) j["wall_time_seconds"] = r.wall_time_seconds;
    return j.dump(2) + "\n";
}

std::string optimization_result_to_csv(const OptimizationResult& r) {
    std::ostringstream out;
    out << "iteration,loss,grad_norm\n";
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
        double g = i < r.grad_norm_trace.size() ? r.grad_norm_trace[i] : 0.0;
        out << i << ',' << format_double(r.loss_trace[i]) << ',' << format_double(g) << '\n';
    }
    return out.str();
}

VariableTarget variable_target_from_name(const std::string& name) {
    if (name == "eta_x_S") return VariableTarget::EtaXS;
    if (name == "eta_q_S") return VariableTarget::EtaQS;
    if (name == "eta_q_B") return VariableTarget::EtaQB;
    if (name == "eta_x_D") return VariableTarget::EtaXD;
    if (name == "eta_x_G") return VariableTarget::EtaXG;
    if (name == "eta_x_G_bending") return VariableTarget::EtaXGBending;
    if (name == "eta_x_G_tensioned") return VariableTarget::EtaXGTensioned;
    if (name == "eta_SOR") return VariableTarget::EtaSOR;
    if (name == "control_x") return VariableTarget::ControlX;
    if (name == "control_y") return VariableTarget::ControlY;
    if (name == "control_z") return VariableTarget::ControlZ;
    throw ConfigError("unknown variable name '" + name + "'");
}

namespace {

RopeSpec rope_spec_from_json(const json& j) {
    RopeSpec r;
    if_has(j, "particle_count", [&](const json& v) { r.particle_count = v.get<int>(); });
    if_has(j, "length", [&](const json& v) { r.length = v.get<double>(); });
    if_has(j, "start", [&](const json& v) { r.start = vec3_from_json(v, "rope.start"); });
    if_has(j, "direction", [&](const json& v) { r.direction = vec3_from_json(v, "rope.direction"); });
    if_has(j, "inv_mass", [&](const json& v) { r.inv_mass = v.get<double>(); });
    if_has(j, "inv_inertia", [&](const json& v) { r.inv_inertia = v.get<double>(); });
    if_has(j, "fixed_indices", [&](const json& v) { r.fixed_indices = v.get<std::vector<int>>(); });
    if_has(j, "control_index", [&](const json& v) { r.control_index = v.get<int>(); });
    if_has(j, "extensible", [&](const json& v) { r.extensible = v.get<bool>(); });
    return r;
}

SolverParams solver_params_from_json(const json& j) {
    SolverParams p;
    if_has(j, "eta_x_S", [&](const json& v) { p.eta_x_S = v.get<double>(); });
    if_has(j, "eta_q_S", [&](const json& v) { p.eta_q_S = v.get<double>(); });
    if_has(j, "eta_q_B", [&](const json& v) { p.eta_q_B = v.get<double>(); });
    if_has(j, "eta_x_D", [&](const json& v) { p.eta_x_D = v.get<double>(); });
    if_has(j, "eta_x_G", [&](const json& v) { p.eta_x_G = v.get<double>(); });
    if_has(j, "eta_SOR", [&](const json& v) { p.eta_sor = v.get<double>(); });
    if_has(j, "gravity", [&](const json& v) { p.gravity = vec3_from_json(v, "solver.gravity"); });
    if_has(j, "dt", [&](const json& v) { p.dt = v.get<double>(); });
    if_has(j, "iterations", [&](const json& v) { p.iterations = v.get<int>(); });
    if_has(j, "distance_mode", [&](const json& v) {
        std::string m = v.get<std::string>();
        if (m == "jacobi") p.distance_mode = DistanceMode::Jacobi;
        else if (m == "thomas") p.distance_mode = DistanceMode::Thomas;
        else throw ConfigError("unknown distance_mode '" + m + "' (expected jacobi|thomas)");
    });
    if_has(j, "thomas_outer_iterations", [&](const json& v) { p.thomas_outer_iterations = v.get<int>(); });
    if_has(j, "thomas_tolerance", [&](const json& v) { p.thomas_tolerance = v.get<double>(); });
    if_has(j, "alpha_shear", [&](const json& v) { p.alpha_shear = v.get<double>(); });
    if_has(j, "alpha_bend", [&](const json& v) { p.alpha_bend = v.get<double>(); });
    if_has(j, "alpha_distance", [&](const json& v) { p.alpha_distance = v.get<double>(); });
    if_has(j, "accumulate_lambda", [&](const json& v) { p.accumulate_lambda = v.get<bool>(); });
    if_has(j, "distance_gradient_denominator", [&](const json& v) {
        std::string m = v.get<std::string>();
        if (m == "current") p.distance_gradient_mode = DistanceGradientMode::CurrentLength;
        else if (m == "rest") p.distance_gradient_mode = DistanceGradientMode::RestLength;
        else throw ConfigError("unknown distance_gradient_denominator '" + m + "' (expected current|rest)");
    });
    return p;
}

} // namespace

RunConfig run_config_from_json_file(const std::filesystem::path& path) {
    json j = read_json_file(path);
    RunConfig c;
    if_has(j, "seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); });
    if_has(j, "output_dir", [&](const json& v) { c.output_dir = v.get<std::string>(); });
    if_has(j, "rope", [&](const json& v) { c.rope = rope_spec_from_json(v); });
    if_has(j, "solver", [&](const json& v) { c.solver = solver_params_from_json(v); });
    if_has(j, "objective", [&](const json& v) { c.objective = Objective(objective_from_name(v.get<std::string>())); });
    if_has(j, "objective_weights", [&](const json& v) {
        auto w = [&v](const char* key) { return v.contains(key) ? v[key].get<double>() : 0.0; };
        c.objective = Objective::weighted(w("point_to_line_3d"), w("point_to_line_2d"),
                                          w("segment_to_particle_3d"), w("segment_to_particle_2d"),
                                          w("segment_to_line_3d"), w("segment_to_line_2d"),
                                          w("lowest_point"));
    });

    if_has(j, "frames", [&](const json& v) {
        if_has(v, "paths", [&](const json& p) {
            for (const auto& e : p) {
                std::filesystem::path fp = path.parent_path() / e.get<std::string>();
                c.frame_paths.push_back(fp.string());
            }
        });
        if_has(v, "synthetic", [&](const json& s) {
            SyntheticSpec spec;
            spec.rope = c.rope;
            spec.true_params = c.solver;
            if_has(s, "rope", [&](const json& r) { spec.rope = rope_spec_from_json(r); });
            if_has(s, "true_solver", [&](const json& r) { spec.true_params = solver_params_from_json(r); });
            if (!s.contains("trajectory")) throw ConfigError("frames.synthetic: missing trajectory");
            for (const auto& e : s["trajectory"]) spec.control_trajectory.push_back(vec3_from_json(e, "trajectory"));
            if_has(s, "noise_sigma", [&](const json& v2) { spec.noise_sigma = v2.get<double>(); });
            if_has(s, "samples_per_frame", [&](const json& v2) { spec.samples_per_frame = v2.get<int>(); });
            if_has(s, "emit_centerline2d", [&](const json& v2) { spec.emit_centerline2d = v2.get<bool>(); });
            if_has(s, "regime", [&](const json& v2) { spec.regime = regime_from_string(v2.get<std::string>()); });
            if_has(s, "seed", [&](const json& v2) { spec.seed = v2.get<std::uint64_t>(); });
            c.synthetic = spec;
        });
    });

    if_has(j, "preprocess", [&](const json& v) {
        if_has(v, "remove_outliers", [&](const json& x) { c.preprocess.remove_outliers = x.get<bool>(); });
        if_has(v, "outlier_knn", [&](const json& x) { c.preprocess.outlier_knn = x.get<int>(); });
        if_has(v, "outlier_stddev_factor", [&](const json& x) { c.preprocess.outlier_stddev_factor = x.get<double>(); });
    });

    if_has(j, "optimize", [&](const json& v) {
        if_has(v, "max_outer_iterations", [&](const json& x) { c.optimize.max_outer_iterations = x.get<int>(); });
        if_has(v, "relative_tolerance", [&](const json& x) { c.optimize.relative_tolerance = x.get<double>(); });
        if_has(v, "stall_window", [&](const json& x) { c.optimize.stall_window = x.get<int>(); });
        if_has(v, "max_backtracks", [&](const json& x) { c.optimize.max_backtracks = x.get<int>(); });
        if_has(v, "grad_tolerance", [&](const json& x) { c.optimize.grad_tolerance = x.get<double>(); });
        if_has(v, "momentum", [&](const json& x) { c.optimize.momentum = x.get<double>(); });
        if_has(v, "success_loss_threshold", [&](const json& x) { c.optimize.success_loss_threshold = x.get<double>(); });
        if_has(v, "checkpoint_per_iteration", [&](const json& x) { c.optimize.checkpoint.per_iteration = x.get<bool>(); });
        if_has(v, "checkpoint_max_nodes", [&](const json& x) { c.optimize.checkpoint.max_nodes_per_segment = x.get<std::size_t>(); });
    });
    if_has(j, "identify", [&](const json& v) {
        if_has(v, "split_gravity_regimes", [&](const json& x) { c.split_gravity_regimes = x.get<bool>(); });
    });
    if_has(j, "estimate", [&](const json& v) {
        if_has(v, "initial_control", [&](const json& x) { c.estimate_initial_control = vec3_from_json(x, "estimate.initial_control"); });
        if_has(v, "frame_index", [&](const json& x) { c.estimate_frame_index = x.get<int>(); });
    });
    if_has(j, "control", [&](const json& v) {
        if_has(v, "targets", [&](const json& x) {
            for (const auto& e : x) {
                if (!e.contains("index") || !e.contains("position"))
                    throw ConfigError("control.targets: entries need index and position");
                c.control_targets.emplace_back(e["index"].get<int>(), vec3_from_json(e["position"], "target"));
            }
        });
        if_has(v, "initial_control", [&](const json& x) { c.control_initial = vec3_from_json(x, "control.initial_control"); });
    });
    if_has(j, "grid", [&](const json& v) {
        for (auto it = v.begin(); it != v.end(); ++it) {
            GridAxis axis;
            axis.variable.name = it.key();
            axis.variable.target = variable_target_from_name(it.key());
            axis.values = it.value().get<std::vector<double>>();
            c.grid_axes.push_back(std::move(axis));
        }
    });
    if_has(j, "compare", [&](const json& v) {
        if_has(v, "estimate_control", [&](const json& x) { c.compare_estimate_control = x.get<bool>(); });
        if_has(v, "estimate_max_outer", [&](const json& x) { c.compare_estimate_max_outer = x.get<int>(); });
        if_has(v, "initial_offset", [&](const json& x) { c.compare_initial_offset = vec3_from_json(x, "compare.initial_offset"); });
    });
    if_has(j, "simulate", [&](const json& v) {
        if_has(v, "control_position", [&](const json& x) { c.simulate_control_position = vec3_from_json(x, "simulate.control_position"); });
    });
    if_has(j, "sweep_objectives", [&](const json& v) { c.sweep_objectives = v.get<bool>(); });
    if_has(j, "emit_timing", [&](const json& v) { c.emit_timing = v.get<bool>(); });

    return c;
}

std::vector<ObservationFrame> load_frames(const RunConfig& config) {
    std::vector<RawFrame> raw;
    if (config.synthetic) {
        SyntheticSpec spec = *config.synthetic;
        if (config.seed != 0) spec.seed = config.seed;
        raw = generate_synthetic_frames(spec);
    }
    for (const std::string& p : config.frame_paths) {
        if (!std::filesystem::exists(p)) throw ConfigError("frame file does not exist: " + p);
        raw.push_back(raw_frame_from_json_file(p));
    }
    std::vector<ObservationFrame> frames;
    frames.reserve(raw.size());
    for (const RawFrame& r : raw)
        frames.push_back(preprocess_frame(r, config.rope.particle_count, config.preprocess));
    return frames;
}

std::string config_schema_text() {
    return R"({
  "seed": 0,                       // uint; overridden by --seed; also reseeds synthetic frames
  "output_dir": ".",               // overridden by --out
  "rope": {
    "particle_count": 20,
    "length": 1.0,                 // meters, rest length
    "start": [0, 0, 0],            // rest pose start point
    "direction": [1, 0, 0],        // rest pose direction
    "inv_mass": 1.0,               // per particle; fixed/control particles become 0
    "inv_inertia": 1.0,            // per segment frame
    "fixed_indices": [],           // particles pinned to the environment
    "control_index": 0,            // externally driven particle
    "extensible": false            // extensible ropes reject the thomas mode
  },
  "solver": {
    "eta_x_S": 1.0, "eta_q_S": 1.0, "eta_q_B": 1.0, "eta_x_D": 1.0,
    "eta_x_G": 0.024, "eta_SOR": 1.0,
    "gravity": [0, 0, -9.8],
    "dt": 1.0,
    "iterations": 50,              // constraint-solving passes per solve; --iterations overrides
    "distance_mode": "jacobi",     // jacobi | thomas; --distance-mode overrides
    "thomas_outer_iterations": 4,
    "thomas_tolerance": 1e-9,
    "alpha_shear": 0.0, "alpha_bend": 0.0, "alpha_distance": 0.0,
    "accumulate_lambda": false,    // keep compliant multipliers across iterations
    "distance_gradient_denominator": "current"  // current | rest
  },
  "objective": "OBJ1",             // OBJ1..OBJ9; --objective overrides
  "objective_weights": null,       // custom composition instead of a named kind, e.g.
                                   // {"point_to_line_3d": 1.0, "lowest_point": 0.5}
  "frames": {
    "paths": ["frame0.json"],      // relative to the config file; and/or:
    "synthetic": {
      "trajectory": [[0,0,1]],     // control positions, one frame each
      "noise_sigma": 0.0,          // meters, isotropic gaussian
      "samples_per_frame": 100,
      "emit_centerline2d": true,
      "regime": "default",         // default | bending | tensioned
      "seed": 0,
      "rope": {},                  // optional override of the outer rope
      "true_solver": {}            // planted parameters; defaults to "solver"
    }
  },
  "preprocess": {
    "remove_outliers": false, "outlier_knn": 8, "outlier_stddev_factor": 2.0
  },
  "optimize": {
    "max_outer_iterations": 500,
    "relative_tolerance": 1e-6,    // loss change over stall_window iterations
    "stall_window": 5,
    "max_backtracks": 20,          // step halvings per line search
    "grad_tolerance": 1e-6,
    "momentum": 0.0,
    "success_loss_threshold": null,  // converged requires final loss <= this
    "checkpoint_per_iteration": false,
    "checkpoint_max_nodes": 0      // per-segment tape budget; 0 = unlimited
  },
  "identify": { "split_gravity_regimes": null },  // null = auto from frame tags
  "estimate": { "initial_control": null, "frame_index": 0 },
  "control": { "targets": [{"index": 10, "position": [0,0,0]}], "initial_control": null },
  "grid": { "eta_x_G": [0.01, 0.02, 0.04] },  // name -> grid values
  "compare": { "estimate_control": true, "estimate_max_outer": 40, "initial_offset": [0,0,0] },
  "simulate": { "control_position": null },
  "sweep_objectives": false,       // estimate: one result file per OBJ1..OBJ9
  "emit_timing": false             // include wall time in result files
}
)";
}

} // namespace ropesim
