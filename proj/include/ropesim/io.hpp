#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ropesim/observation.hpp"
#include "ropesim/optimize.hpp"
#include "ropesim/pipeline.hpp"
#include "ropesim/rope_state.hpp"
#include "ropesim/solver.hpp"

namespace ropesim {

// Rope state <-> JSON ("positions", "quaternions" (w,x,y,z), "inv_mass",
// "inv_inertia", "rest_positions", "rest_quaternions").
std::string rope_state_to_json(const RopeState& s);
RopeState rope_state_from_json(const std::string& text);

// Raw observation frames: JSON object with points3d (inline, or a CSV file
// with header "x,y,z" referenced by "points3d_csv"), optional centerline2d,
// endpoints, gravity, optional camera (12 row-major numbers), optional
// control_point / regime / exclude_indices / timestamp.
RawFrame raw_frame_from_json_file(const std::filesystem::path& path);
std::string raw_frame_to_json(const RawFrame& frame);
std::vector<Vec3> points_from_csv(const std::filesystem::path& path);

std::string step_report_to_csv(const StepReport& report);

std::string optimization_result_to_json(const OptimizationResult& r, bool emit_timing);
std::string optimization_result_to_csv(const OptimizationResult& r);

/// Everything one CLI run needs, loaded from a single JSON manifest.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    RopeSpec rope;
    SolverParams solver;
    Objective objective;

    std::vector<std::string> frame_paths;
    std::optional<SyntheticSpec> synthetic;
    PreprocessOptions preprocess;

    OptimizeOptions optimize;
    std::optional<bool> split_gravity_regimes; ///< unset = auto from frame tags

    std::optional<Vec3> estimate_initial_control;
    int estimate_frame_index = 0;

    std::vector<std::pair<int, Vec3>> control_targets;
    std::optional<Vec3> control_initial;

    std::vector<GridAxis> grid_axes;

    bool compare_estimate_control = true;
    int compare_estimate_max_outer = 40;
    Vec3 compare_initial_offset{0.0, 0.0, 0.0};

    std::optional<Vec3> simulate_control_position;

    bool sweep_objectives = false;
    bool emit_timing = false;
};

RunConfig run_config_from_json_file(const std::filesystem::path& path);

/// Loads frames from paths or generates them synthetically, then preprocesses
/// against the configured rope. The config seed overrides the synthetic seed.
std::vector<ObservationFrame> load_frames(const RunConfig& config);

/// Human-readable schema of the config manifest with every default.
std::string config_schema_text();

VariableTarget variable_target_from_name(const std::string& name);

} // namespace ropesim
