#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ropesim/io.hpp"

namespace fs = std::filesystem;
using namespace ropesim;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(ROPESIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    out << text;
}

fs::path sandbox(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "ropesim_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kBaseConfig = R"({
  "seed": 7,
  "rope": {
    "particle_count": 12, "length": 1.0,
    "start": [0, 0, 0], "direction": [1, 0, 0],
    "fixed_indices": [11], "control_index": 0
  },
  "solver": {
    "eta_x_G": 0.03, "iterations": 40, "distance_mode": "thomas"
  },
  "objective": "OBJ1",
  "frames": {
    "synthetic": {
      "trajectory": [[0.1, 0.0, -0.02], [0.15, 0.0, -0.05]],
      "samples_per_frame": 50,
      "noise_sigma": 0.0
    }
  },
  "simulate": { "control_position": [0.05, 0.0, 0.0] },
  "optimize": { "max_outer_iterations": 25 }
})";

} // namespace

TEST_CASE("cli: simulate writes equilibrium and a residual report") {
    fs::path dir = sandbox("simulate");
    write(dir / "config.json", kBaseConfig);
    int rc = run_cli("simulate --config " + (dir / "config.json").string() + " --out " + (dir / "out").string());
    CHECK(rc == 0);

    RopeState eq = rope_state_from_json(slurp(dir / "out" / "equilibrium.json"));
    CHECK(eq.particle_count() == 12);

    std::string csv = slurp(dir / "out" / "step_report.csv");
    CHECK(csv.rfind("iteration,max_CS,max_CB,max_CD,length", 0) == 0);
    // last line: thomas mode keeps the distance residual at solver tolerance
    std::istringstream rows(csv);
    std::string line, last;
    std::getline(rows, line); // header
    while (std::getline(rows, line))
        if (!line.empty()) last = line;
    double it, cs, cb, cd, len;
    char comma;
    std::istringstream(last) >> it >> comma >> cs >> comma >> cb >> comma >> cd >> comma >> len;
    CHECK(cd <= 1e-8);
}

TEST_CASE("cli: zero-gravity rest-state simulate reproduces the input state") {
    fs::path dir = sandbox("rest");
    write(dir / "config.json", R"({
      "rope": {"particle_count": 8, "length": 0.7, "start": [0.1, 0.2, 0.3],
               "direction": [0, 0, 1], "fixed_indices": [7], "control_index": 0},
      "solver": {"gravity": [0, 0, 0], "iterations": 60, "distance_mode": "thomas"}
    })");
    int rc = run_cli("simulate --config " + (dir / "config.json").string() + " --out " + (dir / "out").string());
    CHECK(rc == 0);
    RopeState eq = rope_state_from_json(slurp(dir / "out" / "equilibrium.json"));
    for (int i = 0; i < 8; ++i) {
        Vec3 want{0.1, 0.2, 0.3 + 0.1 * i};
        CHECK(norm(eq.x[static_cast<std::size_t>(i)] - want) <= 1e-12);
    }
}

TEST_CASE("cli: byte-identical outputs for identical config and seed") {
    fs::path dir = sandbox("determinism");
    write(dir / "config.json", kBaseConfig);
    std::string cfg = (dir / "config.json").string();
    CHECK(run_cli("simulate --config " + cfg + " --out " + (dir / "a").string()) == 0);
    CHECK(run_cli("simulate --config " + cfg + " --out " + (dir / "b").string()) == 0);
    CHECK(slurp(dir / "a" / "equilibrium.json") == slurp(dir / "b" / "equilibrium.json"));
    CHECK(slurp(dir / "a" / "step_report.csv") == slurp(dir / "b" / "step_report.csv"));

    CHECK(run_cli("identify --config " + cfg + " --out " + (dir / "ia").string()) == 0);
    CHECK(run_cli("identify --config " + cfg + " --out " + (dir / "ib").string()) == 0);
    CHECK(slurp(dir / "ia" / "identify.json") == slurp(dir / "ib" / "identify.json"));
    CHECK(slurp(dir / "ia" / "identify_trace.csv") == slurp(dir / "ib" / "identify_trace.csv"));
}

TEST_CASE("cli: config errors exit 2 without partial outputs") {
    fs::path dir = sandbox("config_errors");
    CHECK(run_cli("simulate --config " + (dir / "missing.json").string() + " --out " + (dir / "out").string()) == 2);
    CHECK(!fs::exists(dir / "out"));

    write(dir / "bad.json", R"({"rope": {"particle_count": 1}})");
    CHECK(run_cli("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "out2").string()) == 2);
    CHECK(!fs::exists(dir / "out2"));

    // frames pointing at a nonexistent file
    write(dir / "noframe.json", R"({
      "rope": {"particle_count": 8, "fixed_indices": [7]},
      "frames": {"paths": ["nope.json"]}
    })");
    CHECK(run_cli("identify --config " + (dir / "noframe.json").string() + " --out " + (dir / "out3").string()) == 2);
    CHECK(!fs::exists(dir / "out3"));

    // extensible + thomas is rejected up front
    write(dir / "ext.json", R"({
      "rope": {"particle_count": 8, "fixed_indices": [0, 7], "control_index": 4, "extensible": true},
      "solver": {"distance_mode": "thomas"}
    })");
    CHECK(run_cli("simulate --config " + (dir / "ext.json").string() + " --out " + (dir / "out4").string()) == 2);
}

TEST_CASE("cli: estimate sweep writes one result per objective") {
    fs::path dir = sandbox("sweep");
    write(dir / "config.json", kBaseConfig);
    int rc = run_cli("estimate --sweep --config " + (dir / "config.json").string() + " --out " + (dir / "out").string());
    CHECK(rc == 0);
    for (int i = 1; i <= 9; ++i)
        CHECK(fs::exists(dir / "out" / ("estimate_OBJ" + std::to_string(i) + ".json")));
}

TEST_CASE("cli: control with unreachable target exits 0 and reports converged=false") {
    fs::path dir = sandbox("control");
    std::string cfg = R"({
      "rope": {"particle_count": 12, "length": 1.0, "direction": [1,0,0],
               "fixed_indices": [11], "control_index": 0},
      "solver": {"eta_x_G": 0.03, "iterations": 40, "distance_mode": "thomas"},
      "control": {
        "targets": [{"index": 5, "position": [0.5, 0.0, 5.0]}],
        "initial_control": [0.1, 0.0, 0.0]
      },
      "optimize": { "max_outer_iterations": 20 }
    })";
    write(dir / "config.json", cfg);
    int rc = run_cli("control --config " + (dir / "config.json").string() + " --out " + (dir / "out").string());
    CHECK(rc == 0);
    std::string json = slurp(dir / "out" / "control.json");
    CHECK(json.find("\"converged\": false") != std::string::npos);
}

TEST_CASE("cli: compare-solvers emits per-frame deviations with thomas at least as tight") {
    fs::path dir = sandbox("compare");
    std::string cfg = R"({
      "seed": 3,
      "rope": {"particle_count": 12, "length": 1.0, "direction": [1,0,0],
               "fixed_indices": [11], "control_index": 0},
      "solver": {"eta_x_G": 0.03, "iterations": 40},
      "frames": {
        "synthetic": {
          "trajectory": [[0.06, 0.0, -0.01], [0.1, 0.0, -0.03]],
          "samples_per_frame": 40,
          "true_solver": {"eta_x_G": 0.03, "iterations": 40, "distance_mode": "thomas"}
        }
      },
      "compare": { "estimate_control": false }
    })";
    write(dir / "config.json", cfg);
    int rc = run_cli("compare-solvers --config " + (dir / "config.json").string() + " --out " + (dir / "out").string());
    CHECK(rc == 0);
    std::istringstream csv(slurp(dir / "out" / "compare.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "frame,jacobi_length_dev,thomas_length_dev");
    std::string row;
    int rows = 0;
    while (std::getline(csv, row)) {
        if (row.empty()) continue;
        ++rows;
        int frame;
        double jd, td;
        char c;
        std::istringstream(row) >> frame >> c >> jd >> c >> td;
        CHECK(td <= jd);
    }
    CHECK(rows == 2);

    // empty frame set exits 2
    write(dir / "empty.json", R"({
      "rope": {"particle_count": 12, "fixed_indices": [11]},
      "frames": {}
    })");
    CHECK(run_cli("compare-solvers --config " + (dir / "empty.json").string() + " --out " + (dir / "out2").string()) == 2);
}

TEST_CASE("cli: config-schema prints the manifest documentation") {
    fs::path dir = sandbox("schema");
    std::string cmd = std::string(ROPESIM_CLI_PATH) + " config-schema > " + (dir / "schema.txt").string() + " 2>/dev/null";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    std::string text = slurp(dir / "schema.txt");
    CHECK(text.find("\"solver\"") != std::string::npos);
    CHECK(text.find("distance_mode") != std::string::npos);
    CHECK(text.find("OBJ1") != std::string::npos);
}

TEST_CASE("raw frame json and csv loaders round trip") {
    fs::path dir = sandbox("frames");
    RawFrame f;
    f.frame_id = 4;
    f.points3d = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
    f.centerline2d = {{10.0, 20.0}};
    f.endpoints = {Vec3{0, 0, 0}, Vec3{1, 0, 0}};
    f.gravity = Vec3{0, 0, -9.8};
    f.control_point = Vec3{0.05, 0.0, 0.0};
    f.regime = Regime::Tensioned;
    write(dir / "frame.json", raw_frame_to_json(f));
    RawFrame back = raw_frame_from_json_file(dir / "frame.json");
    CHECK(back.frame_id == 4);
    CHECK(back.points3d.size() == 2);
    CHECK(back.centerline2d.size() == 1);
    CHECK(back.regime == Regime::Tensioned);
    CHECK(norm(*back.control_point - *f.control_point) == 0.0);

    write(dir / "pts.csv", "x,y,z\n0.1,0.2,0.3\n0.4,0.5,0.6\n");
    auto pts = points_from_csv(dir / "pts.csv");
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].y == 0.5);

    write(dir / "frame_csv.json", R"({
      "frame_id": 9,
      "points3d_csv": "pts.csv",
      "endpoints": [[0,0,0],[1,0,0]],
      "gravity": [0,0,-9.8]
    })");
    RawFrame csvf = raw_frame_from_json_file(dir / "frame_csv.json");
    CHECK(csvf.points3d.size() == 2);
}

TEST_CASE("rope state json round trip") {
    RopeSpec spec;
    spec.particle_count = 5;
    spec.length = 0.5;
    spec.direction = Vec3{0, 0, 1};
    RopeState s = make_rope(spec);
    RopeState back = rope_state_from_json(rope_state_to_json(s));
    CHECK(back.particle_count() == 5);
    for (int i = 0; i < 5; ++i) CHECK(norm(back.x[static_cast<std::size_t>(i)] - s.x[static_cast<std::size_t>(i)]) == 0.0);
    CHECK(back.inv_mass[0] == 0.0);
}
