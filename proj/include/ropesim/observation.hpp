#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "ropesim/errors.hpp"
#include "ropesim/vec.hpp"

namespace ropesim {

/// Projection plane defined by the gravity vector and the two rope endpoints.
struct PlaneSpec {
    Vec3 origin;
    Vec3 normal;
    Vec3 basis_u; ///< along the endpoint chord
    Vec3 basis_v; ///< gravity direction, orthonormalized against basis_u
};

/// Maps simulated 3D positions into the 2D observation space: either
/// orthographic coordinates on the preprocessing plane, or a 3x4 row-major
/// camera matrix with perspective divide for pixel-space centerlines.
struct ProjectionSpec {
    enum class Kind { OrthographicPlane, Camera };
    Kind kind = Kind::OrthographicPlane;
    PlaneSpec plane;
    std::array<double, 12> camera{};
};

template <class T>
Vec2T<T> apply_projection(const ProjectionSpec& proj, const Vec3T<T>& p) {
    if (proj.kind == ProjectionSpec::Kind::OrthographicPlane) {
        Vec3T<T> rel = p - to_vec3t<T>(proj.plane.origin);
        return {dot(rel, to_vec3t<T>(proj.plane.basis_u)), dot(rel, to_vec3t<T>(proj.plane.basis_v))};
    }
    const auto& c = proj.camera;
    T hx = c[0] * p.x + c[1] * p.y + c[2] * p.z + c[3];
    T hy = c[4] * p.x + c[5] * p.y + c[6] * p.z + c[7];
    T hw = c[8] * p.x + c[9] * p.y + c[10] * p.z + c[11];
    return {hx / hw, hy / hw};
}

/// Jacobi gravity-stiffness regime label carried per frame; selects which
/// gravity weight applies when two are identified jointly.
enum class Regime { Default, Bending, Tensioned };

/// One raw observation before preprocessing.
struct RawFrame {
    int frame_id = 0;
    double timestamp = 0.0;
    std::vector<Vec3> points3d;
    std::vector<Vec2> centerline2d; ///< empty = absent
    std::pair<Vec3, Vec3> endpoints; ///< [control-side end, environment-fixed end]
    Vec3 gravity{0.0, 0.0, -9.8};
    std::optional<std::array<double, 12>> camera;
    std::optional<Vec3> control_point; ///< defaults to endpoints.first
    Regime regime = Regime::Default;
    std::vector<int> exclude_indices; ///< occlusion mask, dropped before preprocessing
};

/// One preprocessed frame: plane-projected 3D cloud with its segmentation,
/// the optional 2D view with its own segmentation, and the lowest point along
/// gravity. Group i corresponds to polyline segment i; boundary i corresponds
/// to particle i (both rope ends included), so a model with K particles needs
/// K-1 groups and K boundaries.
struct ObservationFrame {
    int frame_id = 0;
    std::vector<Vec3> points3d;
    std::vector<std::vector<int>> groups3d;
    std::vector<Vec3> boundaries3d;
    std::optional<Vec3> lowest3d;

    std::vector<Vec2> points2d;
    std::vector<std::vector<int>> groups2d;
    std::vector<Vec2> boundaries2d;

    ProjectionSpec projection;
    std::pair<Vec3, Vec3> endpoints;
    Vec3 gravity{0.0, 0.0, -9.8};
    std::optional<Vec3> control_point;
    Regime regime = Regime::Default;

    Vec3 control_position() const { return control_point ? *control_point : endpoints.first; }
    bool has_2d() const { return !points2d.empty(); }
};

} // namespace ropesim
