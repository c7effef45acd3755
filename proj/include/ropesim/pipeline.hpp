#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ropesim/observation.hpp"
#include "ropesim/rope_state.hpp"
#include "ropesim/solver.hpp"

namespace ropesim {

/// Plane containing both endpoints, spanned by the endpoint chord and the
/// gravity direction; normal = normalize(chord x gravity). Throws when the
/// chord is (nearly) parallel to gravity.
PlaneSpec fit_projection_plane(const std::pair<Vec3, Vec3>& endpoints, const Vec3& gravity);

/// Removes the normal component of every point; idempotent.
std::vector<Vec3> project_points(std::span<const Vec3> points, const PlaneSpec& plane);

/// Point order, contiguous groups and boundary indices along a chord.
/// `order[r]` is the input index at rank r; groups/boundaries index into the
/// ordered sequence.
struct Segmentation {
    std::vector<int> order;
    std::vector<std::vector<int>> groups; ///< num_groups contiguous rank ranges
    std::vector<int> boundaries;          ///< num_groups + 1 ranks: group starts plus the final point
};

/// Orders points by scalar projection onto the endpoint chord (stable on
/// ties), splits them into `num_groups` bins of equal chord extent over the
/// data, and marks boundaries as each group's first point plus the last point
/// overall, so both rope ends are included.
Segmentation order_and_segment(std::span<const Vec3> points, const std::pair<Vec3, Vec3>& endpoints,
                               int num_groups);

/// 2D variant used for image-space centerlines.
Segmentation order_and_segment2(std::span<const Vec2> points, const std::pair<Vec2, Vec2>& endpoints,
                                int num_groups);

/// The point with the largest projection onto the gravity direction; ties go
/// to the lowest index.
Vec3 extract_lowest(std::span<const Vec3> points, const Vec3& gravity);

/// Statistical outlier removal: drops points whose mean distance to the k
/// nearest neighbours exceeds mean + stddev_factor * stddev over the cloud.
std::vector<Vec3> remove_statistical_outliers(std::span<const Vec3> points, int k, double stddev_factor);

struct PreprocessOptions {
    bool remove_outliers = false;
    int outlier_knn = 8;
    double outlier_stddev_factor = 2.0;
};

/// Full preprocessing for one raw frame against a K-particle model: exclusion
/// mask, optional outlier removal, plane projection, ordering and
/// segmentation into K-1 groups / K boundaries, lowest point, and the 2D view
/// (supplied centerline, or plane coordinates of the projected cloud).
ObservationFrame preprocess_frame(const RawFrame& raw, int model_particle_count,
                                  const PreprocessOptions& options = {});

/// Synthetic ground-truth generation: for each control position, solve the
/// quasi-static equilibrium under the planted parameters, sample the polyline
/// uniformly by arc length, add isotropic Gaussian noise, and emit a raw
/// frame carrying the true endpoints and gravity.
struct SyntheticSpec {
    SolverParams true_params;
    RopeSpec rope;
    std::vector<Vec3> control_trajectory;
    double noise_sigma = 0.0;
    int samples_per_frame = 100;
    bool emit_centerline2d = true;
    Regime regime = Regime::Default;
    std::uint64_t seed = 0;
};

std::vector<RawFrame> generate_synthetic_frames(const SyntheticSpec& spec);

/// Pin list for one frame solve: the control particle at `control`, rope-end
/// fixed indices at the frame endpoints, other fixed indices at their rest
/// positions.
template <class T>
std::vector<std::pair<int, Vec3T<T>>> frame_pins(const RopeSpec& spec, const RopeState& base,
                                                 const std::pair<Vec3, Vec3>& endpoints,
                                                 const Vec3T<T>& control) {
    std::vector<std::pair<int, Vec3T<T>>> pins;
    pins.emplace_back(spec.control_index, control);
    for (int f : spec.fixed_indices) {
        if (f == spec.control_index) continue;
        Vec3 anchor;
        if (f == 0)
            anchor = endpoints.first;
        else if (f == spec.particle_count - 1)
            anchor = endpoints.second;
        else
            anchor = base.rest_x[static_cast<std::size_t>(f)];
        pins.emplace_back(f, to_vec3t<T>(anchor));
    }
    std::sort(pins.begin(), pins.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (pins.front().first != 0)
        pins.insert(pins.begin(), {0, to_vec3t<T>(endpoints.first)});
    if (pins.back().first != spec.particle_count - 1)
        pins.emplace_back(spec.particle_count - 1, to_vec3t<T>(endpoints.second));
    return pins;
}

} // namespace ropesim
