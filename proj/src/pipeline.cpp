#include "ropesim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ropesim {

PlaneSpec fit_projection_plane(const std::pair<Vec3, Vec3>& endpoints, const Vec3& gravity) {
    Vec3 chord = endpoints.second - endpoints.first;
    double chord_len = norm(chord);
    double grav_len = norm(gravity);
    if (chord_len <= 0.0) throw SimError("fit_projection_plane: endpoints coincide");
    if (grav_len <= 0.0) throw SimError("fit_projection_plane: gravity vector is zero");

    Vec3 n = cross(chord, gravity);
    if (norm(n) < 1e-9 * chord_len * grav_len)
        throw SimError("fit_projection_plane: endpoint chord is parallel to gravity");

    PlaneSpec plane;
    plane.origin = endpoints.first;
    plane.normal = normalized(n);
    plane.basis_u = chord / chord_len;
    Vec3 g_in_plane = gravity - plane.basis_u * dot(gravity, plane.basis_u);
    plane.basis_v = normalized(g_in_plane);
    return plane;
}

std::vector<Vec3> project_points(std::span<const Vec3> points, const PlaneSpec& plane) {
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const Vec3& p : points)
        out.push_back(p - plane.normal * dot(p - plane.origin, plane.normal));
    return out;
}

namespace {

Segmentation segment_by_keys(std::vector<double> keys, int num_groups) {
    const int n = static_cast<int>(keys.size());
    if (num_groups < 1) throw SimError("order_and_segment: need at least one group");
    if (n < num_groups) throw SimError("order_and_segment: fewer points than groups");

    Segmentation seg;
    seg.order.resize(static_cast<std::size_t>(n));
    std::iota(seg.order.begin(), seg.order.end(), 0);
    std::stable_sort(seg.order.begin(), seg.order.end(),
                     [&keys](int a, int b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });

    double lo = keys[static_cast<std::size_t>(seg.order.front())];
    double hi = keys[static_cast<std::size_t>(seg.order.back())];
    double extent = hi - lo;

    seg.groups.assign(static_cast<std::size_t>(num_groups), {});
    for (int r = 0; r < n; ++r) {
        double t = extent > 0.0 ? (keys[static_cast<std::size_t>(seg.order[static_cast<std::size_t>(r)])] - lo) / extent : 0.0;
        int g = std::min(num_groups - 1, static_cast<int>(t * num_groups));
        seg.groups[static_cast<std::size_t>(g)].push_back(r);
    }

    seg.boundaries.reserve(static_cast<std::size_t>(num_groups) + 1);
    int last_nonempty_start = 0;
    for (const auto& g : seg.groups) {
        seg.boundaries.push_back(g.empty() ? last_nonempty_start : g.front());
        if (!g.empty()) last_nonempty_start = g.front();
    }
    seg.boundaries.push_back(n - 1);
    return seg;
}

} // namespace

Segmentation order_and_segment(std::span<const Vec3> points, const std::pair<Vec3, Vec3>& endpoints,
                               int num_groups) {
    Vec3 chord = endpoints.second - endpoints.first;
    if (norm(chord) <= 0.0) throw SimError("order_and_segment: endpoints coincide");
    Vec3 dir = normalized(chord);
    std::vector<double> keys;
    keys.reserve(points.size());
    for (const Vec3& p : points) keys.push_back(dot(p - endpoints.first, dir));
    return segment_by_keys(std::move(keys), num_groups);
}

Segmentation order_and_segment2(std::span<const Vec2> points, const std::pair<Vec2, Vec2>& endpoints,
                                int num_groups) {
    Vec2 chord{endpoints.second.u - endpoints.first.u, endpoints.second.v - endpoints.first.v};
    double len = norm(chord);
    if (len <= 0.0) throw SimError("order_and_segment: endpoints coincide");
    std::vector<double> keys;
    keys.reserve(points.size());
    for (const Vec2& p : points)
        keys.push_back(((p.u - endpoints.first.u) * chord.u + (p.v - endpoints.first.v) * chord.v) / len);
    return segment_by_keys(std::move(keys), num_groups);
}

Vec3 extract_lowest(std::span<const Vec3> points, const Vec3& gravity) {
    if (points.empty()) throw SimError("extract_lowest: empty point set");
    Vec3 g = normalized(gravity);
    std::size_t best = 0;
    double best_p = dot(points[0], g);
    for (std::size_t i = 1; i < points.size(); ++i) {
        double p = dot(points[i], g);
        if (p > best_p) {
            best_p = p;
            best = i;
        }
    }
    return points[best];
}

std::vector<Vec3> remove_statistical_outliers(std::span<const Vec3> points, int k, double stddev_factor) {
    const int n = static_cast<int>(points.size());
    if (n <= k + 1) return {points.begin(), points.end()};

    std::vector<double> mean_dist(static_cast<std::size_t>(n));
    std::vector<double> dists(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) dists[static_cast<std::size_t>(j)] = norm(points[static_cast<std::size_t>(i)] - points[static_cast<std::size_t>(j)]);
        std::nth_element(dists.begin(), dists.begin() + k, dists.end());
        double sum = 0.0;
        std::vector<double> knn(dists.begin(), dists.begin() + k + 1);
        std::sort(knn.begin(), knn.end());
        for (int j = 1; j <= k; ++j) sum += knn[static_cast<std::size_t>(j)]; // skip self-distance 0
        mean_dist[static_cast<std::size_t>(i)] = sum / k;
    }
    double mean = std::accumulate(mean_dist.begin(), mean_dist.end(), 0.0) / n;
    double var = 0.0;
    for (double d : mean_dist) var += (d - mean) * (d - mean);
    double stddev = std::sqrt(var / n);
    double cutoff = mean + stddev_factor * stddev;

    std::vector<Vec3> out;
    out.reserve(points.size());
    for (int i = 0; i < n; ++i)
        if (mean_dist[static_cast<std::size_t>(i)] <= cutoff) out.push_back(points[static_cast<std::size_t>(i)]);
    return out;
}

ObservationFrame preprocess_frame(const RawFrame& raw, int model_particle_count,
                                  const PreprocessOptions& options) {
    if (model_particle_count < 2) throw SimError("preprocess_frame: model needs at least 2 particles");
    if (raw.points3d.size() < 2) throw SimError("preprocess_frame: frame needs at least 2 raw points");
    if (norm(raw.endpoints.second - raw.endpoints.first) <= 0.0)
        throw SimError("preprocess_frame: endpoints coincide");

    std::vector<Vec3> pts;
    if (raw.exclude_indices.empty()) {
        pts = raw.points3d;
    } else {
        std::vector<bool> drop(raw.points3d.size(), false);
        for (int idx : raw.exclude_indices)
            if (idx >= 0 && idx < static_cast<int>(raw.points3d.size())) drop[static_cast<std::size_t>(idx)] = true;
        for (std::size_t i = 0; i < raw.points3d.size(); ++i)
            if (!drop[i]) pts.push_back(raw.points3d[i]);
    }
    if (options.remove_outliers)
        pts = remove_statistical_outliers(pts, options.outlier_knn, options.outlier_stddev_factor);
    if (pts.size() < 2) throw SimError("preprocess_frame: too few points after filtering");

    ObservationFrame frame;
    frame.frame_id = raw.frame_id;
    frame.endpoints = raw.endpoints;
    frame.gravity = raw.gravity;
    frame.control_point = raw.control_point;
    frame.regime = raw.regime;

    PlaneSpec plane = fit_projection_plane(raw.endpoints, raw.gravity);
    std::vector<Vec3> projected = project_points(pts, plane);

    const int num_groups = model_particle_count - 1;
    Segmentation seg = order_and_segment(projected, raw.endpoints, num_groups);
    frame.points3d.reserve(projected.size());
    for (int src : seg.order) frame.points3d.push_back(projected[static_cast<std::size_t>(src)]);
    frame.groups3d = std::move(seg.groups);
    for (int b : seg.boundaries) frame.boundaries3d.push_back(frame.points3d[static_cast<std::size_t>(b)]);
    frame.lowest3d = extract_lowest(frame.points3d, raw.gravity);

    frame.projection.kind = ProjectionSpec::Kind::OrthographicPlane;
    frame.projection.plane = plane;

    if (!raw.centerline2d.empty()) {
        // Separately captured 2D centerline (e.g. image pixels): its own
        // ordering and segmentation against the projected endpoints.
        if (raw.camera) {
            frame.projection.kind = ProjectionSpec::Kind::Camera;
            frame.projection.camera = *raw.camera;
        }
        Vec2 e0 = apply_projection<double>(frame.projection, raw.endpoints.first);
        Vec2 e1 = apply_projection<double>(frame.projection, raw.endpoints.second);
        Segmentation seg2 = order_and_segment2(raw.centerline2d, {e0, e1}, num_groups);
        frame.points2d.reserve(raw.centerline2d.size());
        for (int src : seg2.order) frame.points2d.push_back(raw.centerline2d[static_cast<std::size_t>(src)]);
        frame.groups2d = std::move(seg2.groups);
        for (int b : seg2.boundaries) frame.boundaries2d.push_back(frame.points2d[static_cast<std::size_t>(b)]);
    } else {
        // Derived 2D view: plane coordinates of the projected cloud. The
        // chord projection is preserved by the plane projection, so the 3D
        // segmentation carries over index for index.
        frame.points2d.reserve(frame.points3d.size());
        for (const Vec3& p : frame.points3d) frame.points2d.push_back(apply_projection<double>(frame.projection, p));
        frame.groups2d = frame.groups3d;
        for (int b : seg.boundaries) frame.boundaries2d.push_back(frame.points2d[static_cast<std::size_t>(b)]);
    }
    return frame;
}

std::vector<RawFrame> generate_synthetic_frames(const SyntheticSpec& spec) {
    if (spec.samples_per_frame < 2) throw SimError("generate_synthetic_frames: need at least 2 samples per frame");
    RopeState base = make_rope(spec.rope);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<RawFrame> frames;
    frames.reserve(spec.control_trajectory.size());
    int id = 0;
    for (const Vec3& control : spec.control_trajectory) {
        const int last = spec.rope.particle_count - 1;
        std::pair<Vec3, Vec3> rough_ends{spec.rope.control_index == 0 ? control : base.rest_x.front(),
                                         spec.rope.control_index == last ? control : base.rest_x.back()};
        auto pins = frame_pins<double>(spec.rope, base, rough_ends, control);
        RopeState init = make_pinned_state<double>(base, pins);
        auto [eq, report] = simulate_quasi_static(init, spec.true_params);

        std::vector<double> seg_len(static_cast<std::size_t>(eq.segment_count()));
        double total = 0.0;
        for (int i = 0; i < eq.segment_count(); ++i) {
            seg_len[static_cast<std::size_t>(i)] = norm(eq.x[static_cast<std::size_t>(i) + 1] - eq.x[static_cast<std::size_t>(i)]);
            total += seg_len[static_cast<std::size_t>(i)];
        }

        RawFrame raw;
        raw.frame_id = id;
        raw.timestamp = static_cast<double>(id);
        raw.endpoints = {eq.x.front(), eq.x.back()};
        raw.gravity = spec.true_params.gravity;
        raw.control_point = eq.x[static_cast<std::size_t>(spec.rope.control_index)];
        raw.regime = spec.regime;

        raw.points3d.reserve(static_cast<std::size_t>(spec.samples_per_frame));
        for (int sidx = 0; sidx < spec.samples_per_frame; ++sidx) {
            double target = (sidx + 0.5) / spec.samples_per_frame * total;
            int seg = 0;
            double acc = 0.0;
            while (seg + 1 < eq.segment_count() && acc + seg_len[static_cast<std::size_t>(seg)] < target) {
                acc += seg_len[static_cast<std::size_t>(seg)];
                ++seg;
            }
            double t = (target - acc) / seg_len[static_cast<std::size_t>(seg)];
            Vec3 p = eq.x[static_cast<std::size_t>(seg)] + (eq.x[static_cast<std::size_t>(seg) + 1] - eq.x[static_cast<std::size_t>(seg)]) * t;
            if (spec.noise_sigma > 0.0)
                p += Vec3{gauss(rng), gauss(rng), gauss(rng)} * spec.noise_sigma;
            raw.points3d.push_back(p);
        }

        if (spec.emit_centerline2d) {
            PlaneSpec plane = fit_projection_plane(raw.endpoints, raw.gravity);
            ProjectionSpec proj;
            proj.plane = plane;
            std::vector<Vec3> projected = project_points(raw.points3d, plane);
            raw.centerline2d.reserve(projected.size());
            for (const Vec3& p : projected) raw.centerline2d.push_back(apply_projection<double>(proj, p));
        }
        frames.push_back(std::move(raw));
        ++id;
    }
    return frames;
}

} // namespace ropesim
