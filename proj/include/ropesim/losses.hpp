#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ropesim/observation.hpp"
#include "ropesim/rope_state.hpp"

namespace ropesim {

enum class LossSpace { ThreeD, TwoD };

/// The nine objective compositions: point-to-line, segment-to-particle and
/// segment-to-line in 3D / 2D / 2D plus the lowest-point term, unit weights.
enum class ObjectiveKind { Obj1, Obj2, Obj3, Obj4, Obj5, Obj6, Obj7, Obj8, Obj9 };

inline const char* objective_name(ObjectiveKind k) {
    static constexpr std::array<const char*, 9> names{"OBJ1", "OBJ2", "OBJ3", "OBJ4", "OBJ5",
                                                      "OBJ6", "OBJ7", "OBJ8", "OBJ9"};
    return names[static_cast<std::size_t>(k)];
}

inline ObjectiveKind objective_from_name(const std::string& name) {
    for (int i = 0; i < 9; ++i)
        if (name == objective_name(static_cast<ObjectiveKind>(i))) return static_cast<ObjectiveKind>(i);
    throw ConfigError("unknown objective '" + name + "' (expected OBJ1..OBJ9)");
}

/// Simulated rope as a polyline: K particle positions, segments between
/// neighbours.
template <class T>
struct PolylineModel {
    std::vector<Vec3T<T>> x;

    int particle_count() const { return static_cast<int>(x.size()); }
    int segment_count() const { return static_cast<int>(x.size()) - 1; }
};

template <class T>
PolylineModel<T> polyline_from(const RopeStateT<T>& s) {
    return PolylineModel<T>{s.x};
}

namespace detail {

/// Clamped projection parameter of p onto segment [a, b], from plain values.
inline double segment_parameter(const Vec3& p, const Vec3& a, const Vec3& b) {
    Vec3 d = b - a;
    double len2 = norm_sq(d);
    if (len2 <= 0.0) return 0.0;
    return std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
}

inline double segment_parameter2(const Vec2& p, const Vec2& a, const Vec2& b) {
    Vec2 d = b - a;
    double len2 = norm_sq(d);
    if (len2 <= 0.0) return 0.0;
    return std::clamp((dot(p, d) - dot(a, d)) / len2, 0.0, 1.0);
}

inline double segment_distance_value(const Vec3& p, const Vec3& a, const Vec3& b) {
    double t = segment_parameter(p, a, b);
    return norm(p - (a + (b - a) * t));
}

inline double segment_distance_value2(const Vec2& p, const Vec2& a, const Vec2& b) {
    double t = segment_parameter2(p, a, b);
    Vec2 c{a.u + (b.u - a.u) * t, a.v + (b.v - a.v) * t};
    return norm(p - c);
}

/// Distance from a fixed data point to a model segment. The projection
/// parameter is frozen at its value-pass optimum; at interior optima the
/// parameter sensitivity cancels, so the gradient equals the true one.
template <class T>
T segment_distance(const Vec3& p, const Vec3T<T>& a, const Vec3T<T>& b) {
    double t = segment_parameter(p, values(a), values(b));
    Vec3T<T> closest = a + (b - a) * t;
    return norm(to_vec3t<T>(p) - closest);
}

template <class T>
T segment_distance2(const Vec2& p, const Vec2T<T>& a, const Vec2T<T>& b) {
    Vec2 av{value_of(a.u), value_of(a.v)}, bv{value_of(b.u), value_of(b.v)};
    double t = segment_parameter2(p, av, bv);
    Vec2T<T> diff{T(p.u) - (a.u + (b.u - a.u) * t), T(p.v) - (a.v + (b.v - a.v) * t)};
    return norm(diff);
}

template <class T>
std::vector<Vec2T<T>> project_model(const ObservationFrame& frame, const PolylineModel<T>& model) {
    std::vector<Vec2T<T>> out;
    out.reserve(model.x.size());
    for (const auto& p : model.x) out.push_back(apply_projection(frame.projection, p));
    return out;
}

} // namespace detail

/// Sum over data points of the distance to the nearest model segment
/// (projection parameter clamped to the segment). The nearest segment is
/// selected on values and frozen; ties go to the lowest segment index.
template <class T>
T point_to_line_loss(const ObservationFrame& frame, const PolylineModel<T>& model, LossSpace space) {
    if (model.segment_count() < 1) throw SimError("point_to_line_loss: model needs at least one segment");
    T total(0.0);
    if (space == LossSpace::ThreeD) {
        if (frame.points3d.empty()) throw SimError("point_to_line_loss: frame has no 3D points");
        std::vector<Vec3> mv(model.x.size());
        for (std::size_t i = 0; i < model.x.size(); ++i) mv[i] = values(model.x[i]);
        for (const Vec3& p : frame.points3d) {
            int best = 0;
            double best_d = detail::segment_distance_value(p, mv[0], mv[1]);
            for (int s = 1; s < model.segment_count(); ++s) {
                double d = detail::segment_distance_value(p, mv[static_cast<std::size_t>(s)], mv[static_cast<std::size_t>(s) + 1]);
                if (d < best_d) { best_d = d; best = s; }
            }
            total += detail::segment_distance(p, model.x[static_cast<std::size_t>(best)], model.x[static_cast<std::size_t>(best) + 1]);
        }
        return total;
    }
    if (!frame.has_2d()) throw SimError("point_to_line_loss: frame has no 2D points");
    std::vector<Vec2T<T>> mp = detail::project_model(frame, model);
    std::vector<Vec2> mv(mp.size());
    for (std::size_t i = 0; i < mp.size(); ++i) mv[i] = Vec2{value_of(mp[i].u), value_of(mp[i].v)};
    for (const Vec2& p : frame.points2d) {
        int best = 0;
        double best_d = detail::segment_distance_value2(p, mv[0], mv[1]);
        for (int s = 1; s < model.segment_count(); ++s) {
            double d = detail::segment_distance_value2(p, mv[static_cast<std::size_t>(s)], mv[static_cast<std::size_t>(s) + 1]);
            if (d < best_d) { best_d = d; best = s; }
        }
        total += detail::segment_distance2(p, mp[static_cast<std::size_t>(best)], mp[static_cast<std::size_t>(best) + 1]);
    }
    return total;
}

/// Sum over segment boundaries of the distance to the index-matched particle.
template <class T>
T segment_to_particle_loss(const ObservationFrame& frame, const PolylineModel<T>& model, LossSpace space) {
    T total(0.0);
    if (space == LossSpace::ThreeD) {
        if (static_cast<int>(frame.boundaries3d.size()) != model.particle_count())
            throw SimError("segment_to_particle_loss: boundary/particle count mismatch");
        for (std::size_t i = 0; i < frame.boundaries3d.size(); ++i)
            total += norm(to_vec3t<T>(frame.boundaries3d[i]) - model.x[i]);
        return total;
    }
    if (static_cast<int>(frame.boundaries2d.size()) != model.particle_count())
        throw SimError("segment_to_particle_loss: boundary/particle count mismatch");
    std::vector<Vec2T<T>> mp = detail::project_model(frame, model);
    for (std::size_t i = 0; i < frame.boundaries2d.size(); ++i) {
        Vec2T<T> diff{T(frame.boundaries2d[i].u) - mp[i].u, T(frame.boundaries2d[i].v) - mp[i].v};
        total += norm(diff);
    }
    return total;
}

/// Sum over groups of the clamped distance from each grouped point to its
/// corresponding segment (not the global minimum).
template <class T>
T segment_to_line_loss(const ObservationFrame& frame, const PolylineModel<T>& model, LossSpace space) {
    T total(0.0);
    if (space == LossSpace::ThreeD) {
        if (static_cast<int>(frame.groups3d.size()) != model.segment_count())
            throw SimError("segment_to_line_loss: group/segment count mismatch");
        for (std::size_t g = 0; g < frame.groups3d.size(); ++g)
            for (int idx : frame.groups3d[g])
                total += detail::segment_distance(frame.points3d[static_cast<std::size_t>(idx)], model.x[g], model.x[g + 1]);
        return total;
    }
    if (static_cast<int>(frame.groups2d.size()) != model.segment_count())
        throw SimError("segment_to_line_loss: group/segment count mismatch");
    if (!frame.has_2d()) throw SimError("segment_to_line_loss: frame has no 2D points");
    std::vector<Vec2T<T>> mp = detail::project_model(frame, model);
    for (std::size_t g = 0; g < frame.groups2d.size(); ++g)
        for (int idx : frame.groups2d[g])
            total += detail::segment_distance2(frame.points2d[static_cast<std::size_t>(idx)], mp[g], mp[g + 1]);
    return total;
}

/// Distance between the observed lowest point and the lowest simulated
/// particle along gravity. On a polyline the lowest point is a vertex; the
/// argmin is frozen for differentiation.
template <class T>
T lowest_point_loss(const ObservationFrame& frame, const PolylineModel<T>& model) {
    if (!frame.lowest3d) throw SimError("lowest_point_loss: frame has no lowest point");
    if (model.particle_count() < 1) throw SimError("lowest_point_loss: empty model");
    Vec3 g = normalized(frame.gravity);
    int best = 0;
    double best_p = dot(values(model.x[0]), g);
    for (int i = 1; i < model.particle_count(); ++i) {
        double pr = dot(values(model.x[static_cast<std::size_t>(i)]), g);
        if (pr > best_p) { best_p = pr; best = i; }
    }
    return norm(to_vec3t<T>(*frame.lowest3d) - model.x[static_cast<std::size_t>(best)]);
}

template <class T>
T evaluate_objective(ObjectiveKind kind, const ObservationFrame& frame, const PolylineModel<T>& model) {
    switch (kind) {
        case ObjectiveKind::Obj1: return point_to_line_loss(frame, model, LossSpace::ThreeD);
        case ObjectiveKind::Obj2: return point_to_line_loss(frame, model, LossSpace::TwoD);
        case ObjectiveKind::Obj3: return point_to_line_loss(frame, model, LossSpace::TwoD) + lowest_point_loss(frame, model);
        case ObjectiveKind::Obj4: return segment_to_particle_loss(frame, model, LossSpace::ThreeD);
        case ObjectiveKind::Obj5: return segment_to_particle_loss(frame, model, LossSpace::TwoD);
        case ObjectiveKind::Obj6: return segment_to_particle_loss(frame, model, LossSpace::TwoD) + lowest_point_loss(frame, model);
        case ObjectiveKind::Obj7: return segment_to_line_loss(frame, model, LossSpace::ThreeD);
        case ObjectiveKind::Obj8: return segment_to_line_loss(frame, model, LossSpace::TwoD);
        case ObjectiveKind::Obj9: return segment_to_line_loss(frame, model, LossSpace::TwoD) + lowest_point_loss(frame, model);
    }
    throw SimError("evaluate_objective: unknown objective kind");
}

/// One of the nine named compositions, or a custom weighting of the primary
/// losses. Zero-weight components are never evaluated, so a custom objective
/// only requires the frame data its nonzero components touch.
struct Objective {
    ObjectiveKind kind = ObjectiveKind::Obj1;
    bool custom = false;
    double w_pl3 = 0, w_pl2 = 0, w_sp3 = 0, w_sp2 = 0, w_sl3 = 0, w_sl2 = 0, w_lo = 0;

    Objective() = default;
    Objective(ObjectiveKind k) : kind(k) {} // NOLINT: named kinds convert freely

    static Objective weighted(double pl3, double pl2, double sp3, double sp2, double sl3, double sl2,
                              double lo) {
        Objective o;
        o.custom = true;
        o.w_pl3 = pl3;
        o.w_pl2 = pl2;
        o.w_sp3 = sp3;
        o.w_sp2 = sp2;
        o.w_sl3 = sl3;
        o.w_sl2 = sl2;
        o.w_lo = lo;
        return o;
    }

    std::string name() const { return custom ? "custom" : objective_name(kind); }

    template <class T>
    T evaluate(const ObservationFrame& frame, const PolylineModel<T>& model) const {
        if (!custom) return evaluate_objective(kind, frame, model);
        T total(0.0);
        if (w_pl3 != 0.0) total += point_to_line_loss(frame, model, LossSpace::ThreeD) * w_pl3;
        if (w_pl2 != 0.0) total += point_to_line_loss(frame, model, LossSpace::TwoD) * w_pl2;
        if (w_sp3 != 0.0) total += segment_to_particle_loss(frame, model, LossSpace::ThreeD) * w_sp3;
        if (w_sp2 != 0.0) total += segment_to_particle_loss(frame, model, LossSpace::TwoD) * w_sp2;
        if (w_sl3 != 0.0) total += segment_to_line_loss(frame, model, LossSpace::ThreeD) * w_sl3;
        if (w_sl2 != 0.0) total += segment_to_line_loss(frame, model, LossSpace::TwoD) * w_sl2;
        if (w_lo != 0.0) total += lowest_point_loss(frame, model) * w_lo;
        return total;
    }
};

} // namespace ropesim
