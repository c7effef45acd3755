#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ropesim/errors.hpp"
#include "ropesim/quat.hpp"
#include "ropesim/vec.hpp"

namespace ropesim {

/// Discretized rope: K particle positions, K-1 inter-particle orientation
/// frames, plus an immutable rest pose. Rest data and weights stay plain
/// doubles even in taped runs; only x and q carry the scalar type.
/// Inverse mass 0 marks a fixed or externally controlled particle.
template <class T>
struct RopeStateT {
    std::vector<Vec3T<T>> x;
    std::vector<QuatT<T>> q;
    std::vector<Vec3> rest_x;
    std::vector<Quat> rest_q;
    std::vector<double> inv_mass;
    std::vector<double> inv_inertia;

    int particle_count() const { return static_cast<int>(x.size()); }
    int segment_count() const { return static_cast<int>(x.size()) - 1; }

    double rest_segment_length(int i) const { return norm(rest_x[static_cast<std::size_t>(i) + 1] - rest_x[static_cast<std::size_t>(i)]); }

    double rest_total_length() const {
        double total = 0.0;
        for (int i = 0; i + 1 < particle_count(); ++i) total += rest_segment_length(i);
        return total;
    }

    void validate() const {
        const std::size_t k = x.size();
        if (k < 2) throw SimError("RopeState: needs at least 2 particles");
        if (q.size() != k - 1 || rest_x.size() != k || rest_q.size() != k - 1 ||
            inv_mass.size() != k || inv_inertia.size() != k - 1)
            throw SimError("RopeState: inconsistent array sizes");
        for (std::size_t i = 0; i + 1 < k; ++i) {
            if (norm(rest_x[i + 1] - rest_x[i]) <= 0.0)
                throw SimError("RopeState: degenerate rest segment length");
            if (std::abs(value_of(norm_sq(q[i])) - 1.0) > 2e-9)
                throw SimError("RopeState: orientation quaternion is not unit norm");
        }
    }
};

using RopeState = RopeStateT<double>;

template <class T>
RopeState values(const RopeStateT<T>& s) {
    RopeState out;
    out.x.reserve(s.x.size());
    out.q.reserve(s.q.size());
    for (const auto& p : s.x) out.x.push_back(values(p));
    for (const auto& r : s.q) out.q.push_back(values(r));
    out.rest_x = s.rest_x;
    out.rest_q = s.rest_q;
    out.inv_mass = s.inv_mass;
    out.inv_inertia = s.inv_inertia;
    return out;
}

/// Config-level rope description. The rest pose is a straight line of the
/// given length; fixed indices and the control index get inverse mass 0.
struct RopeSpec {
    int particle_count = 20;
    double length = 1.0;
    Vec3 start{0.0, 0.0, 0.0};
    Vec3 direction{1.0, 0.0, 0.0};
    double inv_mass = 1.0;
    double inv_inertia = 1.0;
    std::vector<int> fixed_indices;
    int control_index = 0;
    bool extensible = false;
};

inline RopeState make_rope(const RopeSpec& spec) {
    if (spec.particle_count < 2) throw ConfigError("rope: particle_count must be >= 2");
    if (spec.length <= 0.0) throw ConfigError("rope: length must be positive");
    if (norm(spec.direction) <= 0.0) throw ConfigError("rope: direction must be nonzero");
    if (spec.control_index < 0 || spec.control_index >= spec.particle_count)
        throw ConfigError("rope: control_index out of range");
    for (int f : spec.fixed_indices)
        if (f < 0 || f >= spec.particle_count) throw ConfigError("rope: fixed index out of range");

    const int k = spec.particle_count;
    const Vec3 dir = normalized(spec.direction);
    const double seg = spec.length / static_cast<double>(k - 1);
    const Quat frame = quat_from_two_vectors(Vec3{0, 0, 1}, dir);

    RopeState s;
    s.x.resize(static_cast<std::size_t>(k));
    s.rest_x.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        s.rest_x[static_cast<std::size_t>(i)] = spec.start + dir * (seg * i);
        s.x[static_cast<std::size_t>(i)] = s.rest_x[static_cast<std::size_t>(i)];
    }
    s.q.assign(static_cast<std::size_t>(k - 1), frame);
    s.rest_q.assign(static_cast<std::size_t>(k - 1), frame);
    s.inv_mass.assign(static_cast<std::size_t>(k), spec.inv_mass);
    s.inv_inertia.assign(static_cast<std::size_t>(k - 1), spec.inv_inertia);
    for (int f : spec.fixed_indices) s.inv_mass[static_cast<std::size_t>(f)] = 0.0;
    s.inv_mass[static_cast<std::size_t>(spec.control_index)] = 0.0;
    return s;
}

/// Builds the canonical initial configuration for one quasi-static solve:
/// particle positions interpolated linearly between pinned indices, segment
/// frames aligned with their chord. Pins must cover both rope ends and be
/// sorted by index. Differentiable in the pin positions.
template <class T>
RopeStateT<T> make_pinned_state(const RopeState& base, std::span<const std::pair<int, Vec3T<T>>> pins) {
    const int k = base.particle_count();
    if (pins.empty() || pins.front().first != 0 || pins.back().first != k - 1)
        throw SimError("make_pinned_state: pins must cover particle 0 and K-1");
    for (std::size_t i = 0; i + 1 < pins.size(); ++i)
        if (pins[i].first >= pins[i + 1].first) throw SimError("make_pinned_state: pins must be strictly increasing");

    RopeStateT<T> s;
    s.rest_x = base.rest_x;
    s.rest_q = base.rest_q;
    s.inv_mass = base.inv_mass;
    s.inv_inertia = base.inv_inertia;
    s.x.resize(static_cast<std::size_t>(k));

    for (std::size_t p = 0; p + 1 < pins.size(); ++p) {
        const auto& [ia, pa] = pins[p];
        const auto& [ib, pb] = pins[p + 1];
        for (int i = ia; i <= ib; ++i) {
            double f = static_cast<double>(i - ia) / static_cast<double>(ib - ia);
            s.x[static_cast<std::size_t>(i)] = pa + (pb - pa) * f;
        }
    }

    s.q.resize(static_cast<std::size_t>(k - 1));
    const Vec3T<T> e3{T(0), T(0), T(1)};
    for (int i = 0; i + 1 < k; ++i) {
        Vec3T<T> seg = s.x[static_cast<std::size_t>(i) + 1] - s.x[static_cast<std::size_t>(i)];
        double len = value_of(norm(seg));
        if (len < 1e-12) throw SimError("make_pinned_state: coincident pinned positions");
        s.q[static_cast<std::size_t>(i)] = quat_from_two_vectors(e3, seg / norm(seg));
    }
    return s;
}

} // namespace ropesim
