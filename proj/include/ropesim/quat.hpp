#pragma once

#include <cmath>

#include "ropesim/errors.hpp"
#include "ropesim/vec.hpp"

namespace ropesim {

/// Unit quaternion, Hamilton convention (ij = k), scalar-first storage
/// (w, x, y, z). Algebra ops never renormalize; the solver renormalizes
/// explicitly so differentiation sees normalization as a graph node.
template <class T>
struct QuatT {
    T w{};
    Vec3T<T> v{};

    QuatT() = default;
    QuatT(T ww, T vx, T vy, T vz) : w(std::move(ww)), v{std::move(vx), std::move(vy), std::move(vz)} {}
    QuatT(T ww, Vec3T<T> vv) : w(std::move(ww)), v(std::move(vv)) {}

    static QuatT identity() { return {T(1), T(0), T(0), T(0)}; }
};

using Quat = QuatT<double>;

/// Hamilton product a*b.
template <class T>
QuatT<T> quat_multiply(const QuatT<T>& a, const QuatT<T>& b) {
    return {a.w * b.w - dot(a.v, b.v), a.v * b.w + b.v * a.w + cross(a.v, b.v)};
}

template <class T>
QuatT<T> quat_conjugate(const QuatT<T>& q) {
    return {q.w, -q.v};
}

template <class T> T norm_sq(const QuatT<T>& q) { return q.w * q.w + norm_sq(q.v); }

template <class T>
T norm(const QuatT<T>& q) {
    using std::sqrt;
    return sqrt(norm_sq(q));
}

template <class T>
QuatT<T> normalized(const QuatT<T>& q) {
    T n = norm(q);
    return {q.w / n, q.v / n};
}

template <class T>
QuatT<T> operator+(const QuatT<T>& a, const QuatT<T>& b) {
    return {a.w + b.w, a.v + b.v};
}

template <class T>
QuatT<T>& operator+=(QuatT<T>& a, const QuatT<T>& b) {
    a.w += b.w;
    a.v += b.v;
    return a;
}

template <class T, class S>
QuatT<T> operator*(const QuatT<T>& q, const S& s) {
    return {q.w * s, q.v * s};
}

// Tolerance for the orientation-use precondition check. Loose enough that
// finite-difference probes of single components stay in range.
inline constexpr double kOrientationUnitTol = 1e-3;

/// R(q) * e3: the material tangent axis of the frame q. Uses the homogeneous
/// quadratic form, whose Jacobian in the raw (w, v) components is the analytic
/// one used by the shear/stretch constraint. q must be unit to tolerance.
template <class T>
Vec3T<T> rotate_basis3(const QuatT<T>& q) {
    double n2 = value_of(norm_sq(q));
    if (std::abs(n2 - 1.0) > kOrientationUnitTol)
        throw SimError("rotate_basis3: quaternion is not unit norm");
    const Vec3T<T> e3{T(0), T(0), T(1)};
    T two(2);
    return e3 * (q.w * q.w - norm_sq(q.v)) + q.v * (two * q.v.z) + cross(q.v, e3) * (two * q.w);
}

/// Full rotation matrix of a unit quaternion.
template <class T>
Mat3T<T> rotation_matrix(const QuatT<T>& q) {
    Mat3T<T> R;
    T xx = q.v.x * q.v.x, yy = q.v.y * q.v.y, zz = q.v.z * q.v.z;
    T xy = q.v.x * q.v.y, xz = q.v.x * q.v.z, yz = q.v.y * q.v.z;
    T wx = q.w * q.v.x, wy = q.w * q.v.y, wz = q.w * q.v.z;
    R(0, 0) = T(1) - 2.0 * (yy + zz); R(0, 1) = 2.0 * (xy - wz);        R(0, 2) = 2.0 * (xz + wy);
    R(1, 0) = 2.0 * (xy + wz);        R(1, 1) = T(1) - 2.0 * (xx + zz); R(1, 2) = 2.0 * (yz - wx);
    R(2, 0) = 2.0 * (xz - wy);        R(2, 1) = 2.0 * (yz + wx);        R(2, 2) = T(1) - 2.0 * (xx + yy);
    return R;
}

/// Minimal-arc rotation taking unit vector a to unit vector b.
/// Antipodal inputs fall back to a half-turn about a fixed perpendicular.
template <class T>
QuatT<T> quat_from_two_vectors(const Vec3T<T>& a, const Vec3T<T>& b) {
    using std::sqrt;
    T d = dot(a, b);
    if (value_of(d) < -1.0 + 1e-12) {
        Vec3 av = values(a);
        Vec3 perp = std::abs(av.x) < 0.9 ? cross(av, Vec3{1, 0, 0}) : cross(av, Vec3{0, 1, 0});
        perp = normalized(perp);
        return {T(0), Vec3T<T>{T(perp.x), T(perp.y), T(perp.z)}};
    }
    T w = sqrt((T(1) + d) * 0.5);
    Vec3T<T> axis = cross(a, b) * (0.5 / w);
    return {w, axis};
}

template <class T>
QuatT<double> values(const QuatT<T>& q) {
    return {value_of(q.w), values(q.v)};
}

template <class T>
QuatT<T> to_quatt(const Quat& q) {
    return {T(q.w), to_vec3t<T>(q.v)};
}

} // namespace ropesim
