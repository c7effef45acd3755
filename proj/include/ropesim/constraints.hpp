#pragma once

#include <array>
#include <cmath>
#include <string>

#include "ropesim/rope_state.hpp"

namespace ropesim {

/// 3x4 Jacobian block of a 3-vector residual with respect to one quaternion,
/// column order (w, vx, vy, vz).
template <class T>
struct Mat34T {
    std::array<T, 12> m{};
    T& operator()(int r, int c) { return m[static_cast<std::size_t>(4 * r + c)]; }
    const T& operator()(int r, int c) const { return m[static_cast<std::size_t>(4 * r + c)]; }
};

using Mat34 = Mat34T<double>;

/// G * G^T, accumulated into a symmetric 3x3 with weight w.
template <class T>
void accumulate_gram(Mat3T<T>& out, const Mat34T<T>& G, double w) {
    for (int r = 0; r < 3; ++r)
        for (int c = r; c < 3; ++c) {
            T s = G(r, 0) * G(c, 0) + G(r, 1) * G(c, 1) + G(r, 2) * G(c, 2) + G(r, 3) * G(c, 3);
            out(r, c) += s * w;
            if (c != r) out(c, r) = out(r, c);
        }
}

/// G^T * v as a quaternion increment.
template <class T>
QuatT<T> transpose_apply(const Mat34T<T>& G, const Vec3T<T>& v) {
    QuatT<T> out;
    out.w = G(0, 0) * v.x + G(1, 0) * v.y + G(2, 0) * v.z;
    out.v.x = G(0, 1) * v.x + G(1, 1) * v.y + G(2, 1) * v.z;
    out.v.y = G(0, 2) * v.x + G(1, 2) * v.y + G(2, 2) * v.z;
    out.v.z = G(0, 3) * v.x + G(1, 3) * v.y + G(2, 3) * v.z;
    return out;
}

// ---------------------------------------------------------------------------
// Shear/stretch: c_i = (x_{i+1} - x_i)/|rest segment| - R(q_i) e3
// ---------------------------------------------------------------------------

template <class T>
Vec3T<T> shear_stretch_residual(const RopeStateT<T>& s, int i) {
    double rest = s.rest_segment_length(i);
    if (rest <= 0.0) throw SimError("shear_stretch: degenerate rest length at segment " + std::to_string(i));
    Vec3T<T> d = s.x[static_cast<std::size_t>(i) + 1] - s.x[static_cast<std::size_t>(i)];
    return d * (1.0 / rest) - rotate_basis3(s.q[static_cast<std::size_t>(i)]);
}

/// Jacobian of the rotated tangent R(q) e3 in the raw quaternion components.
/// This is the positive block; the residual subtracts the rotated tangent, so
/// the residual's own Jacobian with respect to q is the negation.
template <class T>
Mat34T<T> rotated_tangent_jacobian(const QuatT<T>& q) {
    const T& w = q.w;
    const Vec3T<T>& v = q.v;
    Mat34T<T> J;
    // d/dw: 2 (w e3 - e3 x v)
    J(0, 0) = 2.0 * v.y;
    J(1, 0) = -2.0 * v.x;
    J(2, 0) = 2.0 * w;
    // d/dv: 2 ((v.e3) I + v e3^T - e3 v^T - w [e3]x)
    J(0, 1) = 2.0 * v.z;  J(0, 2) = 2.0 * w;    J(0, 3) = 2.0 * v.x;
    J(1, 1) = -2.0 * w;   J(1, 2) = 2.0 * v.z;  J(1, 3) = 2.0 * v.y;
    J(2, 1) = -2.0 * v.x; J(2, 2) = -2.0 * v.y; J(2, 3) = 2.0 * v.z;
    return J;
}

template <class T>
struct ShearStretchGradients {
    Mat3 d_xi;       ///< residual Jacobian wrt x_i (constant -I / rest length)
    Mat3 d_xi1;      ///< residual Jacobian wrt x_{i+1}
    Mat34T<T> d_qi;  ///< residual Jacobian wrt q_i
};

template <class T>
ShearStretchGradients<T> shear_stretch_gradients(const RopeStateT<T>& s, int i) {
    double rest = s.rest_segment_length(i);
    if (rest <= 0.0) throw SimError("shear_stretch: degenerate rest length at segment " + std::to_string(i));
    ShearStretchGradients<T> g;
    double inv = 1.0 / rest;
    for (int r = 0; r < 3; ++r) {
        g.d_xi(r, r) = -inv;
        g.d_xi1(r, r) = inv;
    }
    g.d_qi = rotated_tangent_jacobian(s.q[static_cast<std::size_t>(i)]);
    for (auto& e : g.d_qi.m) e = -e;
    return g;
}

// ---------------------------------------------------------------------------
// Bend/twist: c_i = Im(q_i^* q_{i+1}) - xi * Im(qr_i^* qr_{i+1}),
// xi in {+1,-1} resolving the quaternion double cover against the rest
// Darboux vector. xi is piecewise constant and carries no gradient.
// ---------------------------------------------------------------------------

inline double darboux_sign(const Vec3& omega, const Vec3& omega_rest) {
    return norm_sq(omega - omega_rest) <= norm_sq(omega + omega_rest) ? 1.0 : -1.0;
}

template <class T>
Vec3T<T> bend_twist_residual(const RopeStateT<T>& s, int i) {
    const std::size_t k = static_cast<std::size_t>(i);
    Vec3T<T> omega = quat_multiply(quat_conjugate(s.q[k]), s.q[k + 1]).v;
    Vec3 omega_rest = quat_multiply(quat_conjugate(s.rest_q[k]), s.rest_q[k + 1]).v;
    double xi = darboux_sign(values(omega), omega_rest);
    return omega - to_vec3t<T>(omega_rest * xi);
}

template <class T>
struct BendTwistGradients {
    Mat34T<T> d_qi;
    Mat34T<T> d_qi1;
};

template <class T>
BendTwistGradients<T> bend_twist_gradients(const RopeStateT<T>& s, int i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const QuatT<T>& a = s.q[k];
    const QuatT<T>& b = s.q[k + 1];
    BendTwistGradients<T> g;
    // wrt q_i: ( b_v | -b_w I + [b_v]x )
    g.d_qi(0, 0) = b.v.x; g.d_qi(1, 0) = b.v.y; g.d_qi(2, 0) = b.v.z;
    g.d_qi(0, 1) = -b.w;   g.d_qi(0, 2) = -b.v.z; g.d_qi(0, 3) = b.v.y;
    g.d_qi(1, 1) = b.v.z;  g.d_qi(1, 2) = -b.w;   g.d_qi(1, 3) = -b.v.x;
    g.d_qi(2, 1) = -b.v.y; g.d_qi(2, 2) = b.v.x;  g.d_qi(2, 3) = -b.w;
    // wrt q_{i+1}: ( -a_v | a_w I - [a_v]x )
    g.d_qi1(0, 0) = -a.v.x; g.d_qi1(1, 0) = -a.v.y; g.d_qi1(2, 0) = -a.v.z;
    g.d_qi1(0, 1) = a.w;    g.d_qi1(0, 2) = a.v.z;  g.d_qi1(0, 3) = -a.v.y;
    g.d_qi1(1, 1) = -a.v.z; g.d_qi1(1, 2) = a.w;    g.d_qi1(1, 3) = a.v.x;
    g.d_qi1(2, 1) = a.v.y;  g.d_qi1(2, 2) = -a.v.x; g.d_qi1(2, 3) = a.w;
    return g;
}

// ---------------------------------------------------------------------------
// Distance: c_i = |x_{i+1} - x_i| - |rest segment|
// ---------------------------------------------------------------------------

/// Denominator of the distance-constraint gradient. CurrentLength is the true
/// derivative of the residual; RestLength is a compatibility variant.
enum class DistanceGradientMode {
    CurrentLength,
    RestLength,
};

template <class T>
T distance_residual(const RopeStateT<T>& s, int i) {
    Vec3T<T> d = s.x[static_cast<std::size_t>(i) + 1] - s.x[static_cast<std::size_t>(i)];
    return norm(d) - s.rest_segment_length(i);
}

template <class T>
struct DistanceGradients {
    Vec3T<T> d_xi;
    Vec3T<T> d_xi1;
};

template <class T>
DistanceGradients<T> distance_gradients(const RopeStateT<T>& s, int i,
                                        DistanceGradientMode mode = DistanceGradientMode::CurrentLength) {
    Vec3T<T> d = s.x[static_cast<std::size_t>(i) + 1] - s.x[static_cast<std::size_t>(i)];
    T len = norm(d);
    if (value_of(len) < 1e-12)
        throw SimError("distance: coincident particles at segment " + std::to_string(i));
    Vec3T<T> n = mode == DistanceGradientMode::RestLength ? d * (1.0 / s.rest_segment_length(i)) : d / len;
    return {-n, n};
}

// ---------------------------------------------------------------------------
// Compliant multiplier update:
//   dLambda = -(sum_pi grad C W grad^T C + alpha)^-1 (C + alpha Lambda)
// with position/orientation deltas W grad^T C dLambda applied by the callers.
// ---------------------------------------------------------------------------

/// Per-family compliance and accumulated multipliers. Multipliers reset at
/// the start of every quasi-static solve.
template <class T>
struct ComplianceT {
    double alpha = 0.0;
    std::vector<Vec3T<T>> lambda3; ///< per instance, 3-vector constraints
    std::vector<T> lambda1;        ///< per instance, scalar constraints
};

/// Scalar constraint instance.
template <class T>
T xpbd_delta_lambda(const T& residual, const T& weighted_gram, double alpha, const T& lambda,
                    int constraint_index) {
    double denom = value_of(weighted_gram) + alpha;
    if (denom == 0.0)
        throw SimError("xpbd: singular constraint system at index " + std::to_string(constraint_index));
    return -(residual + alpha * lambda) / (weighted_gram + alpha);
}

/// 3-vector constraint instance; solves the symmetric 3x3 system.
template <class T>
Vec3T<T> xpbd_delta_lambda(const Vec3T<T>& residual, const Mat3T<T>& weighted_gram, double alpha,
                           const Vec3T<T>& lambda, int constraint_index) {
    T det;
    Vec3T<T> out = solve_sym3(weighted_gram, alpha, -(residual + lambda * alpha), &det);
    if (value_of(det) == 0.0 || !std::isfinite(value_of(det)))
        throw SimError("xpbd: singular constraint system at index " + std::to_string(constraint_index));
    return out;
}

// ---------------------------------------------------------------------------
// Per-family projections: residual + gradients + multiplier update folded
// into the candidate deltas a Jacobi sweep averages.
// ---------------------------------------------------------------------------

template <class T>
struct ShearStretchDeltas {
    Vec3T<T> dx_i, dx_i1;
    QuatT<T> dq_i;
    Vec3T<T> dlambda;
};

template <class T>
ShearStretchDeltas<T> project_shear_stretch(const RopeStateT<T>& s, int i, double alpha,
                                            const Vec3T<T>* lambda_acc) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double w0 = s.inv_mass[k], w1 = s.inv_mass[k + 1], wq = s.inv_inertia[k];
    ShearStretchDeltas<T> out;
    if (w0 == 0.0 && w1 == 0.0 && wq == 0.0) return out;

    double rest = s.rest_segment_length(i);
    double inv_rest = 1.0 / rest;
    Vec3T<T> residual = shear_stretch_residual(s, i);
    Mat34T<T> Jq = rotated_tangent_jacobian(s.q[k]); // residual block is -Jq; gram and deltas use it squared / twice-negated

    Mat3T<T> gram;
    double pos = (w0 + w1) * inv_rest * inv_rest;
    for (int r = 0; r < 3; ++r) gram(r, r) = T(pos);
    accumulate_gram(gram, Jq, wq);

    Vec3T<T> lambda = lambda_acc ? *lambda_acc : Vec3T<T>{T(0), T(0), T(0)};
    T det;
    Vec3T<T> dl = solve_sym3(gram, alpha, -(residual + lambda * alpha), &det);
    if (value_of(det) == 0.0 || !std::isfinite(value_of(det)))
        throw SimError("xpbd: singular shear/stretch system at index " + std::to_string(i));

    out.dlambda = dl;
    out.dx_i = dl * (-w0 * inv_rest);
    out.dx_i1 = dl * (w1 * inv_rest);
    QuatT<T> jt = transpose_apply(Jq, dl);
    out.dq_i = jt * (-wq); // residual Jacobian wrt q is -Jq
    return out;
}

template <class T>
struct BendTwistDeltas {
    QuatT<T> dq_i, dq_i1;
    Vec3T<T> dlambda;
};

template <class T>
BendTwistDeltas<T> project_bend_twist(const RopeStateT<T>& s, int i, double alpha,
                                      const Vec3T<T>* lambda_acc) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double wq0 = s.inv_inertia[k], wq1 = s.inv_inertia[k + 1];
    BendTwistDeltas<T> out;
    if (wq0 == 0.0 && wq1 == 0.0) return out;

    Vec3T<T> residual = bend_twist_residual(s, i);
    BendTwistGradients<T> g = bend_twist_gradients(s, i);

    Mat3T<T> gram;
    accumulate_gram(gram, g.d_qi, wq0);
    accumulate_gram(gram, g.d_qi1, wq1);

    Vec3T<T> lambda = lambda_acc ? *lambda_acc : Vec3T<T>{T(0), T(0), T(0)};
    T det;
    Vec3T<T> dl = solve_sym3(gram, alpha, -(residual + lambda * alpha), &det);
    if (value_of(det) == 0.0 || !std::isfinite(value_of(det)))
        throw SimError("xpbd: singular bend/twist system at index " + std::to_string(i));

    out.dlambda = dl;
    out.dq_i = transpose_apply(g.d_qi, dl) * wq0;
    out.dq_i1 = transpose_apply(g.d_qi1, dl) * wq1;
    return out;
}

template <class T>
struct DistanceDeltas {
    Vec3T<T> dx_i, dx_i1;
    T dlambda{};
};

template <class T>
DistanceDeltas<T> project_distance(const RopeStateT<T>& s, int i, double alpha, const T* lambda_acc,
                                   DistanceGradientMode mode) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double w0 = s.inv_mass[k], w1 = s.inv_mass[k + 1];
    DistanceDeltas<T> out;
    out.dlambda = T(0);
    if (w0 == 0.0 && w1 == 0.0) return out;

    T residual = distance_residual(s, i);
    DistanceGradients<T> g = distance_gradients(s, i, mode);
    T gram = norm_sq(g.d_xi1) * (w0 + w1);
    T lambda = lambda_acc ? *lambda_acc : T(0);
    T dl = xpbd_delta_lambda(residual, gram, alpha, lambda, i);

    out.dlambda = dl;
    out.dx_i = g.d_xi * (w0 * dl);
    out.dx_i1 = g.d_xi1 * (w1 * dl);
    return out;
}

} // namespace ropesim
