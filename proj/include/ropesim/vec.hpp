#pragma once

#include <array>
#include <cmath>

namespace ropesim {

inline double value_of(double x) { return x; }
inline float value_of(float x) { return x; }

/// 3-vector over any scalar type (double for plain simulation, DiffVar for
/// taped runs). Components are public; all operations are free functions.
template <class T>
struct Vec3T {
    T x{}, y{}, z{};

    Vec3T() = default;
    Vec3T(T xx, T yy, T zz) : x(std::move(xx)), y(std::move(yy)), z(std::move(zz)) {}

    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

template <class T>
struct Vec2T {
    T u{}, v{};
};

using Vec3 = Vec3T<double>;
using Vec2 = Vec2T<double>;

template <class T> Vec3T<T> operator+(const Vec3T<T>& a, const Vec3T<T>& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
template <class T> Vec3T<T> operator-(const Vec3T<T>& a, const Vec3T<T>& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
template <class T> Vec3T<T> operator-(const Vec3T<T>& a) { return {-a.x, -a.y, -a.z}; }
template <class T, class S> Vec3T<T> operator*(const Vec3T<T>& a, const S& s) { return {a.x * s, a.y * s, a.z * s}; }
template <class T, class S> Vec3T<T> operator*(const S& s, const Vec3T<T>& a) { return {a.x * s, a.y * s, a.z * s}; }
template <class T, class S> Vec3T<T> operator/(const Vec3T<T>& a, const S& s) { return {a.x / s, a.y / s, a.z / s}; }
template <class T> Vec3T<T>& operator+=(Vec3T<T>& a, const Vec3T<T>& b) { a.x += b.x; a.y += b.y; a.z += b.z; return a; }
template <class T> Vec3T<T>& operator-=(Vec3T<T>& a, const Vec3T<T>& b) { a.x -= b.x; a.y -= b.y; a.z -= b.z; return a; }

template <class T> T dot(const Vec3T<T>& a, const Vec3T<T>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

template <class T>
Vec3T<T> cross(const Vec3T<T>& a, const Vec3T<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class T> T norm_sq(const Vec3T<T>& v) { return dot(v, v); }

template <class T>
T norm(const Vec3T<T>& v) {
    using std::sqrt;
    return sqrt(norm_sq(v));
}

template <class T>
Vec3T<T> normalized(const Vec3T<T>& v) {
    T n = norm(v);
    return {v.x / n, v.y / n, v.z / n};
}

template <class T> Vec2T<T> operator-(const Vec2T<T>& a, const Vec2T<T>& b) { return {a.u - b.u, a.v - b.v}; }
template <class T> T dot(const Vec2T<T>& a, const Vec2T<T>& b) { return a.u * b.u + a.v * b.v; }
template <class T> T norm_sq(const Vec2T<T>& v) { return dot(v, v); }
template <class T>
T norm(const Vec2T<T>& v) {
    using std::sqrt;
    return sqrt(norm_sq(v));
}

/// Row-major 3x3 matrix.
template <class T>
struct Mat3T {
    std::array<T, 9> m{};

    T& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    const T& operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

    static Mat3T identity() {
        Mat3T out;
        out(0, 0) = T(1); out(1, 1) = T(1); out(2, 2) = T(1);
        return out;
    }
};

using Mat3 = Mat3T<double>;

template <class T>
Vec3T<T> operator*(const Mat3T<T>& A, const Vec3T<T>& v) {
    return {A(0, 0) * v.x + A(0, 1) * v.y + A(0, 2) * v.z,
            A(1, 0) * v.x + A(1, 1) * v.y + A(1, 2) * v.z,
            A(2, 0) * v.x + A(2, 1) * v.y + A(2, 2) * v.z};
}

template <class T>
Mat3T<T> operator*(const Mat3T<T>& A, const Mat3T<T>& B) {
    Mat3T<T> out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out(r, c) = A(r, 0) * B(0, c) + A(r, 1) * B(1, c) + A(r, 2) * B(2, c);
    return out;
}

/// skew(v) * u == cross(v, u) for all u.
template <class T>
Mat3T<T> skew(const Vec3T<T>& v) {
    Mat3T<T> out;
    out(0, 0) = T(0);  out(0, 1) = -v.z; out(0, 2) = v.y;
    out(1, 0) = v.z;   out(1, 1) = T(0); out(1, 2) = -v.x;
    out(2, 0) = -v.y;  out(2, 1) = v.x;  out(2, 2) = T(0);
    return out;
}

/// Solves (A + alpha*I) x = b for symmetric 3x3 A via the adjugate.
/// Throws nothing itself; callers check the determinant against zero.
template <class T>
Vec3T<T> solve_sym3(const Mat3T<T>& A, double alpha, const Vec3T<T>& b, T* det_out = nullptr) {
    T a00 = A(0, 0) + alpha, a01 = A(0, 1), a02 = A(0, 2);
    T a11 = A(1, 1) + alpha, a12 = A(1, 2);
    T a22 = A(2, 2) + alpha;
    T c00 = a11 * a22 - a12 * a12;
    T c01 = a02 * a12 - a01 * a22;
    T c02 = a01 * a12 - a02 * a11;
    T c11 = a00 * a22 - a02 * a02;
    T c12 = a01 * a02 - a00 * a12;
    T c22 = a00 * a11 - a01 * a01;
    T det = a00 * c00 + a01 * c01 + a02 * c02;
    if (det_out) *det_out = det;
    return {(c00 * b.x + c01 * b.y + c02 * b.z) / det,
            (c01 * b.x + c11 * b.y + c12 * b.z) / det,
            (c02 * b.x + c12 * b.y + c22 * b.z) / det};
}

template <class T>
Vec3T<double> values(const Vec3T<T>& v) {
    return {value_of(v.x), value_of(v.y), value_of(v.z)};
}

template <class T>
Vec3T<T> to_vec3t(const Vec3& v) {
    return {T(v.x), T(v.y), T(v.z)};
}

} // namespace ropesim
