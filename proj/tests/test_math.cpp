#include <doctest.h>

#include "oracles.hpp"
#include "ropesim/quat.hpp"
#include "ropesim/vec.hpp"

using namespace ropesim;

TEST_CASE("quat_multiply: identity is two-sided neutral") {
    std::mt19937 rng(7);
    Quat q = oracles::random_unit_quat(rng);
    Quat id = Quat::identity();
    Quat l = quat_multiply(id, q);
    Quat r = quat_multiply(q, id);
    for (const Quat& p : {l, r}) {
        CHECK(p.w == doctest::Approx(q.w).epsilon(1e-15));
        CHECK(p.v.x == doctest::Approx(q.v.x).epsilon(1e-15));
        CHECK(p.v.y == doctest::Approx(q.v.y).epsilon(1e-15));
        CHECK(p.v.z == doctest::Approx(q.v.z).epsilon(1e-15));
    }
}

TEST_CASE("quat_multiply: i * j = k (Hamilton convention)") {
    Quat i{0.0, 1.0, 0.0, 0.0};
    Quat j{0.0, 0.0, 1.0, 0.0};
    Quat k = quat_multiply(i, j);
    CHECK(k.w == 0.0);
    CHECK(k.v.x == 0.0);
    CHECK(k.v.y == 0.0);
    CHECK(k.v.z == 1.0);
}

TEST_CASE("quat_multiply: product matches composed rotation matrices") {
    std::mt19937 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        Quat a = oracles::random_unit_quat(rng);
        Quat b = oracles::random_unit_quat(rng);
        auto composed = oracles::matmul(oracles::rotation_matrix_of(a), oracles::rotation_matrix_of(b));
        auto product = oracles::rotation_matrix_of(quat_multiply(a, b));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) CHECK(product[r][c] == doctest::Approx(composed[r][c]).epsilon(1e-12));
    }
}

TEST_CASE("quat_multiply: unit x unit stays unit, associative to round-off") {
    std::mt19937 rng(13);
    for (int rep = 0; rep < 50; ++rep) {
        Quat a = oracles::random_unit_quat(rng);
        Quat b = oracles::random_unit_quat(rng);
        Quat c = oracles::random_unit_quat(rng);
        CHECK(norm(quat_multiply(a, b)) == doctest::Approx(1.0).epsilon(1e-13));
        Quat ab_c = quat_multiply(quat_multiply(a, b), c);
        Quat a_bc = quat_multiply(a, quat_multiply(b, c));
        CHECK(ab_c.w == doctest::Approx(a_bc.w).epsilon(1e-13));
        CHECK(ab_c.v.x == doctest::Approx(a_bc.v.x).epsilon(1e-13));
    }
}

TEST_CASE("quat_conjugate: identity, inverse property, involution") {
    Quat id = Quat::identity();
    Quat idc = quat_conjugate(id);
    CHECK(idc.w == 1.0);
    CHECK(idc.v.x == 0.0);

    std::mt19937 rng(17);
    Quat q = oracles::random_unit_quat(rng);
    Quat qqc = quat_multiply(q, quat_conjugate(q));
    CHECK(qqc.w == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(norm(qqc.v) == doctest::Approx(0.0).epsilon(1e-14));

    Quat back = quat_conjugate(quat_conjugate(q));
    CHECK(back.w == q.w);
    CHECK(back.v.x == q.v.x);
    CHECK(back.v.y == q.v.y);
    CHECK(back.v.z == q.v.z);
}

TEST_CASE("rotate_basis3: identity and 90-degree x rotation") {
    Vec3 e3 = rotate_basis3(Quat::identity());
    CHECK(e3.x == 0.0);
    CHECK(e3.y == 0.0);
    CHECK(e3.z == 1.0);

    double s = std::sin(M_PI / 4.0), c = std::cos(M_PI / 4.0);
    Vec3 r = rotate_basis3(Quat{c, s, 0.0, 0.0});
    CHECK(r.x == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.y == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(r.z == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("rotate_basis3: matches sandwich-product oracle, unit output") {
    std::mt19937 rng(19);
    for (int rep = 0; rep < 100; ++rep) {
        Quat q = oracles::random_unit_quat(rng);
        Vec3 got = rotate_basis3(q);
        Vec3 want = oracles::rotate_e3_sandwich(q);
        CHECK(got.x == doctest::Approx(want.x).epsilon(1e-12));
        CHECK(got.y == doctest::Approx(want.y).epsilon(1e-12));
        CHECK(got.z == doctest::Approx(want.z).epsilon(1e-12));
        CHECK(std::abs(norm(got) - 1.0) < 1e-12);
    }
}

TEST_CASE("rotate_basis3: rejects non-unit quaternions") {
    CHECK_THROWS_AS(rotate_basis3(Quat{2.0, 0.0, 0.0, 0.0}), SimError);
}

TEST_CASE("skew: zero vector, cross-product identities, antisymmetry") {
    Mat3 z = skew(Vec3{0, 0, 0});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(z(r, c) == 0.0);

    Vec3 e2 = skew(Vec3{0, 0, 1}) * Vec3{1, 0, 0};
    CHECK(e2.x == 0.0);
    CHECK(e2.y == 1.0);
    CHECK(e2.z == 0.0);

    std::mt19937 rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        Vec3 v = oracles::random_vec3(rng);
        Vec3 u = oracles::random_vec3(rng);
        Vec3 got = skew(v) * u;
        Vec3 want = oracles::cross_componentwise(v, u);
        CHECK(got.x == doctest::Approx(want.x).epsilon(1e-14));
        CHECK(got.y == doctest::Approx(want.y).epsilon(1e-14));
        CHECK(got.z == doctest::Approx(want.z).epsilon(1e-14));
        Mat3 s = skew(v);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) CHECK(s(r, c) == -s(c, r));
    }
}

TEST_CASE("quat_from_two_vectors: maps a to b, handles antipodal") {
    std::mt19937 rng(29);
    for (int rep = 0; rep < 50; ++rep) {
        Vec3 a = normalized(oracles::random_vec3(rng) + Vec3{0, 0, 1e-3});
        Vec3 b = normalized(oracles::random_vec3(rng) + Vec3{1e-3, 0, 0});
        Quat q = quat_from_two_vectors(a, b);
        CHECK(norm(q) == doctest::Approx(1.0).epsilon(1e-12));
        auto R = oracles::rotation_matrix_of(q);
        Vec3 got{R[0][0] * a.x + R[0][1] * a.y + R[0][2] * a.z,
                 R[1][0] * a.x + R[1][1] * a.y + R[1][2] * a.z,
                 R[2][0] * a.x + R[2][1] * a.y + R[2][2] * a.z};
        CHECK(norm(got - b) < 1e-12);
    }
    Quat flip = quat_from_two_vectors(Vec3{0, 0, 1}, Vec3{0, 0, -1});
    CHECK(norm(flip) == doctest::Approx(1.0).epsilon(1e-12));
    auto R = oracles::rotation_matrix_of(flip);
    CHECK(R[2][2] == doctest::Approx(-1.0).epsilon(1e-12));
}
