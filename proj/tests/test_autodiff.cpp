#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ropesim/checkpoint.hpp"
#include "ropesim/quat.hpp"
#include "ropesim/tape.hpp"

using namespace ropesim;

TEST_CASE("leaf: d(x^2)/dx and unused leaves") {
    Tape tape;
    DiffVar x = tape.leaf(3.0);
    DiffVar unused = tape.leaf(42.0);
    DiffVar loss = x * x;
    Gradients g = tape.backward(loss);
    CHECK(g.at(x) == doctest::Approx(6.0));
    CHECK(g.at(unused) == 0.0);
}

TEST_CASE("leaf: finalized tape rejects new leaves") {
    Tape tape;
    tape.leaf(1.0);
    tape.finalize();
    CHECK_THROWS_AS(tape.leaf(2.0), SimError);
}

TEST_CASE("leaf feeding quaternion rotation then norm matches finite differences") {
    auto f = [](const std::vector<double>& x) {
        Tape tape;
        QuatT<DiffVar> q{tape.leaf(x[0]), tape.leaf(x[1]), tape.leaf(x[2]), tape.leaf(x[3])};
        q = normalized(q);
        Vec3T<DiffVar> r = rotate_basis3(q);
        Vec3T<DiffVar> off = r - to_vec3t<DiffVar>(Vec3{0.3, -0.2, 0.9});
        return norm(off).value();
    };
    std::vector<double> x{0.9, 0.2, -0.3, 0.1};

    Tape tape;
    std::vector<DiffVar> leaves;
    for (double v : x) leaves.push_back(tape.leaf(v));
    QuatT<DiffVar> q{leaves[0], leaves[1], leaves[2], leaves[3]};
    q = normalized(q);
    Vec3T<DiffVar> r = rotate_basis3(q);
    DiffVar loss = norm(r - to_vec3t<DiffVar>(Vec3{0.3, -0.2, 0.9}));
    Gradients g = tape.backward(loss);

    std::vector<double> fd = oracles::central_fd(f, x, 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(oracles::close_rel(g.at(leaves[i]), fd[i], 1e-6, 1e-10));
}

TEST_CASE("backward: product rule, constant loss, not-on-tape error") {
    Tape tape;
    DiffVar a = tape.leaf(2.0);
    DiffVar b = tape.leaf(5.0);
    Gradients g = tape.backward(a * b);
    CHECK(g.at(a) == 5.0);
    CHECK(g.at(b) == 2.0);

    Gradients gc = tape.backward(DiffVar(7.0));
    CHECK(gc.at(a) == 0.0);
    CHECK(gc.at(b) == 0.0);

    Tape other;
    DiffVar foreign = other.leaf(1.0);
    CHECK_THROWS_AS(tape.backward(foreign), SimError);
}

TEST_CASE("backward: repeatable bit-for-bit, tape unchanged") {
    Tape tape;
    DiffVar a = tape.leaf(1.7);
    DiffVar b = tape.leaf(-0.4);
    DiffVar loss = sqrt(a * a + b * b) / (a - b) + a * b;
    std::size_t n = tape.size();
    Gradients g1 = tape.backward(loss);
    Gradients g2 = tape.backward(loss);
    CHECK(tape.size() == n);
    CHECK(g1.at(a) == g2.at(a));
    CHECK(g1.at(b) == g2.at(b));
}

TEST_CASE("elementary ops match central finite differences on random inputs") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    std::uniform_real_distribution<double> sgn(-1.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        double av = u(rng) * (sgn(rng) > 0 ? 1.0 : -1.0);
        double bv = u(rng) * (sgn(rng) > 0 ? 1.0 : -1.0);
        auto check = [&](auto op) {
            Tape tape;
            DiffVar a = tape.leaf(av);
            DiffVar b = tape.leaf(bv);
            DiffVar loss = op(a, b);
            Gradients g = tape.backward(loss);
            auto f = [&op](const std::vector<double>& x) {
                Tape t2;
                DiffVar a2 = t2.leaf(x[0]);
                DiffVar b2 = t2.leaf(x[1]);
                return op(a2, b2).value();
            };
            std::vector<double> fd = oracles::central_fd(f, {av, bv}, 1e-6);
            CHECK(oracles::close_rel(g.at(a), fd[0], 1e-6, 1e-9));
            CHECK(oracles::close_rel(g.at(b), fd[1], 1e-6, 1e-9));
        };
        check([](const DiffVar& a, const DiffVar& b) { return a + b; });
        check([](const DiffVar& a, const DiffVar& b) { return a - b; });
        check([](const DiffVar& a, const DiffVar& b) { return a * b; });
        check([](const DiffVar& a, const DiffVar& b) { return a / b; });
        check([](const DiffVar& a, const DiffVar& b) { return sqrt(a * a + b * b); });
        check([](const DiffVar& a, const DiffVar& b) { return -a * 3.0 + 2.0 / b - (a - 1.5) * b; });
    }
}

TEST_CASE("linearity of gradients in the loss") {
    Tape tape;
    DiffVar x = tape.leaf(0.8);
    DiffVar y = tape.leaf(-1.2);
    DiffVar l1 = x * x * y;
    DiffVar l2 = sqrt(x * x + y * y);
    double a = 2.5, b = -0.75;
    Gradients g1 = tape.backward(l1);
    Gradients g2 = tape.backward(l2);
    Gradients gc = tape.backward(l1 * a + l2 * b);
    CHECK(gc.at(x) == doctest::Approx(a * g1.at(x) + b * g2.at(x)).epsilon(1e-14));
    CHECK(gc.at(y) == doctest::Approx(a * g1.at(y) + b * g2.at(y)).epsilon(1e-14));
}

TEST_CASE("sqrt at zero propagates the norm subgradient zero") {
    Tape tape;
    DiffVar x = tape.leaf(0.0);
    DiffVar loss = sqrt(x * x);
    Gradients g = tape.backward(loss);
    CHECK(g.at(x) == 0.0);
}

TEST_CASE("mixed-tape arithmetic is rejected") {
    Tape t1, t2;
    DiffVar a = t1.leaf(1.0);
    DiffVar b = t2.leaf(2.0);
    CHECK_THROWS_AS(a + b, SimError);
}

namespace {

// Small nonlinear iterative program exercising the segmented runner.
SegmentedProgram make_demo_program(int steps) {
    SegmentedProgram prog;
    prog.steps = steps;
    prog.init = [](std::span<const DiffVar> leaves) {
        return std::vector<DiffVar>{leaves[0] * 0.5 + leaves[1], leaves[1] * leaves[1] - 0.1};
    };
    prog.step = [](std::span<const DiffVar> state, std::span<const DiffVar> leaves) {
        DiffVar s0 = state[0] + state[1] * leaves[0] * 0.01;
        DiffVar s1 = state[1] - state[0] * leaves[1] * 0.02 + sqrt(state[0] * state[0] + 1.0) * 0.001;
        return std::vector<DiffVar>{s0, s1};
    };
    prog.loss = [](std::span<const DiffVar> state, std::span<const DiffVar> leaves) {
        return state[0] * state[0] + state[1] * state[1] * 0.5 + leaves[0] * 0.001;
    };
    return prog;
}

} // namespace

TEST_CASE("checkpoint policy: full unroll and per-iteration agree at 10 steps") {
    SegmentedProgram prog = make_demo_program(10);
    std::vector<double> leaves{1.3, -0.7};
    SegmentedResult full = run_full(prog, leaves);
    CheckpointPolicy policy = make_checkpoint_policy({true, 0});
    SegmentedResult ckpt = run_checkpointed(prog, leaves, policy);
    CHECK(full.loss == doctest::Approx(ckpt.loss).epsilon(1e-15));
    for (std::size_t i = 0; i < leaves.size(); ++i)
        CHECK(std::abs(full.gradients[i] - ckpt.gradients[i]) <= 1e-12 * std::max(1.0, std::abs(full.gradients[i])));
}

TEST_CASE("checkpoint policy: 200-step run matches unrolled within 1e-10") {
    SegmentedProgram prog = make_demo_program(200);
    std::vector<double> leaves{0.9, 0.4};
    SegmentedResult full = run_full(prog, leaves);
    SegmentedResult ckpt = run_checkpointed(prog, leaves, make_checkpoint_policy({true, 0}));
    for (std::size_t i = 0; i < leaves.size(); ++i)
        CHECK(std::abs(full.gradients[i] - ckpt.gradients[i]) <=
              1e-10 * std::max(1.0, std::abs(full.gradients[i])));
}

TEST_CASE("checkpoint policy: memory bound below one iteration errors") {
    SegmentedProgram prog = make_demo_program(3);
    std::vector<double> leaves{1.0, 1.0};
    CheckpointPolicy policy = make_checkpoint_policy({true, 4});
    CHECK_THROWS_AS(run_checkpointed(prog, leaves, policy), SimError);
}

TEST_CASE("gradients: at() rejects non-leaf lookups") {
    Tape tape;
    DiffVar a = tape.leaf(1.0);
    DiffVar mid = a * 2.0;
    Gradients g = tape.backward(mid);
    CHECK_THROWS_AS(g.at(mid), SimError);
}
