#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ropesim/errors.hpp"
#include "ropesim/tape.hpp"

namespace ropesim {

/// Memory strategy for differentiating an iterative program.
/// FullUnroll records every iteration on one tape. PerIteration stores only
/// per-iteration value snapshots during the forward pass and re-records one
/// iteration at a time during the reverse pass; gradients agree with the
/// unrolled ones to rounding.
struct CheckpointConfig {
    bool per_iteration = false;
    std::size_t max_nodes_per_segment = 0; ///< 0 = unlimited; enforced per recorded segment
};

struct CheckpointPolicy {
    enum class Mode { FullUnroll, PerIteration };
    Mode mode = Mode::FullUnroll;
    std::size_t max_nodes_per_segment = 0;
};

inline CheckpointPolicy make_checkpoint_policy(const CheckpointConfig& config) {
    CheckpointPolicy p;
    p.mode = config.per_iteration ? CheckpointPolicy::Mode::PerIteration
                                  : CheckpointPolicy::Mode::FullUnroll;
    p.max_nodes_per_segment = config.max_nodes_per_segment;
    return p;
}

/// An iterative computation split into init / repeated step / final loss,
/// each a pure function of tape variables. The state is a flat scalar vector
/// of fixed width. Branches inside the callbacks must depend on values only,
/// so re-running a segment from the same inputs reproduces it exactly.
struct SegmentedProgram {
    std::function<std::vector<DiffVar>(std::span<const DiffVar> leaves)> init;
    std::function<std::vector<DiffVar>(std::span<const DiffVar> state, std::span<const DiffVar> leaves)> step;
    std::function<DiffVar(std::span<const DiffVar> state, std::span<const DiffVar> leaves)> loss;
    int steps = 0;
};

struct SegmentedResult {
    double loss = 0.0;
    std::vector<double> gradients; ///< d loss / d leaf, in leaf order
};

namespace detail {

inline std::vector<DiffVar> make_leaves(Tape& tape, std::span<const double> values) {
    std::vector<DiffVar> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(tape.leaf(v));
    return out;
}

inline void check_segment_budget(const Tape& tape, const CheckpointPolicy& policy) {
    if (policy.max_nodes_per_segment != 0 && tape.size() > policy.max_nodes_per_segment)
        throw SimError("checkpoint: memory bound is below the size of one iteration segment");
}

/// Scalarizes a vector-output segment so one backward() call produces the
/// vector-Jacobian product with the given seed.
inline DiffVar seeded_sum(std::span<const DiffVar> outputs, std::span<const double> seed) {
    DiffVar acc(0.0);
    for (std::size_t i = 0; i < outputs.size(); ++i) acc += outputs[i] * seed[i];
    return acc;
}

} // namespace detail

/// Records the whole program on a single tape and runs one backward pass.
inline SegmentedResult run_full(const SegmentedProgram& program, std::span<const double> leaf_values) {
    Tape tape;
    std::vector<DiffVar> leaves = detail::make_leaves(tape, leaf_values);
    std::vector<DiffVar> state = program.init(leaves);
    for (int t = 0; t < program.steps; ++t) {
        state = program.step(state, leaves);
        if (t == 0) // size the arena off the first step to avoid regrowth
            tape.reserve(tape.size() * static_cast<std::size_t>(program.steps + 2));
    }
    DiffVar loss = program.loss(state, leaves);
    Gradients g = tape.backward(loss);
    SegmentedResult out;
    out.loss = loss.value();
    out.gradients.reserve(leaves.size());
    for (const DiffVar& l : leaves) out.gradients.push_back(g.at(l));
    return out;
}

/// Forward pass keeps per-iteration value snapshots only; the reverse pass
/// re-records one segment at a time and chains vector-Jacobian products.
inline SegmentedResult run_checkpointed(const SegmentedProgram& program,
                                        std::span<const double> leaf_values,
                                        const CheckpointPolicy& policy) {
    if (policy.mode == CheckpointPolicy::Mode::FullUnroll)
        return run_full(program, leaf_values);

    const std::size_t n_leaves = leaf_values.size();
    std::vector<std::vector<double>> snapshots; // state values entering each step
    snapshots.reserve(static_cast<std::size_t>(program.steps) + 1);

    // Forward: init segment, then one discarded tape per step.
    {
        Tape tape;
        std::vector<DiffVar> leaves = detail::make_leaves(tape, leaf_values);
        std::vector<DiffVar> state = program.init(leaves);
        detail::check_segment_budget(tape, policy);
        std::vector<double> snap(state.size());
        for (std::size_t i = 0; i < state.size(); ++i) snap[i] = state[i].value();
        snapshots.push_back(std::move(snap));
    }
    for (int t = 0; t < program.steps; ++t) {
        Tape tape;
        std::vector<DiffVar> leaves = detail::make_leaves(tape, leaf_values);
        std::vector<DiffVar> state_in = detail::make_leaves(tape, snapshots.back());
        std::vector<DiffVar> state_out = program.step(state_in, leaves);
        detail::check_segment_budget(tape, policy);
        std::vector<double> snap(state_out.size());
        for (std::size_t i = 0; i < state_out.size(); ++i) snap[i] = state_out[i].value();
        snapshots.push_back(std::move(snap));
    }

    SegmentedResult out;
    out.gradients.assign(n_leaves, 0.0);
    std::vector<double> state_adj; // d loss / d state at the current boundary

    // Loss segment.
    {
        Tape tape;
        std::vector<DiffVar> leaves = detail::make_leaves(tape, leaf_values);
        std::vector<DiffVar> state = detail::make_leaves(tape, snapshots.back());
        DiffVar loss = program.loss(state, leaves);
        detail::check_segment_budget(tape, policy);
        Gradients g = tape.backward(loss);
        out.loss = loss.value();
        for (std::size_t i = 0; i < n_leaves; ++i) out.gradients[i] += g.at(leaves[i]);
        state_adj.resize(state.size());
        for (std::size_t i = 0; i < state.size(); ++i) state_adj[i] = g.at(state[i]);
    }

    // Step segments in reverse.
    for (int t = program.steps - 1; t >= 0; --t) {
        Tape tape;
        std::vector<DiffVar> leaves = detail::make_leaves(tape, leaf_values);
        std::vector<DiffVar> state_in = detail::make_leaves(tape, snapshots[static_cast<std::size_t>(t)]);
        std::vector<DiffVar> state_out = program.step(state_in, leaves);
        DiffVar seeded = detail::seeded_sum(state_out, state_adj);
        Gradients g = tape.backward(seeded);
        for (std::size_t i = 0; i < n_leaves; ++i) out.gradients[i] += g.at(leaves[i]);
        for (std::size_t i = 0; i < state_in.size(); ++i) state_adj[i] = g.at(state_in[i]);
    }

    // Init segment.
    {
        Tape tape;
        std::vector<DiffVar> leaves = detail::make_leaves(tape, leaf_values);
        std::vector<DiffVar> state = program.init(leaves);
        DiffVar seeded = detail::seeded_sum(state, state_adj);
        Gradients g = tape.backward(seeded);
        for (std::size_t i = 0; i < n_leaves; ++i) out.gradients[i] += g.at(leaves[i]);
    }
    return out;
}

inline SegmentedResult run_segmented(const SegmentedProgram& program,
                                     std::span<const double> leaf_values,
                                     const CheckpointPolicy& policy) {
    return policy.mode == CheckpointPolicy::Mode::FullUnroll ? run_full(program, leaf_values)
                                                             : run_checkpointed(program, leaf_values, policy);
}

} // namespace ropesim
