#pragma once

#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "ropesim/errors.hpp"

namespace ropesim {

class Tape;

/// Scalar value recorded on a Tape, or a plain constant when no tape is
/// attached. Arithmetic between variables on two different tapes is an error.
class DiffVar {
public:
    DiffVar() = default;
    DiffVar(double v) : value_(v) {} // NOLINT: implicit constants are the point

    double value() const { return value_; }
    int node() const { return node_; }
    Tape* tape() const { return tape_; }
    bool is_constant() const { return tape_ == nullptr; }

private:
    friend class Tape;
    DiffVar(double v, int node, Tape* tape) : value_(v), node_(node), tape_(tape) {}

    double value_ = 0.0;
    int node_ = -1;
    Tape* tape_ = nullptr;
};

inline double value_of(const DiffVar& x) { return x.value(); }

/// Gradient of a scalar loss with respect to every leaf registered on the
/// tape at backward time. Immutable once returned.
class Gradients {
public:
    double at(const DiffVar& leaf) const { return at_id(leaf.node()); }

    double at_id(int leaf_node) const {
        auto it = by_leaf_.find(leaf_node);
        if (it == by_leaf_.end()) throw SimError("Gradients: not a registered leaf");
        return it->second;
    }

    std::size_t size() const { return by_leaf_.size(); }

private:
    friend class Tape;
    std::unordered_map<int, double> by_leaf_;
};

/// Append-only record of the forward pass: each node stores up to two parent
/// indices with the local partial derivatives of the node value with respect
/// to each parent. Parents always precede children, so one reverse sweep
/// accumulates exact adjoints.
class Tape {
public:
    DiffVar leaf(double value) {
        if (finalized_) throw SimError("Tape: leaf() on finalized tape");
        int id = push(-1, 0.0, -1, 0.0);
        leaf_ids_.push_back(id);
        return DiffVar(value, id, this);
    }

    /// Reverse accumulation from `loss` to every registered leaf. The tape is
    /// left untouched; calling again reproduces the same gradients bit for
    /// bit. A constant loss yields all-zero gradients.
    Gradients backward(const DiffVar& loss) const {
        if (loss.tape() != nullptr && loss.tape() != this)
            throw SimError("Tape: loss is not on this tape");
        Gradients out;
        if (loss.tape() == nullptr) {
            for (int id : leaf_ids_) out.by_leaf_.emplace(id, 0.0);
            return out;
        }
        std::vector<double> adj(nodes_.size(), 0.0);
        adj[static_cast<std::size_t>(loss.node())] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            double a = adj[i];
            if (a == 0.0) continue;
            const Node& n = nodes_[i];
            if (n.p0 >= 0) adj[static_cast<std::size_t>(n.p0)] += n.d0 * a;
            if (n.p1 >= 0) adj[static_cast<std::size_t>(n.p1)] += n.d1 * a;
        }
        for (int id : leaf_ids_) out.by_leaf_.emplace(id, adj[static_cast<std::size_t>(id)]);
        return out;
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<int>& leaf_ids() const { return leaf_ids_; }

    void finalize() { finalized_ = true; }
    bool finalized() const { return finalized_; }

    void clear() {
        nodes_.clear();
        leaf_ids_.clear();
        finalized_ = false;
    }

    void reserve(std::size_t n) { nodes_.reserve(n); }

    // Recording primitives used by the DiffVar operators.
    DiffVar record1(double value, int p0, double d0) {
        if (finalized_) throw SimError("Tape: recording on finalized tape");
        return DiffVar(value, push(p0, d0, -1, 0.0), this);
    }
    DiffVar record2(double value, int p0, double d0, int p1, double d1) {
        if (finalized_) throw SimError("Tape: recording on finalized tape");
        return DiffVar(value, push(p0, d0, p1, d1), this);
    }

private:
    struct Node {
        int p0, p1;
        double d0, d1;
    };

    int push(int p0, double d0, int p1, double d1) {
        nodes_.push_back(Node{p0, p1, d0, d1});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    std::vector<int> leaf_ids_;
    bool finalized_ = false;
};

namespace detail {
inline Tape* common_tape(const DiffVar& a, const DiffVar& b) {
    if (a.tape() && b.tape() && a.tape() != b.tape())
        throw SimError("DiffVar: operands recorded on different tapes");
    return a.tape() ? a.tape() : b.tape();
}
} // namespace detail

inline DiffVar operator+(const DiffVar& a, const DiffVar& b) {
    Tape* t = detail::common_tape(a, b);
    double v = a.value() + b.value();
    if (!t) return DiffVar(v);
    if (a.is_constant()) return t->record1(v, b.node(), 1.0);
    if (b.is_constant()) return t->record1(v, a.node(), 1.0);
    return t->record2(v, a.node(), 1.0, b.node(), 1.0);
}

inline DiffVar operator-(const DiffVar& a, const DiffVar& b) {
    Tape* t = detail::common_tape(a, b);
    double v = a.value() - b.value();
    if (!t) return DiffVar(v);
    if (a.is_constant()) return t->record1(v, b.node(), -1.0);
    if (b.is_constant()) return t->record1(v, a.node(), 1.0);
    return t->record2(v, a.node(), 1.0, b.node(), -1.0);
}

inline DiffVar operator-(const DiffVar& a) {
    if (a.is_constant()) return DiffVar(-a.value());
    return a.tape()->record1(-a.value(), a.node(), -1.0);
}

inline DiffVar operator*(const DiffVar& a, const DiffVar& b) {
    Tape* t = detail::common_tape(a, b);
    double v = a.value() * b.value();
    if (!t) return DiffVar(v);
    if (a.is_constant()) return t->record1(v, b.node(), a.value());
    if (b.is_constant()) return t->record1(v, a.node(), b.value());
    return t->record2(v, a.node(), b.value(), b.node(), a.value());
}

inline DiffVar operator/(const DiffVar& a, const DiffVar& b) {
    Tape* t = detail::common_tape(a, b);
    double v = a.value() / b.value(); // same rounding as the plain-double path
    double inv = 1.0 / b.value();
    if (!t) return DiffVar(v);
    if (a.is_constant()) return t->record1(v, b.node(), -v * inv);
    if (b.is_constant()) return t->record1(v, a.node(), inv);
    return t->record2(v, a.node(), inv, b.node(), -v * inv);
}

inline DiffVar& operator+=(DiffVar& a, const DiffVar& b) { a = a + b; return a; }
inline DiffVar& operator-=(DiffVar& a, const DiffVar& b) { a = a - b; return a; }
inline DiffVar& operator*=(DiffVar& a, const DiffVar& b) { a = a * b; return a; }
inline DiffVar& operator/=(DiffVar& a, const DiffVar& b) { a = a / b; return a; }

/// sqrt with a norm-composition subgradient floor: results below 1e-15
/// propagate a zero partial, so norms of numerically-zero vectors (points
/// sitting on the matched geometry up to rounding) report the zero
/// subgradient instead of a rounding-noise unit direction. The floor sits
/// far below any finite-difference step, so smooth-region checks are
/// unaffected.
inline DiffVar sqrt(const DiffVar& a) {
    double r = std::sqrt(a.value());
    if (a.is_constant()) return DiffVar(r);
    double d = r < 1e-15 ? 0.0 : 0.5 / r;
    return a.tape()->record1(r, a.node(), d);
}

// Value comparisons: branches taken on values are frozen with respect to
// differentiation (the selected branch carries the gradient).
inline bool operator<(const DiffVar& a, const DiffVar& b) { return a.value() < b.value(); }
inline bool operator>(const DiffVar& a, const DiffVar& b) { return a.value() > b.value(); }
inline bool operator<=(const DiffVar& a, const DiffVar& b) { return a.value() <= b.value(); }
inline bool operator>=(const DiffVar& a, const DiffVar& b) { return a.value() >= b.value(); }

inline const DiffVar& min(const DiffVar& a, const DiffVar& b) { return b.value() < a.value() ? b : a; }
inline const DiffVar& max(const DiffVar& a, const DiffVar& b) { return b.value() > a.value() ? b : a; }

} // namespace ropesim
