#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ropesim/constraints.hpp"
#include "ropesim/rope_state.hpp"

namespace ropesim {

/// How the distance family is solved each iteration: averaged Jacobi
/// projection folded into the weighted update, or an exact tridiagonal solve
/// applied after the other families.
enum class DistanceMode { Jacobi, Thomas };

/// Stiffness/relaxation weights and the stepping setup. The eta fields carry
/// the scalar type so they can be optimization leaves; everything else is a
/// plain value. dt only enters the gravity prediction, so with quasi-static
/// stepping only the product dt^2 * eta_x_G matters.
template <class T>
struct SolverParamsT {
    T eta_x_S{1.0};
    T eta_q_S{1.0};
    T eta_q_B{1.0};
    T eta_x_D{1.0};
    T eta_x_G{0.024};
    T eta_sor{1.0};
    Vec3 gravity{0.0, 0.0, -9.8};
    double dt = 1.0;
    int iterations = 50;
    DistanceMode distance_mode = DistanceMode::Jacobi;
    int thomas_outer_iterations = 4;
    double thomas_tolerance = 1e-9;
    double alpha_shear = 0.0;
    double alpha_bend = 0.0;
    double alpha_distance = 0.0;
    bool accumulate_lambda = false;
    DistanceGradientMode distance_gradient_mode = DistanceGradientMode::CurrentLength;

    void validate() const {
        if (iterations < 1) throw ConfigError("solver: iterations must be >= 1");
        if (dt <= 0.0) throw ConfigError("solver: dt must be positive");
        if (thomas_outer_iterations < 1) throw ConfigError("solver: thomas_outer_iterations must be >= 1");
        if (alpha_shear < 0.0 || alpha_bend < 0.0 || alpha_distance < 0.0)
            throw ConfigError("solver: compliance alpha must be >= 0");
        for (double v : {value_of(eta_x_S), value_of(eta_q_S), value_of(eta_q_B), value_of(eta_x_D),
                         value_of(eta_x_G), value_of(eta_sor)})
            if (!std::isfinite(v)) throw ConfigError("solver: eta values must be finite");
    }
};

using SolverParams = SolverParamsT<double>;

template <class T>
SolverParams values(const SolverParamsT<T>& p) {
    SolverParams out;
    out.eta_x_S = value_of(p.eta_x_S);
    out.eta_q_S = value_of(p.eta_q_S);
    out.eta_q_B = value_of(p.eta_q_B);
    out.eta_x_D = value_of(p.eta_x_D);
    out.eta_x_G = value_of(p.eta_x_G);
    out.eta_sor = value_of(p.eta_sor);
    out.gravity = p.gravity;
    out.dt = p.dt;
    out.iterations = p.iterations;
    out.distance_mode = p.distance_mode;
    out.thomas_outer_iterations = p.thomas_outer_iterations;
    out.thomas_tolerance = p.thomas_tolerance;
    out.alpha_shear = p.alpha_shear;
    out.alpha_bend = p.alpha_bend;
    out.alpha_distance = p.alpha_distance;
    out.accumulate_lambda = p.accumulate_lambda;
    out.distance_gradient_mode = p.distance_gradient_mode;
    return out;
}

/// Residual maxima (vector norms per constraint instance) and rope length at
/// the end of one iteration.
struct IterationStats {
    double max_shear = 0.0;
    double max_bend = 0.0;
    double max_distance = 0.0;
    double length = 0.0;
};

struct StepReport {
    std::vector<IterationStats> per_iteration;
    double final_length = 0.0;
    int iteration_count = 0;
};

/// Accumulated multipliers per constraint instance, reset at solve start.
/// Only consulted when params.accumulate_lambda is set.
template <class T>
struct LambdaSetT {
    std::vector<Vec3T<T>> shear;
    std::vector<Vec3T<T>> bend;
    std::vector<T> distance;

    static LambdaSetT zeros(int particle_count) {
        LambdaSetT ls;
        ls.shear.assign(static_cast<std::size_t>(particle_count - 1), Vec3T<T>{T(0), T(0), T(0)});
        ls.bend.assign(static_cast<std::size_t>(std::max(0, particle_count - 2)), Vec3T<T>{T(0), T(0), T(0)});
        ls.distance.assign(static_cast<std::size_t>(particle_count - 1), T(0));
        return ls;
    }
};

/// One external-force prediction: x += 1/2 g dt^2 eta_x_G on movable
/// particles. Fixed and controlled particles (inverse mass 0) stay put.
template <class T>
void gravity_predict(RopeStateT<T>& s, const SolverParamsT<T>& p) {
    T scale = p.eta_x_G * (0.5 * p.dt * p.dt);
    Vec3T<T> kick = to_vec3t<T>(p.gravity) * scale;
    for (std::size_t i = 0; i < s.x.size(); ++i)
        if (s.inv_mass[i] > 0.0) s.x[i] += kick;
}

/// Exact distance solve for the chain: assembles the tridiagonal system
/// (grad C W grad^T C) dLambda = -C with unit segment directions, eliminates
/// by the Thomas algorithm, applies position deltas, and repeats until the
/// worst residual is at or below `tolerance` or `max_outer` passes ran. The
/// linearization is exact for collinear chains; bent chains take a few
/// passes. Returns the number of passes executed.
template <class T>
int thomas_distance_solve(RopeStateT<T>& s, double tolerance, int max_outer) {
    const int m = s.segment_count();
    const std::vector<double>& w = s.inv_mass;
    bool all_fixed = std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; });

    std::vector<Vec3T<T>> dir(static_cast<std::size_t>(m));
    std::vector<T> residual(static_cast<std::size_t>(m));
    std::vector<T> diag(static_cast<std::size_t>(m)), upper(static_cast<std::size_t>(m)),
        rhs(static_cast<std::size_t>(m)), dl(static_cast<std::size_t>(m));

    int pass = 0;
    for (; pass < max_outer; ++pass) {
        double max_c = 0.0;
        for (int i = 0; i < m; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            Vec3T<T> d = s.x[k + 1] - s.x[k];
            T len = norm(d);
            if (value_of(len) < 1e-12)
                throw SimError("thomas: coincident particles at segment " + std::to_string(i));
            dir[k] = d / len;
            residual[k] = len - s.rest_segment_length(i);
            max_c = std::max(max_c, std::abs(value_of(residual[k])));
        }
        if (max_c <= tolerance) break;
        if (all_fixed)
            throw SimError("thomas: all particles fixed but distance residuals are nonzero");

        for (int i = 0; i < m; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            diag[k] = T(w[k] + w[k + 1]);
            rhs[k] = -residual[k];
            if (i + 1 < m) upper[k] = dot(dir[k], dir[k + 1]) * (-w[k + 1]);
        }

        // Forward elimination; the lower band mirrors the upper one.
        if (value_of(diag[0]) == 0.0) throw SimError("thomas: zero pivot at constraint 0");
        std::vector<T>& cp = diag; // reuse as pivot storage
        for (int i = 1; i < m; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            T factor = upper[k - 1] / cp[k - 1];
            cp[k] = cp[k] - factor * upper[k - 1];
            rhs[k] = rhs[k] - factor * rhs[k - 1];
            if (value_of(cp[k]) == 0.0)
                throw SimError("thomas: zero pivot at constraint " + std::to_string(i));
        }
        dl[static_cast<std::size_t>(m - 1)] = rhs[static_cast<std::size_t>(m - 1)] / cp[static_cast<std::size_t>(m - 1)];
        for (int i = m - 2; i >= 0; --i) {
            const std::size_t k = static_cast<std::size_t>(i);
            dl[k] = (rhs[k] - upper[k] * dl[k + 1]) / cp[k];
        }

        for (int j = 0; j <= m; ++j) {
            const std::size_t k = static_cast<std::size_t>(j);
            if (w[k] == 0.0) continue;
            Vec3T<T> delta{T(0), T(0), T(0)};
            if (j > 0) delta += dir[k - 1] * dl[k - 1];
            if (j < m) delta -= dir[k] * dl[k];
            s.x[k] += delta * w[k];
        }
    }
    return pass;
}

namespace detail {

/// Static Jacobi averaging counts: number of constraint instances of a chain
/// family incident to each slot.
inline std::vector<double> incidence_counts(int slots, int constraints) {
    std::vector<double> counts(static_cast<std::size_t>(slots), 0.0);
    for (int i = 0; i < constraints; ++i) {
        counts[static_cast<std::size_t>(i)] += 1.0;
        counts[static_cast<std::size_t>(i) + 1] += 1.0;
    }
    return counts;
}

template <class T>
IterationStats measure(const RopeStateT<T>& s) {
    RopeState v = values(s);
    IterationStats st;
    for (int i = 0; i < v.segment_count(); ++i) {
        st.max_shear = std::max(st.max_shear, norm(shear_stretch_residual(v, i)));
        st.max_distance = std::max(st.max_distance, std::abs(distance_residual(v, i)));
        st.length += norm(v.x[static_cast<std::size_t>(i) + 1] - v.x[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i + 2 < v.particle_count(); ++i)
        st.max_bend = std::max(st.max_bend, norm(bend_twist_residual(v, i)));
    return st;
}

} // namespace detail

/// One constraint-solving iteration: Jacobi-averaged candidate deltas for
/// every family from the frozen state, then the weighted update
///   x += (dxS * eta_x_S + dxD * eta_x_D) / 2 * eta_sor
///   q += (dqS * eta_q_S + dqB * eta_q_B) / 2 * eta_sor, renormalized.
/// In Thomas mode the distance term is dropped from the average and the exact
/// solve runs after the update.
template <class T>
void solver_iteration(RopeStateT<T>& s, const SolverParamsT<T>& p, LambdaSetT<T>* lambdas) {
    const int k = s.particle_count();
    const int m = s.segment_count();

    std::vector<Vec3T<T>> dx_shear(static_cast<std::size_t>(k), Vec3T<T>{T(0), T(0), T(0)});
    std::vector<Vec3T<T>> dx_dist(static_cast<std::size_t>(k), Vec3T<T>{T(0), T(0), T(0)});
    std::vector<QuatT<T>> dq_shear(static_cast<std::size_t>(m), QuatT<T>{T(0), T(0), T(0), T(0)});
    std::vector<QuatT<T>> dq_bend(static_cast<std::size_t>(m), QuatT<T>{T(0), T(0), T(0), T(0)});

    for (int i = 0; i < m; ++i) {
        const std::size_t j = static_cast<std::size_t>(i);
        Vec3T<T>* acc = lambdas ? &lambdas->shear[j] : nullptr;
        ShearStretchDeltas<T> d = project_shear_stretch(s, i, p.alpha_shear, acc);
        if (acc) *acc += d.dlambda;
        dx_shear[j] += d.dx_i;
        dx_shear[j + 1] += d.dx_i1;
        dq_shear[j] = d.dq_i; // exactly one shear constraint per frame slot
    }
    for (int i = 0; i + 1 < m; ++i) {
        const std::size_t j = static_cast<std::size_t>(i);
        Vec3T<T>* acc = lambdas ? &lambdas->bend[j] : nullptr;
        BendTwistDeltas<T> d = project_bend_twist(s, i, p.alpha_bend, acc);
        if (acc) *acc += d.dlambda;
        dq_bend[j] += d.dq_i;
        dq_bend[j + 1] += d.dq_i1;
    }
    if (p.distance_mode == DistanceMode::Jacobi) {
        for (int i = 0; i < m; ++i) {
            const std::size_t j = static_cast<std::size_t>(i);
            T* acc = lambdas ? &lambdas->distance[j] : nullptr;
            DistanceDeltas<T> d = project_distance(s, i, p.alpha_distance, acc, p.distance_gradient_mode);
            if (acc) *acc += d.dlambda;
            dx_dist[j] += d.dx_i;
            dx_dist[j + 1] += d.dx_i1;
        }
    }

    const std::vector<double> cnt_x = detail::incidence_counts(k, m);
    const std::vector<double> cnt_q = detail::incidence_counts(m, m - 1);

    for (int j = 0; j < k; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        Vec3T<T> avg_s = dx_shear[u] / cnt_x[u];
        Vec3T<T> avg_d = dx_dist[u] / cnt_x[u];
        s.x[u] += (avg_s * p.eta_x_S + avg_d * p.eta_x_D) * 0.5 * p.eta_sor;
    }
    for (int j = 0; j < m; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        QuatT<T> avg_b = cnt_q[u] > 0.0 ? dq_bend[u] * (1.0 / cnt_q[u]) : dq_bend[u];
        QuatT<T> step = (dq_shear[u] * p.eta_q_S + avg_b * p.eta_q_B) * T(0.5) * p.eta_sor;
        s.q[u] = normalized(s.q[u] + step);
    }

    if (p.distance_mode == DistanceMode::Thomas)
        thomas_distance_solve(s, p.thomas_tolerance, p.thomas_outer_iterations);
}

/// Non-mutating single Jacobi pass, for inspection and tests.
template <class T>
std::pair<RopeStateT<T>, IterationStats> jacobi_iteration(const RopeStateT<T>& s, const SolverParamsT<T>& p) {
    RopeStateT<T> out = s;
    SolverParamsT<T> jp = p;
    jp.distance_mode = DistanceMode::Jacobi;
    solver_iteration(out, jp, static_cast<LambdaSetT<T>*>(nullptr));
    return {out, detail::measure(out)};
}

/// Algorithm: one gravity prediction, then `iterations` constraint-solving
/// passes. Deterministic; records on the active tape when T is a tape
/// variable. Residual maxima are measured after each iteration.
template <class T>
std::pair<RopeStateT<T>, StepReport> simulate_quasi_static(const RopeStateT<T>& initial,
                                                           const SolverParamsT<T>& params) {
    initial.validate();
    params.validate();

    RopeStateT<T> s = initial;
    gravity_predict(s, params);

    LambdaSetT<T> lambdas;
    LambdaSetT<T>* lam = nullptr;
    if (params.accumulate_lambda) {
        lambdas = LambdaSetT<T>::zeros(s.particle_count());
        lam = &lambdas;
    }

    StepReport report;
    report.per_iteration.reserve(static_cast<std::size_t>(params.iterations));
    for (int it = 0; it < params.iterations; ++it) {
        solver_iteration(s, params, lam);
        report.per_iteration.push_back(detail::measure(s));
    }
    report.iteration_count = params.iterations;
    report.final_length = report.per_iteration.back().length;
    return {std::move(s), std::move(report)};
}

} // namespace ropesim
