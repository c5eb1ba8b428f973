/* Seminorm evaluation for a fixed image: isotropic total variation and
 * the PDE-constrained second-order generalized variation
 *
 *   pgv2(u) = inf_v  alpha0 * sum |grad u - v|_2 + alpha1 * sum |B v|_F.
 *
 * The inner minimization reuses the Level-2 primal-dual kernel with the
 * u-block frozen, so both problems share one adjoint pair, one step-size
 * rule and one residual definition. The infimum is attained by a unique
 * field v; the returned v is the primal iterate at exit.
 */
#pragma once

#include <cmath>
#include <vector>

#include "pgv/core.hpp"
#include "pgv/diffops.hpp"
#include "pgv/solver.hpp"

namespace pgv {

/// Isotropic discrete total variation: sum over pixels of |grad u|_2.
inline double tv(const ScalarImage& u) {
    validate_image(u);
    const int h = u.height(), w = u.width();
    std::vector<double> g0(u.size()), g1(u.size());
    detail::grad_into(u.data(), h, w, g0.data(), g1.data());
    double acc = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) acc += std::sqrt(g0[i] * g0[i] + g1[i] * g1[i]);
    return acc;
}

struct Pgv2Result {
    double value = 0.0;
    VectorField2 v;
    SolveDiagnostics diag;
};

/// Evaluates the second-order generalized-variation seminorm of u for the
/// given weights and operator. Always bounded by alpha0 * tv(u), since
/// v = 0 is a feasible competitor.
inline Pgv2Result pgv2(const ScalarImage& u, const Alpha& alpha, const OperatorCoefficients& coeffs,
                       const SolverConfig& cfg) {
    SolveResult r = detail::primal_dual_solve(u, alpha, coeffs, cfg, true, nullptr);

    VectorField2 residual = grad(u);
    for (int k = 0; k < 2; ++k) {
        auto rr = residual.component(k);
        auto vv = r.v.component(k);
        for (std::size_t i = 0; i < rr.size(); ++i) rr[i] -= vv[i];
    }
    double first = 0.0;
    {
        auto c0 = residual.component(0);
        auto c1 = residual.component(1);
        for (std::size_t i = 0; i < c0.size(); ++i) {
            first += std::sqrt(c0[i] * c0[i] + c1[i] * c1[i]);
        }
    }
    MatrixField2 bv = apply_operator(coeffs, r.v);
    double second = 0.0;
    {
        auto a = bv.entry(0, 0);
        auto b = bv.entry(0, 1);
        auto c = bv.entry(1, 0);
        auto d = bv.entry(1, 1);
        for (std::size_t i = 0; i < a.size(); ++i) {
            second += std::sqrt(a[i] * a[i] + b[i] * b[i] + c[i] * c[i] + d[i] * d[i]);
        }
    }

    Pgv2Result out{alpha.alpha0 * first + alpha.alpha1 * second, std::move(r.v),
                   std::move(r.diag)};
    return out;
}

/// Evaluates pgv2 along a sequence of skew parameters; utility for
/// operator-continuity experiments.
inline std::vector<double> pgv2_continuity_probe(const ScalarImage& u, const Alpha& alpha,
                                                 const std::vector<SkewParams>& params_seq,
                                                 const SolverConfig& cfg) {
    if (params_seq.empty()) {
        throw InvalidParameter("pgv2_continuity_probe: parameter sequence is empty");
    }
    std::vector<double> values;
    values.reserve(params_seq.size());
    for (const SkewParams& sp : params_seq) {
        values.push_back(pgv2(u, alpha, skewed_gradient_operator(sp), cfg).value);
    }
    return values;
}

} // namespace pgv
