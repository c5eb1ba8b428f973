/* First-order primal-dual solver for the Level-2 reconstruction problem
 *
 *   min_{u,v}  sum (u - u_eta)^2 + alpha0 * sum |grad u - v|_2
 *                                + alpha1 * sum |B v|_F
 *
 * solved as the saddle-point problem
 *
 *   min_{u,v} max_{|p|_2 <= alpha0, |q|_F <= alpha1}
 *       <grad u - v, p> + <B v, q> + sum (u - u_eta)^2.
 *
 * Iteration: primal step with the current duals, extrapolation of the
 * primal variables, projected dual ascent. Steps tau = sigma =
 * step_safety / L with L an upper bound on the norm of the stacked map
 * K(u,v) = (grad u - v, B v), so tau * sigma * |K|^2 < 1.
 *
 * Stopping: relative combined residual
 *   r = (|P| + |D|) / (1 + |x| + |y|)
 * with P and D the one-step primal and dual optimality residuals,
 * checked every check_interval iterations.
 *
 * The same kernel solves the seminorm's inner minimization (u frozen);
 * see seminorm.hpp. The hot passes below are peeled at the grid border
 * so the interior loops stay branch-free; ball projections use
 * radius / max(norm, radius), which is bit-identical to the branchy
 * form (x / x == 1.0 exactly).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "pgv/core.hpp"
#include "pgv/diffops.hpp"

namespace pgv {

/// Full saddle-point iterate, exposed to iteration observers.
/// After every dual step, |p|_2 <= alpha0 and |q|_F <= alpha1 pointwise.
struct SaddleState {
    ScalarImage u;
    VectorField2 v;
    VectorField2 p;
    MatrixField2 q;
    ScalarImage u_bar;
    VectorField2 v_bar;
};

struct SolveDiagnostics {
    int iterations = 0;
    double final_residual = 0.0;
    std::vector<double> objective_history; // sampled every check_interval
    bool converged = false;
};

struct SolveResult {
    ScalarImage u;
    VectorField2 v;
    SolveDiagnostics diag;
};

/// Optional extras for a solve: explicit dual starting points, a
/// per-iteration observer, a precomputed operator-norm bound, and
/// capture of the final dual variables (for warm starts).
struct SolveHooks {
    const VectorField2* initial_p = nullptr;
    const MatrixField2* initial_q = nullptr;
    std::function<void(const SaddleState&, int)> on_iteration;
    double operator_norm_bound = 0.0; // used when > 0
    VectorField2* final_p = nullptr;  // filled at exit when non-null
    MatrixField2* final_q = nullptr;
};

/// Per-pixel Euclidean projection onto the ball of the given radius.
inline VectorField2 project_ball_2(const VectorField2& field, double radius) {
    if (!(radius > 0.0)) throw InvalidParameter("project_ball_2: radius must be positive");
    VectorField2 out = field;
    auto c0 = out.component(0);
    auto c1 = out.component(1);
    for (std::size_t i = 0; i < c0.size(); ++i) {
        const double nrm = std::sqrt(c0[i] * c0[i] + c1[i] * c1[i]);
        const double scale = radius / std::max(nrm, radius);
        c0[i] *= scale;
        c1[i] *= scale;
    }
    return out;
}

/// Per-pixel Frobenius projection onto the ball of the given radius.
inline MatrixField2 project_ball_frobenius(const MatrixField2& field, double radius) {
    if (!(radius > 0.0)) throw InvalidParameter("project_ball_frobenius: radius must be positive");
    MatrixField2 out = field;
    auto a = out.entry(0, 0);
    auto b = out.entry(0, 1);
    auto c = out.entry(1, 0);
    auto d = out.entry(1, 1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double nrm = std::sqrt(a[i] * a[i] + b[i] * b[i] + c[i] * c[i] + d[i] * d[i]);
        const double scale = radius / std::max(nrm, radius);
        a[i] *= scale;
        b[i] *= scale;
        c[i] *= scale;
        d[i] *= scale;
    }
    return out;
}

/// Proximal map of tau * |. - u_eta|^2 (no 1/2 factor in the square):
/// pointwise (u + 2 tau u_eta) / (1 + 2 tau).
inline ScalarImage prox_data(const ScalarImage& u, const ScalarImage& u_eta, double tau) {
    if (u.height() != u_eta.height() || u.width() != u_eta.width()) {
        throw DimensionMismatch("prox_data: dimensions differ");
    }
    if (!(tau > 0.0)) throw InvalidParameter("prox_data: tau must be positive");
    ScalarImage out = u;
    auto vo = out.values();
    auto ve = u_eta.values();
    const double denom = 1.0 + 2.0 * tau;
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = (vo[i] + 2.0 * tau * ve[i]) / denom;
    return out;
}

/// Upper bound on the spectral norm of K(u,v) = (grad u - v, B v) on an
/// h x w grid: power iteration on K^T K (200 iterations, seeded random
/// start) times a 1.01 safety factor.
inline double estimate_operator_norm(const OperatorCoefficients& coeffs, int height, int width) {
    if (height < 2 || width < 2) {
        throw DimensionError("estimate_operator_norm: grid must be at least 2x2");
    }
    const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);

    std::vector<double> u(n), v0(n), v1(n);
    std::vector<double> yp0(n), yp1(n), q00(n), q01(n), q10(n), q11(n);
    std::vector<double> wu(n), wv0(n), wv1(n), s1(n), s2(n);

    // explicit word-to-uniform mapping: bit-identical across standard
    // libraries, unlike uniform_real_distribution
    std::mt19937_64 rng(0x70677631u);
    auto unif = [&rng]() {
        return static_cast<double>(rng() >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    };
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = unif();
        v0[i] = unif();
        v1[i] = unif();
    }

    double rayleigh = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        double nrm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) nrm2 += u[i] * u[i] + v0[i] * v0[i] + v1[i] * v1[i];
        const double inv = 1.0 / std::sqrt(nrm2);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] *= inv;
            v0[i] *= inv;
            v1[i] *= inv;
        }

        // y = K x
        detail::grad_into(u.data(), height, width, yp0.data(), yp1.data());
        for (std::size_t i = 0; i < n; ++i) {
            yp0[i] -= v0[i];
            yp1[i] -= v1[i];
        }
        detail::apply_op_into(coeffs, v0.data(), v1.data(), height, width, q00.data(), q01.data(),
                              q10.data(), q11.data());

        // w = K^T y
        detail::div_into(yp0.data(), yp1.data(), height, width, wu.data());
        for (std::size_t i = 0; i < n; ++i) wu[i] = -wu[i];
        detail::apply_op_adjoint_into(coeffs, q00.data(), q01.data(), q10.data(), q11.data(),
                                      height, width, wv0.data(), wv1.data(), s1.data(), s2.data());
        for (std::size_t i = 0; i < n; ++i) {
            wv0[i] -= yp0[i];
            wv1[i] -= yp1[i];
        }

        rayleigh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            rayleigh += u[i] * wu[i] + v0[i] * wv0[i] + v1[i] * wv1[i];
        }
        u.swap(wu);
        v0.swap(wv0);
        v1.swap(wv1);
    }
    return std::sqrt(std::max(rayleigh, 0.0)) * 1.01;
}

namespace detail {

inline double sum_sq(const std::vector<double>& x) {
    double acc = 0.0;
    for (double e : x) acc += e * e;
    return acc;
}

// The pass kernels below take __restrict pointers and keep the inner
// column loops free of branches (borders peeled) so they auto-vectorize;
// the IEEE sqrt/div in the projections are the per-iteration bottleneck.

// u <- prox_data(u + tau div p), ubar <- 2 u_new - u_old, fused.
inline void primal_u_pass(const double* __restrict p0, const double* __restrict p1,
                          const double* __restrict u_eta, double tau, double prox_denom, int h,
                          int w, double* __restrict u, double* __restrict ub) {
    for (int i = 0; i < h; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * w;
        const bool up = i > 0;
        const bool down = i < h - 1;
        const double twotau = 2.0 * tau;
        auto update = [&](std::size_t px, double d) {
            const double old = u[px];
            const double un = (old + tau * d + twotau * u_eta[px]) * prox_denom;
            u[px] = un;
            ub[px] = 2.0 * un - old;
        };
        {
            double d = p1[row];
            if (down) d += p0[row];
            if (up) d -= p0[row - w];
            update(row, d);
        }
        if (up && down) {
            for (int j = 1; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d = p0[px] - p0[px - w] + p1[px] - p1[px - 1];
                const double old = u[px];
                const double un = (old + tau * d + twotau * u_eta[px]) * prox_denom;
                u[px] = un;
                ub[px] = 2.0 * un - old;
            }
        } else if (down) {
            for (int j = 1; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d = p0[px] + p1[px] - p1[px - 1];
                const double old = u[px];
                const double un = (old + tau * d + twotau * u_eta[px]) * prox_denom;
                u[px] = un;
                ub[px] = 2.0 * un - old;
            }
        } else {
            for (int j = 1; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d = -p0[px - w] + p1[px] - p1[px - 1];
                const double old = u[px];
                const double un = (old + tau * d + twotau * u_eta[px]) * prox_denom;
                u[px] = un;
                ub[px] = 2.0 * un - old;
            }
        }
        {
            const std::size_t px = row + w - 1;
            double d = -p1[px - 1];
            if (down) d += p0[px];
            if (up) d -= p0[px - w];
            update(px, d);
        }
    }
}

// v_k <- v_k + tau p_k + tau div(w_k), vbar_k <- 2 v_new - v_old, fused.
inline void primal_v_pass(const double* __restrict f1, const double* __restrict f2,
                          const double* __restrict pk, double tau, int h, int w,
                          double* __restrict vk, double* __restrict vbk) {
    for (int i = 0; i < h; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * w;
        const bool up = i > 0;
        const bool down = i < h - 1;
        auto update = [&](std::size_t px, double d) {
            const double old = vk[px];
            const double nv = old + tau * (pk[px] + d);
            vk[px] = nv;
            vbk[px] = 2.0 * nv - old;
        };
        {
            double d = f2[row];
            if (down) d += f1[row];
            if (up) d -= f1[row - w];
            update(row, d);
        }
        if (up && down) {
            for (int j = 1; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d = f1[px] - f1[px - w] + f2[px] - f2[px - 1];
                const double old = vk[px];
                const double nv = old + tau * (pk[px] + d);
                vk[px] = nv;
                vbk[px] = 2.0 * nv - old;
            }
        } else if (down) {
            for (int j = 1; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d = f1[px] + f2[px] - f2[px - 1];
                const double old = vk[px];
                const double nv = old + tau * (pk[px] + d);
                vk[px] = nv;
                vbk[px] = 2.0 * nv - old;
            }
        } else {
            for (int j = 1; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d = -f1[px - w] + f2[px] - f2[px - 1];
                const double old = vk[px];
                const double nv = old + tau * (pk[px] + d);
                vk[px] = nv;
                vbk[px] = 2.0 * nv - old;
            }
        }
        {
            const std::size_t px = row + w - 1;
            double d = -f2[px - 1];
            if (down) d += f1[px];
            if (up) d -= f1[px - w];
            update(px, d);
        }
    }
}

// w_k^i = sum_{rc} b[i]_{rck} q_{rc}, the coefficient contraction feeding
// the adjoint divergence.
inline void contract_q_pass(const OperatorCoefficients& c, int k, const double* __restrict q00,
                            const double* __restrict q01, const double* __restrict q10,
                            const double* __restrict q11, std::size_t n, double* __restrict w1,
                            double* __restrict w2) {
    const double a00 = c.b1[0][0][k], a01 = c.b1[0][1][k], a10 = c.b1[1][0][k],
                 a11 = c.b1[1][1][k];
    const double b00 = c.b2[0][0][k], b01 = c.b2[0][1][k], b10 = c.b2[1][0][k],
                 b11 = c.b2[1][1][k];
    for (std::size_t p = 0; p < n; ++p) {
        w1[p] = a00 * q00[p] + a01 * q01[p] + a10 * q10[p] + a11 * q11[p];
        w2[p] = b00 * q00[p] + b01 * q01[p] + b10 * q10[p] + b11 * q11[p];
    }
}

// p <- proj_{alpha0}(p + sigma (grad ubar - vbar)), border peeled.
inline void dual_p_live_pass(const double* __restrict ub, const double* __restrict vb0,
                             const double* __restrict vb1, double sigma, double a0, int h, int w,
                             double* __restrict p0, double* __restrict p1) {
    for (int i = 0; i < h; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * w;
        const bool down = i < h - 1;
        if (down) {
            for (int j = 0; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double t0 = p0[px] + sigma * (ub[px + w] - ub[px] - vb0[px]);
                const double t1 = p1[px] + sigma * (ub[px + 1] - ub[px] - vb1[px]);
                const double nrm = std::sqrt(t0 * t0 + t1 * t1);
                const double scale = a0 / std::max(nrm, a0);
                p0[px] = t0 * scale;
                p1[px] = t1 * scale;
            }
        } else {
            for (int j = 0; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double t0 = p0[px] - sigma * vb0[px];
                const double t1 = p1[px] + sigma * (ub[px + 1] - ub[px] - vb1[px]);
                const double nrm = std::sqrt(t0 * t0 + t1 * t1);
                const double scale = a0 / std::max(nrm, a0);
                p0[px] = t0 * scale;
                p1[px] = t1 * scale;
            }
        }
        {
            const std::size_t px = row + w - 1;
            const double g0 = down ? ub[px + w] - ub[px] : 0.0;
            const double t0 = p0[px] + sigma * (g0 - vb0[px]);
            const double t1 = p1[px] - sigma * vb1[px];
            const double nrm = std::sqrt(t0 * t0 + t1 * t1);
            const double scale = a0 / std::max(nrm, a0);
            p0[px] = t0 * scale;
            p1[px] = t1 * scale;
        }
    }
}

// Frozen-u variant: grad u is precomputed, the pass is a plain plane sweep.
inline void dual_p_frozen_pass(const double* __restrict gu0, const double* __restrict gu1,
                               const double* __restrict vb0, const double* __restrict vb1,
                               double sigma, double a0, std::size_t n, double* __restrict p0,
                               double* __restrict p1) {
    for (std::size_t px = 0; px < n; ++px) {
        const double t0 = p0[px] + sigma * (gu0[px] - vb0[px]);
        const double t1 = p1[px] + sigma * (gu1[px] - vb1[px]);
        const double nrm = std::sqrt(t0 * t0 + t1 * t1);
        const double scale = a0 / std::max(nrm, a0);
        p0[px] = t0 * scale;
        p1[px] = t1 * scale;
    }
}

// q <- proj_{alpha1}(q + sigma B vbar), border peeled.
inline void dual_q_pass(const OperatorCoefficients& c, const double* __restrict v0,
                        const double* __restrict v1, double sigma, double a1, int h, int w,
                        double* __restrict q00, double* __restrict q01, double* __restrict q10,
                        double* __restrict q11) {
    const double c1_00_0 = c.b1[0][0][0], c1_00_1 = c.b1[0][0][1];
    const double c1_01_0 = c.b1[0][1][0], c1_01_1 = c.b1[0][1][1];
    const double c1_10_0 = c.b1[1][0][0], c1_10_1 = c.b1[1][0][1];
    const double c1_11_0 = c.b1[1][1][0], c1_11_1 = c.b1[1][1][1];
    const double c2_00_0 = c.b2[0][0][0], c2_00_1 = c.b2[0][0][1];
    const double c2_01_0 = c.b2[0][1][0], c2_01_1 = c.b2[0][1][1];
    const double c2_10_0 = c.b2[1][0][0], c2_10_1 = c.b2[1][0][1];
    const double c2_11_0 = c.b2[1][1][0], c2_11_1 = c.b2[1][1][1];

    // d0k = axis-1 difference of v_k, d1k = axis-2 difference of v_k
    for (int i = 0; i < h; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * w;
        const bool down = i < h - 1;
        if (down) {
            for (int j = 0; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d00 = v0[px + w] - v0[px];
                const double d01 = v1[px + w] - v1[px];
                const double d10 = v0[px + 1] - v0[px];
                const double d11 = v1[px + 1] - v1[px];
                const double t00 = q00[px] + sigma * (c1_00_0 * d00 + c1_00_1 * d01 +
                                                      c2_00_0 * d10 + c2_00_1 * d11);
                const double t01 = q01[px] + sigma * (c1_01_0 * d00 + c1_01_1 * d01 +
                                                      c2_01_0 * d10 + c2_01_1 * d11);
                const double t10 = q10[px] + sigma * (c1_10_0 * d00 + c1_10_1 * d01 +
                                                      c2_10_0 * d10 + c2_10_1 * d11);
                const double t11 = q11[px] + sigma * (c1_11_0 * d00 + c1_11_1 * d01 +
                                                      c2_11_0 * d10 + c2_11_1 * d11);
                const double nrm = std::sqrt(t00 * t00 + t01 * t01 + t10 * t10 + t11 * t11);
                const double scale = a1 / std::max(nrm, a1);
                q00[px] = t00 * scale;
                q01[px] = t01 * scale;
                q10[px] = t10 * scale;
                q11[px] = t11 * scale;
            }
        } else {
            for (int j = 0; j < w - 1; ++j) {
                const std::size_t px = row + j;
                const double d10 = v0[px + 1] - v0[px];
                const double d11 = v1[px + 1] - v1[px];
                const double t00 = q00[px] + sigma * (c2_00_0 * d10 + c2_00_1 * d11);
                const double t01 = q01[px] + sigma * (c2_01_0 * d10 + c2_01_1 * d11);
                const double t10 = q10[px] + sigma * (c2_10_0 * d10 + c2_10_1 * d11);
                const double t11 = q11[px] + sigma * (c2_11_0 * d10 + c2_11_1 * d11);
                const double nrm = std::sqrt(t00 * t00 + t01 * t01 + t10 * t10 + t11 * t11);
                const double scale = a1 / std::max(nrm, a1);
                q00[px] = t00 * scale;
                q01[px] = t01 * scale;
                q10[px] = t10 * scale;
                q11[px] = t11 * scale;
            }
        }
        {
            const std::size_t px = row + w - 1;
            const double d00 = down ? v0[px + w] - v0[px] : 0.0;
            const double d01 = down ? v1[px + w] - v1[px] : 0.0;
            const double t00 = q00[px] + sigma * (c1_00_0 * d00 + c1_00_1 * d01);
            const double t01 = q01[px] + sigma * (c1_01_0 * d00 + c1_01_1 * d01);
            const double t10 = q10[px] + sigma * (c1_10_0 * d00 + c1_10_1 * d01);
            const double t11 = q11[px] + sigma * (c1_11_0 * d00 + c1_11_1 * d01);
            const double nrm = std::sqrt(t00 * t00 + t01 * t01 + t10 * t10 + t11 * t11);
            const double scale = a1 / std::max(nrm, a1);
            q00[px] = t00 * scale;
            q01[px] = t01 * scale;
            q10[px] = t10 * scale;
            q11[px] = t11 * scale;
        }
    }
}

struct PdWorkspace {
    std::vector<double> u, v0, v1;
    std::vector<double> p0, p1, q00, q01, q10, q11;
    std::vector<double> ubar, vbar0, vbar1;
    std::vector<double> w1, w2;   // contraction scratch
    std::vector<double> gu0, gu1; // grad of the frozen u (frozen mode only)
    std::vector<double> sp0, sp1, sq00, sq01, sq10, sq11; // dual snapshots at checks
    std::vector<double> r0, r1, r2, r3;                   // residual scratch
};

/// Shared primal-dual kernel. In frozen mode `data` is the fixed image u
/// and only v is optimized (the seminorm's inner problem); otherwise
/// `data` is the noisy datum u_eta of the Level-2 problem.
inline SolveResult primal_dual_solve(const ScalarImage& data, const Alpha& alpha,
                                     const OperatorCoefficients& coeffs, const SolverConfig& cfg,
                                     bool freeze_u, const SolveHooks* hooks) {
    cfg.validate();
    validate_image(data);

    const int h = data.height(), w = data.width();
    const std::size_t n = data.size();
    PdWorkspace ws;

    auto zeros = [n]() { return std::vector<double>(n, 0.0); };
    ws.u.assign(data.values().begin(), data.values().end());
    ws.v0 = zeros();
    ws.v1 = zeros();
    ws.p0 = zeros();
    ws.p1 = zeros();
    ws.q00 = zeros();
    ws.q01 = zeros();
    ws.q10 = zeros();
    ws.q11 = zeros();
    if (hooks && hooks->initial_p) {
        const auto& ip = *hooks->initial_p;
        if (ip.height() != h || ip.width() != w) {
            throw DimensionMismatch("solve: initial_p dimensions differ");
        }
        ws.p0.assign(ip.component(0).begin(), ip.component(0).end());
        ws.p1.assign(ip.component(1).begin(), ip.component(1).end());
    }
    if (hooks && hooks->initial_q) {
        const auto& iq = *hooks->initial_q;
        if (iq.height() != h || iq.width() != w) {
            throw DimensionMismatch("solve: initial_q dimensions differ");
        }
        ws.q00.assign(iq.entry(0, 0).begin(), iq.entry(0, 0).end());
        ws.q01.assign(iq.entry(0, 1).begin(), iq.entry(0, 1).end());
        ws.q10.assign(iq.entry(1, 0).begin(), iq.entry(1, 0).end());
        ws.q11.assign(iq.entry(1, 1).begin(), iq.entry(1, 1).end());
    }
    ws.ubar = ws.u;
    ws.vbar0 = ws.v0;
    ws.vbar1 = ws.v1;
    ws.w1 = zeros();
    ws.w2 = zeros();
    ws.sp0 = zeros();
    ws.sp1 = zeros();
    ws.sq00 = zeros();
    ws.sq01 = zeros();
    ws.sq10 = zeros();
    ws.sq11 = zeros();
    ws.r0 = zeros();
    ws.r1 = zeros();
    ws.r2 = zeros();
    ws.r3 = zeros();

    if (freeze_u) {
        ws.gu0 = zeros();
        ws.gu1 = zeros();
        grad_into(ws.u.data(), h, w, ws.gu0.data(), ws.gu1.data());
    }

    const double L = (hooks && hooks->operator_norm_bound > 0.0)
                         ? hooks->operator_norm_bound
                         : estimate_operator_norm(coeffs, h, w);
    const double tau = cfg.step_safety / L;
    const double sigma = tau;
    const double inv_tau = 1.0 / tau;
    const double inv_sigma = 1.0 / sigma;
    const double prox_denom = 1.0 / (1.0 + 2.0 * tau);

    const double* u_eta = data.data();
    const double a0 = alpha.alpha0;
    const double a1 = alpha.alpha1;

    auto objective = [&]() {
        double fid = 0.0;
        if (!freeze_u) {
            for (std::size_t i = 0; i < n; ++i) {
                const double d = ws.u[i] - u_eta[i];
                fid += d * d;
            }
        }
        grad_into(ws.u.data(), h, w, ws.r0.data(), ws.r1.data());
        double tv_part = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d0 = ws.r0[i] - ws.v0[i];
            const double d1 = ws.r1[i] - ws.v1[i];
            tv_part += std::sqrt(d0 * d0 + d1 * d1);
        }
        apply_op_into(coeffs, ws.v0.data(), ws.v1.data(), h, w, ws.r0.data(), ws.r1.data(),
                      ws.r2.data(), ws.r3.data());
        double op_part = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            op_part += std::sqrt(ws.r0[i] * ws.r0[i] + ws.r1[i] * ws.r1[i] +
                                 ws.r2[i] * ws.r2[i] + ws.r3[i] * ws.r3[i]);
        }
        return fid + a0 * tv_part + a1 * op_part;
    };

    auto emit_state = [&](int iteration) {
        SaddleState st{
            ScalarImage(h, w, std::vector<double>(ws.u)),
            VectorField2(h, w, std::vector<double>(ws.v0), std::vector<double>(ws.v1)),
            VectorField2(h, w, std::vector<double>(ws.p0), std::vector<double>(ws.p1)),
            MatrixField2(h, w),
            ScalarImage(h, w, std::vector<double>(ws.ubar)),
            VectorField2(h, w, std::vector<double>(ws.vbar0), std::vector<double>(ws.vbar1)),
        };
        std::copy(ws.q00.begin(), ws.q00.end(), st.q.entry(0, 0).begin());
        std::copy(ws.q01.begin(), ws.q01.end(), st.q.entry(0, 1).begin());
        std::copy(ws.q10.begin(), ws.q10.end(), st.q.entry(1, 0).begin());
        std::copy(ws.q11.begin(), ws.q11.end(), st.q.entry(1, 1).begin());
        hooks->on_iteration(st, iteration);
    };

    SolveDiagnostics diag;
    double residual = std::numeric_limits<double>::infinity();

    int iter = 0;
    for (iter = 1; iter <= cfg.max_iters; ++iter) {
        const bool checking = (iter % cfg.check_interval == 0) || iter == cfg.max_iters;

        if (checking) {
            ws.sp0 = ws.p0;
            ws.sp1 = ws.p1;
            ws.sq00 = ws.q00;
            ws.sq01 = ws.q01;
            ws.sq10 = ws.q10;
            ws.sq11 = ws.q11;
        }

        // --- primal step (uses current duals), fused with extrapolation ---
        if (!freeze_u) {
            primal_u_pass(ws.p0.data(), ws.p1.data(), u_eta, tau, prox_denom, h, w, ws.u.data(),
                          ws.ubar.data());
        }

        // v <- v + tau p - tau B^T q, with B^T q = -div(w_k) per component
        for (int k = 0; k < 2; ++k) {
            contract_q_pass(coeffs, k, ws.q00.data(), ws.q01.data(), ws.q10.data(),
                            ws.q11.data(), n, ws.w1.data(), ws.w2.data());
            double* vk = (k == 0) ? ws.v0.data() : ws.v1.data();
            double* vbk = (k == 0) ? ws.vbar0.data() : ws.vbar1.data();
            const double* pk = (k == 0) ? ws.p0.data() : ws.p1.data();
            primal_v_pass(ws.w1.data(), ws.w2.data(), pk, tau, h, w, vk, vbk);
        }

        // --- dual step on the extrapolated primals ---
        if (freeze_u) {
            dual_p_frozen_pass(ws.gu0.data(), ws.gu1.data(), ws.vbar0.data(), ws.vbar1.data(),
                               sigma, a0, n, ws.p0.data(), ws.p1.data());
        } else {
            dual_p_live_pass(ws.ubar.data(), ws.vbar0.data(), ws.vbar1.data(), sigma, a0, h, w,
                             ws.p0.data(), ws.p1.data());
        }
        dual_q_pass(coeffs, ws.vbar0.data(), ws.vbar1.data(), sigma, a1, h, w, ws.q00.data(),
                    ws.q01.data(), ws.q10.data(), ws.q11.data());

        if (hooks && hooks->on_iteration) emit_state(iter);

        if (!checking) continue;

        // --- residuals from the one-step differences ---
        // Primal differences follow from the extrapolation identity
        // x_k - x_{k+1} = x_{k+1} - xbar_{k+1}; duals use the snapshots.
        for (std::size_t i = 0; i < n; ++i) {
            ws.sp0[i] -= ws.p0[i];
            ws.sp1[i] -= ws.p1[i];
            ws.sq00[i] -= ws.q00[i];
            ws.sq01[i] -= ws.q01[i];
            ws.sq10[i] -= ws.q10[i];
            ws.sq11[i] -= ws.q11[i];
        }

        double p_res_sq = 0.0;
        if (!freeze_u) {
            // P_u = (u_k - u_{k+1}) / tau + div(p_k - p_{k+1})
            div_into(ws.sp0.data(), ws.sp1.data(), h, w, ws.r0.data());
            for (std::size_t i = 0; i < n; ++i) {
                const double du = ws.u[i] - ws.ubar[i];
                const double e = du * inv_tau + ws.r0[i];
                p_res_sq += e * e;
            }
        }
        // P_v = (v_k - v_{k+1}) / tau + (p_k - p_{k+1}) - B^T (q_k - q_{k+1})
        apply_op_adjoint_into(coeffs, ws.sq00.data(), ws.sq01.data(), ws.sq10.data(),
                              ws.sq11.data(), h, w, ws.r0.data(), ws.r1.data(), ws.w1.data(),
                              ws.w2.data());
        for (std::size_t i = 0; i < n; ++i) {
            const double dv0 = ws.v0[i] - ws.vbar0[i];
            const double dv1 = ws.v1[i] - ws.vbar1[i];
            const double e0 = dv0 * inv_tau + ws.sp0[i] - ws.r0[i];
            const double e1 = dv1 * inv_tau + ws.sp1[i] - ws.r1[i];
            p_res_sq += e0 * e0 + e1 * e1;
        }

        // D_p = (p_k - p_{k+1}) / sigma - grad(u_k - u_{k+1}) + (v_k - v_{k+1})
        double d_res_sq = 0.0;
        if (!freeze_u) {
            for (std::size_t i = 0; i < n; ++i) ws.r2[i] = ws.u[i] - ws.ubar[i];
            grad_into(ws.r2.data(), h, w, ws.r0.data(), ws.r1.data());
        } else {
            std::fill(ws.r0.begin(), ws.r0.end(), 0.0);
            std::fill(ws.r1.begin(), ws.r1.end(), 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double dv0 = ws.v0[i] - ws.vbar0[i];
            const double dv1 = ws.v1[i] - ws.vbar1[i];
            const double e0 = ws.sp0[i] * inv_sigma - ws.r0[i] + dv0;
            const double e1 = ws.sp1[i] * inv_sigma - ws.r1[i] + dv1;
            d_res_sq += e0 * e0 + e1 * e1;
        }
        // D_q = (q_k - q_{k+1}) / sigma - B (v_k - v_{k+1})
        for (std::size_t i = 0; i < n; ++i) {
            ws.w1[i] = ws.v0[i] - ws.vbar0[i];
            ws.w2[i] = ws.v1[i] - ws.vbar1[i];
        }
        apply_op_into(coeffs, ws.w1.data(), ws.w2.data(), h, w, ws.r0.data(), ws.r1.data(),
                      ws.r2.data(), ws.r3.data());
        for (std::size_t i = 0; i < n; ++i) {
            const double e00 = ws.sq00[i] * inv_sigma - ws.r0[i];
            const double e01 = ws.sq01[i] * inv_sigma - ws.r1[i];
            const double e10 = ws.sq10[i] * inv_sigma - ws.r2[i];
            const double e11 = ws.sq11[i] * inv_sigma - ws.r3[i];
            d_res_sq += e00 * e00 + e01 * e01 + e10 * e10 + e11 * e11;
        }

        double x_norm_sq = sum_sq(ws.v0) + sum_sq(ws.v1);
        if (!freeze_u) x_norm_sq += sum_sq(ws.u);
        const double y_norm_sq = sum_sq(ws.p0) + sum_sq(ws.p1) + sum_sq(ws.q00) +
                                 sum_sq(ws.q01) + sum_sq(ws.q10) + sum_sq(ws.q11);

        residual = (std::sqrt(p_res_sq) + std::sqrt(d_res_sq)) /
                   (1.0 + std::sqrt(x_norm_sq) + std::sqrt(y_norm_sq));

        const double obj = objective();
        diag.objective_history.push_back(obj);
        if (!std::isfinite(obj) || !std::isfinite(residual)) {
            throw NonFiniteIterate("solve: iterate became non-finite (step-size bound violated)");
        }

        if (residual <= cfg.tolerance) {
            diag.converged = true;
            break;
        }
    }

    diag.iterations = std::min(iter, cfg.max_iters);
    diag.final_residual = residual;

    if (hooks && hooks->final_p) {
        *hooks->final_p =
            VectorField2(h, w, std::vector<double>(ws.p0), std::vector<double>(ws.p1));
    }
    if (hooks && hooks->final_q) {
        MatrixField2 fq(h, w);
        std::copy(ws.q00.begin(), ws.q00.end(), fq.entry(0, 0).begin());
        std::copy(ws.q01.begin(), ws.q01.end(), fq.entry(0, 1).begin());
        std::copy(ws.q10.begin(), ws.q10.end(), fq.entry(1, 0).begin());
        std::copy(ws.q11.begin(), ws.q11.end(), fq.entry(1, 1).begin());
        *hooks->final_q = std::move(fq);
    }

    SolveResult result{
        ScalarImage(h, w, std::move(ws.u)),
        VectorField2(h, w, std::move(ws.v0), std::move(ws.v1)),
        std::move(diag),
    };
    return result;
}

} // namespace detail

/// Solves the Level-2 reconstruction problem for the given noisy datum,
/// weights and operator. Returns the reconstruction, the auxiliary field v
/// and solve diagnostics. The minimizer is unique; convergence is reported
/// through diag.converged.
inline SolveResult solve_level2(const ScalarImage& u_eta, const Alpha& alpha,
                                const OperatorCoefficients& coeffs, const SolverConfig& cfg) {
    return detail::primal_dual_solve(u_eta, alpha, coeffs, cfg, false, nullptr);
}

inline SolveResult solve_level2(const ScalarImage& u_eta, const Alpha& alpha,
                                const OperatorCoefficients& coeffs, const SolverConfig& cfg,
                                const SolveHooks& hooks) {
    return detail::primal_dual_solve(u_eta, alpha, coeffs, cfg, false, &hooks);
}

} // namespace pgv
