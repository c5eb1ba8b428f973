/* Discrete first-order differential operators on the pixel grid.
 *
 * All derivatives are forward differences with replicate (Neumann)
 * boundary: the difference along an axis is zero at the last row/column
 * of that axis. Adjoints are the exact algebraic transposes of the
 * forward operators, never an independent discretization, so
 *   <grad u, p> = -<u, div p>   and   <B v, q> = <v, B^T q>
 * hold to rounding error. The primal-dual solver relies on this.
 */
#pragma once

#include <cmath>

#include "pgv/core.hpp"

namespace pgv {

namespace detail {

// out[k] = forward difference of src along axis k, zero at the trailing edge.
inline void grad_into(const double* src, int h, int w, double* out1, double* out2) {
    for (int i = 0; i < h; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * w;
        const bool last_row = (i == h - 1);
        for (int j = 0; j < w; ++j) {
            const std::size_t p = row + j;
            out1[p] = last_row ? 0.0 : src[p + w] - src[p];
            out2[p] = (j == w - 1) ? 0.0 : src[p + 1] - src[p];
        }
    }
}

// out = divergence (negative transpose of grad_into) of (p1, p2).
inline void div_into(const double* p1, const double* p2, int h, int w, double* out) {
    for (int i = 0; i < h; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * w;
        for (int j = 0; j < w; ++j) {
            const std::size_t p = row + j;
            double d = 0.0;
            if (i < h - 1) d += p1[p];
            if (i > 0) d -= p1[p - w];
            if (j < w - 1) d += p2[p];
            if (j > 0) d -= p2[p - 1];
            out[p] = d;
        }
    }
}

} // namespace detail

/// Forward-difference gradient with replicate boundary.
inline VectorField2 grad(const ScalarImage& u) {
    VectorField2 g(u.height(), u.width());
    detail::grad_into(u.data(), u.height(), u.width(), g.component(0).data(),
                      g.component(1).data());
    return g;
}

/// Discrete divergence, defined as -grad^T: <grad u, p> = -<u, div p> exactly.
inline ScalarImage div(const VectorField2& p) {
    ScalarImage d(p.height(), p.width());
    detail::div_into(p.component(0).data(), p.component(1).data(), p.height(), p.width(),
                     d.data());
    return d;
}

/// Coefficients of the two-parameter operator family interpolating between
/// the symmetrized gradient (s = t = 1/2) and the full non-symmetric
/// gradient (t = 0, s = 1). Applied to v it yields the matrix field
///   [ d1 v1                  (1-t) d1 v2 + (1-s) d2 v1 ]
///   [ t d1 v2 + s d2 v1      d2 v2                     ].
inline OperatorCoefficients skewed_gradient_operator(const SkewParams& params) {
    OperatorCoefficients c;
    c.b1[0][0][0] = 1.0;
    c.b1[0][1][1] = 1.0 - params.t;
    c.b1[1][0][1] = params.t;
    c.b2[0][1][0] = 1.0 - params.s;
    c.b2[1][0][0] = params.s;
    c.b2[1][1][1] = 1.0;
    return c;
}

inline OperatorCoefficients skewed_gradient_operator(double s, double t) {
    return skewed_gradient_operator(SkewParams(s, t));
}

/// Coefficients of the symmetrized gradient, (grad v + grad v^T) / 2.
inline OperatorCoefficients symmetric_gradient_operator() {
    return skewed_gradient_operator(0.5, 0.5);
}

namespace detail {

// (Bv)_{rc} = sum_{i,k} b[i]_{rck} * d_i v_k, forward differences.
inline void apply_op_into(const OperatorCoefficients& c, const double* v0, const double* v1,
                          int h, int w, double* out00, double* out01, double* out10,
                          double* out11) {
    const double* vs[2] = {v0, v1};
    for (int i = 0; i < h; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * w;
        const bool last_row = (i == h - 1);
        for (int j = 0; j < w; ++j) {
            const std::size_t p = row + j;
            const bool last_col = (j == w - 1);
            double d[2][2]; // d[i][k] = forward difference of v_k along axis i
            for (int k = 0; k < 2; ++k) {
                d[0][k] = last_row ? 0.0 : vs[k][p + w] - vs[k][p];
                d[1][k] = last_col ? 0.0 : vs[k][p + 1] - vs[k][p];
            }
            double acc[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
            for (int r = 0; r < 2; ++r) {
                for (int cc = 0; cc < 2; ++cc) {
                    for (int k = 0; k < 2; ++k) {
                        acc[r][cc] += c.b1[r][cc][k] * d[0][k] + c.b2[r][cc][k] * d[1][k];
                    }
                }
            }
            out00[p] = acc[0][0];
            out01[p] = acc[0][1];
            out10[p] = acc[1][0];
            out11[p] = acc[1][1];
        }
    }
}

// Adjoint of apply_op_into. Contracting q against the coefficient tensors
// gives, per output component k, a vector field w_k with
// w_k^i = sum_{rc} b[i]_{rck} q_{rc}; the adjoint is then -div w_k because
// div is already the exact -grad^T.
inline void apply_op_adjoint_into(const OperatorCoefficients& c, const double* q00,
                                  const double* q01, const double* q10, const double* q11,
                                  int h, int w, double* out0, double* out1, double* scratch_w1,
                                  double* scratch_w2) {
    const double* qs[2][2] = {{q00, q01}, {q10, q11}};
    const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    double* outs[2] = {out0, out1};
    for (int k = 0; k < 2; ++k) {
        for (std::size_t p = 0; p < n; ++p) {
            double w1 = 0.0, w2 = 0.0;
            for (int r = 0; r < 2; ++r) {
                for (int cc = 0; cc < 2; ++cc) {
                    w1 += c.b1[r][cc][k] * qs[r][cc][p];
                    w2 += c.b2[r][cc][k] * qs[r][cc][p];
                }
            }
            scratch_w1[p] = w1;
            scratch_w2[p] = w2;
        }
        div_into(scratch_w1, scratch_w2, h, w, outs[k]);
        for (std::size_t p = 0; p < n; ++p) outs[k][p] = -outs[k][p];
    }
}

} // namespace detail

/// Applies the first-order operator with the given coefficients to v.
inline MatrixField2 apply_operator(const OperatorCoefficients& c, const VectorField2& v) {
    MatrixField2 out(v.height(), v.width());
    detail::apply_op_into(c, v.component(0).data(), v.component(1).data(), v.height(), v.width(),
                          out.entry(0, 0).data(), out.entry(0, 1).data(), out.entry(1, 0).data(),
                          out.entry(1, 1).data());
    return out;
}

/// Exact discrete transpose of apply_operator:
/// <apply_operator(c, v), q> = <v, apply_operator_adjoint(c, q)> for all v, q.
inline VectorField2 apply_operator_adjoint(const OperatorCoefficients& c, const MatrixField2& q) {
    VectorField2 out(q.height(), q.width());
    std::vector<double> w1(q.plane_size()), w2(q.plane_size());
    detail::apply_op_adjoint_into(c, q.entry(0, 0).data(), q.entry(0, 1).data(),
                                  q.entry(1, 0).data(), q.entry(1, 1).data(), q.height(),
                                  q.width(), out.component(0).data(), out.component(1).data(),
                                  w1.data(), w2.data());
    return out;
}

/// l-infinity distance between operators: the sum over axes of the
/// Euclidean norms of the coefficient-tensor differences. This is the
/// metric in which operator sequences converge.
inline double distance_linf(const OperatorCoefficients& a, const OperatorCoefficients& b) {
    double total = 0.0;
    const OperatorCoefficients::Tensor* as[2] = {&a.b1, &a.b2};
    const OperatorCoefficients::Tensor* bs[2] = {&b.b1, &b.b2};
    for (int i = 0; i < 2; ++i) {
        double sq = 0.0;
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                for (int k = 0; k < 2; ++k) {
                    const double diff = (*as[i])[r][c][k] - (*bs[i])[r][c][k];
                    sq += diff * diff;
                }
            }
        }
        total += std::sqrt(sq);
    }
    return total;
}

/// l-infinity norm of an operator (distance to the zero coefficients).
inline double norm_linf(const OperatorCoefficients& a) {
    return distance_linf(a, OperatorCoefficients{});
}

} // namespace pgv
