#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "oracle.hpp"
#include "pgv/seminorm.hpp"
#include "pgv/solver.hpp"
#include "support.hpp"

using namespace pgv;
using testsupport::random_field;
using testsupport::random_image;
using testsupport::random_matrix_field;

namespace {

double objective_of(const ScalarImage& u_eta, const Alpha& alpha,
                    const OperatorCoefficients& coeffs, const SolveResult& r) {
    double fid = 0.0;
    for (std::size_t i = 0; i < u_eta.size(); ++i) {
        const double d = r.u.values()[i] - u_eta.values()[i];
        fid += d * d;
    }
    VectorField2 g = grad(r.u);
    double tv_part = 0.0;
    for (std::size_t i = 0; i < u_eta.size(); ++i) {
        const double d0 = g.component(0)[i] - r.v.component(0)[i];
        const double d1 = g.component(1)[i] - r.v.component(1)[i];
        tv_part += std::sqrt(d0 * d0 + d1 * d1);
    }
    MatrixField2 bv = apply_operator(coeffs, r.v);
    double op_part = 0.0;
    for (std::size_t i = 0; i < u_eta.size(); ++i) {
        const double a = bv.entry(0, 0)[i], b = bv.entry(0, 1)[i];
        const double c = bv.entry(1, 0)[i], d = bv.entry(1, 1)[i];
        op_part += std::sqrt(a * a + b * b + c * c + d * d);
    }
    return fid + alpha.alpha0 * tv_part + alpha.alpha1 * op_part;
}

} // namespace

TEST_CASE("project_ball_2 matches the hand projections") {
    VectorField2 f(2, 2);
    REQUIRE(norm_l2(project_ball_2(f, 1.0)) == 0.0);

    f.at(0, 0, 0) = 3.0;
    f.at(1, 0, 0) = 4.0;
    VectorField2 on_boundary = project_ball_2(f, 5.0);
    REQUIRE(on_boundary.at(0, 0, 0) == 3.0);
    REQUIRE(on_boundary.at(1, 0, 0) == 4.0);

    VectorField2 shrunk = project_ball_2(f, 1.0);
    REQUIRE(shrunk.at(0, 0, 0) == Catch::Approx(0.6).margin(1e-15));
    REQUIRE(shrunk.at(1, 0, 0) == Catch::Approx(0.8).margin(1e-15));
}

TEST_CASE("project_ball_frobenius matches the hand projections") {
    MatrixField2 f(2, 2);
    for (std::size_t i = 0; i < f.plane_size(); ++i) {
        f.entry(0, 0)[i] = 1.0;
        f.entry(1, 1)[i] = 1.0;
    }
    MatrixField2 same = project_ball_frobenius(f, std::sqrt(2.0));
    for (std::size_t i = 0; i < f.plane_size(); ++i) {
        REQUIRE(same.entry(0, 0)[i] == 1.0);
        REQUIRE(same.entry(1, 1)[i] == 1.0);
        REQUIRE(same.entry(0, 1)[i] == 0.0);
    }
    MatrixField2 shrunk = project_ball_frobenius(f, 1.0);
    for (std::size_t i = 0; i < f.plane_size(); ++i) {
        REQUIRE(shrunk.entry(0, 0)[i] == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
        REQUIRE(shrunk.entry(1, 1)[i] == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
    }
    REQUIRE(norm_l2(project_ball_frobenius(MatrixField2(3, 3), 2.0)) == 0.0);
}

TEST_CASE("prox_data closed form and limits") {
    ScalarImage u(2, 2), ue(2, 2);
    for (auto& x : ue.values()) x = 1.0;

    // u = u_eta is a fixed point
    ScalarImage fixed = prox_data(ue, ue, 0.7);
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        REQUIRE(fixed.values()[i] == Catch::Approx(1.0).margin(1e-15));
    }

    // u=0, u_eta=1, tau=0.5 -> (0 + 2*0.5*1)/(1+2*0.5) = 0.5
    ScalarImage mid = prox_data(u, ue, 0.5);
    for (std::size_t i = 0; i < mid.size(); ++i) REQUIRE(mid.values()[i] == 0.5);

    // tau -> 0: |out - u| <= 2 tau |u_eta - u|
    const double tau = 1e-6;
    ScalarImage near = prox_data(u, ue, tau);
    for (std::size_t i = 0; i < near.size(); ++i) {
        REQUIRE(std::abs(near.values()[i] - u.values()[i]) <= 2.0 * tau * 1.0);
    }

    REQUIRE_THROWS_AS(prox_data(ScalarImage(2, 2), ScalarImage(2, 3), 0.5), DimensionMismatch);
}

TEST_CASE("operator norm estimate bounds probe Rayleigh quotients") {
    const int h = 12, w = 10;
    const OperatorCoefficients zero{};
    const double L0 = estimate_operator_norm(zero, h, w);
    REQUIRE(L0 >= 1.0); // the -id block alone has norm 1

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const OperatorCoefficients c =
            (seed % 2) ? testsupport::random_coeffs(700 + seed) : zero;
        const double L = estimate_operator_norm(c, h, w);
        ScalarImage u = random_image(h, w, 800 + seed, -1.0, 1.0);
        VectorField2 v = random_field(h, w, 900 + seed);
        // |K(u,v)|^2 = |grad u - v|^2 + |B v|^2
        VectorField2 gu = grad(u);
        double num = 0.0;
        for (int k = 0; k < 2; ++k) {
            for (std::size_t i = 0; i < gu.plane_size(); ++i) {
                const double d = gu.component(k)[i] - v.component(k)[i];
                num += d * d;
            }
        }
        MatrixField2 bv = apply_operator(c, v);
        num += dot(bv, bv);
        const double den = dot(u, u) + dot(v, v);
        REQUIRE(std::sqrt(num / den) <= L * (1.0 + 1e-12));
    }
}

TEST_CASE("gradient block obeys the classical norm bound") {
    // power-iterate grad^T grad directly; the discrete gradient satisfies
    // |grad|^2 <= 8
    const int h = 16, w = 16;
    ScalarImage x = random_image(h, w, 4, -1.0, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 300; ++it) {
        const double nrm = norm_l2(x);
        for (auto& e : x.values()) e /= nrm;
        ScalarImage y = div(grad(x));
        for (auto& e : y.values()) e = -e;
        lambda = dot(x, y);
        x = y;
    }
    const double grad_norm = std::sqrt(lambda);
    REQUIRE(grad_norm <= std::sqrt(8.0) * 1.01);
    REQUIRE(grad_norm >= 2.0); // sanity: well above trivial lower bounds
}

TEST_CASE("constant datum is reproduced exactly") {
    ScalarImage ue(6, 6);
    for (auto& x : ue.values()) x = 42.0;
    SolveResult r = solve_level2(ue, Alpha(0.4, 0.7), skewed_gradient_operator(0.5, 0.5),
                                 SolverConfig(10000, 1e-10));
    REQUIRE(r.diag.converged);
    for (double x : r.u.values()) REQUIRE(x == Catch::Approx(42.0).margin(1e-9));
    REQUIRE(norm_l2(r.v) <= 1e-9);
    REQUIRE(r.diag.objective_history.back() <= 1e-12);
}

TEST_CASE("solver matches the frozen independent-oracle objectives") {
    // Values computed by the subgradient oracle in oracle.hpp (1e6
    // iterations); the acceptance suite recomputes them live.
    struct Fixture {
        std::uint64_t seed;
        double a0, a1, s, t;
        double oracle_value;
    };
    const Fixture fixtures[] = {
        {1, 0.1, 0.1, 0.5, 0.5, 283.377165445},
        {4, 0.2, 0.4, 0.25, 0.75, 616.099708525},
    };
    for (const auto& fx : fixtures) {
        ScalarImage ue = random_image(8, 8, fx.seed, 0.0, 100.0);
        const Alpha alpha(fx.a0, fx.a1);
        const auto coeffs = skewed_gradient_operator(fx.s, fx.t);
        SolveResult r = solve_level2(ue, alpha, coeffs, SolverConfig(200000, 1e-6));
        REQUIRE(r.diag.converged);
        const double f = objective_of(ue, alpha, coeffs, r);
        REQUIRE(std::abs(f - fx.oracle_value) / fx.oracle_value <= 1e-4);
    }
}

TEST_CASE("large alpha0 forces the flat limit bound") {
    ScalarImage ue = random_image(8, 8, 21, 0.0, 1.0);
    const double big = 1e4; // 1e4 times the image dynamic range
    const Alpha alpha(big, big);
    const auto coeffs = skewed_gradient_operator(0.5, 0.5);
    SolveResult r = solve_level2(ue, alpha, coeffs, SolverConfig(2000000, 1e-10));
    REQUIRE(r.diag.converged);

    double mean = 0.0;
    for (double x : ue.values()) mean += x;
    mean /= static_cast<double>(ue.size());
    double competitor = 0.0; // F at u = const mean, v = 0
    for (double x : ue.values()) competitor += (mean - x) * (mean - x);

    // The exit iterate carries seminorm slack amplified by alpha, so the
    // competitor bound holds with a coarse margin; the flat limit itself
    // is reached to high accuracy.
    const double f = objective_of(ue, alpha, coeffs, r);
    REQUIRE(f <= competitor * (1.0 + 1e-3));
    double dev = 0.0;
    for (double x : r.u.values()) dev = std::max(dev, std::abs(x - mean));
    REQUIRE(dev <= 1e-6);
}

TEST_CASE("objective envelope decreases after the first 50 iterations") {
    // Raw samples oscillate (plain primal-dual); the 20-sample max
    // envelope must be non-increasing within 1e-7 relative slack.
    for (std::uint64_t seed : {3ull, 5ull}) {
        const int n = (seed == 3) ? 8 : 16;
        ScalarImage ue = random_image(n, n, seed, 0.0, 255.0);
        const Alpha alpha = (seed == 3) ? Alpha(0.1, 0.1) : Alpha(0.5, 0.8);
        const auto coeffs =
            (seed == 3) ? skewed_gradient_operator(0.5, 0.5) : skewed_gradient_operator(0.9, 0.2);
        SolveResult r = solve_level2(ue, alpha, coeffs, SolverConfig(100000, 1e-8));
        const auto& h = r.diag.objective_history;
        REQUIRE(h.size() > 30);
        const int width = 20;
        for (std::size_t m = 5; m + width + 1 < h.size(); ++m) {
            const double e0 = *std::max_element(h.begin() + m, h.begin() + m + width);
            const double e1 = *std::max_element(h.begin() + m + 1, h.begin() + m + 1 + width);
            REQUIRE(e1 - e0 <= 1e-7 * (1.0 + std::abs(e0)));
        }
    }
}

TEST_CASE("dual iterates stay inside their balls at every iteration") {
    ScalarImage ue = random_image(12, 12, 33, 0.0, 200.0);
    const Alpha alpha(0.3, 0.6);
    int calls = 0;
    SolveHooks hooks;
    hooks.on_iteration = [&](const SaddleState& st, int) {
        ++calls;
        for (std::size_t i = 0; i < st.p.plane_size(); ++i) {
            const double pn = std::hypot(st.p.component(0)[i], st.p.component(1)[i]);
            REQUIRE(pn <= alpha.alpha0 + 1e-12);
            const double a = st.q.entry(0, 0)[i], b = st.q.entry(0, 1)[i];
            const double c = st.q.entry(1, 0)[i], d = st.q.entry(1, 1)[i];
            REQUIRE(std::sqrt(a * a + b * b + c * c + d * d) <= alpha.alpha1 + 1e-12);
        }
    };
    SolveResult r = solve_level2(ue, alpha, skewed_gradient_operator(0.3, 0.8),
                                 SolverConfig(300, 1e-12), hooks);
    REQUIRE(calls == 300);
    REQUIRE(r.diag.iterations == 300);
    REQUIRE_FALSE(r.diag.converged);
}

TEST_CASE("exit objective never exceeds the u_eta competitor bound") {
    ScalarImage ue = random_image(12, 12, 8, 0.0, 200.0);
    const Alpha alpha(0.7, 0.9);
    const auto coeffs = skewed_gradient_operator(0.5, 0.5);
    const SolverConfig cfg(200000, 1e-6);
    SolveResult r = solve_level2(ue, alpha, coeffs, cfg);
    REQUIRE(r.diag.converged);
    const double bound = alpha.alpha0 * tv(ue);
    REQUIRE(r.diag.objective_history.back() <= bound + cfg.tolerance * (1.0 + bound));
}

TEST_CASE("different dual initializations converge to the same reconstruction") {
    ScalarImage ue = random_image(16, 16, 6, 0.0, 255.0);
    const Alpha alpha(0.3, 0.4);
    const auto coeffs = skewed_gradient_operator(0.75, 0.25);
    const SolverConfig cfg(200000, 1e-6);

    SolveResult r1 = solve_level2(ue, alpha, coeffs, cfg);
    VectorField2 p0 = random_field(16, 16, 1234, -0.2, 0.2);
    MatrixField2 q0 = random_matrix_field(16, 16, 4321, -0.3, 0.3);
    SolveHooks hooks;
    hooks.initial_p = &p0;
    hooks.initial_q = &q0;
    SolveResult r2 = solve_level2(ue, alpha, coeffs, cfg, hooks);

    REQUIRE(r1.diag.converged);
    REQUIRE(r2.diag.converged);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ue.size(); ++i) {
        const double d = r1.u.values()[i] - r2.u.values()[i];
        num += d * d;
        den += r1.u.values()[i] * r1.u.values()[i];
    }
    REQUIRE(std::sqrt(num / den) <= 10.0 * cfg.tolerance);
}

TEST_CASE("the minimal 2x2 grid solves cleanly") {
    ScalarImage ue(2, 2, {10.0, 50.0, 200.0, 90.0});
    SolveResult r = solve_level2(ue, Alpha(0.5, 0.5), skewed_gradient_operator(0.3, 0.6),
                                 SolverConfig(50000, 1e-8));
    REQUIRE(r.diag.converged);
    const double bound = 0.5 * tv(ue);
    REQUIRE(r.diag.objective_history.back() <= bound + 1e-8 * (1.0 + bound));
}

TEST_CASE("diagnostics respect their invariants") {
    ScalarImage ue = random_image(8, 8, 77, 0.0, 100.0);
    const SolverConfig cfg(50, 1e-12, 0.99, 7);
    SolveResult r = solve_level2(ue, Alpha(0.2, 0.2), skewed_gradient_operator(0.5, 0.5), cfg);
    REQUIRE(r.diag.iterations <= cfg.max_iters);
    REQUIRE_FALSE(r.diag.converged); // 50 iterations cannot reach 1e-12
    SolveResult r2 =
        solve_level2(ue, Alpha(0.2, 0.2), skewed_gradient_operator(0.5, 0.5),
                     SolverConfig(200000, 1e-5));
    REQUIRE(r2.diag.converged);
    REQUIRE(r2.diag.final_residual <= 1e-5);
}

TEST_CASE("non-finite iterates are detected and reported") {
    // The ball projections keep honest runs bounded, so inject a NaN
    // through a mutated dual initializer to exercise the guard.
    ScalarImage ue = random_image(8, 8, 3, 0.0, 255.0);
    VectorField2 p0(8, 8);
    p0.component(0)[5] = std::numeric_limits<double>::quiet_NaN();
    SolveHooks hooks;
    hooks.initial_p = &p0;
    REQUIRE_THROWS_AS(solve_level2(ue, Alpha(0.5, 0.5), skewed_gradient_operator(0.5, 0.5),
                                   SolverConfig(100, 1e-8), hooks),
                      NonFiniteIterate);
}

TEST_CASE("mismatched dual initializer dimensions are rejected") {
    ScalarImage ue = random_image(8, 8, 3, 0.0, 255.0);
    VectorField2 p0(9, 8);
    SolveHooks hooks;
    hooks.initial_p = &p0;
    REQUIRE_THROWS_AS(solve_level2(ue, Alpha(0.5, 0.5), skewed_gradient_operator(0.5, 0.5),
                                   SolverConfig(100, 1e-8), hooks),
                      DimensionMismatch);
}
