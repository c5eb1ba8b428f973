/* Shared test fixtures: seeded random images/fields and the synthetic
 * piecewise-affine training pair used by the long-running suites.
 */
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pgv/core.hpp"
#include "pgv/io.hpp"

namespace testsupport {

inline pgv::ScalarImage random_image(int h, int w, std::uint64_t seed, double lo = 0.0,
                                     double hi = 100.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) x = d(rng);
    return pgv::ScalarImage(h, w, std::move(v));
}

inline pgv::VectorField2 random_field(int h, int w, std::uint64_t seed, double lo = -1.0,
                                      double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<double> c0(n), c1(n);
    for (auto& x : c0) x = d(rng);
    for (auto& x : c1) x = d(rng);
    return pgv::VectorField2(h, w, std::move(c0), std::move(c1));
}

inline pgv::MatrixField2 random_matrix_field(int h, int w, std::uint64_t seed, double lo = -1.0,
                                             double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    pgv::MatrixField2 q(h, w);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            for (auto& x : q.entry(r, c)) x = d(rng);
        }
    }
    return q;
}

inline pgv::OperatorCoefficients random_coeffs(std::uint64_t seed, double lo = -1.0,
                                               double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    pgv::OperatorCoefficients c;
    for (auto* t : {&c.b1, &c.b2}) {
        for (auto& plane : *t) {
            for (auto& row : plane) {
                for (auto& x : row) x = d(rng);
            }
        }
    }
    return c;
}

/// Piecewise-affine clean image: three affine regions with jumps between
/// them, values inside [0,255].
inline pgv::ScalarImage piecewise_affine_image(int h, int w) {
    pgv::ScalarImage img(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double v;
            if (i + j < (h + w) * 3 / 8) {
                v = 40.0 + 1.2 * i + 0.8 * j;
            } else if (j >= w / 2) {
                v = 230.0 - 1.5 * i;
            } else {
                v = 90.0 + 2.0 * j - 0.5 * i;
            }
            img(i, j) = v;
        }
    }
    return img;
}

/// The synthetic training pair shared by the long tests: piecewise-affine
/// clean image plus seeded Gaussian noise, sigma 25 on the [0,255] scale.
inline pgv::TrainingPair synthetic_pair(int h, int w, double sigma = 25.0,
                                        std::uint64_t seed = 20240301ull) {
    pgv::ScalarImage clean = piecewise_affine_image(h, w);
    pgv::ScalarImage noisy = pgv::add_gaussian_noise(clean, pgv::NoiseSpec(sigma, seed));
    return pgv::TrainingPair(std::move(clean), std::move(noisy));
}

} // namespace testsupport
