/* Core value types for PDE-constrained generalized-variation denoising:
 * images, vector/matrix fields on the pixel grid, first-order operator
 * coefficients, tuning parameters and run configuration.
 *
 * Conventions used throughout the library:
 *  - pixel spacing is 1; measure norms are plain sums over pixels,
 *  - images are row-major, axis 1 = rows (i), axis 2 = columns (j),
 *  - intensities are unconstrained reals, nominal range [0,255];
 *    clamping happens only when writing 8-bit files,
 *  - every constructor validates its invariants and throws a typed
 *    error, so no partially-valid value is observable.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pgv {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Divergence detected inside an iterative solve; indicates a broken
/// step-size bound and is treated as an internal bug, not user error.
class NonFiniteIterate : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class UnknownKeyError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void check_all_finite(std::span<const double> xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) {
            throw NonFiniteError(std::string(what) + ": non-finite entry");
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Grid fields
// ---------------------------------------------------------------------------

/// Real-valued H x W intensity grid.
class ScalarImage {
public:
    ScalarImage(int height, int width)
        : height_(height), width_(width), values_(checked_size(height, width), 0.0) {}

    ScalarImage(int height, int width, std::vector<double> values)
        : height_(height), width_(width), values_(std::move(values)) {
        if (values_.size() != checked_size(height, width)) {
            throw DimensionError("ScalarImage: value count does not match height*width");
        }
        detail::check_all_finite(values_, "ScalarImage");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    double operator()(int i, int j) const { return values_[idx(i, j)]; }
    double& operator()(int i, int j) { return values_[idx(i, j)]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const double* data() const { return values_.data(); }
    double* data() { return values_.data(); }

    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(j);
    }

private:
    static std::size_t checked_size(int height, int width) {
        if (height < 2 || width < 2) {
            throw DimensionError("ScalarImage: height and width must be >= 2");
        }
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }

    int height_;
    int width_;
    std::vector<double> values_;
};

/// H x W field of 2-vectors, stored as two component planes.
class VectorField2 {
public:
    VectorField2(int height, int width)
        : height_(check_dim(height, "height")), width_(check_dim(width, "width")) {
        const auto n = static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
        comps_[0].assign(n, 0.0);
        comps_[1].assign(n, 0.0);
    }

    VectorField2(int height, int width, std::vector<double> c0, std::vector<double> c1)
        : VectorField2(height, width) {
        const auto n = comps_[0].size();
        if (c0.size() != n || c1.size() != n) {
            throw DimensionError("VectorField2: component size does not match height*width");
        }
        detail::check_all_finite(c0, "VectorField2");
        detail::check_all_finite(c1, "VectorField2");
        comps_[0] = std::move(c0);
        comps_[1] = std::move(c1);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t plane_size() const { return comps_[0].size(); }

    std::span<const double> component(int k) const { return comps_[static_cast<std::size_t>(k)]; }
    std::span<double> component(int k) { return comps_[static_cast<std::size_t>(k)]; }

    double at(int k, int i, int j) const { return comps_[static_cast<std::size_t>(k)][idx(i, j)]; }
    double& at(int k, int i, int j) { return comps_[static_cast<std::size_t>(k)][idx(i, j)]; }

    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(j);
    }

private:
    static int check_dim(int d, const char* what) {
        if (d < 2) throw DimensionError(std::string("VectorField2: ") + what + " must be >= 2");
        return d;
    }

    int height_;
    int width_;
    std::array<std::vector<double>, 2> comps_;
};

/// H x W field of 2x2 matrices, stored as four entry planes indexed (row, col).
class MatrixField2 {
public:
    MatrixField2(int height, int width)
        : height_(check_dim(height, "height")), width_(check_dim(width, "width")) {
        const auto n = static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
        for (auto& p : planes_) p.assign(n, 0.0);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t plane_size() const { return planes_[0].size(); }

    std::span<const double> entry(int r, int c) const { return planes_[plane(r, c)]; }
    std::span<double> entry(int r, int c) { return planes_[plane(r, c)]; }

    double at(int r, int c, int i, int j) const { return planes_[plane(r, c)][idx(i, j)]; }
    double& at(int r, int c, int i, int j) { return planes_[plane(r, c)][idx(i, j)]; }

    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(j);
    }

private:
    static std::size_t plane(int r, int c) { return static_cast<std::size_t>(r) * 2 + static_cast<std::size_t>(c); }

    static int check_dim(int d, const char* what) {
        if (d < 2) throw DimensionError(std::string("MatrixField2: ") + what + " must be >= 2");
        return d;
    }

    int height_;
    int width_;
    std::array<std::vector<double>, 4> planes_;
};

// ---------------------------------------------------------------------------
// Operator coefficients and tuning parameters
// ---------------------------------------------------------------------------

/// Coefficients (B1, B2) of a constant-coefficient first-order operator
/// acting on vector fields: (B v)_{rc} = sum_{i,k} b[i]_{rck} * d_i v_k,
/// where d_i is the forward difference along axis i. Indices are 0-based.
struct OperatorCoefficients {
    using Tensor = std::array<std::array<std::array<double, 2>, 2>, 2>; // [r][c][k]

    Tensor b1{}; // axis-1 derivatives
    Tensor b2{}; // axis-2 derivatives

    OperatorCoefficients() = default;

    OperatorCoefficients(const Tensor& b1_in, const Tensor& b2_in) : b1(b1_in), b2(b2_in) {
        for (const auto* t : {&b1, &b2}) {
            for (const auto& plane : *t) {
                for (const auto& row : plane) {
                    for (double x : row) {
                        if (!std::isfinite(x)) {
                            throw NonFiniteError("OperatorCoefficients: non-finite entry");
                        }
                    }
                }
            }
        }
    }
};

/// Interpolation parameters of the skewed symmetric-gradient family.
struct SkewParams {
    double s;
    double t;

    SkewParams(double s_in, double t_in) : s(s_in), t(t_in) {
        if (!(s >= 0.0 && s <= 1.0) || !(t >= 0.0 && t <= 1.0)) {
            throw InvalidParameter("SkewParams: s and t must lie in [0,1]");
        }
    }
};

/// Positive tuning weights (alpha0 for |Du - v|, alpha1 for |Bv|).
struct Alpha {
    double alpha0;
    double alpha1;

    // Values below 1e-8 are rejected: the training scheme keeps alpha in
    // [theta, 1/theta] with theta > 0, and near-zero weights make the
    // saddle-point problem numerically degenerate.
    static constexpr double kMinValue = 1e-8;

    Alpha(double a0, double a1) : alpha0(a0), alpha1(a1) {
        if (!std::isfinite(a0) || !std::isfinite(a1) || a0 < kMinValue || a1 < kMinValue) {
            throw InvalidParameter("Alpha: weights must be finite and >= 1e-8");
        }
    }
};

/// Clean/noisy image pair driving the Level-1 search.
struct TrainingPair {
    ScalarImage clean;
    ScalarImage noisy;

    TrainingPair(ScalarImage clean_in, ScalarImage noisy_in)
        : clean(std::move(clean_in)), noisy(std::move(noisy_in)) {
        if (clean.height() != noisy.height() || clean.width() != noisy.width()) {
            throw DimensionMismatch("TrainingPair: clean and noisy dimensions differ");
        }
    }
};

/// Stopping rule and step-size safety for the primal-dual iteration.
struct SolverConfig {
    int max_iters = 10000;
    double tolerance = 1e-5;   // relative combined primal-dual residual
    double step_safety = 0.99; // tau = sigma = step_safety / L
    int check_interval = 10;   // iterations between residual checks

    SolverConfig() = default;

    SolverConfig(int max_iters_in, double tolerance_in, double step_safety_in = 0.99,
                 int check_interval_in = 10)
        : max_iters(max_iters_in),
          tolerance(tolerance_in),
          step_safety(step_safety_in),
          check_interval(check_interval_in) {
        validate();
    }

    void validate() const {
        if (max_iters < 1) throw InvalidParameter("SolverConfig: max_iters must be positive");
        if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
            throw InvalidParameter("SolverConfig: tolerance must be positive");
        }
        if (!(step_safety > 0.0 && step_safety < 1.0)) {
            throw InvalidParameter("SolverConfig: step_safety must lie in (0,1)");
        }
        if (check_interval < 1) throw InvalidParameter("SolverConfig: check_interval must be positive");
    }
};

/// Discrete search box for the Level-1 grid search.
struct GridSpec {
    std::vector<double> alpha0_values;
    std::vector<double> alpha1_values;
    std::vector<double> s_values;
    std::vector<double> t_values;

    GridSpec(std::vector<double> a0, std::vector<double> a1, std::vector<double> s,
             std::vector<double> t)
        : alpha0_values(std::move(a0)),
          alpha1_values(std::move(a1)),
          s_values(std::move(s)),
          t_values(std::move(t)) {
        validate();
    }

    void validate() const {
        check_list(alpha0_values, "alpha0_values", Alpha::kMinValue, std::numeric_limits<double>::infinity());
        check_list(alpha1_values, "alpha1_values", Alpha::kMinValue, std::numeric_limits<double>::infinity());
        check_list(s_values, "s_values", 0.0, 1.0);
        check_list(t_values, "t_values", 0.0, 1.0);
    }

    std::size_t tuple_count() const {
        return alpha0_values.size() * alpha1_values.size() * s_values.size() * t_values.size();
    }

    /// The discrete box used in the reference experiments:
    /// alpha in {0.025, 0.05, ..., 1}^2, (s,t) in {0, 0.025, ..., 1}^2.
    static GridSpec reference_box() {
        std::vector<double> alphas;
        for (int k = 1; k <= 40; ++k) alphas.push_back(k * 0.025);
        std::vector<double> st;
        for (int k = 0; k <= 40; ++k) st.push_back(k * 0.025);
        return GridSpec(alphas, alphas, st, st);
    }

private:
    static void check_list(const std::vector<double>& xs, const char* what, double lo, double hi) {
        if (xs.empty()) throw InvalidParameter(std::string("GridSpec: ") + what + " is empty");
        double prev = -std::numeric_limits<double>::infinity();
        for (double x : xs) {
            if (!std::isfinite(x) || x < lo || x > hi) {
                throw InvalidParameter(std::string("GridSpec: ") + what + " entry out of range");
            }
            if (!(x > prev)) {
                throw InvalidParameter(std::string("GridSpec: ") + what + " must be strictly increasing");
            }
            prev = x;
        }
    }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Re-checks the ScalarImage invariants; throws DimensionError or
/// NonFiniteError. Constructors already enforce these, so this is mainly
/// useful after in-place pixel edits.
inline void validate_image(const ScalarImage& img) {
    if (img.height() < 2 || img.width() < 2) {
        throw DimensionError("validate_image: height and width must be >= 2");
    }
    detail::check_all_finite(img.values(), "validate_image");
}

// ---------------------------------------------------------------------------
// Field algebra helpers
// ---------------------------------------------------------------------------

inline double dot(const ScalarImage& a, const ScalarImage& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DimensionMismatch("dot: image dimensions differ");
    }
    double acc = 0.0;
    auto va = a.values(), vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
    return acc;
}

inline double dot(const VectorField2& a, const VectorField2& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DimensionMismatch("dot: field dimensions differ");
    }
    double acc = 0.0;
    for (int k = 0; k < 2; ++k) {
        auto va = a.component(k), vb = b.component(k);
        for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
    }
    return acc;
}

inline double dot(const MatrixField2& a, const MatrixField2& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DimensionMismatch("dot: field dimensions differ");
    }
    double acc = 0.0;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            auto va = a.entry(r, c), vb = b.entry(r, c);
            for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
        }
    }
    return acc;
}

template <typename Field>
double norm_l2(const Field& a) {
    return std::sqrt(dot(a, a));
}

} // namespace pgv
