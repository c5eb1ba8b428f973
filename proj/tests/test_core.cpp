#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "pgv/core.hpp"

using namespace pgv;

TEST_CASE("validate_image accepts a minimal valid grid") {
    ScalarImage img(2, 2);
    REQUIRE_NOTHROW(validate_image(img));
}

TEST_CASE("images narrower than 2 pixels are rejected") {
    REQUIRE_THROWS_AS(ScalarImage(1, 5), DimensionError);
    REQUIRE_THROWS_AS(ScalarImage(5, 1), DimensionError);
    REQUIRE_THROWS_AS(ScalarImage(0, 0), DimensionError);
}

TEST_CASE("non-finite entries are rejected") {
    std::vector<double> v(16, 0.0);
    v[7] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(ScalarImage(4, 4, std::move(v)), NonFiniteError);

    std::vector<double> w(16, 0.0);
    w[3] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(ScalarImage(4, 4, std::move(w)), NonFiniteError);
}

TEST_CASE("validate_image flags entries mutated after construction") {
    ScalarImage img(3, 3);
    img(1, 2) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(validate_image(img), NonFiniteError);
}

TEST_CASE("value-count mismatches are rejected") {
    REQUIRE_THROWS_AS(ScalarImage(3, 3, std::vector<double>(8, 0.0)), DimensionError);
    REQUIRE_THROWS_AS(VectorField2(3, 3, std::vector<double>(9, 0.0), std::vector<double>(8, 0.0)),
                      DimensionError);
}

TEST_CASE("alpha weights must be positive") {
    REQUIRE_NOTHROW(Alpha(0.1, 0.1));
    REQUIRE_THROWS_AS(Alpha(0.0, 0.1), InvalidParameter);
    REQUIRE_THROWS_AS(Alpha(0.1, -1.0), InvalidParameter);
    REQUIRE_THROWS_AS(Alpha(1e-9, 0.1), InvalidParameter); // below the 1e-8 floor
}

TEST_CASE("skew parameters live in the unit square") {
    REQUIRE_NOTHROW(SkewParams(0.0, 1.0));
    REQUIRE_THROWS_AS(SkewParams(-0.01, 0.5), InvalidParameter);
    REQUIRE_THROWS_AS(SkewParams(0.5, 1.01), InvalidParameter);
}

TEST_CASE("training pair requires matching dimensions") {
    REQUIRE_THROWS_AS(TrainingPair(ScalarImage(4, 4), ScalarImage(4, 5)), DimensionMismatch);
}

TEST_CASE("solver config validation") {
    REQUIRE_THROWS_AS(SolverConfig(0, 1e-6), InvalidParameter);
    REQUIRE_THROWS_AS(SolverConfig(10, -1e-6), InvalidParameter);
    REQUIRE_THROWS_AS(SolverConfig(10, 1e-6, 1.0), InvalidParameter);
    REQUIRE_THROWS_AS(SolverConfig(10, 1e-6, 0.5, 0), InvalidParameter);
    REQUIRE_NOTHROW(SolverConfig(10, 1e-6, 0.5, 3));
}

TEST_CASE("grid spec lists must be sorted, non-empty and in range") {
    REQUIRE_THROWS_AS(GridSpec({}, {0.1}, {0.5}, {0.5}), InvalidParameter);
    REQUIRE_THROWS_AS(GridSpec({0.2, 0.1}, {0.1}, {0.5}, {0.5}), InvalidParameter);
    REQUIRE_THROWS_AS(GridSpec({0.1}, {0.1}, {0.5, 1.5}, {0.5}), InvalidParameter);
    REQUIRE_NOTHROW(GridSpec({0.1, 0.2}, {0.1}, {0.0, 0.5, 1.0}, {0.5}));
}

TEST_CASE("reference grid box matches the documented spacing") {
    const GridSpec g = GridSpec::reference_box();
    REQUIRE(g.alpha0_values.size() == 40);
    REQUIRE(g.alpha0_values.front() == Catch::Approx(0.025));
    REQUIRE(g.alpha0_values.back() == Catch::Approx(1.0));
    REQUIRE(g.s_values.size() == 41);
    REQUIRE(g.s_values.front() == 0.0);
    REQUIRE(g.s_values.back() == Catch::Approx(1.0));
    REQUIRE(g.tuple_count() == 40ull * 40ull * 41ull * 41ull);
}
