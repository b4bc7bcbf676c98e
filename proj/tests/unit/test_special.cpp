#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pvclust/special.hpp"

using pvclust::digamma;
using pvclust::log_gamma;

TEST_CASE("digamma matches closed-form reference points") {
    // psi(1) = -euler_gamma, psi(1/2) = -euler_gamma - 2 ln 2,
    // psi(1/4) = -euler_gamma - pi/2 - 3 ln 2, psi(2) = 1 - euler_gamma.
    CHECK(digamma(1.0) == Catch::Approx(-0.5772156649015329).epsilon(0).margin(1e-13));
    CHECK(digamma(0.5) == Catch::Approx(-1.9635100260214235).epsilon(0).margin(1e-13));
    CHECK(digamma(0.25) == Catch::Approx(-4.2274535333762654).epsilon(0).margin(1e-13));
    CHECK(digamma(2.0) == Catch::Approx(0.4227843350984671).epsilon(0).margin(1e-13));
    CHECK(digamma(10.0) == Catch::Approx(2.2517525890667211).epsilon(0).margin(1e-13));
    CHECK(digamma(1000.0) == Catch::Approx(6.9072551956488121).epsilon(0).margin(1e-12));
}

TEST_CASE("digamma satisfies the recurrence psi(x+1) = psi(x) + 1/x") {
    for (double x : {0.13, 0.7, 1.0, 3.9, 17.2, 123.4, 5.5e5}) {
        CHECK(digamma(x + 1.0) == Catch::Approx(digamma(x) + 1.0 / x).epsilon(1e-12));
    }
}

TEST_CASE("digamma satisfies the reflection identity on (0,1)") {
    // psi(1-x) - psi(x) = pi cot(pi x); both arguments stay positive here
    for (double x : {0.1, 0.25, 0.3, 0.45}) {
        const double lhs = digamma(1.0 - x) - digamma(x);
        const double rhs = 3.14159265358979323846 / std::tan(3.14159265358979323846 * x);
        CHECK(lhs == Catch::Approx(rhs).epsilon(1e-11));
    }
}

TEST_CASE("digamma rejects non-positive arguments") {
    CHECK_THROWS_AS(digamma(0.0), pvclust::DataError);
    CHECK_THROWS_AS(digamma(-3.2), pvclust::DataError);
    CHECK_THROWS_AS(digamma(std::nan("")), pvclust::DataError);
}

TEST_CASE("log_gamma hits factorial points and stays finite at 1e6") {
    CHECK(log_gamma(1.0) == 0.0);
    CHECK(log_gamma(2.0) == 0.0);
    CHECK(log_gamma(5.0) == Catch::Approx(std::log(24.0)).epsilon(1e-14));
    CHECK(std::isfinite(log_gamma(1e6)));
}
