#include <doctest.h>

#include <cmath>

#include "bdqcd/quadrature.hpp"

using namespace bdqcd;

TEST_CASE("integrates smooth functions to tight tolerance") {
    CHECK(integrate([](double x) { return x * x; }, 0.0, 3.0, 1e-10) ==
          doctest::Approx(9.0).epsilon(1e-10));
    CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-10) ==
          doctest::Approx(2.0).epsilon(1e-10));
    CHECK(integrate([](double x) { return normal_pdf(x); }, -10.0, 10.0, 1e-10) ==
          doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("adapts around sharp features") {
    // narrow spike at 0.3
    auto spike = [](double x) {
        const double d = (x - 0.3) / 0.001;
        return std::exp(-0.5 * d * d);
    };
    const double expected = 0.001 * std::sqrt(2.0 * M_PI);
    CHECK(integrate(spike, 0.0, 1.0, 1e-10) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("reports non-convergence with diagnostics") {
    auto nasty = [](double x) { return x == 0.0 ? 0.0 : std::sin(1.0 / x) / x; };
    CHECK_THROWS_AS(integrate(nasty, 1e-9, 1.0, 1e-14, 8), QuadratureError);
}

TEST_CASE("normal cdf endpoints") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(8.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normal_cdf(-8.0) == doctest::Approx(0.0).epsilon(1e-12));
}
