#include <cmath>
#include <limits>
#include <stdexcept>

#include <doctest.h>

#include "it2cfnn/fuzzy.hpp"
#include "support.hpp"

using namespace it2cfnn::fuzzy;

namespace {
const double kHalf = std::exp(-0.5);
}

TEST_SUITE("fuzzy") {
  TEST_CASE("type-1 membership at fixed points") {
    ShapeParams p{0.3, 1.7, 0.8, 0.0};
    CHECK(mu_type1(0.3, p) == 1.0);
    CHECK(mu_type1(0.3 + 1.7, p) == doctest::Approx(kHalf).epsilon(1e-15));
    CHECK(mu_type1(0.3 - 1.7, p) == doctest::Approx(kHalf).epsilon(1e-15));

    ShapeParams unit{0.0, 1.0, 1.0, 0.0};
    CHECK(mu_type1(2.0, unit) == doctest::Approx(0.1353352832366127).epsilon(1e-14));
  }

  TEST_CASE("upper and lower memberships at fixed points") {
    ShapeParams p{0.0, 1.0, 1.0, 0.5};
    CHECK(umf(0.0, p) == 1.0);
    CHECK(lmf(0.0, p) == 1.0);
    CHECK(umf(1.0, p) == doctest::Approx(kHalf).epsilon(1e-15));
    CHECK(lmf(-1.0, p) == doctest::Approx(kHalf).epsilon(1e-15));
    CHECK(umf(2.0, p) == doctest::Approx(0.2431167344342142).epsilon(1e-14));
  }

  TEST_CASE("generalized gaussian of a zero base is one") {
    CHECK(generalized_gaussian(0.0, 0.01) == 1.0);
    CHECK(generalized_gaussian(0.0, 7.0) == 1.0);
  }

  TEST_CASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(validate({0.0, 0.0, 1.0, 0.0}), std::domain_error);
    CHECK_THROWS_AS(validate({0.0, 1.0, 1.0, -0.1}), std::domain_error);
    CHECK_THROWS_AS(validate({0.0, 1.0, 0.5, 0.5}), std::domain_error);
    CHECK_THROWS_AS(validate({std::numeric_limits<double>::quiet_NaN(), 1.0, 1.0, 0.0}), std::domain_error);
    CHECK_THROWS_AS(umf(std::numeric_limits<double>::infinity(), {}), std::domain_error);
    CHECK_NOTHROW(validate({0.0, 1.0, 1.0, 0.9}));
  }

  TEST_CASE("projection keeps signs and restores the admissible region") {
    double beta = -0.5, delta = 0.9;
    project_shape(beta, delta);
    CHECK(beta == -0.5);
    CHECK(delta > 0.0);
    CHECK(std::abs(delta) < std::abs(beta));

    beta = 0.0;
    delta = 0.0;
    project_shape(beta, delta);
    CHECK(std::abs(beta) >= kMinBeta);
  }

  TEST_CASE("membership properties over random cases") {
    support::Gen g(20261015);
    for (int c = 0; c < 2000; ++c) {
      ShapeParams p;
      p.m = g.uniform(-3.0, 3.0);
      p.sigma = g.uniform(0.05, 4.0);
      p.beta = g.sign() * g.uniform(0.1, 3.0);
      p.delta = std::abs(p.beta) * g.uniform(0.0, 0.99);
      const double x = p.m + p.sigma * g.uniform(-5.0, 5.0);

      const double lo = lmf(x, p);
      const double up = umf(x, p);
      CHECK(lo <= up);
      CHECK(lo >= 0.0);
      CHECK(up <= 1.0);

      for (double side : {-1.0, 1.0}) {
        const double edge = p.m + side * p.sigma;
        const double inside = std::nextafter(edge, p.m);
        const double outside = std::nextafter(edge, edge + side);
        CHECK(std::abs(umf(inside, p) - umf(outside, p)) < 1e-12);
        CHECK(std::abs(lmf(inside, p) - lmf(outside, p)) < 1e-12);
        CHECK(std::abs(umf(edge, p) - lmf(edge, p)) < 1e-12);
      }

      const double d = p.sigma * g.uniform(0.0, 4.0);
      CHECK(umf(p.m + d, p) == doctest::Approx(umf(p.m - d, p)).epsilon(1e-12));
      CHECK(lmf(p.m + d, p) == doctest::Approx(lmf(p.m - d, p)).epsilon(1e-12));

      ShapeParams flat = p;
      flat.delta = 0.0;
      CHECK(umf(x, flat) == mu_type1(x, flat));
      CHECK(lmf(x, flat) == mu_type1(x, flat));
    }
  }

  TEST_CASE("shape limits are monotone in beta") {
    support::Gen g(7);
    for (int c = 0; c < 1000; ++c) {
      ShapeParams a{0.0, 1.0, g.uniform(0.1, 3.0), 0.0};
      ShapeParams b = a;
      b.beta = a.beta + g.uniform(0.0, 2.0);
      const double near = g.uniform(-0.99, 0.99);
      const double far = g.sign() * g.uniform(1.01, 4.0);
      CHECK(mu_type1(near, b) >= mu_type1(near, a));
      CHECK(mu_type1(far, b) <= mu_type1(far, a));
    }
  }
}
