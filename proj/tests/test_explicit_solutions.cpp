#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "kpp/explicit_solutions.hpp"

using namespace kpp;

TEST_CASE("examples 1 and 2 solve their equations") {
  const Grid g = Grid::uniform(-20, -0.01, 2000);
  for (double n : {0.5, 1.0, 2.0}) {
    const auto r1 = verify_exact(example1(n), g, 1e-8);
    CHECK(r1.pass);
    CHECK(r1.lambda0 == doctest::Approx((n + 1) / n));
    const auto r2 = verify_exact(example2(n), g, 1e-8);
    CHECK(r2.pass);
    CHECK(r2.lambda0 == doctest::Approx((n + 1) / (2 * n)));
  }
}

TEST_CASE("example 1 profile values") {
  const auto tw = example1(1.0);
  CHECK(tw.f(-1.0) == doctest::Approx(0.5));
  CHECK(tw.f(0.5) == 0.0);
  CHECK(tw.f(-1e6) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("example 3 is Lipschitz only at lambda = -120") {
  const Grid g = Grid::uniform(-20, -0.01, 2000);
  const auto r = verify_exact(example3(-120.0), g, 1e-8);
  CHECK(r.pass);
  REQUIRE(r.fitted_exponent.has_value());
  CHECK(*r.lipschitz_at_zero);
  const auto off = verify_exact(example3(-119.0), g, 1e-8);
  CHECK_FALSE(off.pass);
  CHECK(*off.fitted_exponent == doctest::Approx(2.0 / 3.0).epsilon(0.05 / (2.0 / 3.0)));
  CHECK_FALSE(*off.lipschitz_at_zero);
}

TEST_CASE("inputs outside the support are rejected") {
  CHECK_THROWS_AS(verify_exact(example1(1.0), Grid::uniform(-1, 1, 11), 1e-8), std::invalid_argument);
  CHECK(parse_exact_name(exact_name(ExactName::EXAMPLE2)) == ExactName::EXAMPLE2);
  CHECK_THROWS(parse_exact_name("example9"));
}
