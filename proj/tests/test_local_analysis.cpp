#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "kpp/local_analysis.hpp"

using namespace kpp;

namespace {

bool contains(const RootSet& rs, std::complex<double> z, double tol) {
  return std::any_of(rs.roots.begin(), rs.roots.end(), [&](auto r) { return std::abs(r - z) <= tol; });
}

}  // namespace

TEST_CASE("polynomial roots of a known cubic") {
  // (x - 1)(x - 2)(x + 3) = x^3 - 7x + 6.
  const auto rs = polynomial_roots({1, 0, -7, 6});
  CHECK(rs.degree() == 3);
  for (double r : {1.0, 2.0, -3.0}) CHECK(contains(rs, r, 1e-12));
  CHECK(rs.n_stable == 2);
  CHECK(rs.n_unstable == 1);
  const auto c = expand_roots(rs.roots, 1.0);
  CHECK(c[2].real() == doctest::Approx(-7.0));
  CHECK(c[3].real() == doctest::Approx(6.0));
}

TEST_CASE("characteristic polynomials by order") {
  CHECK(characteristic_polynomial(2, 0, 2) == std::vector<double>{1, 2, -1});
  CHECK(characteristic_polynomial(4, 1, 0.5) == std::vector<double>{2, 0, 0, -0.5, 1});
  const auto p6 = characteristic_polynomial(6, 0, 1);
  CHECK(p6.front() == 1.0);
  CHECK(p6[5] == 1.0);
  CHECK(p6.back() == -1.0);
}

TEST_CASE("order-4 roots at lambda = 0") {
  for (double n : {0.0, 0.5, 1.0, 2.0}) {
    const auto rs = characteristic_roots(4, n, 0.0);
    const double s = std::pow(n + 1.0, -0.25) / std::sqrt(2.0);
    for (double a : {1.0, -1.0})
      for (double b : {1.0, -1.0}) CHECK(contains(rs, {a * s, b * s}, 1e-10));
    CHECK(rs.n_stable == 2);
    CHECK(rs.n_center == 0);
  }
}

TEST_CASE("classic leading edge has a double root at lambda = 2") {
  const auto rs = classic_leading_edge_roots(2.0, 1.0);
  REQUIRE(rs.roots.size() == 2);
  for (auto r : rs.roots) CHECK(std::abs(r + 1.0) <= 1e-7);
}

TEST_CASE("blow-up asymptotes solve the truncated equation") {
  for (double n : {0.0, 0.25, 0.5, 0.75}) {
    const auto b = blowup_asymptote(n);
    CHECK(b.regime == BlowupRegime::FINITE_BLOWUP);
    CHECK(b.exponent == doctest::Approx(4 * (n + 1) / (1 - n)));
    for (double y : {-0.01, -0.5, -3.0}) CHECK(b.relative_residual(y, 0.0) < 1e-8);
  }
  const auto e = blowup_asymptote(1.0);
  CHECK(e.regime == BlowupRegime::EXPONENTIAL);
  CHECK(e.value(0.7) == -std::exp(-0.7));
  CHECK(e.relative_residual(2.0) == 0.0);
  const auto g = blowup_asymptote(3.0);
  CHECK(g.regime == BlowupRegime::ALGEBRAIC_GROWTH);
  CHECK(g.relative_residual(-4.0) < 1e-8);
  CHECK_THROWS_AS(blowup_asymptote(-0.1), std::invalid_argument);
}

TEST_CASE("matching dimensions for order 4") {
  for (double n : {0.0, 0.3, 1.0, 2.5}) {
    const auto md = matching_dimensions(4, n);
    REQUIRE(md.well_posed.has_value());
    CHECK(*md.interface_bundle == 3);
    CHECK(*md.unstable_dim == 1);
    CHECK(*md.left_stable_dim == 2);
    CHECK(*md.well_posed);
  }
  CHECK_FALSE(matching_dimensions(8, 1.0).well_posed.has_value());
}

TEST_CASE("classic minimal speed scales with the source slope") {
  CHECK(kpp2_minimal_speed(1.0) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(kpp2_minimal_speed(4.0) == doctest::Approx(4.0).epsilon(1e-4));
}

TEST_CASE("minimal wave has the y e^{-y} tail") {
  const double lam = kpp2_minimal_speed(1.0);
  const auto prof = classic_profile(lam, 1.0, -20, 60, 0.01);
  CHECK(prof.monotone);
  const auto fit = fit_classic_tail(prof, 20, 50);
  CHECK(fit.rate == doctest::Approx(-1.0).epsilon(0.02));
  CHECK(fit.power > 0.5);
}
