#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "kpp/centre_subspace.hpp"
#include "kpp/tw_bvp.hpp"

using namespace kpp;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

const BvpResult& semilinear_wave() {
  static const BvpResult r = [] {
    BvpConfig cfg;
    cfg.grid = Grid::uniform(-60, 60, 2401);
    return solve_tw(ModelSpec{Family::KPP4n, 0.0, 1.0, kDefaultEpsilon}, cfg);
  }();
  return r;
}

}  // namespace

TEST_CASE("periodic symbol about the zero state") {
  // B sin(w y) = (1 - w_h^4) sin(w y) for n = 0, lambda = 0, f = 0.
  const ModelSpec spec{Family::KPP4n, 0.0, 0.0, kDefaultEpsilon};
  const int N = 200;
  const double L = 20 * std::numbers::pi, h = L / N;
  const Grid g = Grid::uniform(0, L - h, N);
  const auto op = build_linearized(constant_profile(spec, g, 0.0), spec, Closure::PERIODIC);
  for (int mode : {1, 5, 13}) {
    const double w = 2 * std::numbers::pi * mode / L;
    std::vector<double> s(N);
    for (int i = 0; i < N; ++i) s[i] = std::sin(w * g.nodes[i]);
    const double wh = 2 * std::sin(w * h / 2) / h;
    const auto Bs = op.apply(s);
    for (int i = 0; i < N; ++i) CHECK(Bs[i] == doctest::Approx((1 - std::pow(wh, 4)) * s[i]).scale(1.0).epsilon(1e-10));
  }
}

TEST_CASE("zero maps to zero") {
  const auto op = build_linearized(semilinear_wave().profile, semilinear_wave().profile.spec);
  const auto z = op.apply(std::vector<double>(op.size(), 0.0));
  CHECK(max_abs(z) == 0.0);
}

TEST_CASE("f' is a discrete near-null vector") {
  REQUIRE(semilinear_wave().converged);
  const auto op = build_linearized(semilinear_wave().profile, semilinear_wave().profile.spec);
  const auto nc = null_vector_check(op);
  CHECK(nc.relative <= nc.bound(10.0));
  CHECK(nc.h_squared == doctest::Approx(op.h * op.h));
}

TEST_CASE("psi stage is linear and honours the constraint") {
  const auto op = build_linearized(semilinear_wave().profile, semilinear_wave().profile.spec);
  const auto one = solve_constrained(op, op.fprime);
  std::vector<double> twice = op.fprime;
  for (double& v : twice) v *= 2;
  const auto two = solve_constrained(op, twice);
  CHECK(one.constraint_residual <= 1e-10);
  CHECK(two.constraint_residual <= 1e-10);
  const double scale = max_abs(one.x);
  for (int i = 0; i < op.size(); i += 17) CHECK(two.x[i] == doctest::Approx(2 * one.x[i]).scale(scale).epsilon(1e-8));
  CHECK(one.condition > 1.0);
}

TEST_CASE("k = 0 gives phi = 0") {
  const auto op = build_linearized(semilinear_wave().profile, semilinear_wave().profile.spec);
  const auto pair = solve_expansion(op, 0.0);
  CHECK(max_abs(pair.phi) <= 1e-12);
  CHECK(pair.psi_solve.constraint_residual <= 1e-10);
  CHECK_FALSE(pair.constraint_note.empty());
}

TEST_CASE("ansatz defect decays at third order") {
  const auto op = build_linearized(semilinear_wave().profile, semilinear_wave().profile.spec);
  for (double k : {0.5, 1.5}) {
    const auto pair = solve_expansion(op, k);
    CHECK(pair.phi_solve.constraint_residual <= 1e-10);
    const auto d = ansatz_defect(op, pair);
    CHECK(d.exponent >= 2.7);
    CHECK(d.times.size() == 9);
  }
}

TEST_CASE("order check") {
  const auto c = order_check(1.5, 100.0);
  CHECK(c.consistent);
  CHECK(c.g1 == doctest::Approx(0.015));
  CHECK(c.g2 == doctest::Approx(1.5e-4));
  CHECK(c.eps == doctest::Approx(1e-4));
  CHECK(c.g1_squared == doctest::Approx(2.25e-4));
  CHECK(c.eps < c.g1);
}

TEST_CASE("families posed in f are rejected") {
  const ModelSpec spec{Family::TFE4, 1.0, 1.0, kDefaultEpsilon};
  const Grid g = Grid::uniform(-1, 1, 21);
  CHECK_THROWS_AS(build_linearized(constant_profile(spec, g, 0.0), spec), std::invalid_argument);
}
