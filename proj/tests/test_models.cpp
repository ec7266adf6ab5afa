#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "kpp/fd.hpp"
#include "kpp/models.hpp"

using namespace kpp;

TEST_CASE("family names round-trip and aliases resolve") {
  for (Family f : {Family::KPP2, Family::KPP2_PME, Family::KPP4n, Family::KPP4n_QUASI_SOURCE, Family::TFE4,
                   Family::KPP6n, Family::KPP8n})
    CHECK(parse_family(family_name(f)) == f);
  CHECK(parse_family("kpp4") == Family::KPP4n);
  CHECK(parse_family("QUASI") == Family::KPP4n_QUASI_SOURCE);
  CHECK_THROWS_AS(parse_family("kpp5"), std::invalid_argument);
}

TEST_CASE("orders and principal signs") {
  CHECK(family_order(Family::KPP2) == 2);
  CHECK(family_order(Family::KPP6n) == 6);
  CHECK(principal_sign(Family::KPP2) == -1);
  CHECK(principal_sign(Family::KPP4n) == 1);
  CHECK(principal_sign(Family::KPP6n) == -1);
  CHECK(principal_sign(Family::KPP8n) == 1);
  CHECK(solved_in_f(Family::TFE4));
  CHECK_FALSE(solved_in_f(Family::KPP4n));
}

TEST_CASE("spec validation and record round trip") {
  ModelSpec s{Family::KPP6n, 0.25, 0.2, 1e-4};
  CHECK_NOTHROW(s.validate());
  const ModelSpec t = ModelSpec::from_record(s.to_record());
  CHECK(t.family == s.family);
  CHECK(t.n == s.n);
  CHECK(t.lambda == s.lambda);
  CHECK(t.epsilon == s.epsilon);
  ModelSpec bad = s;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("power map is normalised and invertible") {
  for (double n : {0.0, 0.5, 1.0, 2.0}) {
    const PowerMap m(n, 1e-3);
    CHECK(m.f(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    for (double F : {-0.7, -1e-4, 0.0, 3e-5, 0.2, 1.3}) CHECK(m.F(m.f(F)) == doctest::Approx(F).epsilon(1e-10));
    const double d = 1e-6;
    CHECK(m.df(0.3) == doctest::Approx((m.f(0.3 + d) - m.f(0.3 - d)) / (2 * d)).epsilon(1e-7));
  }
  // eps -> 0 limit is the plain inverse of |f|^n f.
  const PowerMap plain(1.0, 0.0);
  CHECK(plain.f(0.25) == doctest::Approx(0.5));
  CHECK(plain.f(-0.25) == doctest::Approx(-0.5));
  CHECK(f_from_F(F_from_f(-0.3, 2.0), 2.0) == doctest::Approx(-0.3));
}

TEST_CASE("n = 0 residual is the semilinear residual") {
  const ModelSpec spec{Family::KPP4n, 0.0, 0.7, 0.0};
  const Grid g = Grid::uniform(-3, 3, 121);
  TWProfile p = constant_profile(spec, g, 0.0);
  for (int i = 0; i < g.size(); ++i) p.F[i] = 0.5 * (1 - std::tanh(g.nodes[i]));
  p.sync_from_F();
  const double h = g.h();
  for (int i = 2; i < g.size() - 2; i += 7) {
    const double F = p.F[i];
    const double expect = fd::derivative(p.F, i, 4, h) - 0.7 * fd::derivative(p.F, i, 1, h) - F * (1 - F);
    CHECK(tw_residual(spec, p, i) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("exponential blow-up profile solves the truncated equation") {
  // n = 1, F = -e^{-y}, lambda = 0, source -|F|.
  const ModelSpec spec{Family::KPP4n, 1.0, 0.0, 0.0};
  const Grid g = Grid::uniform(-2, 2, 401);
  TWProfile p = constant_profile(spec, g, 0.0);
  for (int i = 0; i < g.size(); ++i) p.F[i] = -std::exp(-g.nodes[i]);
  p.sync_from_F();
  const SourceFn trunc = [](double F) { return -std::abs(F); };
  const double h2 = g.h() * g.h();
  for (int i = 2; i < g.size() - 2; i += 20)
    CHECK(std::abs(tw_residual(spec, p, i, &trunc)) <= 2 * h2 * std::abs(p.F[i]));
  CHECK_THROWS_AS(tw_residual(spec, p, 1, &trunc), std::out_of_range);
}

TEST_CASE("closed-form certificate right-hand side") {
  CHECK(certificate_rhs_closed_form(Family::KPP4n, 0.0) == doctest::Approx(-1.0 / 6.0));
  CHECK(certificate_rhs_closed_form(Family::KPP4n, 1.0) == doctest::Approx(-2.0 * (1.0 / 3 - 1.0 / 4)));
  CHECK(certificate_rhs_closed_form(Family::KPP4n_QUASI_SOURCE, 2.0) == doctest::Approx(-1.0 / 6.0));
}

TEST_CASE("grid helpers") {
  const Grid g = Grid::uniform(-1, 1, 21);
  CHECK(g.is_uniform());
  CHECK(g.h() == doctest::Approx(0.1));
  CHECK(g.nearest(0.26) == 13);
}
