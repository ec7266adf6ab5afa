#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "kpp/front_sim.hpp"
#include "kpp/local_analysis.hpp"

using namespace kpp;

namespace {

SimConfig base(Family fam, double n, double x_right, double t_end) {
  SimConfig c;
  c.spec = ModelSpec{fam, n, 2.0, kDefaultEpsilon};
  c.grid = Grid::uniform(-20, x_right, static_cast<int>(std::lround((x_right + 20) / 0.1)) + 1);
  c.t_end = t_end;
  return c;
}

}  // namespace

TEST_CASE("constant states are fixed points of every stepper") {
  for (Family fam : {Family::KPP2, Family::KPP4n, Family::KPP6n})
    for (double level : {0.0, 1.0})
      for (Stepper st : {Stepper::BACKWARD_EULER_NEWTON, Stepper::BDF2_NEWTON, Stepper::BDF3_NEWTON}) {
        SimConfig c = base(fam, fam == Family::KPP2 ? 0.0 : 1.0, 20, 1.0);
        c.stepper = st;
        c.initial.kind = DataKind::CONSTANT;
        c.initial.value = level;
        c.grid = Grid::uniform(-20, 20, 201);
        const auto r = simulate(c);
        for (double u : r.final_state.u) REQUIRE(std::abs(u - level) <= 1e-14);
      }
}

TEST_CASE("front locator on a linear ramp") {
  const std::vector<double> x{0, 1, 2, 3, 4, 5}, u{1, 1, 0.75, 0.25, 0, 0};
  const auto p = front_position(x, u);
  REQUIRE(p.has_value());
  CHECK(*p == doctest::Approx(2.5).epsilon(1e-2));
  CHECK_FALSE(front_position(x, std::vector<double>(6, 0.0)).has_value());
}

TEST_CASE("shift fitter recovers a manufactured log shift") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.01);
  FrontTrace tr;
  for (int i = 0; i <= 450; ++i) {
    const double t = 50 + i;
    tr.times.push_back(t);
    tr.x_front.push_back(2 * t - 1.5 * std::log(t) + 3 + noise(rng));
  }
  const auto fit = fit_front_shift(tr, 2.0, {50, 500});
  CHECK(fit.k_fit == doctest::Approx(1.5).epsilon(0.05 / 1.5));
  CHECK(fit.intercept == doctest::Approx(3.0).epsilon(0.1));
  CHECK(fit.points == 451);
  CHECK_THROWS_AS(fit_front_shift(tr, 2.0, {100, 101}), std::invalid_argument);
}

TEST_CASE("classic front stays in [0, 1] and moves right") {
  SimConfig c = base(Family::KPP2, 0.0, 120, 40);
  c.snapshot_times = {10, 20, 40};
  int seen = 0;
  const auto r = simulate(c, [&](const Snapshot& s) {
    ++seen;
    for (double u : s.u) {
      REQUIRE(u >= -1e-12);
      REQUIRE(u <= 1 + 1e-12);
    }
  });
  CHECK(seen == 3);
  REQUIRE(r.trace.times.size() == r.trace.x_front.size());
  CHECK(r.trace.x_front.back() / r.final_state.t == doctest::Approx(1.85).epsilon(0.05));
  for (std::size_t i = 1; i < r.trace.times.size(); ++i) CHECK(r.trace.times[i] > r.trace.times[i - 1]);
}

TEST_CASE("a faster stable wave translates without a log shift") {
  const double lam = 2.5;
  const auto prof = classic_profile(lam, 1.0, -20, 400, 0.05);
  SimConfig c = base(Family::KPP2, 0.0, 320, 100);
  c.initial.kind = DataKind::PROFILE;
  c.initial.profile_y = prof.y;
  c.initial.profile_f = prof.f;
  c.lambda0 = lam;
  c.fit_window = std::pair{20.0, 100.0};
  const auto r = simulate(c);
  REQUIRE(r.trace.fitted);
  CHECK(std::abs(r.trace.k_fit) < 0.1);
}

TEST_CASE("degenerate data keeps a bounded support speed at first") {
  SimConfig c = base(Family::KPP4n, 1.0, 60, 2.0);
  const auto r = simulate(c);
  CHECK(r.trace.support_right.back() < 30);
  double lowest = 1;
  for (double v : r.trace.min_ahead) lowest = std::min(lowest, v);
  CHECK(lowest < 0);
}

TEST_CASE("the run stops when the front reaches the right end") {
  SimConfig c = base(Family::KPP2, 0.0, 30, 50);
  CHECK_THROWS_AS(simulate(c), SimulationError);
  try {
    simulate(c);
  } catch (const SimulationError& e) {
    CHECK(e.kind() == SimErrorKind::FRONT_EXITED);
  }
}

TEST_CASE("explicit steps obey the stability guard") {
  SimConfig c = base(Family::KPP4n, 0.0, 20, 0.2);
  c.stepper = Stepper::EXPLICIT_GUARDED;
  c.grid = Grid::uniform(-20, 20, 201);
  const double h = c.grid.h();
  c.dt_initial = 2 * c.explicit_safety * std::pow(h, 4);
  CHECK_THROWS_AS(simulate(c), std::invalid_argument);
  c.dt_initial = 0.5 * c.explicit_safety * std::pow(h, 4);
  const auto r = simulate(c);
  CHECK(r.stats.dt_largest <= c.explicit_safety * std::pow(h, 4) * 1.0001);
  ModelSpec pme{Family::TFE4, 1.0, 1.0, kDefaultEpsilon};
  c.spec = pme;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("step refinement changes the front position at second order") {
  double xf[3];
  const double dts[3] = {0.2, 0.1, 0.05};
  for (int k = 0; k < 3; ++k) {
    SimConfig c = base(Family::KPP2, 0.0, 80, 20);
    c.dt_initial = dts[k];
    c.stepper = Stepper::BDF2_NEWTON;
    xf[k] = simulate(c).trace.x_front.back();
  }
  const double ratio = (xf[0] - xf[1]) / (xf[1] - xf[2]);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("names parse back") {
  for (Stepper s : {Stepper::BACKWARD_EULER_NEWTON, Stepper::BDF2_NEWTON, Stepper::BDF3_NEWTON,
                    Stepper::EXPLICIT_GUARDED})
    CHECK(parse_stepper(stepper_name(s)) == s);
  for (DataKind d : {DataKind::HEAVISIDE, DataKind::SMOOTHED_STEP, DataKind::STEP_WITH_TAIL, DataKind::PROFILE,
                     DataKind::CONSTANT})
    CHECK(parse_data_kind(data_kind_name(d)) == d);
}
