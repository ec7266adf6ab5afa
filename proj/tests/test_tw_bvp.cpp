#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>

#include "kpp/tw_bvp.hpp"

using namespace kpp;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Cubic Lagrange interpolation on a uniform grid.
double interp(const std::vector<double>& x, const std::vector<double>& v, double y) {
  const double h = x[1] - x[0];
  const int n = static_cast<int>(x.size());
  int i = static_cast<int>(std::floor((y - x[0]) / h)) - 1;
  i = std::clamp(i, 0, n - 4);
  double s = 0;
  for (int a = 0; a < 4; ++a) {
    double w = 1;
    for (int b = 0; b < 4; ++b)
      if (b != a) w *= (y - x[i + b]) / (x[i + a] - x[i + b]);
    s += w * v[i + a];
  }
  return s;
}

// Semilinear F'''' = lambda F' + F(1 - F) with fourth-order stencils and
// constant extension past the ends, by plain Newton.
std::vector<double> semilinear_reference(double lambda, const std::vector<double>& x, std::vector<double> F) {
  const int N = static_cast<int>(x.size());
  const double h = x[1] - x[0];
  const double d4[7] = {-1.0 / 6, 2.0, -13.0 / 2, 28.0 / 3, -13.0 / 2, 2.0, -1.0 / 6};
  const double d1[5] = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
  auto value = [&](int j) { return j < 0 ? 1.0 : (j >= N ? 0.0 : F[j]); };
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd R(N);
    std::vector<Eigen::Triplet<double>> T;
    for (int i = 0; i < N; ++i) {
      double a4 = 0, a1 = 0;
      for (int k = -3; k <= 3; ++k) {
        a4 += d4[k + 3] * value(i + k);
        if (std::abs(k) <= 2) a1 += d1[k + 2] * value(i + k);
        const int j = i + k;
        if (j < 0 || j >= N) continue;
        double c = d4[k + 3] / std::pow(h, 4);
        if (std::abs(k) <= 2) c -= lambda * d1[k + 2] / h;
        if (k == 0) c -= 1.0 - 2.0 * F[i];
        T.emplace_back(i, j, c);
      }
      R[i] = a4 / std::pow(h, 4) - lambda * a1 / h - F[i] * (1.0 - F[i]);
    }
    Eigen::SparseMatrix<double> J(N, N);
    J.setFromTriplets(T.begin(), T.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
    const Eigen::VectorXd dF = lu.solve(R);
    for (int i = 0; i < N; ++i) F[i] -= dF[i];
    if (dF.cwiseAbs().maxCoeff() < 1e-13) break;
  }
  return F;
}

BvpResult solve(Family fam, double n, double lambda, double L = 40, int N = 1601) {
  BvpConfig cfg;
  cfg.grid = Grid::uniform(-L, L, N);
  return solve_tw(ModelSpec{fam, n, lambda, kDefaultEpsilon}, cfg);
}

}  // namespace

TEST_CASE("KPP4n n = 0 converges to a normalised profile") {
  const auto r = solve(Family::KPP4n, 0.0, 1.0);
  REQUIRE(r.converged);
  CHECK(r.profile.residual_norm <= 1e-8);
  CHECK(r.bc_defect <= 1e-8);
  const auto& p = r.profile;
  CHECK(interp(p.grid.nodes, p.f, 0.0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(p.f.front() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(p.f.back()) <= 1e-8);
  CHECK(lambda_sign_certificate(p, 0.0).holds());
}

TEST_CASE("n = 0 agrees with an independent semilinear solver") {
  // Two trapezoidal solves extrapolated in h against a fourth-order reference.
  const double L = 30.0;
  const auto a = solve(Family::KPP4n, 0.0, 1.0, L, 2401);
  const auto b = solve(Family::KPP4n, 0.0, 1.0, L, 4801);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  const Grid ref = Grid::uniform(-L, L, 6001);
  std::vector<double> guess(ref.size());
  for (int i = 0; i < ref.size(); ++i) guess[i] = interp(b.profile.grid.nodes, b.profile.F, ref.nodes[i] - b.shift);
  const auto F = semilinear_reference(1.0, ref.nodes, guess);
  std::vector<double> y = ref.nodes;
  const auto c = leftmost_down_crossing(y, F, 0.5);
  REQUIRE(c.has_value());
  for (double& v : y) v -= *c;
  double raw = 0, extrapolated = 0;
  for (int i = 0; i < a.profile.grid.size(); ++i) {
    const double ya = a.profile.grid.nodes[i];
    if (std::abs(ya) > 20) continue;
    const double da = a.profile.F[i] - interp(y, F, ya);
    const double db = interp(b.profile.grid.nodes, b.profile.F, ya) - interp(y, F, ya);
    raw = std::max(raw, std::abs(db));
    extrapolated = std::max(extrapolated, std::abs((4 * db - da) / 3));
  }
  MESSAGE("raw " << raw << " extrapolated " << extrapolated);
  CHECK(raw <= 10 * std::pow(b.profile.grid.h(), 2));
  CHECK(extrapolated <= 1e-6);
}

TEST_CASE("degenerate and higher-order cases converge with valid certificates") {
  for (auto [fam, n, lam] : {std::tuple{Family::KPP4n, 1.0, 0.5}, std::tuple{Family::KPP8n, 0.5, 0.5},
                             std::tuple{Family::KPP6n, 0.25, 1.0}}) {
    const auto r = solve(fam, n, lam);
    CHECK_MESSAGE(r.converged, family_name(fam) << " n=" << n);
    if (!r.converged) continue;
    CHECK(r.profile.residual_norm <= 1e-8);
    CHECK(lambda_sign_certificate(r.profile, n).holds());
  }
}

TEST_CASE("exhausted ladder reports a failure kind") {
  BvpConfig cfg;
  cfg.max_newton_iters = 1;
  cfg.allow_pin = cfg.allow_projection = cfg.allow_homotopy = false;
  const auto r = solve_tw(ModelSpec{Family::KPP4n, 1.0, 0.5, kDefaultEpsilon}, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.failure_kind.has_value());
}

TEST_CASE("continuation reaches the target through waypoints") {
  BvpConfig cfg;
  cfg.continuation_steps = {{0.0, 1.0}, {0.1, 1.0}};
  const auto path = continue_in_parameter(ModelSpec{Family::KPP4n, 0.0, 1.0, kDefaultEpsilon}, cfg, {0.2, 1.0});
  REQUIRE_FALSE(path.empty());
  CHECK(path.back().converged);
  CHECK(path.back().profile.spec.n == doctest::Approx(0.2));
  CHECK_FALSE(path.back().failed_waypoint.has_value());
}

TEST_CASE("crossing locator and normalisation") {
  const std::vector<double> x{0, 1, 2, 3, 4}, v{1, 0.8, 0.6, 0.4, 0.2};
  const auto c = leftmost_down_crossing(x, v, 0.5);
  REQUIRE(c.has_value());
  CHECK(*c == doctest::Approx(2.5));
  CHECK_FALSE(leftmost_down_crossing(x, v, 2.0).has_value());

  const auto r = solve(Family::KPP4n, 0.0, 1.0);
  TWProfile p = r.profile;
  for (double& y : p.grid.nodes) y += 0.37;
  const double shift = normalize_profile(p);
  CHECK(shift == doctest::Approx(0.37).epsilon(1e-9));
  CHECK(p.grid.nodes[0] == doctest::Approx(r.profile.grid.nodes[0]).epsilon(1e-12));
}

TEST_CASE("profile CSV carries the header and one row per node") {
  const auto r = solve(Family::KPP4n, 0.0, 1.0, 10, 201);
  std::ostringstream os;
  write_bvp_csv(os, r, BvpConfig{});
  const std::string s = os.str();
  CHECK(s.find("y,F,f,residual") != std::string::npos);
  CHECK(max_abs(r.profile.f) <= 1.2);
}
