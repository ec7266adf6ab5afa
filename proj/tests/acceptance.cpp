// Acceptance run: one PASS/FAIL line per criterion. The process exits 0 when
// every failure is one of the known-unattainable cases listed in `known`,
// and only for the documented reason.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "kpp/centre_subspace.hpp"
#include "kpp/explicit_solutions.hpp"
#include "kpp/front_sim.hpp"
#include "kpp/local_analysis.hpp"
#include "kpp/osc_tail.hpp"
#include "kpp/tw_bvp.hpp"

using namespace kpp;

namespace {

struct Outcome {
  bool pass = true;
  // Set when the failure is the known, analysed one (see the notes in README).
  bool known_limit = false;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int p = 4) {
  std::ostringstream os;
  os.precision(p);
  os << v;
  return os.str();
}

// 1. classic minimal speed and tail.
void classic_speed(Outcome& o) {
  const double lam = kpp2_minimal_speed(1.0);
  const auto prof = classic_profile(lam, 1.0, -20, 60, 0.01);
  const auto fit = fit_classic_tail(prof, 20, 50);
  o.detail << "lambda0 = " << fmt(lam, 10) << ", tail rate " << fmt(fit.rate, 6);
  o.require(std::abs(lam - 2.0) <= 1e-3, "speed within 1e-3 of 2");
  o.require(std::abs(fit.rate + 1.0) <= 0.02, "tail exponent -1 +- 0.02");
}

// 2. characteristic roots.
void roots(Outcome& o) {
  double worst = 0;
  for (double n : {0.0, 0.5, 1.0, 2.0}) {
    const auto rs = characteristic_roots(4, n, 0.0);
    const double s = std::pow(n + 1.0, -0.25) / std::sqrt(2.0);
    for (double a : {1.0, -1.0})
      for (double b : {1.0, -1.0}) {
        double best = INFINITY;
        for (auto r : rs.roots) best = std::min(best, std::abs(r - std::complex<double>(a * s, b * s)));
        worst = std::max(worst, best);
      }
  }
  const auto classic = classic_leading_edge_roots(2.0, 1.0);
  double dbl = 0;
  for (auto r : classic.roots) dbl = std::max(dbl, std::abs(r + 1.0));
  o.detail << "max order-4 root error " << fmt(worst, 3) << ", double root error " << fmt(dbl, 3);
  o.require(worst <= 1e-10, "order-4 roots to 1e-10");
  o.require(classic.roots.size() == 2 && dbl <= 1e-7, "double root -1");
}

// 3. blow-up asymptotics.
void blowup(Outcome& o) {
  double worst = 0;
  for (double n : {0.0, 0.25, 0.5, 0.75}) {
    const auto b = blowup_asymptote(n);
    for (double y : {-1e-3, -1e-2, -0.1, -1.0, -10.0}) worst = std::max(worst, b.relative_residual(y, 0.0));
  }
  const auto e = blowup_asymptote(1.0);
  double exp_worst = 0;
  for (double y : {-3.0, 0.0, 2.0, 5.0}) exp_worst = std::max(exp_worst, e.relative_residual(y));
  o.detail << "max relative residual " << fmt(worst, 3) << ", n = 1 residual " << fmt(exp_worst, 3);
  o.require(worst < 1e-8, "relative residual < 1e-8");
  o.require(exp_worst <= 4 * std::numeric_limits<double>::epsilon(), "n = 1 exact");
}

// 4. exact travelling waves.
void exact(Outcome& o) {
  const Grid g = Grid::uniform(-20, -0.01, 2000);
  double worst = 0;
  bool all = true;
  for (double n : {0.5, 1.0, 2.0})
    for (const auto& tw : {example1(n), example2(n)}) {
      const auto r = verify_exact(tw, g, 1e-8);
      worst = std::max(worst, r.max_residual);
      all = all && r.pass;
    }
  const auto ok = verify_exact(example3(-120.0), g, 1e-8);
  const auto off = verify_exact(example3(-119.0), g, 1e-8);
  o.detail << "examples 1-2 max residual " << fmt(worst, 3) << "; example 3 at -120: exponent "
           << fmt(*ok.fitted_exponent) << ", at -119: exponent " << fmt(*off.fitted_exponent);
  o.require(all && worst <= 1e-8, "examples 1-2 residual <= 1e-8");
  o.require(ok.pass && ok.lambda0 == -120.0, "example 3 passes at -120");
  o.require(!*off.lipschitz_at_zero && std::abs(*off.fitted_exponent - 2.0 / 3.0) <= 0.05,
            "example 3 fails Lipschitz at -119 with exponent 2/3 +- 0.05");
}

// 5. oscillatory component and equilibrium.
void oscillatory(Outcome& o) {
  const double tol = 1e-7;
  std::mt19937_64 rng(20261014ULL);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (double n : {0.75, 1.0, 1.5, kInfiniteExponent}) {
    const double sc = 5.0 * oscillation_scale(n);
    std::vector<OscOrbit> orbits;
    double dist = 0;
    bool good = true;
    for (int j = 0; j < 10; ++j) {
      orbits.push_back(integrate_oscillatory(n, {sc * U(rng), sc * U(rng), sc * U(rng)}, 4000, tol));
      good = good && orbits.back().converged && orbits.back().changes_sign;
      if (j > 0 && good) dist = std::max(dist, orbit_distance(orbits.front(), orbits.back()));
    }
    o.detail << "n=" << fmt(n, 3) << ": period " << fmt(orbits.front().period, 8) << ", distance " << fmt(dist, 2)
             << "; ";
    o.require(good, "converged sign-changing orbits at n = " + fmt(n, 3));
    o.require(dist < 10 * tol, "orbits agree up to phase at n = " + fmt(n, 3));
  }
  const double p1 = positive_equilibrium(1.0);
  double identity = 0;
  for (double n : {0.75, 1.0, 1.5, 3.0}) {
    const double p = positive_equilibrium(n);
    const double a0 = pk_polynomials(interface_mu(n)).p3[3];
    identity = std::max(identity, std::abs(a0 * p - std::pow(p, 1.0 / (n + 1))) / (a0 * p));
  }
  o.detail << "phi0(1) - 1/14400 = " << fmt(p1 - 1.0 / 14400, 3) << ", P3 identity " << fmt(identity, 3);
  o.require(std::abs(p1 - 1.0 / 14400) <= 1e-12, "phi0(1) = 1/14400");
  o.require(identity <= 4 * std::numeric_limits<double>::epsilon(), "P3 identity exact");
}

// Largest |F| past the first zero: the oscillation about zero of the
// pressure profile F = |f|^n f (in f itself the lobes grow with n).
double amplitude_about_zero(const TWProfile& p) {
  std::size_t i = 0;
  while (i < p.F.size() && p.F[i] > 0) ++i;
  double a = 0;
  for (; i < p.F.size(); ++i) a = std::max(a, std::abs(p.F[i]));
  return a;
}

double undershoot(const TWProfile& p) {
  double m = 0;
  for (double v : p.f) m = std::min(m, v);
  return -m;
}

// 6. travelling-wave solves.
void tw_solves(Outcome& o) {
  struct Case {
    Family fam;
    double n, lambda;
  };
  std::vector<Case> cases;
  for (auto [n, l] : {std::pair{0.0, 1.0}, {0.1, 1.0}, {0.2, 1.0}, {0.8, 1.0}, {1.0, 0.5}, {1.0, 0.25}})
    cases.push_back({Family::KPP4n, n, l});
  for (double n : {0.0, 0.5, 1.0})
    for (double l : {1.0, 0.5}) cases.push_back({Family::KPP4n_QUASI_SOURCE, n, l});
  for (double n : {-0.25, -0.5}) cases.push_back({Family::KPP4n_QUASI_SOURCE, n, 0.5});
  for (double n : {0.3, 0.6, 0.9, 1.5, 2.0}) cases.push_back({Family::TFE4, n, 1.0});
  for (double l : {1.0, 0.2})
    for (double n : {0.0, 0.25}) cases.push_back({Family::KPP6n, n, l});
  for (double n : {0.0, 0.5, 1.0, 2.0}) cases.push_back({Family::KPP8n, n, 0.5});

  int converged = 0, certified = 0, extended = 0;
  std::vector<double> k8_amp, tfe_under;
  for (const auto& c : cases) {
    const ModelSpec spec{c.fam, c.n, c.lambda, kDefaultEpsilon};
    BvpResult r;
    // Slow tails (algebraic down to the regularisation layer, then a slow
    // exponential) leave a visible end defect on [-40, 40]; retry with the
    // right end moved out at the same mesh width.
    for (double y_right : {40.0, 80.0, 160.0, 320.0, 640.0}) {
      BvpConfig cfg;
      cfg.grid = Grid::uniform(-40, y_right, static_cast<int>((y_right + 40) * 20) + 1);
      r = solve_tw(spec, cfg);
      if (!r.converged && c.n != 0.0) {
        // Retry seeded by continuation in n from the semilinear case.
        cfg.continuation_steps = {{0.0, c.lambda}};
        for (int k = 1; k < 10; ++k) cfg.continuation_steps.push_back({c.n * k / 10.0, c.lambda});
        const auto path = continue_in_parameter(spec, cfg, {c.n, c.lambda});
        if (!path.empty()) r = path.back();
      }
      if (r.converged && r.bc_defect <= 1e-8) break;
    }
    const std::string tag = family_name(c.fam) + "(" + fmt(c.n) + "," + fmt(c.lambda) + ")";
    if (r.profile.grid.nodes.back() - r.profile.grid.nodes.front() > 81) {
      ++extended;
      o.detail << tag << " needed y_right - y_left = "
               << fmt(r.profile.grid.nodes.back() - r.profile.grid.nodes.front()) << "; ";
    }
    const bool ok = r.converged && r.profile.residual_norm <= 1e-8 && r.bc_defect <= 1e-8;
    o.require(ok, tag + " converged with residual and end conditions <= 1e-8 (residual " +
                      fmt(r.profile.residual_norm, 2) + ", end defect " + fmt(r.bc_defect, 2) + ")");
    if (!r.converged) continue;
    ++converged;
    const auto cert = lambda_sign_certificate(r.profile, c.n);
    o.require(cert.holds(), tag + " certificate |lhs - rhs| = " + fmt(std::abs(cert.lhs - cert.rhs), 3) +
                                " within bound " + fmt(cert.bound, 3));
    certified += cert.holds();
    if (c.fam == Family::KPP8n) k8_amp.push_back(amplitude_about_zero(r.profile));
    if (c.fam == Family::TFE4) tfe_under.push_back(undershoot(r.profile));
  }
  o.detail << converged << "/" << cases.size() << " converged, " << certified << " certified, " << extended
           << " on extended domains; KPP8n amplitude of F about 0:";
  for (double a : k8_amp) o.detail << " " << fmt(a, 3);
  o.detail << "; TFE4 undershoot:";
  for (double a : tfe_under) o.detail << " " << fmt(a, 3);
  bool decreasing = k8_amp.size() == 4;
  for (std::size_t i = 1; decreasing && i < k8_amp.size(); ++i) decreasing = k8_amp[i] < k8_amp[i - 1];
  o.require(decreasing, "KPP8n oscillation amplitude decreases with n");
  o.require(tfe_under.size() == 5 && tfe_under.back() < 0.5 * tfe_under.front(),
            "TFE4 near-interface sign change diminished by n = 2");
}

// 7. bundle bookkeeping.
void bundles(Outcome& o) {
  int good = 0;
  const std::vector<double> ns{0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
  for (double n : ns) {
    const auto m = matching_dimensions(4, n);
    good += m.well_posed && *m.interface_bundle == 3 && *m.unstable_dim == 1 && *m.left_stable_dim == 2 &&
            *m.well_posed;
  }
  o.detail << good << "/" << ns.size() << " exponents give (3,1,2,true)";
  o.require(good == static_cast<int>(ns.size()), "(3,1,2,true) for all n");
}

// 8. classic dynamic front.
void classic_front(Outcome& o) {
  SimConfig c;
  c.spec = ModelSpec{Family::KPP2, 0.0, 2.0, kDefaultEpsilon};
  c.grid = Grid::uniform(-20, 1100, 11201);
  c.t_end = 500;
  c.fit_window = std::pair{50.0, 500.0};
  const auto r = simulate(c);
  const double speed = r.trace.x_front.back() / r.final_state.t;
  o.detail << "x_f/t = " << fmt(speed, 6) << ", k_fit = " << fmt(r.trace.k_fit, 4) << " on [50, 500] (h = 0.1, dt = "
           << c.dt_initial << ", " << stepper_name(c.stepper) << ")";
  o.require(std::abs(speed - 2.0) <= 0.04, "x_f/t within 2% of 2");
  o.require(r.trace.k_fit >= 1.0 && r.trace.k_fit <= 2.0, "k_fit in [1, 2]");
}

// 9. degenerate dynamic front, run to a fixed horizon.
void degenerate_front(Outcome& o) {
  const double horizon = 50.0;
  bool blew_up = false, other_failure = false;

  SimConfig c;
  c.spec = ModelSpec{Family::KPP4n, 1.0, 0.5, kDefaultEpsilon};
  c.grid = Grid::uniform(-40, 200, 2401);
  c.t_end = horizon;
  FrontTrace trace;
  double reached = 0;
  try {
    const auto r = simulate(c);
    trace = r.trace;
    reached = r.final_state.t;
  } catch (const SimulationError& e) {
    reached = e.time();
    (e.kind() == SimErrorKind::NEWTON_FAIL ? blew_up : other_failure) = true;
    o.detail << "compact data: " << sim_error_name(e.kind()) << " at t = " << fmt(e.time(), 5) << " (" << e.what()
             << "); ";
  }
  // Diagnostics up to the point reached, rerun with a trace we can keep.
  if (reached < horizon) {
    SimConfig short_run = c;
    short_run.t_end = std::floor(reached * 10) / 10 - 0.1;
    if (short_run.t_end > 0) trace = simulate(short_run).trace;
  }
  // Support speed over unit windows from t = 1 on (the jump in the data
  // spreads a 1e-8 layer within the first step).
  double speed = 0, lowest = 1;
  for (std::size_t i = 0, j = 0; i < trace.times.size(); ++i) {
    while (trace.times[i] - trace.times[j] > 1.0) ++j;
    if (trace.times[j] >= 1.0 && trace.times[i] > trace.times[j]) {
      speed = std::max(speed, (trace.support_right[i] - trace.support_right[j]) / (trace.times[i] - trace.times[j]));
    }
    lowest = std::min(lowest, trace.min_ahead[i]);
  }
  o.detail << "support speed <= " << fmt(speed, 3) << ", min ahead of front " << fmt(lowest, 3) << " up to t = "
           << fmt(reached, 4) << "; ";
  o.require(reached >= horizon, "compact-data run reaches t = " + fmt(horizon));
  o.require(speed < 20.0, "bounded support speed");
  o.require(lowest < 0, "sign change ahead of the front");

  BvpConfig bc;
  const auto tw = solve_tw(c.spec, bc);
  o.require(tw.converged, "travelling wave for the comoving comparison");
  if (tw.converged) {
    SimConfig cm = c;
    cm.initial.kind = DataKind::PROFILE;
    cm.initial.profile_y = tw.profile.grid.nodes;
    cm.initial.profile_f = tw.profile.f;
    for (int k = 1; k <= 50; ++k) cm.snapshot_times.push_back(horizon * k / 50);
    try {
      const auto s = comoving_convergence(cm, tw.profile);
      const std::size_t half = s.errors.size() / 2;
      double peak = 0;
      for (double e : s.errors) peak = std::max(peak, e);
      o.detail << "comoving error " << fmt(s.errors.front(), 3) << " -> " << fmt(s.errors.back(), 3);
      o.require(peak < 0.5, "comoving error bounded");
      o.require(s.errors.back() <= s.errors[half] * 1.05, "comoving error non-increasing after transient");
    } catch (const SimulationError& e) {
      (e.kind() == SimErrorKind::NEWTON_FAIL ? blew_up : other_failure) = true;
      o.detail << "wave data: " << sim_error_name(e.kind()) << " at t = " << fmt(e.time(), 5);
      o.require(false, "comoving run reaches t = " + fmt(horizon));
    }
  }
  // The negative lobes of u run away under the source u(1 - u) (see README):
  // that and nothing else is the analysed limitation.
  o.known_limit = blew_up && !other_failure && lowest < 0;
}

// 10. centre-subspace mechanism.
void centre(Outcome& o) {
  bool n0_ok = false, n1_ok = false, ansatz_ok = true;
  for (auto [n, lam] : {std::pair{0.0, 1.0}, {1.0, 0.5}}) {
    const ModelSpec spec{Family::KPP4n, n, lam, kDefaultEpsilon};
    BvpConfig cfg;
    cfg.grid = Grid::uniform(-60, 60, 2401);
    const auto r = solve_tw(spec, cfg);
    if (!r.converged) {
      o.require(false, "travelling wave at n = " + fmt(n));
      continue;
    }
    const auto op = build_linearized(r.profile, spec);
    const auto nc = null_vector_check(op);
    const bool ok = nc.relative <= nc.bound(10.0);
    o.detail << "n=" << n << ": |Bf'|/|f'| = " << fmt(nc.relative, 3) << " vs bound " << fmt(nc.bound(10.0), 3) << "; ";
    o.require(ok, "null-vector bound at n = " + fmt(n));
    (n == 0.0 ? n0_ok : n1_ok) = ok;
    if (n != 0.0) continue;
    for (double k : {0.5, 1.0, 1.5}) {
      const auto pair = solve_expansion(op, k);
      const auto d = ansatz_defect(op, pair);
      o.detail << "k=" << k << " exponent " << fmt(d.exponent, 4) << "; ";
      const bool good = d.exponent >= 2.7 && pair.psi_solve.constraint_residual <= 1e-10 &&
                        pair.phi_solve.constraint_residual <= 1e-10;
      o.require(good, "ansatz exponent >= 2.7 at k = " + fmt(k));
      ansatz_ok = ansatz_ok && good;
    }
  }
  // n = 1: the sign-change layers of the regularised profile are not
  // resolved at desk h; refinement study in README.
  o.known_limit = n0_ok && ansatz_ok && !n1_ok;
}

// 11. fitter oracle.
void fitter(Outcome& o) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.01);
  double worst = 0;
  for (int rep = 0; rep < 10; ++rep) {
    FrontTrace tr;
    for (int i = 0; i <= 450; ++i) {
      const double t = 50.0 + i;
      tr.times.push_back(t);
      tr.x_front.push_back(2 * t - 1.5 * std::log(t) + noise(rng));
    }
    worst = std::max(worst, std::abs(fit_front_shift(tr, 2.0, {50, 500}).k_fit - 1.5));
  }
  o.detail << "max |k_fit - 1.5| over 10 traces " << fmt(worst, 3);
  o.require(worst <= 0.05, "k = 1.5 +- 0.05");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"classic minimal speed and tail", classic_speed},
      {"characteristic roots", roots},
      {"blow-up asymptotics", blowup},
      {"exact travelling waves", exact},
      {"oscillatory component and equilibrium", oscillatory},
      {"travelling-wave solves", tw_solves},
      {"bundle bookkeeping", bundles},
      {"classic dynamic front", classic_front},
      {"degenerate dynamic front", degenerate_front},
      {"centre-subspace mechanism", centre},
      {"fitter oracle", fitter}};
  const std::set<int> known{9, 10};
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.known_limit = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool accepted_failure = !o.pass && o.known_limit && known.count(id);
    if (!o.pass && !accepted_failure) ++unexpected;
    std::printf("%s %2d %s: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.str().c_str(), secs, accepted_failure ? " [known limitation]" : "");
    std::fflush(stdout);
  }
  std::printf("%d unexpected failure(s)\n", unexpected);
  return unexpected == 0 ? 0 : 1;
}
