#include <cmath>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "cli/cli.hpp"
#include "kpp/centre_subspace.hpp"
#include "kpp/explicit_solutions.hpp"
#include "kpp/front_sim.hpp"
#include "kpp/local_analysis.hpp"
#include "kpp/osc_tail.hpp"
#include "kpp/tw_bvp.hpp"

namespace kpp::cli {

namespace {

using io::Json;
using io::Table;

// Output bookkeeping shared by the workers of one run.
class Session {
 public:
  Session(const std::string& command, const CLI::App* app, const Common& c)
      : manifest_(command, app), common_(c), dir_(output_dir(c)) {
    if (!c.config.empty()) manifest_.add_input(c.config);
  }

  const std::string& stem() const { return common_.stem; }
  const fs::path& dir() const { return dir_; }
  bool quiet() const { return common_.quiet; }
  int jobs() const { return common_.jobs; }

  fs::path table(const std::string& name, Table t) {
    t.comments.insert(t.comments.begin(), "manifest: " + manifest_.file_name(stem()));
    const fs::path p = dir_ / name;
    io::write_table_file(p, t, common_.precision);
    record(p);
    return p;
  }
  fs::path json(const std::string& name, Json j) {
    j["manifest"] = manifest_.file_name(stem());
    const fs::path p = dir_ / name;
    io::write_json_file(p, j);
    record(p);
    return p;
  }
  void input(const fs::path& p) {
    std::lock_guard<std::mutex> lock(m_);
    manifest_.add_input(p);
  }
  void seed(unsigned long long s) {
    std::lock_guard<std::mutex> lock(m_);
    manifest_.add_seed(s);
  }
  void note(const std::string& k, Json v) {
    std::lock_guard<std::mutex> lock(m_);
    manifest_.note(k, std::move(v));
  }
  void say(const std::string& line) const {
    if (!common_.quiet) std::cout << line << "\n";
  }
  void finish(int code) { manifest_.write(dir_, stem(), code); }

 private:
  void record(const fs::path& p) {
    std::lock_guard<std::mutex> lock(m_);
    manifest_.add_output(p);
  }
  RunManifest manifest_;
  const Common& common_;
  fs::path dir_;
  std::mutex m_;
};

struct SpecArgs {
  std::string family = "kpp4n";
  std::string n = "0";
  std::string lambda = "1";
  double epsilon = kDefaultEpsilon;
};

void add_spec(CLI::App* app, SpecArgs& s, bool lists) {
  app->add_option("--family", s.family, "kpp2, kpp2_pme, kpp4n, quasi, tfe4, kpp6n, kpp8n")->capture_default_str();
  app->add_option("--n", s.n, lists ? "Exponent n (comma list sweeps)" : "Exponent n")->capture_default_str();
  app->add_option("--lambda", s.lambda, lists ? "Speed lambda (comma list sweeps)" : "Speed lambda")
      ->capture_default_str();
  app->add_option("--epsilon", s.epsilon, "Regularisation of |f|^n near f = 0")->capture_default_str();
}

ModelSpec make_spec(const SpecArgs& a, double n, double lambda) {
  ModelSpec s{parse_family(a.family), n, lambda, a.epsilon};
  s.validate();
  return s;
}

struct GridArgs {
  double left, right;
  int nodes;
};

void add_grid(CLI::App* app, GridArgs& g, const std::string& axis) {
  app->add_option("--" + axis + "-left", g.left, "Left end of the grid")->capture_default_str();
  app->add_option("--" + axis + "-right", g.right, "Right end of the grid")->capture_default_str();
  app->add_option("--nodes", g.nodes, "Grid nodes")->capture_default_str()->check(CLI::Range(8, 50'000'000));
}

struct BvpArgs {
  GridArgs grid{-40.0, 40.0, 1601};
  double newton_tol = 1e-9;
  int max_newton_iters = 100;
  std::string initial_guess = "heaviside";
  std::string prior;
  double tanh_width = 1.0;
  bool no_pin = false, no_projection = false, no_homotopy = false, residual_damping = false;
};

void add_bvp(CLI::App* app, BvpArgs& b) {
  add_grid(app, b.grid, "y");
  app->add_option("--newton-tol", b.newton_tol, "Newton tolerance on the scaled residual")->capture_default_str();
  app->add_option("--max-newton-iters", b.max_newton_iters, "Newton iterations per stage")->capture_default_str();
  app->add_option("--initial-guess", b.initial_guess, "heaviside, tanh or prior")->capture_default_str();
  app->add_option("--prior", b.prior, "Profile CSV (y,F,f) used as the initial guess");
  app->add_option("--tanh-width", b.tanh_width, "Width of the tanh guess")->capture_default_str();
  app->add_flag("--no-pin", b.no_pin, "Skip the pinned fallback stages");
  app->add_flag("--no-projection", b.no_projection, "Skip the projected end-condition stage");
  app->add_flag("--no-homotopy", b.no_homotopy, "Skip the exponent homotopy stage");
  app->add_flag("--residual-damping", b.residual_damping, "Damp on the residual norm instead of the Newton correction");
}

BvpConfig make_bvp(const BvpArgs& a, const ModelSpec& spec, Session& s) {
  BvpConfig c;
  c.grid = Grid::uniform(a.grid.left, a.grid.right, a.grid.nodes);
  c.newton_tol = a.newton_tol;
  c.max_newton_iters = a.max_newton_iters;
  c.initial_guess = parse_initial_guess(a.initial_guess);
  c.tanh_width = a.tanh_width;
  c.allow_pin = !a.no_pin;
  c.allow_projection = !a.no_projection;
  c.allow_homotopy = !a.no_homotopy;
  c.damping.natural_monotonicity = !a.residual_damping;
  if (!a.prior.empty()) {
    c.prior = io::profile_from_table(io::read_table_file(a.prior), spec);
    c.initial_guess = InitialGuess::PRIOR_SOLUTION;
    s.input(a.prior);
  } else if (c.initial_guess == InitialGuess::PRIOR_SOLUTION) {
    throw std::invalid_argument("--initial-guess prior needs --prior FILE");
  }
  return c;
}

std::string point_stem(const Session& s, const ModelSpec& spec, bool sweep) {
  if (!sweep) return s.stem();
  return s.stem() + "_n" + tag(spec.n) + "_lambda" + tag(spec.lambda);
}

Json profile_summary(const BvpResult& r) {
  Json j = io::to_json(r);
  if (r.converged) {
    try {
      j["certificate"] = io::to_json(lambda_sign_certificate(r.profile, r.profile.spec.n));
    } catch (const std::exception& e) {
      j["certificate"] = std::string("unavailable: ") + e.what();
    }
  }
  return j;
}

std::string describe(const BvpResult& r) {
  std::ostringstream os;
  os << family_name(r.profile.spec.family) << " n=" << r.profile.spec.n << " lambda=" << r.profile.spec.lambda << ": ";
  if (r.converged) {
    os << "converged (" << r.strategy << ", residual " << r.profile.residual_norm << ")";
  } else {
    os << "FAILED " << (r.failure_kind ? failure_name(*r.failure_kind) : "UNKNOWN");
  }
  return os.str();
}

// ---------------------------------------------------------------- solve-tw
struct SolveArgs {
  SpecArgs spec;
  BvpArgs bvp;
};

int cmd_solve_tw(CLI::App* app, const SolveArgs& a, Session& s) {
  const auto ns = parse_list(a.spec.n), ls = parse_list(a.spec.lambda);
  std::vector<std::pair<double, double>> pts;
  for (double n : ns)
    for (double l : ls) pts.emplace_back(n, l);
  const bool sweep = pts.size() > 1;
  std::vector<BvpResult> results(pts.size());
  std::vector<std::string> stems(pts.size());
  parallel_for(static_cast<int>(pts.size()), s.jobs(), [&](int i) {
    const ModelSpec spec = make_spec(a.spec, pts[i].first, pts[i].second);
    const BvpConfig cfg = make_bvp(a.bvp, spec, s);
    results[i] = solve_tw(spec, cfg);
    stems[i] = point_stem(s, spec, sweep);
    Table t = io::profile_table(results[i]);
    t.comments = {"family=" + family_name(spec.family) + " n=" + io::format_double(spec.n) +
                      " lambda=" + io::format_double(spec.lambda) + " epsilon=" + io::format_double(spec.epsilon),
                  "converged=" + std::string(results[i].converged ? "true" : "false") + " strategy=" +
                      results[i].strategy + " shift=" + io::format_double(results[i].shift)};
    s.table(stems[i] + ".csv", t);
    Json j = profile_summary(results[i]);
    j["config"] = io::to_json(cfg);
    s.json(stems[i] + ".json", j);
  });
  (void)app;
  int failures = 0;
  for (const auto& r : results) {
    s.say(describe(r));
    failures += !r.converged;
  }
  if (failures) throw NumericalFailure(std::to_string(failures) + " of " + std::to_string(results.size()) +
                                       " travelling-wave solves failed");
  return kOk;
}

// ---------------------------------------------------------------- continue
struct ContinueArgs {
  SpecArgs spec;
  BvpArgs bvp;
  std::string steps;
};

int cmd_continue(const ContinueArgs& a, Session& s) {
  const ModelSpec spec = make_spec(a.spec, parse_exponent(a.spec.n), parse_exponent(a.spec.lambda));
  BvpConfig cfg = make_bvp(a.bvp, spec, s);
  cfg.continuation_steps = parse_pairs(a.steps);
  const auto path = continue_in_parameter(spec, cfg, {spec.n, spec.lambda});
  Table summary;
  summary.header = {"n", "lambda", "converged", "residual_norm", "bc_defect"};
  summary.columns.assign(5, {});
  Json items = Json::array();
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto& r = path[i];
    const std::string name = s.stem() + "_wp" + std::to_string(i);
    s.table(name + ".csv", io::profile_table(r));
    items.push_back(profile_summary(r));
    summary.columns[0].push_back(r.profile.spec.n);
    summary.columns[1].push_back(r.profile.spec.lambda);
    summary.columns[2].push_back(r.converged ? 1.0 : 0.0);
    summary.columns[3].push_back(r.profile.residual_norm);
    summary.columns[4].push_back(r.bc_defect);
    s.say(std::to_string(i) + ": " + describe(r));
  }
  s.table(s.stem() + "_summary.csv", summary);
  Json j{{"waypoints", items}, {"config", io::to_json(cfg)}};
  const bool failed = path.empty() || !path.back().converged || path.back().failed_waypoint.has_value();
  if (failed && !path.empty() && path.back().failed_waypoint)
    j["failed_waypoint"] = Json::array({path.back().failed_waypoint->first, path.back().failed_waypoint->second});
  s.json(s.stem() + ".json", j);
  if (failed) throw NumericalFailure("continuation stopped before the target");
  return kOk;
}

// ---------------------------------------------------------------- roots
struct RootsArgs {
  int order = 4;
  double n = 0.0, lambda = 0.0, slope = 1.0;
  bool leading_edge = false;
};

int cmd_roots(const RootsArgs& a, Session& s) {
  const RootSet rs = a.leading_edge ? classic_leading_edge_roots(a.lambda, a.slope)
                                    : characteristic_roots(a.order, a.n, a.lambda);
  Table t;
  t.header = {"re", "im", "stable_left"};
  t.columns.assign(3, {});
  std::ostringstream line;
  line.precision(15);
  for (const auto& r : rs.roots) {
    t.columns[0].push_back(r.real());
    t.columns[1].push_back(r.imag());
    t.columns[2].push_back(r.real() > kCenterTolerance ? 1.0 : 0.0);
    line << "  " << r.real() << (r.imag() < 0 ? " - " : " + ") << std::abs(r.imag()) << "i\n";
  }
  s.table(s.stem() + ".csv", t);
  s.json(s.stem() + ".json", Json{{"coefficients", rs.coefficients},
                                  {"n_stable", rs.n_stable},
                                  {"n_unstable", rs.n_unstable},
                                  {"n_center", rs.n_center}});
  s.say("roots:\n" + line.str() + "stable " + std::to_string(rs.n_stable) + ", unstable " +
        std::to_string(rs.n_unstable) + ", centre " + std::to_string(rs.n_center));
  return kOk;
}

// ---------------------------------------------------------------- blowup
struct BlowupArgs {
  std::string n = "0,0.25,0.5,0.75,1,2";
  std::string y = "-0.01,-0.1,-1,-10";
  double y0 = 0.0;
};

int cmd_blowup(const BlowupArgs& a, Session& s) {
  const auto ns = parse_list(a.n), ys = parse_list(a.y);
  Table t;
  t.header = {"n", "exponent", "amplitude", "max_relative_residual"};
  t.columns.assign(4, {});
  Json items = Json::array();
  for (double n : ns) {
    const auto b = blowup_asymptote(n);
    double worst = 0.0;
    for (double y : ys) worst = std::max(worst, b.relative_residual(a.y0 + y, a.y0));
    t.columns[0].push_back(n);
    t.columns[1].push_back(b.exponent);
    t.columns[2].push_back(b.amplitude);
    t.columns[3].push_back(worst);
    items.push_back(Json{{"n", n}, {"regime", regime_name(b.regime)}, {"exponent", b.exponent},
                         {"amplitude", b.amplitude}, {"max_relative_residual", worst}});
    s.say("n=" + io::format_double(n, 6) + " " + regime_name(b.regime) + " exponent=" +
          io::format_double(b.exponent, 10) + " C=" + io::format_double(b.amplitude, 10) +
          " residual=" + io::format_double(worst, 3));
  }
  s.table(s.stem() + ".csv", t);
  s.json(s.stem() + ".json", Json{{"asymptotes", items}, {"y0", a.y0}});
  return kOk;
}

// ---------------------------------------------------------------- match-dims
struct MatchArgs {
  int order = 4;
  std::string n = "0,0.5,1,2";
};

int cmd_match_dims(const MatchArgs& a, Session& s) {
  Table t;
  t.header = {"n", "interface_bundle", "unstable_dim", "left_stable_dim", "well_posed"};
  t.columns.assign(5, {});
  Json items = Json::array();
  const double nan = std::nan("");
  for (double n : parse_list(a.n)) {
    const auto md = matching_dimensions(a.order, n);
    t.columns[0].push_back(n);
    t.columns[1].push_back(md.interface_bundle ? *md.interface_bundle : nan);
    t.columns[2].push_back(md.unstable_dim ? *md.unstable_dim : nan);
    t.columns[3].push_back(md.left_stable_dim ? *md.left_stable_dim : nan);
    t.columns[4].push_back(md.well_posed ? (*md.well_posed ? 1.0 : 0.0) : nan);
    Json j{{"n", n}};
    j["interface_bundle"] = md.interface_bundle ? Json(*md.interface_bundle) : Json(nullptr);
    j["unstable_dim"] = md.unstable_dim ? Json(*md.unstable_dim) : Json(nullptr);
    j["left_stable_dim"] = md.left_stable_dim ? Json(*md.left_stable_dim) : Json(nullptr);
    j["well_posed"] = md.well_posed ? Json(*md.well_posed) : Json(nullptr);
    items.push_back(j);
    if (md.well_posed)
      s.say("n=" + io::format_double(n, 6) + ": (" + std::to_string(*md.interface_bundle) + ", " +
            std::to_string(*md.unstable_dim) + ", " + std::to_string(*md.left_stable_dim) + ", " +
            (*md.well_posed ? "true" : "false") + ")");
    else
      s.say("n=" + io::format_double(n, 6) + ": counts not available for order " + std::to_string(a.order));
  }
  s.table(s.stem() + ".csv", t);
  s.json(s.stem() + ".json", Json{{"order", a.order}, {"dimensions", items}});
  return kOk;
}

// ---------------------------------------------------------------- kpp2-speed
struct SpeedArgs {
  double slope = 1.0, tol = 1e-8;
  double y_left = -30.0, y_right = 60.0, h = 0.01;
  double tail_a = 20.0, tail_b = 50.0;
};

int cmd_kpp2_speed(const SpeedArgs& a, Session& s) {
  ShootingOptions opt;
  opt.tol = a.tol;
  const double lam = kpp2_minimal_speed(a.slope, opt);
  const auto prof = classic_profile(lam, a.slope, a.y_left, a.y_right, a.h, opt);
  const auto fit = fit_classic_tail(prof, a.tail_a, a.tail_b);
  Table t;
  t.header = {"y", "f", "fp", "log_f"};
  t.columns = {prof.y, prof.f, prof.fp, prof.log_f};
  s.table(s.stem() + ".csv", t);
  s.json(s.stem() + ".json", Json{{"slope", a.slope},
                                  {"minimal_speed", lam},
                                  {"monotone", prof.monotone},
                                  {"tail_fit",
                                   {{"window", {a.tail_a, a.tail_b}},
                                    {"rate", fit.rate},
                                    {"power", fit.power},
                                    {"prefactor", fit.prefactor}}}});
  s.say("minimal speed " + io::format_double(lam, 12) + "; tail log f = c + " + io::format_double(fit.power, 6) +
        " log y + " + io::format_double(fit.rate, 6) + " y");
  return kOk;
}

// ---------------------------------------------------------------- osc-tail
struct OscArgs {
  std::string n = "1";
  int seeds = 5;
  unsigned long long seed = 20261014ULL;
  double s_max = 2000.0, tol = 1e-7, spread = 5.0;
};

int cmd_osc_tail(const OscArgs& a, Session& s) {
  const auto ns = parse_list(a.n);
  if (a.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  s.seed(a.seed);
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  // Draw all data up front so results do not depend on --jobs.
  std::vector<std::vector<std::array<double, 3>>> data(ns.size());
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const double sc = a.spread * oscillation_scale(ns[k]);
    for (int j = 0; j < a.seeds; ++j) data[k].push_back({sc * U(rng), sc * U(rng), sc * U(rng)});
  }
  std::vector<std::vector<OscOrbit>> orbits(ns.size(), std::vector<OscOrbit>(a.seeds));
  const int total = static_cast<int>(ns.size()) * a.seeds;
  parallel_for(total, s.jobs(), [&](int i) {
    const int k = i / a.seeds, j = i % a.seeds;
    orbits[k][j] = integrate_oscillatory(ns[k], data[k][j], a.s_max, a.tol);
  });
  int bad = 0;
  Json items = Json::array();
  for (std::size_t k = 0; k < ns.size(); ++k) {
    double dist = 0.0;
    Json runs = Json::array();
    for (int j = 0; j < a.seeds; ++j) {
      const auto& o = orbits[k][j];
      if (!o.converged) ++bad;
      if (j > 0 && o.converged && orbits[k][0].converged) dist = std::max(dist, orbit_distance(orbits[k][0], o));
      runs.push_back(Json{{"cauchy", data[k][j]},
                          {"status", osc_status_name(o.status)},
                          {"period", o.period},
                          {"amplitude", o.amplitude},
                          {"changes_sign", o.changes_sign},
                          {"transient_length", o.transient_length}});
    }
    const auto& o0 = orbits[k][0];
    const std::string name = s.stem() + "_n" + tag(ns[k]);
    Table t;
    t.header = {"s", "phi", "dphi", "d2phi"};
    t.columns.assign(4, {});
    for (const auto& smp : o0.samples) {
      t.columns[0].push_back(smp.s);
      t.columns[1].push_back(smp.phi);
      t.columns[2].push_back(smp.dphi);
      t.columns[3].push_back(smp.d2phi);
    }
    s.table(name + ".csv", t);
    items.push_back(Json{{"n", std::isinf(ns[k]) ? Json("inf") : Json(ns[k])},
                         {"mu", o0.mu},
                         {"runs", runs},
                         {"max_aligned_distance", dist}});
    s.say("n=" + io::format_double(ns[k], 6) + ": period " + io::format_double(o0.period, 10) + ", amplitude " +
          io::format_double(o0.amplitude, 6) + ", max aligned distance " + io::format_double(dist, 3));
  }
  s.json(s.stem() + ".json", Json{{"seed", a.seed}, {"tol", a.tol}, {"s_max", a.s_max}, {"orbits", items}});
  if (bad) throw NumericalFailure(std::to_string(bad) + " oscillatory integrations did not converge");
  return kOk;
}

// ---------------------------------------------------------------- equilibrium
struct EquilibriumArgs {
  std::string n = "1";
};

int cmd_equilibrium(const EquilibriumArgs& a, Session& s) {
  Table t;
  t.header = {"n", "mu", "phi0", "identity_residual"};
  t.columns.assign(4, {});
  for (double n : parse_list(a.n)) {
    const double mu = interface_mu(n);
    const double phi0 = positive_equilibrium(n);
    const double a0 = pk_polynomials(mu).p3[3];
    const double rhs = std::isinf(n) ? 1.0 : std::pow(phi0, 1.0 / (n + 1.0));
    const double res = std::abs(a0 * phi0 - rhs) / rhs;
    t.columns[0].push_back(n);
    t.columns[1].push_back(mu);
    t.columns[2].push_back(phi0);
    t.columns[3].push_back(res);
    s.say("n=" + io::format_double(n, 6) + ": phi0 = " + io::format_double(phi0, 17) + " (P3 identity residual " +
          io::format_double(res, 3) + ")");
  }
  s.table(s.stem() + ".csv", t);
  s.json(s.stem() + ".json", Json{{"equation", "P3(phi) = |phi|^{1/(n+1)} sign(phi), constant solution"}});
  return kOk;
}

// ---------------------------------------------------------------- verify-exact
struct ExactArgs {
  std::string name = "example1";
  std::string n = "1";
  double lambda0 = -120.0;
  double y_min = -20.0, y_max = -0.01, tol = 1e-8;
  int nodes = 2000;
};

int cmd_verify_exact(const ExactArgs& a, Session& s) {
  const ExactName which = parse_exact_name(a.name);
  const Grid g = Grid::uniform(a.y_min, a.y_max, a.nodes);
  std::vector<ExactTW> tws;
  if (which == ExactName::EXAMPLE3) {
    tws.push_back(example3(a.lambda0));
  } else {
    for (double n : parse_list(a.n)) tws.push_back(which == ExactName::EXAMPLE1 ? example1(n) : example2(n));
  }
  std::vector<ExactReport> reps(tws.size());
  parallel_for(static_cast<int>(tws.size()), s.jobs(), [&](int i) { reps[i] = verify_exact(tws[i], g, a.tol); });
  Json items = Json::array();
  bool all = true;
  for (const auto& r : reps) {
    Json j{{"name", r.name}, {"n", r.n}, {"lambda0", r.lambda0}, {"max_residual", r.max_residual},
           {"max_y", r.max_y}, {"pass", r.pass}};
    if (r.fitted_exponent) {
      j["fitted_small_f_exponent"] = *r.fitted_exponent;
      j["lipschitz_at_zero"] = *r.lipschitz_at_zero;
      j["fit_window"] = Json::array({r.fit_window.first, r.fit_window.second});
    }
    items.push_back(j);
    all = all && r.pass;
    std::string line = r.name + " n=" + io::format_double(r.n, 6) + " lambda0=" + io::format_double(r.lambda0, 10) +
                       ": max residual " + io::format_double(r.max_residual, 3);
    if (r.fitted_exponent)
      line += ", small-f exponent " + io::format_double(*r.fitted_exponent, 6) +
              (*r.lipschitz_at_zero ? " (Lipschitz)" : " (not Lipschitz)");
    s.say(line + (r.pass ? "  PASS" : "  FAIL"));
  }
  s.json(s.stem() + ".json",
         Json{{"grid", io::to_json(g)}, {"tol", a.tol}, {"reports", items}, {"pass", all}});
  if (!all) throw NumericalFailure("exact-solution verification failed");
  return kOk;
}

// ---------------------------------------------------------------- simulate
struct SimArgs {
  SpecArgs spec{"kpp2", "0", "2", kDefaultEpsilon};
  double x_left = -20.0, x_right = 0.0, h = 0.1;
  int nodes = 0;
  double t_end = 10.0, dt_initial = 0.05, dt_min = 1e-8;
  std::string stepper = "bdf3";
  std::string data = "heaviside";
  double width = 1.0, tail_amplitude = 0.5, tail_rate = 1.0, value = 0.0, offset = 0.0;
  std::string profile;
  int stencil_order = 0;
  std::string snapshots;
  std::string fit_window;
  double lambda0 = std::nan("");
  double front_margin = 10.0, newton_tol = 1e-10, explicit_safety = 0.1;
  int max_newton_iters = 25;
};

void add_sim(CLI::App* app, SimArgs& a) {
  add_spec(app, a.spec, false);
  app->add_option("--x-left", a.x_left, "Left end of the domain")->capture_default_str();
  app->add_option("--x-right", a.x_right, "Right end (0: sized from the speed and t_end)")->capture_default_str();
  app->add_option("--dx", a.h, "Grid spacing when --nodes is not given")->capture_default_str();
  app->add_option("--nodes", a.nodes, "Grid nodes (0: from --dx)")->capture_default_str();
  app->add_option("--t-end", a.t_end, "Final time")->capture_default_str();
  app->add_option("--dt-initial,--dt", a.dt_initial, "Time step")->capture_default_str();
  app->add_option("--dt-min", a.dt_min, "Smallest step before NEWTON_FAIL is fatal")->capture_default_str();
  app->add_option("--stepper", a.stepper, "backward_euler, bdf2, bdf3 or explicit")->capture_default_str();
  app->add_option("--data", a.data, "heaviside, smoothed_step, step_with_tail, profile or constant")
      ->capture_default_str();
  app->add_option("--width", a.width, "Ramp width of smoothed_step")->capture_default_str();
  app->add_option("--tail-amplitude", a.tail_amplitude, "Amplitude of step_with_tail")->capture_default_str();
  app->add_option("--tail-rate", a.tail_rate, "Decay rate of step_with_tail")->capture_default_str();
  app->add_option("--value", a.value, "Level of constant data")->capture_default_str();
  app->add_option("--profile", a.profile, "Profile CSV (y,F,f) for data = profile");
  app->add_option("--offset", a.offset, "Position of the profile origin")->capture_default_str();
  app->add_option("--stencil-order", a.stencil_order, "2, 4 or 0 for the best available")->capture_default_str();
  app->add_option("--snapshots", a.snapshots, "Comma list of output times");
  app->add_option("--fit-window", a.fit_window, "t_min:t_max for the log t fit");
  app->add_option("--lambda0", a.lambda0, "Speed subtracted in the fit (default 2 for kpp2, else lambda)");
  app->add_option("--front-margin", a.front_margin, "Stop once the front is this close to the right end")
      ->capture_default_str();
  app->add_option("--newton-tol", a.newton_tol, "Newton tolerance per step")->capture_default_str();
  app->add_option("--max-newton-iters", a.max_newton_iters, "Newton iterations per step")->capture_default_str();
  app->add_option("--explicit-safety", a.explicit_safety, "c in dt <= c h^order / D_max")->capture_default_str();
}

// With profile_optional a missing --profile is filled in by the caller.
SimConfig make_sim(const SimArgs& a, Session& s, bool profile_optional = false) {
  SimConfig c;
  c.spec = make_spec(a.spec, parse_exponent(a.spec.n), parse_exponent(a.spec.lambda));
  if (!(a.h > 0)) throw std::invalid_argument("--dx must be > 0");
  double right = a.x_right;
  if (right == 0.0) {
    const double c_est = std::max(2.0, std::abs(c.spec.lambda));
    right = std::max(200.0, 1.05 * c_est * a.t_end + 60.0);
  }
  if (!(right > a.x_left)) throw std::invalid_argument("--x-right must exceed --x-left");
  const int nodes = a.nodes > 0 ? a.nodes : static_cast<int>(std::lround((right - a.x_left) / a.h)) + 1;
  c.grid = Grid::uniform(a.x_left, right, nodes);
  c.t_end = a.t_end;
  c.dt_initial = a.dt_initial;
  c.dt_min = a.dt_min;
  c.stepper = parse_stepper(a.stepper);
  c.initial.kind = parse_data_kind(a.data);
  c.initial.width = a.width;
  c.initial.tail_amplitude = a.tail_amplitude;
  c.initial.tail_rate = a.tail_rate;
  c.initial.value = a.value;
  c.initial.offset = a.offset;
  if (c.initial.kind == DataKind::PROFILE && !(profile_optional && a.profile.empty())) {
    if (a.profile.empty()) throw std::invalid_argument("--data profile needs --profile FILE");
    const auto t = io::read_table_file(a.profile);
    c.initial.profile_y = t.column("y");
    c.initial.profile_f = t.column("f");
    s.input(a.profile);
  }
  c.stencil_order = a.stencil_order;
  if (!a.snapshots.empty()) c.snapshot_times = parse_list(a.snapshots);
  if (!a.fit_window.empty()) c.fit_window = parse_window(a.fit_window);
  if (!std::isnan(a.lambda0)) c.lambda0 = a.lambda0;
  c.front_margin = a.front_margin;
  c.newton_tol = a.newton_tol;
  c.max_newton_iters = a.max_newton_iters;
  c.explicit_safety = a.explicit_safety;
  if (c.initial.kind != DataKind::PROFILE || !c.initial.profile_y.empty()) c.validate();
  return c;
}

// Hands snapshots to a writer thread so stepping never waits on the disk.
class SnapshotWriter {
 public:
  SnapshotWriter(Session& s, std::vector<double> x) : s_(s), x_(std::move(x)), worker_([this] { loop(); }) {}
  ~SnapshotWriter() { close(); }
  void push(const Snapshot& snap) {
    {
      std::lock_guard<std::mutex> lock(m_);
      queue_.push_back(snap);
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard<std::mutex> lock(m_);
      if (done_) return;
      done_ = true;
    }
    cv_.notify_one();
    worker_.join();
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void loop() {
    for (;;) {
      std::unique_lock<std::mutex> lock(m_);
      cv_.wait(lock, [this] { return done_ || !queue_.empty(); });
      if (queue_.empty() && done_) return;
      Snapshot snap = std::move(queue_.front());
      queue_.pop_front();
      lock.unlock();
      try {
        Table t;
        t.comments = {"t=" + io::format_double(snap.t)};
        t.header = {"x", "u"};
        t.columns = {x_, snap.u};
        s_.table(s_.stem() + "_snap_t" + tag(snap.t) + ".csv", t);
      } catch (...) {
        if (!error_) error_ = std::current_exception();
      }
    }
  }
  Session& s_;
  std::vector<double> x_;
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<Snapshot> queue_;
  bool done_ = false;
  std::exception_ptr error_;
  std::thread worker_;
};

int cmd_simulate(const SimArgs& a, Session& s) {
  const SimConfig cfg = make_sim(a, s);
  Json side{{"config", io::to_json(cfg)}};
  SimResult res;
  std::optional<SimulationError> failure;
  {
    SnapshotWriter writer(s, cfg.grid.nodes);
    try {
      res = simulate(cfg, [&](const Snapshot& snap) { writer.push(snap); });
    } catch (const SimulationError& e) {
      failure = e;
    }
    writer.close();
  }
  if (failure) {
    side["error"] = Json{{"kind", sim_error_name(failure->kind())}, {"time", failure->time()}, {"message", failure->what()}};
    s.json(s.stem() + ".json", side);
    throw NumericalFailure(sim_error_name(failure->kind()) + " at t = " + io::format_double(failure->time(), 8) + ": " +
                           failure->what());
  }
  s.table(s.stem() + "_trace.csv", io::trace_table(res.trace));
  Table fin;
  fin.comments = {"t=" + io::format_double(res.final_state.t)};
  fin.header = {"x", "u", "F"};
  fin.columns = {res.x, res.final_state.u, res.final_state.F};
  s.table(s.stem() + "_final.csv", fin);
  side["stats"] = io::to_json(res.stats);
  side["trace"] = io::to_json(res.trace);
  s.json(s.stem() + ".json", side);
  std::string line = "t=" + io::format_double(res.final_state.t, 8);
  if (!res.trace.times.empty())
    line += " x_f=" + io::format_double(res.trace.x_front.back(), 10) +
            " x_f/t=" + io::format_double(res.trace.x_front.back() / res.final_state.t, 8);
  if (res.trace.fitted) line += " k_fit=" + io::format_double(res.trace.k_fit, 6);
  s.say(line + " steps=" + std::to_string(res.stats.steps));
  return kOk;
}

// ---------------------------------------------------------------- fit-shift
struct FitArgs {
  std::string trace;
  double lambda0 = 2.0;
  std::string window = "50:500";
  bool synthetic = false;
  double k = 1.5, sigma = 0.01;
  int points = 451;
  unsigned long long seed = 7ULL;
};

int cmd_fit_shift(const FitArgs& a, Session& s) {
  FrontTrace tr;
  const auto win = parse_window(a.window);
  if (a.synthetic) {
    s.seed(a.seed);
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<double> noise(0.0, a.sigma);
    if (a.points < 3) throw std::invalid_argument("--points must be >= 3");
    for (int i = 0; i < a.points; ++i) {
      const double t = win.first + (win.second - win.first) * i / (a.points - 1);
      tr.times.push_back(t);
      tr.x_front.push_back(a.lambda0 * t - a.k * std::log(t) + noise(rng));
    }
    Table t;
    t.header = {"t", "x_front"};
    t.columns = {tr.times, tr.x_front};
    s.table(s.stem() + "_trace.csv", t);
  } else {
    if (a.trace.empty()) throw std::invalid_argument("fit-shift needs --trace FILE or --synthetic");
    tr = io::trace_from_table(io::read_table_file(a.trace));
    s.input(a.trace);
  }
  const ShiftFit fit = fit_front_shift(tr, a.lambda0, win);
  Json j{{"lambda0", a.lambda0},
         {"window", Json::array({win.first, win.second})},
         {"k_fit", fit.k_fit},
         {"intercept", fit.intercept},
         {"residual", fit.residual},
         {"points", fit.points},
         {"convention", "x_f(t) = lambda0 t - k log t + b"}};
  if (a.synthetic) j["synthetic"] = Json{{"k", a.k}, {"sigma", a.sigma}, {"seed", a.seed}};
  s.json(s.stem() + ".json", j);
  s.say("k_fit = " + io::format_double(fit.k_fit, 8) + " (residual " + io::format_double(fit.residual, 3) + ", " +
        std::to_string(fit.points) + " points)");
  return kOk;
}

// ---------------------------------------------------------------- comoving
struct ComovingArgs {
  SimArgs sim;
  BvpArgs bvp;
};

int cmd_comoving(const ComovingArgs& a, Session& s) {
  SimConfig cfg = make_sim(a.sim, s, true);
  std::vector<double> py, pf;
  if (!a.sim.profile.empty()) {
    const auto t = io::read_table_file(a.sim.profile);
    py = t.column("y");
    pf = t.column("f");
  } else if (cfg.spec.family == Family::KPP2 && cfg.spec.n == 0.0) {
    const auto prof = classic_profile(2.0, 1.0, a.bvp.grid.left, a.bvp.grid.right, 0.05);
    py = prof.y;
    pf = prof.f;
  } else {
    const BvpConfig bc = make_bvp(a.bvp, cfg.spec, s);
    const BvpResult r = solve_tw(cfg.spec, bc);
    if (!r.converged) throw NumericalFailure("travelling-wave solve for the comparison profile failed: " + describe(r));
    py = r.profile.grid.nodes;
    pf = r.profile.f;
    s.table(s.stem() + "_profile.csv", io::profile_table(r));
  }
  if (cfg.initial.kind == DataKind::PROFILE && cfg.initial.profile_y.empty()) {
    cfg.initial.profile_y = py;
    cfg.initial.profile_f = pf;
  }
  cfg.validate();
  if (cfg.snapshot_times.empty())
    for (int k = 1; k <= 50; ++k) cfg.snapshot_times.push_back(cfg.t_end * k / 50.0);
  ComovingSeries series;
  try {
    series = comoving_convergence(cfg, py, pf);
  } catch (const SimulationError& e) {
    throw NumericalFailure(sim_error_name(e.kind()) + ": " + e.what());
  }
  Table t;
  t.header = {"t", "error", "x_front"};
  t.columns = {series.times, series.errors, series.x_front};
  s.table(s.stem() + ".csv", t);
  s.json(s.stem() + ".json", Json{{"config", io::to_json(cfg)},
                                  {"profile_points", py.size()},
                                  {"final_error", series.errors.empty() ? 0.0 : series.errors.back()}});
  if (!series.errors.empty())
    s.say("comoving error at t=" + io::format_double(series.times.back(), 8) + ": " +
          io::format_double(series.errors.back(), 6));
  return kOk;
}

// ---------------------------------------------------------------- centre
struct CentreArgs {
  SpecArgs spec;
  BvpArgs bvp;
  std::string k = "0.5,1,1.5";
  std::string sign = "derived";
  double t_min = 1e2, t_max = 1e4, window = 10.0;
  int times = 9;
};

int cmd_centre(const CentreArgs& a, Session& s) {
  const ModelSpec spec = make_spec(a.spec, parse_exponent(a.spec.n), parse_exponent(a.spec.lambda));
  const BvpConfig bc = make_bvp(a.bvp, spec, s);
  const BvpResult r = solve_tw(spec, bc);
  if (!r.converged) throw NumericalFailure("travelling-wave solve failed: " + describe(r));
  std::string sg = a.sign;
  std::transform(sg.begin(), sg.end(), sg.begin(), [](unsigned char c) { return std::tolower(c); });
  if (sg != "derived" && sg != "printed") throw std::invalid_argument("--sign must be derived or printed");
  const ExpansionSign sign = sg == "derived" ? ExpansionSign::DERIVED : ExpansionSign::PRINTED;
  const LinearizedOperator op = build_linearized(r.profile, spec);
  const NullCheck nc = null_vector_check(op);
  s.table(s.stem() + "_profile.csv", io::profile_table(r));
  const auto ks = parse_list(a.k);
  std::vector<ExpansionPair> pairs(ks.size());
  std::vector<AnsatzDefect> defects(ks.size());
  parallel_for(static_cast<int>(ks.size()), s.jobs(), [&](int i) {
    pairs[i] = solve_expansion(op, ks[i], sign);
    if (ks[i] != 0.0) defects[i] = ansatz_defect(op, pairs[i], a.t_min, a.t_max, a.times, a.window);
  });
  Json items = Json::array();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto& p = pairs[i];
    Table t;
    t.comments = {"k=" + io::format_double(ks[i]) + " sign=" + sg};
    t.header = {"y", "psi", "phi"};
    t.columns = {p.y, p.psi, p.phi};
    s.table(s.stem() + "_k" + tag(ks[i]) + ".csv", t);
    Json j{{"k", ks[i]}, {"psi_solve", io::to_json(p.psi_solve)}, {"phi_solve", io::to_json(p.phi_solve)}};
    if (ks[i] != 0.0) {
      j["ansatz_defect"] = Json{{"times", defects[i].times},
                                {"defects", defects[i].defects},
                                {"exponent", defects[i].exponent},
                                {"window", defects[i].window}};
      if (ks[i] > 0) {
        const auto lo = order_check(ks[i], a.t_min), hi = order_check(ks[i], a.t_max);
        j["order_check"] = Json{{"consistent", lo.consistent && hi.consistent},
                                {"at_t_min", {{"g1", lo.g1}, {"g2", lo.g2}, {"eps", lo.eps}, {"g1_squared", lo.g1_squared}}},
                                {"at_t_max", {{"g1", hi.g1}, {"g2", hi.g2}, {"eps", hi.eps}, {"g1_squared", hi.g1_squared}}}};
      }
      s.say("k=" + io::format_double(ks[i], 6) + ": ansatz defect exponent " +
            io::format_double(defects[i].exponent, 4) + ", psi residual " +
            io::format_double(p.psi_solve.residual, 3) + ", condition " + io::format_double(p.psi_solve.condition, 3));
    }
    items.push_back(j);
  }
  s.json(s.stem() + ".json", Json{{"profile", profile_summary(r)},
                                  {"closure", op.closure_note},
                                  {"constraint", pairs.empty() ? "" : pairs.front().constraint_note},
                                  {"sign", sg},
                                  {"null_check", io::to_json(nc)},
                                  {"expansions", items}});
  s.say("|B f'|/|f'| = " + io::format_double(nc.relative, 4) + " (h^2 = " + io::format_double(nc.h_squared, 4) + ")");
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Travelling waves and fronts of higher-order KPP-type equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("kppwave ") + kVersion);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::deque<Common> commons;
  SolveArgs solve;
  ContinueArgs cont;
  RootsArgs roots;
  BlowupArgs blow;
  MatchArgs match;
  SpeedArgs speed;
  OscArgs osc;
  EquilibriumArgs eq;
  ExactArgs exact;
  SimArgs sim;
  FitArgs fit;
  ComovingArgs com;
  CentreArgs centre;
  centre.bvp.grid = {-60.0, 60.0, 2401};
  com.sim.spec = SpecArgs{"kpp2", "0", "2", kDefaultEpsilon};

  struct Sub {
    CLI::App* app;
    Common* common;
    std::function<int(Session&)> body;
  };
  std::vector<Sub> subs;
  auto add = [&](const std::string& name, const std::string& help, const std::function<void(CLI::App*)>& setup,
                 std::function<int(Session&)> body) {
    CLI::App* sub = app.add_subcommand(name, help);
    Common& common = commons.emplace_back();
    add_common(sub, common, [&] {
      std::string s = name;
      std::replace(s.begin(), s.end(), '-', '_');
      return s;
    }());
    setup(sub);
    subs.push_back({sub, &common, std::move(body)});
  };

  add("solve-tw", "Solve the travelling-wave BVP (comma lists in --n/--lambda sweep)",
      [&](CLI::App* s) { add_spec(s, solve.spec, true); add_bvp(s, solve.bvp); },
      [&](Session& s) { return cmd_solve_tw(nullptr, solve, s); });
  add("continue", "Natural-parameter continuation to (--n, --lambda)",
      [&](CLI::App* s) {
        add_spec(s, cont.spec, false);
        add_bvp(s, cont.bvp);
        s->add_option("--steps", cont.steps, "Waypoints n:lambda,n:lambda,...");
      },
      [&](Session& s) { return cmd_continue(cont, s); });
  add("roots", "Characteristic roots of the linearisation at f = 1",
      [&](CLI::App* s) {
        s->add_option("--order", roots.order, "2, 4, 6 or 8")->capture_default_str();
        s->add_option("--n", roots.n, "Exponent n")->capture_default_str();
        s->add_option("--lambda", roots.lambda, "Speed")->capture_default_str();
        s->add_flag("--leading-edge", roots.leading_edge, "Classic leading-edge roots mu^2 + lambda mu + slope");
        s->add_option("--slope", roots.slope, "Source slope for --leading-edge")->capture_default_str();
      },
      [&](Session& s) { return cmd_roots(roots, s); });
  add("blowup", "Blow-up asymptotics of F'''' = -|F|^{2/(n+1)}",
      [&](CLI::App* s) {
        s->add_option("--n", blow.n, "Exponents")->capture_default_str();
        s->add_option("--y", blow.y, "Offsets y - y0 where the residual is checked")->capture_default_str();
        s->add_option("--y0", blow.y0, "Blow-up point")->capture_default_str();
      },
      [&](Session& s) { return cmd_blowup(blow, s); });
  add("match-dims", "Bundle dimensions for the matching count",
      [&](CLI::App* s) {
        s->add_option("--order", match.order, "Equation order")->capture_default_str();
        s->add_option("--n", match.n, "Exponents")->capture_default_str();
      },
      [&](Session& s) { return cmd_match_dims(match, s); });
  add("kpp2-speed", "Minimal speed and tail of the classic KPP wave by shooting",
      [&](CLI::App* s) {
        s->add_option("--slope", speed.slope, "Source slope at 0")->capture_default_str();
        s->add_option("--tol", speed.tol, "Bisection tolerance on lambda")->capture_default_str();
        s->add_option("--y-left", speed.y_left, "Profile window left end")->capture_default_str();
        s->add_option("--y-right", speed.y_right, "Profile window right end")->capture_default_str();
        s->add_option("--dy", speed.h, "Profile sampling step")->capture_default_str();
        s->add_option("--tail-a", speed.tail_a, "Tail fit window start")->capture_default_str();
        s->add_option("--tail-b", speed.tail_b, "Tail fit window end")->capture_default_str();
      },
      [&](Session& s) { return cmd_kpp2_speed(speed, s); });
  add("osc-tail", "Periodic oscillatory component near the interface from random Cauchy data",
      [&](CLI::App* s) {
        s->add_option("--n", osc.n, "Exponents (inf allowed)")->capture_default_str();
        s->add_option("--seeds", osc.seeds, "Random Cauchy data per exponent")->capture_default_str();
        s->add_option("--seed", osc.seed, "RNG seed")->capture_default_str();
        s->add_option("--s-max", osc.s_max, "Integration horizon in s")->capture_default_str();
        s->add_option("--tol", osc.tol, "Cycle agreement tolerance")->capture_default_str();
        s->add_option("--spread", osc.spread, "Cauchy data size in units of the orbit scale")->capture_default_str();
      },
      [&](Session& s) { return cmd_osc_tail(osc, s); });
  add("equilibrium", "Positive constant solution of the truncated interface equation",
      [&](CLI::App* s) { s->add_option("--n", eq.n, "Exponents (inf allowed)")->capture_default_str(); },
      [&](Session& s) { return cmd_equilibrium(eq, s); });
  add("verify-exact", "Residual checks of the closed-form travelling waves",
      [&](CLI::App* s) {
        s->add_option("--name", exact.name, "example1, example2 or example3")->capture_default_str();
        s->add_option("--n", exact.n, "Exponents for examples 1-2")->capture_default_str();
        s->add_option("--lambda0", exact.lambda0, "Speed for example3")->capture_default_str();
        s->add_option("--y-min", exact.y_min, "Grid start")->capture_default_str();
        s->add_option("--y-max", exact.y_max, "Grid end (< 0)")->capture_default_str();
        s->add_option("--nodes", exact.nodes, "Grid nodes")->capture_default_str();
        s->add_option("--tol", exact.tol, "Residual tolerance")->capture_default_str();
      },
      [&](Session& s) { return cmd_verify_exact(exact, s); });
  add("simulate", "Time-dependent front simulation", [&](CLI::App* s) { add_sim(s, sim); },
      [&](Session& s) { return cmd_simulate(sim, s); });
  add("fit-shift", "Fit x_f(t) - lambda0 t = -k log t + b",
      [&](CLI::App* s) {
        s->add_option("--trace", fit.trace, "Trace CSV with columns t, x_front");
        s->add_option("--lambda0", fit.lambda0, "Speed")->capture_default_str();
        s->add_option("--window", fit.window, "t_min:t_max")->capture_default_str();
        s->add_flag("--synthetic", fit.synthetic, "Fit a manufactured trace lambda0 t - k log t + noise");
        s->add_option("--k", fit.k, "k of the synthetic trace")->capture_default_str();
        s->add_option("--sigma", fit.sigma, "Noise level of the synthetic trace")->capture_default_str();
        s->add_option("--points", fit.points, "Samples of the synthetic trace")->capture_default_str();
        s->add_option("--seed", fit.seed, "RNG seed")->capture_default_str();
      },
      [&](Session& s) { return cmd_fit_shift(fit, s); });
  add("comoving", "Distance between the recentred solution and the travelling wave",
      [&](CLI::App* s) {
        add_sim(s, com.sim);
        s->add_option("--y-left", com.bvp.grid.left, "Profile grid left end")->capture_default_str();
        s->add_option("--y-right", com.bvp.grid.right, "Profile grid right end")->capture_default_str();
        s->add_option("--profile-nodes", com.bvp.grid.nodes, "Profile grid nodes")->capture_default_str();
      },
      [&](Session& s) { return cmd_comoving(com, s); });
  add("centre", "Linearised operator and the centre-subspace expansion pair",
      [&](CLI::App* s) {
        add_spec(s, centre.spec, false);
        add_bvp(s, centre.bvp);
        s->add_option("--k", centre.k, "Values of k")->capture_default_str();
        s->add_option("--sign", centre.sign, "derived (-k psi) or printed (+k psi)")->capture_default_str();
        s->add_option("--t-min", centre.t_min, "Defect fit start")->capture_default_str();
        s->add_option("--t-max", centre.t_max, "Defect fit end")->capture_default_str();
        s->add_option("--times", centre.times, "Defect sample times")->capture_default_str();
        s->add_option("--window", centre.window, "|y| range of the defect")->capture_default_str();
      },
      [&](Session& s) { return cmd_centre(centre, s); });

  std::vector<std::string> names;
  for (const auto& sub : subs) names.push_back(sub.app->get_name());
  std::vector<std::string> args(argv, argv + argc);
  try {
    args = splice_config(args, names);
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  }
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  for (auto& sub : subs) {
    if (!sub.app->parsed()) continue;
    std::unique_ptr<Session> session;
    try {
      session = std::make_unique<Session>(sub.app->get_name(), sub.app, *sub.common);
      const int code = sub.body(*session);
      session->finish(code);
      return code;
    } catch (const std::invalid_argument& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return kUsage;
    } catch (const io::IoError& e) {
      std::cerr << "I/O error: " << e.what() << "\n";
      return kIo;
    } catch (const fs::filesystem_error& e) {
      std::cerr << "I/O error: " << e.what() << "\n";
      return kIo;
    } catch (const NumericalFailure& e) {
      std::cerr << "numerical failure: " << e.what() << "\n";
      if (session) {
        try {
          session->finish(kNumerical);
        } catch (const std::exception&) {
          return kIo;
        }
      }
      return kNumerical;
    } catch (const RankCollapse& e) {
      std::cerr << "numerical failure: " << e.what() << " (condition " << e.condition() << ")\n";
      return kNumerical;
    } catch (const std::exception& e) {
      std::cerr << "numerical failure: " << e.what() << "\n";
      return kNumerical;
    }
  }
  return kUsage;
}

}  // namespace kpp::cli
