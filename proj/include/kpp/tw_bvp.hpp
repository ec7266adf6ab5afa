#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kpp/models.hpp"

namespace kpp {

enum class InitialGuess { HEAVISIDE, PRIOR_SOLUTION, TANH };
enum class FailureKind { SINGULAR_JACOBIAN, MAX_ITERS, DIVERGED };
std::string failure_name(FailureKind k);
InitialGuess parse_initial_guess(const std::string& text);

struct LineSearch {
  int max_halvings = 30;
  double sufficient_decrease = 1e-4;
  // Accept a trial step when the simplified Newton correction shrinks
  // (affine-invariant test) instead of the residual norm.
  bool natural_monotonicity = true;
};

struct BvpConfig {
  Grid grid = Grid::uniform(-40.0, 40.0, 1601);
  int max_newton_iters = 100;
  double newton_tol = 1e-9;
  LineSearch damping;
  // (n, lambda) waypoints for continue_in_parameter.
  std::vector<std::pair<double, double>> continuation_steps;
  InitialGuess initial_guess = InitialGuess::HEAVISIDE;
  std::optional<TWProfile> prior;
  double tanh_width = 1.0;

  // Fallback ladder when the plain solve stalls: a bordered solve with the
  // origin pinned at the half level (the translation mode otherwise makes
  // the Jacobian nearly singular), then release of the pin, then projected
  // end conditions with the pin kept, then a search over the pin position,
  // then an exponent homotopy from n = 0.
  bool try_free_first = true;
  bool allow_pin = true;
  bool allow_projection = true;
  // A projected solve is kept only if the state left at the ends stays this
  // close to the homogeneous end values.
  double max_tail_defect = 1e-2;
  bool allow_homotopy = true;
  int release_iters = 60;
  int pin_search_evals = 16;
  double pin_search_step = 0.25;
  double homotopy_step = 0.1;
};

struct BvpResult {
  TWProfile profile;
  bool converged = false;
  int iterations = 0;
  // Max-norm residual (collocation defects divided by h, boundary rows,
  // pin row) after every Newton iteration of every stage attempted.
  std::vector<double> history;
  std::optional<FailureKind> failure_kind;
  // Which rung of the fallback ladder produced the profile.
  std::string strategy;
  // Slack left on the last right-end boundary condition by a pinned stage.
  double slack = 0.0;
  // Max pointwise finite-difference defect of the stored profile.
  double fd_residual = 0.0;
  // Largest violation of the homogeneous end conditions. Zero up to
  // newton_tol unless the projected closure was used, in which case it is
  // the size of the slowly decaying tail cut off at the right end.
  double bc_defect = 0.0;
  // Translation applied by normalisation.
  double shift = 0.0;
  // Waypoint (n, lambda) that failed in continuation, if any.
  std::optional<std::pair<double, double>> failed_waypoint;
};

// Two-point BVP for the travelling wave on the truncated line, discretised
// as the first-order system Y = (F, F', ..., F^(2m-1)) (for TFE4 the
// columns are f, f', f'', R(f) f''') with trapezoidal collocation. Boundary
// rows: F = 1, F' = ... = F^(m-1) = 0 on the left, F = F' = ... = F^(m-1) = 0
// on the right. The accepted profile's grid is translated so that the
// leftmost downward crossing of f through 1/2 sits at y = 0.
BvpResult solve_tw(const ModelSpec& spec, const BvpConfig& config);

// Natural-parameter continuation through config.continuation_steps ending
// at `target`; each solve is seeded with the previous profile. The first
// element is the seed itself when a converged prior is supplied, otherwise
// the solve at the first waypoint. Stops at the first failing waypoint.
std::vector<BvpResult> continue_in_parameter(const ModelSpec& spec, const BvpConfig& config,
                                             std::pair<double, double> target);

// Translate the grid so the leftmost downward 1/2-crossing of f (located on
// the cubic Hermite interpolant of the state) is at y = 0. Returns the shift.
double normalize_profile(TWProfile& profile);

// Locates the leftmost downward crossing of values through `level`.
std::optional<double> leftmost_down_crossing(const std::vector<double>& x, const std::vector<double>& v,
                                             double level);

// Columns: y, F, f, residual. Header comment rows echo the model and the
// solver settings.
void write_bvp_csv(std::ostream& os, const BvpResult& result, const BvpConfig& config, int precision = 17);

}  // namespace kpp
