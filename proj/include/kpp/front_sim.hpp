#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kpp/models.hpp"

namespace kpp {

// BDF2 uses variable-step coefficients; BDF3 runs at constant step and drops
// to BDF2 for the steps right after a step-size change.
enum class Stepper { BACKWARD_EULER_NEWTON, BDF2_NEWTON, BDF3_NEWTON, EXPLICIT_GUARDED };
std::string stepper_name(Stepper s);
Stepper parse_stepper(const std::string& text);

enum class DataKind { HEAVISIDE, SMOOTHED_STEP, STEP_WITH_TAIL, PROFILE, CONSTANT };
std::string data_kind_name(DataKind k);
DataKind parse_data_kind(const std::string& text);

struct InitialData {
  DataKind kind = DataKind::HEAVISIDE;
  // SMOOTHED_STEP: u = (1 - tanh(x / width)) / 2.
  double width = 1.0;
  // STEP_WITH_TAIL: u = 1 for x < 0, min(1, amplitude * exp(-rate x)) after.
  double tail_amplitude = 0.5;
  double tail_rate = 1.0;
  // CONSTANT: u = value everywhere.
  double value = 0.0;
  // PROFILE: u(x) = f(x - offset) from a travelling-wave profile; f is
  // held at its left end value to the left of the profile grid and is zero
  // to its right (a small end value there would seed the unstable state).
  std::vector<double> profile_y, profile_f;
  double offset = 0.0;
};

struct SimConfig {
  ModelSpec spec{Family::KPP2, 0.0, 2.0, kDefaultEpsilon};
  Grid grid = Grid::uniform(-20.0, 200.0, 2201);
  double t_end = 10.0;
  double dt_initial = 0.05;
  double dt_min = 1e-8;
  Stepper stepper = Stepper::BDF3_NEWTON;
  InitialData initial;
  // Accuracy of the centred stencil for the principal term: 2, 4 (orders 2
  // and 4 only) or 0 for the best available.
  int stencil_order = 0;
  // Explicit steps are limited to explicit_safety * h^(2m) / D_max, with
  // D_max the largest dF/du on the grid.
  double explicit_safety = 0.1;
  double newton_tol = 1e-10;
  int max_newton_iters = 25;
  std::vector<double> snapshot_times;
  // Speed used for the drift fit; when unset, 2 for KPP2 and spec.lambda
  // otherwise.
  std::optional<double> lambda0;
  std::optional<std::pair<double, double>> fit_window;
  // The run stops with FRONT_EXITED once the front is this close to the
  // right end.
  double front_margin = 10.0;
  // Level below which |u| counts as zero for support tracking.
  double support_level = 1e-8;

  // Throws std::invalid_argument for inadmissible settings.
  void validate() const;
  double speed_for_fit() const;
};

enum class SimErrorKind { NEWTON_FAIL, FRONT_EXITED };
std::string sim_error_name(SimErrorKind k);

class SimulationError : public std::runtime_error {
 public:
  SimulationError(SimErrorKind kind, const std::string& what, double t)
      : std::runtime_error(what), kind_(kind), time_(t) {}
  SimErrorKind kind() const { return kind_; }
  double time() const { return time_; }

 private:
  SimErrorKind kind_;
  double time_;
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> F;
};

struct FrontTrace {
  std::vector<double> times;
  std::vector<double> x_front;
  double lambda_fit = 0.0;
  double k_fit = 0.0;
  std::pair<double, double> fit_window{0.0, 0.0};
  double fit_residual = 0.0;
  bool fitted = false;
  // Per-step diagnostics: rightmost point with |u| > support_level and the
  // smallest value of u ahead of the front (negative means a sign change).
  std::vector<double> support_right;
  std::vector<double> min_ahead;
};

struct SimStats {
  int steps = 0;
  int rejected = 0;
  int newton_iterations = 0;
  double dt_smallest = 0.0;
  double dt_largest = 0.0;
};

struct SimResult {
  std::vector<double> x;
  std::vector<Snapshot> snapshots;
  FrontTrace trace;
  SimStats stats;
  Snapshot final_state;
};

// Steps (f_eps(F))_t = s D^(2m) F + source in the unknown F = |u|^n u on a
// uniform grid, u = f_eps(F). Ends are held at the initial end values: the
// left end is reflected evenly (zero odd derivatives), the right end is
// extended by its constant value. `on_snapshot` is called as each requested
// time is reached.
SimResult simulate(const SimConfig& config, const std::function<void(const Snapshot&)>& on_snapshot = {});

// Initial u on the grid.
std::vector<double> initial_values(const SimConfig& config);

// Leftmost downward crossing of 1/2, refined on the local cubic through
// four nodes. Empty when u never crosses.
std::optional<double> front_position(const std::vector<double>& x, const std::vector<double>& u, double level = 0.5);

struct ShiftFit {
  double k_fit = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the fit
  int points = 0;
};

// Least squares of x_f(t) - lambda0 t against a log t + b over the window;
// k_fit = -a. Throws std::invalid_argument when the window holds fewer than
// three points or spans less than 5% in log t.
ShiftFit fit_front_shift(const FrontTrace& trace, double lambda0, std::pair<double, double> window);

struct ComovingSeries {
  std::vector<double> times;
  std::vector<double> errors;
  std::vector<double> x_front;
};

// Runs the simulation and at each snapshot time measures the max-norm
// distance between u(x_f(t) + y, t) and the profile f(y) over the profile
// nodes that land inside the domain.
ComovingSeries comoving_convergence(const SimConfig& config, const std::vector<double>& profile_y,
                                    const std::vector<double>& profile_f);
ComovingSeries comoving_convergence(const SimConfig& config, const TWProfile& profile);

}  // namespace kpp
