#pragma once

#include <array>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace kpp {

inline constexpr double kInfiniteExponent = std::numeric_limits<double>::infinity();

// mu = 3(n+1)/n, with the limit 3 for n = infinity.
double interface_mu(double n);

// Coefficients (highest derivative first) of the linear differential
// polynomials produced by substituting F = y^mu phi(log y):
//   P1 = phi' + mu phi
//   P2 = phi'' + (2mu - 1) phi' + mu(mu-1) phi
//   P3 = phi''' + 3(mu-1) phi'' + (3mu^2 - 6mu + 2) phi' + mu(mu-1)(mu-2) phi
struct PkCoefficients {
  std::vector<double> p1, p2, p3;
};
PkCoefficients pk_polynomials(double mu);

// Coefficients of (d/ds + c) applied to the polynomial q.
std::vector<double> compose_shift(const std::vector<double>& q, double c);

struct OscOptions {
  double rtol = 1e-11;
  double atol_scaled = 1e-14;
  double tol = 1e-7;          // relative agreement of successive cycles
  int confirm_cycles = 3;     // consecutive agreeing cycle pairs required
  int sample_periods = 3;     // periods stored after convergence
  int samples_per_period = 400;
  double escape = 1e12;       // blow-up bound in units of the natural scale
};

enum class OscStatus { CONVERGED, NO_CONVERGENCE, BLOWUP };
std::string osc_status_name(OscStatus s);

struct OscSample {
  double s, phi, dphi, d2phi;
};

struct OscOrbit {
  double n = 1.0;
  double mu = 6.0;
  // Natural magnitude: phi = scale * psi where psi solves P3(psi) = -a0 N(psi).
  double scale = 1.0;
  std::vector<OscSample> samples;
  double period = 0.0;
  double amplitude = 0.0;
  bool converged = false;
  OscStatus status = OscStatus::NO_CONVERGENCE;
  double transient_length = 0.0;
  // Per-cycle history of the measured period and amplitude.
  std::vector<double> periods, amplitudes;
  // Upward zero crossing where the stored samples start.
  double phase_origin = 0.0;
  bool changes_sign = false;

  // Periodic evaluation (phi, phi', phi'') at any s, from the stored cycle.
  std::array<double, 3> eval(double s) const;
};

// Typical size of the periodic orbit, a0^{-(n+1)/n} / a0 with a0 the
// constant coefficient of P3; handy for drawing Cauchy data.
double oscillation_scale(double n);

// Typical size of the periodic orbit, a0^{-(n+1)/n} / a0 with a0 the
// constant coefficient of P3; handy for drawing Cauchy data.
double oscillation_scale(double n);

// Integrates P3(phi) = -|phi|^{1/(n+1)} sign(phi) (or -sign(phi) for
// n = infinity) from the given Cauchy data. Zero crossings are located
// events at which integration restarts, so the non-smooth point of the
// nonlinearity never sits inside a step.
OscOrbit integrate_oscillatory(double n, std::array<double, 3> cauchy_data, double s_max, double tol,
                               const OscOptions& opt = {});

// Max |phi_a - phi_b| over one period after aligning upward zero
// crossings, relative to the larger amplitude.
double orbit_distance(const OscOrbit& a, const OscOrbit& b);

// Constant solution of P3(phi) = +|phi|^{1/(n+1)} sign(phi):
// phi0 = [mu(mu-1)(mu-2)]^{-(n+1)/n}; 1/6 at n = infinity.
double positive_equilibrium(double n);

struct InterfaceCheck {
  double max_relative_residual = 0.0;
  double fitted_exponent = 0.0;
  int points = 0;
};

// Parameters of the three-dimensional interface family and a checker that
// rebuilds F(y) = eps^mu G((y - y0)/eps), G(x) = x^mu phi*(log x + s0),
// and evaluates the interface equation F''' = -|F|^{1/(n+1)} sign F.
struct InterfaceBundle {
  std::vector<std::string> parameters;  // {"y0", "s0", "eps"}
  std::function<InterfaceCheck(const OscOrbit&, double y0, double s0, double eps, double y_lo, double y_hi,
                               int points)>
      check;
};
InterfaceBundle interface_bundle_parameters();

}  // namespace kpp
