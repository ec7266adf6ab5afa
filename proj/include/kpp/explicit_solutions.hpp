#pragma once

#include <functional>
#include <optional>
#include <string>

#include "kpp/models.hpp"

namespace kpp {

enum class ExactName { EXAMPLE1, EXAMPLE2, EXAMPLE3 };
std::string exact_name(ExactName e);
ExactName parse_exact_name(const std::string& text);

// Closed-form travelling waves with a finite interface at y = 0 (f = 0 for
// y >= 0) and f -> 1 as y -> -infinity.
struct ExactTW {
  ExactName name;
  double n;
  double lambda0;
  std::function<double(double)> f, fp, fpp;
  // Reaction term as a function of f.
  std::function<double(double)> q;
  std::string domain_note;

  // Residual of the governing ODE at y < 0:
  //  Examples 1-2: -lambda f' - (n+1) f f'' - ((n+1)/n) f'^2 - q(f)
  //  Example 3:    -lambda f' + (f^2)'''' - q(f)
  std::function<double(double)> residual;
};

// f = (-y)_+ / (1 - y), lambda0 = (n+1)/n.
ExactTW example1(double n);
// f = (e^{-y} - 1)_+ / (e^{-y} + 1), lambda0 = (n+1)/(2n). The reaction term
// is the one obtained by substituting f back into the pressure ODE:
//   q = (1/2)(1-f)[lambda(1+f) + (n+1) f^2 (1+f) - (1/2)((n+1)/n)(1-f)(1+f)^2].
ExactTW example2(double n);
// f = [(-y)_+ / (1 - y)]^3 for the bi-harmonic flow with n = 1. q is
// rebuilt numerically from q = -lambda f' + (f^2)'''' along the inverse map
// -y = 1/(1 - f^{1/3}) - 1 and stored as a cubic spline in logit(f).
// `lambda` defaults to -120, the only value making q Lipschitz at 0.
ExactTW example3(double lambda = -120.0);

struct ExactReport {
  std::string name;
  double n = 0.0;
  double lambda0 = 0.0;
  double max_residual = 0.0;
  int max_node = -1;
  double max_y = 0.0;
  bool pass = true;
  // Example 3 only: small-f exponent p in q ~ f^p and the Lipschitz verdict.
  std::optional<double> fitted_exponent;
  std::optional<bool> lipschitz_at_zero;
  std::pair<double, double> fit_window{0.0, 0.0};
};

struct ExactOptions {
  // q ~ W^2 (3 lambda + 360) + W^3 (-6 lambda - 4320) + ... with W = f^{1/3};
  // the f^{2/3} term only dominates once W << 1e-3, i.e. f well below 1e-9.
  double fit_f_min = 1e-18;
  double fit_f_max = 1e-15;
  int fit_points = 40;
  // Lipschitz verdict: exponent at least 1 up to the fit tolerance.
  double lipschitz_threshold = 0.95;
};

ExactReport verify_exact(const ExactTW& tw, const Grid& grid, double tol, const ExactOptions& opt = {});

// Least-squares slope of log |q| against log f over log-spaced f values.
double fit_small_f_exponent(const ExactTW& tw, double f_min, double f_max, int points);

}  // namespace kpp
