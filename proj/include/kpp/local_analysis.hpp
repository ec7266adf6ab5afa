#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace kpp {

struct RootSet {
  // Polynomial coefficients, highest degree first.
  std::vector<double> coefficients;
  std::vector<std::complex<double>> roots;
  // Re > 0: decays as y -> -infinity, i.e. belongs to the left stable bundle.
  int n_stable = 0;
  int n_unstable = 0;
  int n_center = 0;

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }
};

inline constexpr double kCenterTolerance = 1e-9;

// Companion-matrix eigenvalues followed by Newton polishing on the
// original polynomial.
RootSet polynomial_roots(const std::vector<double>& coefficients, double center_tol = kCenterTolerance);

// Coefficients (highest first) of leading * prod (mu - r).
std::vector<std::complex<double>> expand_roots(const std::vector<std::complex<double>>& roots, double leading);

// Linearisation of the travelling-wave ODE at f = 1. With f = 1 + w and
// F = 1 + (n+1)w + ..., the order-2m equation F^(2m) = s (lambda f' + f(1-f))
// with s = (-1)^m gives (n+1) mu^{2m} = s (lambda mu - 1):
//   order 2: (n+1) mu^2 + lambda mu - 1
//   order 4: (n+1) mu^4 - lambda mu + 1
//   order 6: (n+1) mu^6 + lambda mu - 1
//   order 8: (n+1) mu^8 - lambda mu + 1
std::vector<double> characteristic_polynomial(int order, double n, double lambda);
RootSet characteristic_roots(int order, double n, double lambda);

// Leading edge of the classic equation at f = 0: mu^2 + lambda mu + slope.
RootSet classic_leading_edge_roots(double lambda, double slope = 1.0);

enum class BlowupRegime { FINITE_BLOWUP, EXPONENTIAL, ALGEBRAIC_GROWTH };
std::string regime_name(BlowupRegime r);

// Particular solutions of F'''' = -|F|^{2/(n+1)} as y decreases.
//  n in [0,1): F = -C (Y0 - y)^{-alpha}, alpha = 4(n+1)/(1-n)
//  n = 1:      F = -e^{-y}
//  n > 1:      F = -C (-y)^{beta},      beta = 4(n+1)/(n-1)
// Substitution fixes C = [p(p+1)(p+2)(p+3)]^{(n+1)/(1-n)} with p = alpha
// in the first regime and C = [b(b-1)(b-2)(b-3)]^{-(n+1)/(n-1)} for n > 1.
struct BlowupAsymptote {
  BlowupRegime regime;
  double n;
  // alpha (finite blow-up), beta (growth) or the rate 1 (exponential).
  double exponent;
  double amplitude;

  // Evaluates F at y; y0 is the blow-up point (or the shift for the
  // other regimes, F(y) -> F(y - y0)).
  double value(double y, double y0 = 0.0) const;
  // Closed-form F^(4) of the same profile.
  double fourth_derivative(double y, double y0 = 0.0) const;
  // |F^(4) + |F|^{2/(n+1)}| relative to the larger of the two terms.
  double relative_residual(double y, double y0 = 0.0) const;
};

// Throws std::invalid_argument for n < 0.
BlowupAsymptote blowup_asymptote(double n);

struct MatchingDimensions {
  std::optional<int> interface_bundle;
  std::optional<int> unstable_dim;
  std::optional<int> left_stable_dim;
  // Empty when the count is not available for the order.
  std::optional<bool> well_posed;
};

// For order 4 the interface bundle is 3D, the blow-up manifold 1D, and the
// left stable dimension is read off the characteristic roots.
MatchingDimensions matching_dimensions(int order, double n);

struct ShootingOptions {
  double tol = 1e-8;       // bisection width on lambda
  double rtol = 1e-10;     // integrator tolerance
  double y_max = 1e4;      // horizon for declaring a trajectory bounded
  double start_offset = 1e-8;
};

// Minimal speed of f'' + lambda f' + s f(1-f) = 0 by bisection on whether
// the trajectory leaving (1, 0) reaches f = 0 with f' < 0 (speed too
// small) or creeps into (0, 0) without a sign change. Throws
// std::runtime_error when the initial bracket fails.
double kpp2_minimal_speed(double slope, const ShootingOptions& opt = {});

struct ClassicProfile {
  double lambda;
  std::vector<double> y;
  std::vector<double> f;
  std::vector<double> fp;
  // log f kept separately: f underflows far in the tail.
  std::vector<double> log_f;
  bool monotone;
};

// Shot travelling wave of the classic equation, translated so that
// f(0) = 1/2, sampled on a uniform grid over [y_left, y_right].
ClassicProfile classic_profile(double lambda, double slope, double y_left, double y_right, double h,
                               const ShootingOptions& opt = {});

struct TailFit {
  double rate;       // fitted r in log f = c + p log y + r y
  double power;      // fitted p
  double prefactor;  // e^c
};

// Least-squares fit of the far tail of a shot profile over [y_a, y_b].
TailFit fit_classic_tail(const ClassicProfile& prof, double y_a, double y_b);

}  // namespace kpp
