#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems,
// with cubic Hermite dense output between accepted steps and located
// scalar events.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace kpp::ode {

template <int N>
using State = std::array<double, N>;

struct Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_initial = 1e-3;
  double h_max = std::numeric_limits<double>::infinity();
  double h_min = 1e-14;
  long max_steps = 50'000'000;
};

// Cubic Hermite interpolant over one accepted step.
template <int N>
struct Segment {
  double t0, t1;
  State<N> y0, y1, f0, f1;

  double component(int k, double t) const {
    const double h = t1 - t0, s = (t - t0) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k];
  }
  State<N> at(double t) const {
    State<N> y;
    for (int k = 0; k < N; ++k) y[k] = component(k, t);
    return y;
  }
  // Locates a root of component k inside [t0, t1] (caller checks the
  // sign change) by Illinois regula falsi on the interpolant.
  double root(int k, double level = 0.0) const {
    double a = t0, b = t1, fa = component(k, a) - level, fb = component(k, b) - level;
    int side = 0;
    for (int it = 0; it < 200 && std::abs(b - a) > 1e-15 * (1 + std::abs(b)); ++it) {
      const double c = (a * fb - b * fa) / (fb - fa);
      const double fc = component(k, c) - level;
      if (fc == 0.0) return c;
      if ((fc > 0) == (fb > 0)) {
        b = c, fb = fc;
        if (side == -1) fa *= 0.5;
        side = -1;
      } else {
        a = c, fa = fc;
        if (side == 1) fb *= 0.5;
        side = 1;
      }
    }
    return 0.5 * (a + b);
  }
};

enum class Stop { END, OBSERVER, EVENT, STEP_UNDERFLOW, MAX_STEPS, NONFINITE };

template <int N>
struct Outcome {
  Stop stop = Stop::END;
  double t = 0.0;
  State<N> y{};
  long steps = 0;
  long rejected = 0;
};

namespace detail {

// Dormand-Prince tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

template <int N, class Rhs>
double dp_step(Rhs& rhs, double t, const State<N>& y, const State<N>& k1, double h, State<N>& ynew,
               State<N>& k7, const Options& opt) {
  State<N> k2, k3, k4, k5, k6, tmp;
  for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
  rhs(t + c2 * h, tmp, k2);
  for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
  rhs(t + c3 * h, tmp, k3);
  for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  rhs(t + c4 * h, tmp, k4);
  for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  rhs(t + c5 * h, tmp, k5);
  for (int i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  rhs(t + h, tmp, k6);
  for (int i = 0; i < N; ++i) ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
  rhs(t + h, ynew, k7);
  double err = 0.0;
  for (int i = 0; i < N; ++i) {
    const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
    err = std::max(err, std::abs(e) / sc);
  }
  return err;
}

}  // namespace detail

// Integrates y' = rhs(t, y) from t0 towards t1 (t1 > t0).
//  rhs(t, y, dydt)         fills the derivative.
//  observer(segment)       called after each accepted step; return false to stop.
//  event(t, y) -> double   optional scalar; integration stops at the first
//                          root where the sign changes in direction `dir`
//                          (+1 upward, -1 downward, 0 any). The state at the
//                          event is produced by an exact shortened step.
template <int N, class Rhs, class Observer>
Outcome<N> integrate(Rhs rhs, double t0, State<N> y0, double t1, const Options& opt, Observer observer,
                     const std::function<double(double, const State<N>&)>& event = {}, int dir = 0) {
  Outcome<N> out;
  double t = t0, h = std::min(opt.h_initial, t1 - t0);
  State<N> y = y0, k1, ynew, k7;
  rhs(t, y, k1);
  double g_old = event ? event(t, y) : 0.0;
  while (t < t1) {
    if (out.steps >= opt.max_steps) {
      out.stop = Stop::MAX_STEPS;
      break;
    }
    h = std::min({h, opt.h_max, t1 - t});
    const double err = detail::dp_step<N>(rhs, t, y, k1, h, ynew, k7, opt);
    if (!std::isfinite(err)) {
      if (h <= opt.h_min) {
        out.stop = Stop::NONFINITE;
        break;
      }
      h *= 0.25;
      ++out.rejected;
      continue;
    }
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      ++out.rejected;
      if (h < opt.h_min) {
        out.stop = Stop::STEP_UNDERFLOW;
        break;
      }
      continue;
    }
    ++out.steps;
    Segment<N> seg{t, t + h, y, ynew, k1, k7};
    if (event) {
      const double g_new = event(t + h, ynew);
      const bool up = g_old < 0 && g_new >= 0, down = g_old > 0 && g_new <= 0;
      if ((dir >= 0 && up) || (dir <= 0 && down)) {
        // Locate on the interpolant of g via bisection.
        double a = t, b = t + h, ga = g_old;
        for (int it = 0; it < 100 && b - a > 1e-15 * (1 + std::abs(b)); ++it) {
          const double c = 0.5 * (a + b);
          const double gc = event(c, seg.at(c));
          if ((gc >= 0) == (ga >= 0) && gc != 0.0) a = c, ga = gc;
          else b = c;
        }
        const double te = b;
        State<N> ye;
        if (te > t) detail::dp_step<N>(rhs, t, y, k1, te - t, ye, k7, opt);
        else ye = y;
        out.stop = Stop::EVENT;
        out.t = te;
        out.y = ye;
        Segment<N> part{t, te, y, ye, k1, k7};
        if (te > t) observer(part);
        return out;
      }
      g_old = g_new;
    }
    t += h;
    y = ynew;
    k1 = k7;
    if (!observer(seg)) {
      out.stop = Stop::OBSERVER;
      break;
    }
    const double fac = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    h *= fac;
  }
  out.t = t;
  out.y = y;
  return out;
}

}  // namespace kpp::ode
