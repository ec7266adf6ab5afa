#include "kpp/osc_tail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kpp/ode.hpp"

namespace kpp {

double interface_mu(double n) {
  if (std::isinf(n)) return 3.0;
  if (!(n > 0.0)) throw std::invalid_argument("interface exponent needs n > 0");
  return 3.0 * (n + 1.0) / n;
}

PkCoefficients pk_polynomials(double mu) {
  if (!std::isfinite(mu)) throw std::invalid_argument("pk_polynomials: mu must be finite");
  PkCoefficients c;
  c.p1 = {1.0, mu};
  c.p2 = {1.0, 2.0 * mu - 1.0, mu * (mu - 1.0)};
  c.p3 = {1.0, 3.0 * (mu - 1.0), 3.0 * mu * mu - 6.0 * mu + 2.0, mu * (mu - 1.0) * (mu - 2.0)};
  return c;
}

std::vector<double> compose_shift(const std::vector<double>& q, double c) {
  // (D + c) sum_j q_j D^{d-j}: shift by one degree and add c q.
  std::vector<double> out(q.size() + 1, 0.0);
  for (std::size_t j = 0; j < q.size(); ++j) {
    out[j] += q[j];
    out[j + 1] += c * q[j];
  }
  return out;
}

std::string osc_status_name(OscStatus s) {
  switch (s) {
    case OscStatus::CONVERGED: return "CONVERGED";
    case OscStatus::NO_CONVERGENCE: return "NO_CONVERGENCE";
    case OscStatus::BLOWUP: return "BLOWUP";
  }
  return "?";
}

double positive_equilibrium(double n) {
  if (std::isinf(n)) return 1.0 / 6.0;
  if (!(n > 0.0)) throw std::invalid_argument("positive_equilibrium: n must be > 0");
  const double mu = interface_mu(n);
  return std::pow(mu * (mu - 1.0) * (mu - 2.0), -(n + 1.0) / n);
}

namespace {

// Quintic Hermite interpolation from value, first and second derivative.
std::array<double, 3> quintic(double t0, const OscSample& a, double t1, const OscSample& b, double t) {
  const double h = t1 - t0, s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  // Basis functions and their s-derivatives.
  const double H0 = 1 - 10 * s3 + 15 * s4 - 6 * s5, H1 = s - 6 * s3 + 8 * s4 - 3 * s5,
               H2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5), H3 = 10 * s3 - 15 * s4 + 6 * s5,
               H4 = -4 * s3 + 7 * s4 - 3 * s5, H5 = 0.5 * (s3 - 2 * s4 + s5);
  const double D0 = -30 * s2 + 60 * s3 - 30 * s4, D1 = 1 - 18 * s2 + 32 * s3 - 15 * s4,
               D2 = 0.5 * (2 * s - 9 * s2 + 12 * s3 - 5 * s4), D3 = 30 * s2 - 60 * s3 + 30 * s4,
               D4 = -12 * s2 + 28 * s3 - 15 * s4, D5 = 0.5 * (3 * s2 - 8 * s3 + 5 * s4);
  const double E0 = -60 * s + 180 * s2 - 120 * s3, E1 = -36 * s + 96 * s2 - 60 * s3,
               E2 = 0.5 * (2 - 18 * s + 36 * s2 - 20 * s3), E3 = 60 * s - 180 * s2 + 120 * s3,
               E4 = -24 * s + 84 * s2 - 60 * s3, E5 = 0.5 * (6 * s - 24 * s2 + 20 * s3);
  const double v = H0 * a.phi + H1 * h * a.dphi + H2 * h * h * a.d2phi + H3 * b.phi + H4 * h * b.dphi +
                   H5 * h * h * b.d2phi;
  const double d = (D0 * a.phi + D1 * h * a.dphi + D2 * h * h * a.d2phi + D3 * b.phi + D4 * h * b.dphi +
                    D5 * h * h * b.d2phi) / h;
  const double dd = (E0 * a.phi + E1 * h * a.dphi + E2 * h * h * a.d2phi + E3 * b.phi + E4 * h * b.dphi +
                     E5 * h * h * b.d2phi) / (h * h);
  return {v, d, dd};
}

}  // namespace

std::array<double, 3> OscOrbit::eval(double s) const {
  if (samples.size() < 2 || !(period > 0)) throw std::logic_error("OscOrbit::eval needs stored samples");
  double tau = std::fmod(s - phase_origin, period);
  if (tau < 0) tau += period;
  const double ds = samples[1].s - samples[0].s;
  std::size_t k = static_cast<std::size_t>(tau / ds);
  if (k + 1 >= samples.size()) k = samples.size() - 2;
  const auto& a = samples[k];
  const auto& b = samples[k + 1];
  return quintic(a.s, a, b.s, b, phase_origin + tau);
}

double oscillation_scale(double n) {
  const double a0 = pk_polynomials(interface_mu(n)).p3[3];
  return (std::isinf(n) ? 1.0 / a0 : std::pow(a0, -(n + 1.0) / n)) / a0;
}

OscOrbit integrate_oscillatory(double n, std::array<double, 3> cauchy, double s_max, double tol,
                               const OscOptions& opt_in) {
  if (!(tol > 0)) throw std::invalid_argument("integrate_oscillatory: tol must be > 0");
  if (cauchy[0] == 0.0 && cauchy[1] == 0.0 && cauchy[2] == 0.0)
    throw std::invalid_argument("integrate_oscillatory: Cauchy data must not vanish identically");
  OscOptions opt = opt_in;
  opt.tol = tol;
  const bool relay = std::isinf(n);
  const double mu = interface_mu(n);
  const auto pk = pk_polynomials(mu);
  const double a2 = pk.p3[1], a1 = pk.p3[2], a0 = pk.p3[3];
  const double power = relay ? 0.0 : 1.0 / (n + 1.0);

  OscOrbit orb;
  orb.n = n;
  orb.mu = mu;
  // In psi = phi / A with A = a0^{-(n+1)/n} the equation reads
  // P3(psi) = -a0 N(psi) and the orbit has amplitude of order 1/a0; without
  // this the amplitude for small n sits far below any absolute tolerance.
  orb.scale = relay ? 1.0 / a0 : std::pow(a0, -(n + 1.0) / n);
  const double A = orb.scale;
  ode::State<3> y{cauchy[0] / A, cauchy[1] / A, cauchy[2] / A};
  const double start_size = std::max({1.0, std::abs(y[0]), std::abs(y[1]), std::abs(y[2])});

  auto sign_of = [](const ode::State<3>& u) {
    for (double v : u)
      if (v != 0.0) return v > 0 ? 1.0 : -1.0;
    return 1.0;
  };
  double mode = sign_of(y);

  ode::Options o;
  o.rtol = opt.rtol;
  o.atol = opt.atol_scaled;
  o.h_max = 0.05;
  o.h_initial = 1e-4;

  double s = 0.0, last_up = std::numeric_limits<double>::quiet_NaN();
  double cycle_max = 0.0;
  bool blew_up = false, sampling = false;
  double sample_start = 0.0;
  ode::State<3> sample_state{};
  int sampled_cycles = 0, agreeing = 0;

  auto observer = [&](const ode::Segment<3>& seg) {
    for (double v : {seg.y0[0], seg.y1[0]}) cycle_max = std::max(cycle_max, std::abs(v));
    if ((seg.y0[1] > 0) != (seg.y1[1] > 0)) {
      const double te = seg.root(1);
      cycle_max = std::max(cycle_max, std::abs(seg.component(0, te)));
    }
    if (std::abs(seg.y1[0]) > opt.escape * start_size) {
      blew_up = true;
      return false;
    }
    return true;
  };

  while (s < s_max) {
    auto rhs = [&](double, const ode::State<3>& u, ode::State<3>& du) {
      const double N = relay ? mode : mode * std::pow(std::abs(u[0]), power);
      du[0] = u[1];
      du[1] = u[2];
      du[2] = -a2 * u[2] - a1 * u[1] - a0 * u[0] - a0 * N;
    };
    const int dir = mode > 0 ? -1 : 1;
    std::function<double(double, const ode::State<3>&)> ev = [](double, const ode::State<3>& u) { return u[0]; };
    auto res = ode::integrate<3>(rhs, s, y, s_max, o, observer, ev, dir);
    if (blew_up) {
      orb.status = OscStatus::BLOWUP;
      return orb;
    }
    if (res.stop != ode::Stop::EVENT) break;
    s = res.t;
    y = res.y;
    y[0] = 0.0;
    orb.changes_sign = true;
    const bool upward = mode < 0;
    mode = -mode;
    if (!upward) continue;
    if (std::isfinite(last_up)) {
      orb.periods.push_back(s - last_up);
      orb.amplitudes.push_back(cycle_max);
      const std::size_t k = orb.periods.size();
      if (sampling) {
        if (++sampled_cycles >= opt.sample_periods) break;
      } else if (k >= 2) {
        const double dT = std::abs(orb.periods[k - 1] - orb.periods[k - 2]) / orb.periods[k - 1];
        const double dA = std::abs(orb.amplitudes[k - 1] - orb.amplitudes[k - 2]) / orb.amplitudes[k - 1];
        agreeing = (dT < tol && dA < tol) ? agreeing + 1 : 0;
        if (agreeing >= opt.confirm_cycles) {
          sampling = true;
          sample_start = s;
          sample_state = y;
          orb.transient_length = s;
        }
      }
    }
    last_up = s;
    cycle_max = 0.0;
  }

  if (!sampling || sampled_cycles < opt.sample_periods) {
    orb.status = OscStatus::NO_CONVERGENCE;
    if (!orb.periods.empty()) {
      orb.period = orb.periods.back();
      orb.amplitude = orb.amplitudes.back() * A;
    }
    return orb;
  }
  orb.converged = true;
  orb.status = OscStatus::CONVERGED;
  orb.period = orb.periods.back();
  orb.amplitude = orb.amplitudes.back() * A;
  orb.phase_origin = sample_start;
  // Uniform samples over the stored cycles, in phi units. Each sample is an
  // integrator state (not dense output), so the quintic reconstruction in
  // eval() stays accurate through the second derivative.
  const double ds = orb.period / opt.samples_per_period;
  const int total = opt.samples_per_period * opt.sample_periods;
  auto sampled_rhs = [&](double, const ode::State<3>& u, ode::State<3>& du) {
    const double sg = u[0] != 0.0 ? (u[0] > 0 ? 1.0 : -1.0) : (u[1] >= 0 ? 1.0 : -1.0);
    const double N = relay ? sg : sg * std::pow(std::abs(u[0]), power);
    du[0] = u[1];
    du[1] = u[2];
    du[2] = -a2 * u[2] - a1 * u[1] - a0 * u[0] - a0 * N;
  };
  ode::State<3> u = sample_state;
  auto keep_going = [](const ode::Segment<3>&) { return true; };
  for (int i = 0; i <= total; ++i) {
    const double t = sample_start + ds * i;
    if (i > 0) u = ode::integrate<3>(sampled_rhs, t - ds, u, t, o, keep_going).y;
    orb.samples.push_back({t, A * u[0], A * u[1], A * u[2]});
  }
  return orb;
}

double orbit_distance(const OscOrbit& a, const OscOrbit& b) {
  const double amp = std::max(a.amplitude, b.amplitude);
  if (!(amp > 0)) return 0.0;
  double d = 0.0;
  const int M = 2000;
  for (int i = 0; i <= M; ++i) {
    const double tau = a.period * i / M;
    d = std::max(d, std::abs(a.eval(a.phase_origin + tau)[0] - b.eval(b.phase_origin + tau)[0]));
  }
  return d / amp;
}

InterfaceBundle interface_bundle_parameters() {
  InterfaceBundle ib;
  ib.parameters = {"y0", "s0", "eps"};
  ib.check = [](const OscOrbit& orb, double y0, double s0, double eps, double y_lo, double y_hi,
                int points) -> InterfaceCheck {
    InterfaceCheck out;
    if (!(eps > 0) || !(y_lo > y0) || !(y_hi > y_lo) || points < 2)
      throw std::invalid_argument("interface check: need eps > 0 and y0 < y_lo < y_hi");
    const double mu = orb.mu;
    const bool relay = std::isinf(orb.n);
    const double power = relay ? 0.0 : 1.0 / (orb.n + 1.0);
    const bool zero = orb.samples.empty();
    auto N = [&](double v) { return v == 0.0 ? 0.0 : std::copysign(relay ? 1.0 : std::pow(std::abs(v), power), v); };
    auto F = [&](double y) {
      if (zero) return 0.0;
      const double x = (y - y0) / eps;
      return std::pow(eps, mu) * std::pow(x, mu) * orb.eval(std::log(x) + s0)[0];
    };
    // F'' in closed form from (phi, phi', phi''); only the last derivative is differenced.
    auto F2 = [&](double y) {
      if (zero) return 0.0;
      const double x = (y - y0) / eps;
      const auto p = orb.eval(std::log(x) + s0);
      return std::pow(eps, mu - 2.0) * std::pow(x, mu - 2.0) *
             (mu * (mu - 1.0) * p[0] + (2.0 * mu - 1.0) * p[1] + p[2]);
    };
    double nmax = 0.0;
    for (const auto& smp : orb.samples) nmax = std::max(nmax, std::abs(N(smp.phi)));
    if (zero) nmax = 1.0;
    // Scale of the terms in F''' = -N(F) at distance x from the interface.
    auto term_scale = [&](double y) {
      const double x = (y - y0) / eps;
      return std::pow(eps, mu - 3.0) * std::pow(x, mu - 3.0) * nmax;
    };
    const double r0 = std::log(y_lo - y0), r1 = std::log(y_hi - y0);
    std::vector<double> lx, lmax;
    for (int i = 0; i < points; ++i) {
      const double y = y0 + std::exp(r0 + (r1 - r0) * i / (points - 1));
      const double d = 1e-3 * (y - y0);
      const double f3 = (F2(y - 2 * d) - 8 * F2(y - d) + 8 * F2(y + d) - F2(y + 2 * d)) / (12 * d);
      const double res = std::abs(f3 + N(F(y))) / term_scale(y);
      out.max_relative_residual = std::max(out.max_relative_residual, res);
    }
    out.points = points;
    // Envelope exponent: F(e^T y) = e^{mu T} F(y) along the periodic orbit,
    // so per-cycle maxima of |F| grow exactly like y^mu.
    if (!zero) {
      const int per_cycle = 200;
      const double T = orb.period;
      const int cycles = static_cast<int>(std::floor((r1 - r0) / T));
      for (int c = 0; c < cycles; ++c) {
        double best = 0.0, at = 0.0;
        for (int j = 0; j < per_cycle; ++j) {
          const double y = y0 + std::exp(r0 + T * (c + j / double(per_cycle)));
          const double v = std::abs(F(y));
          if (v > best) best = v, at = y - y0;
        }
        lx.push_back(std::log(at));
        lmax.push_back(std::log(best));
      }
      if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += lmax[i];
        mx /= lx.size(), my /= lx.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (lmax[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
        out.fitted_exponent = sxy / sxx;
      }
    }
    return out;
  };
  return ib;
}

}  // namespace kpp
