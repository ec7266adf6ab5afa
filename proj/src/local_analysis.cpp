#include "kpp/local_analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kpp/ode.hpp"

namespace kpp {
namespace {

std::complex<double> horner(const std::vector<double>& c, std::complex<double> x, std::complex<double>* deriv) {
  std::complex<double> p = c[0], d = 0.0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    d = d * x + p;
    p = p * x + c[k];
  }
  if (deriv) *deriv = d;
  return p;
}

}  // namespace

RootSet polynomial_roots(const std::vector<double>& coefficients, double center_tol) {
  RootSet rs;
  rs.coefficients = coefficients;
  std::size_t lead = 0;
  while (lead < coefficients.size() && coefficients[lead] == 0.0) ++lead;
  if (lead == coefficients.size()) throw std::invalid_argument("polynomial_roots: zero polynomial");
  std::vector<double> c(coefficients.begin() + lead, coefficients.end());
  rs.coefficients = c;
  const int deg = static_cast<int>(c.size()) - 1;
  if (deg > 0) {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int j = 0; j < deg; ++j) comp(0, j) = -c[j + 1] / c[0];
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (int i = 0; i < deg; ++i) {
      std::complex<double> z = es.eigenvalues()[i];
      // Newton polish; keep the better iterate.
      for (int it = 0; it < 8; ++it) {
        std::complex<double> d;
        const auto p = horner(c, z, &d);
        if (std::abs(d) == 0.0) break;
        const auto zn = z - p / d;
        if (std::abs(horner(c, zn, nullptr)) >= std::abs(p)) break;
        z = zn;
      }
      rs.roots.push_back(z);
    }
  }
  std::sort(rs.roots.begin(), rs.roots.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  for (const auto& z : rs.roots) {
    if (std::abs(z.real()) < center_tol) ++rs.n_center;
    else if (z.real() > 0) ++rs.n_stable;
    else ++rs.n_unstable;
  }
  return rs;
}

std::vector<std::complex<double>> expand_roots(const std::vector<std::complex<double>>& roots, double leading) {
  std::vector<std::complex<double>> c{leading};
  for (const auto& r : roots) {
    c.push_back(0.0);
    for (std::size_t k = c.size() - 1; k > 0; --k) c[k] -= r * c[k - 1];
  }
  return c;
}

std::vector<double> characteristic_polynomial(int order, double n, double lambda) {
  if (order != 2 && order != 4 && order != 6 && order != 8)
    throw std::invalid_argument("characteristic_polynomial: order must be 2, 4, 6 or 8");
  if (!(n > -1.0)) throw std::invalid_argument("characteristic_polynomial: n must exceed -1");
  // (n+1) mu^{2m} - s (lambda mu - 1) with s = (-1)^m.
  const double s = (order / 2) % 2 == 0 ? 1.0 : -1.0;
  std::vector<double> c(order + 1, 0.0);
  c[0] = n + 1.0;
  c[order - 1] = -s * lambda;
  c[order] = s;
  return c;
}

RootSet characteristic_roots(int order, double n, double lambda) {
  return polynomial_roots(characteristic_polynomial(order, n, lambda));
}

RootSet classic_leading_edge_roots(double lambda, double slope) {
  return polynomial_roots({1.0, lambda, slope});
}

std::string regime_name(BlowupRegime r) {
  switch (r) {
    case BlowupRegime::FINITE_BLOWUP: return "FINITE_BLOWUP";
    case BlowupRegime::EXPONENTIAL: return "EXPONENTIAL";
    case BlowupRegime::ALGEBRAIC_GROWTH: return "ALGEBRAIC_GROWTH";
  }
  return "?";
}

BlowupAsymptote blowup_asymptote(double n) {
  if (!(n >= 0.0)) throw std::invalid_argument("blowup_asymptote: n must be >= 0");
  BlowupAsymptote b{};
  b.n = n;
  if (n < 1.0) {
    const double a = 4.0 * (n + 1.0) / (1.0 - n);
    b.regime = BlowupRegime::FINITE_BLOWUP;
    b.exponent = a;
    b.amplitude = std::pow(a * (a + 1.0) * (a + 2.0) * (a + 3.0), (n + 1.0) / (1.0 - n));
  } else if (n == 1.0) {
    b.regime = BlowupRegime::EXPONENTIAL;
    b.exponent = 1.0;
    b.amplitude = 1.0;
  } else {
    const double be = 4.0 * (n + 1.0) / (n - 1.0);
    b.regime = BlowupRegime::ALGEBRAIC_GROWTH;
    b.exponent = be;
    b.amplitude = std::pow(be * (be - 1.0) * (be - 2.0) * (be - 3.0), -(n + 1.0) / (n - 1.0));
  }
  return b;
}

double BlowupAsymptote::value(double y, double y0) const {
  switch (regime) {
    case BlowupRegime::FINITE_BLOWUP:
      if (!(y < y0)) throw std::domain_error("blow-up profile defined only for y < y0");
      return -amplitude * std::pow(y0 - y, -exponent);
    case BlowupRegime::EXPONENTIAL: return -std::exp(-(y - y0));
    case BlowupRegime::ALGEBRAIC_GROWTH:
      if (!(y < y0)) throw std::domain_error("growth profile defined only for y < y0");
      return -amplitude * std::pow(y0 - y, exponent);
  }
  return 0.0;
}

double BlowupAsymptote::fourth_derivative(double y, double y0) const {
  const double a = exponent;
  switch (regime) {
    case BlowupRegime::FINITE_BLOWUP:
      return -amplitude * a * (a + 1.0) * (a + 2.0) * (a + 3.0) * std::pow(y0 - y, -a - 4.0);
    case BlowupRegime::EXPONENTIAL: return -std::exp(-(y - y0));
    case BlowupRegime::ALGEBRAIC_GROWTH:
      return -amplitude * a * (a - 1.0) * (a - 2.0) * (a - 3.0) * std::pow(y0 - y, a - 4.0);
  }
  return 0.0;
}

double BlowupAsymptote::relative_residual(double y, double y0) const {
  const double d4 = fourth_derivative(y, y0);
  const double rhs = -std::pow(std::abs(value(y, y0)), 2.0 / (n + 1.0));
  return std::abs(d4 - rhs) / std::max(std::abs(d4), std::abs(rhs));
}

MatchingDimensions matching_dimensions(int order, double n) {
  MatchingDimensions md;
  if (order != 4) return md;
  if (!(n >= 0.0)) throw std::invalid_argument("matching_dimensions: n must be >= 0");
  md.interface_bundle = 3;  // interface position, phase shift, scaling
  md.unstable_dim = 1;      // blow-up manifold
  md.left_stable_dim = characteristic_roots(4, n, 0.0).n_stable;
  md.well_posed = *md.interface_bundle - *md.unstable_dim == *md.left_stable_dim;
  return md;
}

namespace {

// Logarithmic variables L = log f, z = f'/f:
//   L' = z,  z' = -(z^2 + lambda z + s (1 - e^L)).
struct ShotRhs {
  double lambda, slope;
  void operator()(double, const ode::State<2>& u, ode::State<2>& du) const {
    du[0] = u[1];
    du[1] = -(u[1] * u[1] + lambda * u[1] + slope * (1.0 - std::exp(u[0])));
  }
};

double unstable_rate(double lambda, double slope) {
  return 0.5 * (-lambda + std::sqrt(lambda * lambda + 4.0 * slope));
}

ode::State<2> shot_start(double lambda, double slope, double delta) {
  const double k = unstable_rate(lambda, slope);
  return {std::log1p(-delta), -k * delta / (1.0 - delta)};
}

enum class ShotFate { CROSSES_ZERO, TURNS_BACK, BOUNDED };

ShotFate shoot(double lambda, double slope, const ShootingOptions& opt) {
  ShotRhs rhs{lambda, slope};
  ode::Options o;
  o.rtol = opt.rtol;
  o.atol = opt.rtol * 1e-2;
  o.h_max = 1.0;
  ShotFate fate = ShotFate::BOUNDED;
  auto obs = [&](const ode::Segment<2>& s) {
    if (s.y1[1] < -1e6) {
      fate = ShotFate::CROSSES_ZERO;
      return false;
    }
    if (s.y1[1] > 0.0) {
      fate = ShotFate::TURNS_BACK;
      return false;
    }
    return true;
  };
  ode::integrate<2>(rhs, 0.0, shot_start(lambda, slope, opt.start_offset), opt.y_max, o, obs);
  return fate;
}

}  // namespace

double kpp2_minimal_speed(double slope, const ShootingOptions& opt) {
  if (!(slope > 0.0)) throw std::invalid_argument("kpp2_minimal_speed: slope must be positive");
  double lo = 0.0, hi = 4.0 * std::sqrt(slope) + 2.0;
  if (shoot(lo, slope, opt) == ShotFate::BOUNDED || shoot(hi, slope, opt) != ShotFate::BOUNDED)
    throw std::runtime_error("kpp2_minimal_speed: bisection interval does not bracket the threshold");
  while (hi - lo > opt.tol) {
    const double mid = 0.5 * (lo + hi);
    if (shoot(mid, slope, opt) == ShotFate::BOUNDED) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

ClassicProfile classic_profile(double lambda, double slope, double y_left, double y_right, double h,
                               const ShootingOptions& opt) {
  if (!(y_left < 0 && y_right > 0 && h > 0)) throw std::invalid_argument("classic_profile: bad sampling window");
  ShotRhs rhs{lambda, slope};
  ode::Options o;
  o.rtol = opt.rtol;
  o.atol = opt.rtol * 1e-2;
  o.h_max = 0.25;
  std::vector<ode::Segment<2>> segs;
  double y_half = std::numeric_limits<double>::quiet_NaN();
  const double log_half = std::log(0.5);
  ShotFate fate = ShotFate::BOUNDED;
  double y_end = 0.0;
  auto obs = [&](const ode::Segment<2>& s) {
    segs.push_back(s);
    if (std::isnan(y_half) && s.y0[0] >= log_half && s.y1[0] < log_half) y_half = s.root(0, log_half);
    if (s.y1[1] < -1e6) fate = ShotFate::CROSSES_ZERO;
    else if (s.y1[1] > 0.0) fate = ShotFate::TURNS_BACK;
    y_end = s.t1;
    return fate == ShotFate::BOUNDED && !(std::isfinite(y_half) && s.t1 > y_half + y_right + 1.0);
  };
  const double delta = opt.start_offset;
  ode::integrate<2>(rhs, 0.0, shot_start(lambda, slope, delta), 1e5, o, obs);
  if (std::isnan(y_half)) throw std::runtime_error("classic_profile: trajectory never reached f = 1/2");

  ClassicProfile p;
  p.lambda = lambda;
  p.monotone = true;
  const int m = static_cast<int>(std::floor((y_right - y_left) / h + 1e-9)) + 1;
  const double k = unstable_rate(lambda, slope);
  std::size_t is = 0;
  for (int i = 0; i < m; ++i) {
    const double y = y_left + h * i;
    const double t = y + y_half;  // shooting coordinate
    double L, z;
    if (t <= 0.0) {
      const double w = delta * std::exp(k * t);
      L = std::log1p(-w);
      z = -k * w / (1.0 - w);
    } else if (t >= y_end) {
      // Past the horizon (or after a zero crossing): freeze on the last state.
      const auto& s = segs.back();
      L = s.y1[0] + s.y1[1] * (t - s.t1);
      z = s.y1[1];
    } else {
      while (is + 1 < segs.size() && segs[is].t1 < t) ++is;
      while (is > 0 && segs[is].t0 > t) --is;
      L = segs[is].component(0, t);
      z = segs[is].component(1, t);
    }
    p.y.push_back(y);
    p.log_f.push_back(L);
    p.f.push_back(std::exp(L));
    p.fp.push_back(z * std::exp(L));
    if (!(z < 0.0)) p.monotone = false;
  }
  if (fate != ShotFate::BOUNDED) p.monotone = false;
  return p;
}

TailFit fit_classic_tail(const ClassicProfile& prof, double y_a, double y_b) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(prof.y.size()); ++i)
    if (prof.y[i] >= y_a && prof.y[i] <= y_b && prof.y[i] > 0) idx.push_back(i);
  if (idx.size() < 4) throw std::invalid_argument("fit_classic_tail: window holds too few samples");
  Eigen::MatrixXd A(idx.size(), 3);
  Eigen::VectorXd b(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double y = prof.y[idx[r]];
    A(r, 0) = 1.0;
    A(r, 1) = std::log(y);
    A(r, 2) = y;
    b(r) = prof.log_f[idx[r]];
  }
  Eigen::Vector3d c = A.colPivHouseholderQr().solve(b);
  return {c(2), c(1), std::exp(c(0))};
}

}  // namespace kpp
