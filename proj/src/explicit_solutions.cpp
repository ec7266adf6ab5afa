#include "kpp/explicit_solutions.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace kpp {

std::string exact_name(ExactName e) {
  switch (e) {
    case ExactName::EXAMPLE1: return "example1";
    case ExactName::EXAMPLE2: return "example2";
    case ExactName::EXAMPLE3: return "example3";
  }
  return "?";
}

ExactName parse_exact_name(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "example1" || t == "ex1" || t == "1") return ExactName::EXAMPLE1;
  if (t == "example2" || t == "ex2" || t == "2") return ExactName::EXAMPLE2;
  if (t == "example3" || t == "ex3" || t == "3") return ExactName::EXAMPLE3;
  throw std::invalid_argument("unknown exact solution: " + text);
}

namespace {

void require_positive_n(double n) {
  if (!(n > 0.0)) throw std::invalid_argument("explicit pressure solutions need n > 0");
}

void attach_pressure_residual(ExactTW& tw) {
  const double n = tw.n, lam = tw.lambda0;
  auto f = tw.f, fp = tw.fp, fpp = tw.fpp, q = tw.q;
  tw.residual = [=](double y) {
    const double v = f(y), d = fp(y);
    return -lam * d - (n + 1.0) * v * fpp(y) - (n + 1.0) / n * d * d - q(v);
  };
}

}  // namespace

ExactTW example1(double n) {
  require_positive_n(n);
  ExactTW tw;
  tw.name = ExactName::EXAMPLE1;
  tw.n = n;
  tw.lambda0 = (n + 1.0) / n;
  tw.f = [](double y) { return y < 0 ? -y / (1.0 - y) : 0.0; };
  tw.fp = [](double y) { return y < 0 ? -1.0 / ((1.0 - y) * (1.0 - y)) : 0.0; };
  tw.fpp = [](double y) { return y < 0 ? -2.0 / std::pow(1.0 - y, 3) : 0.0; };
  const double lam = tw.lambda0;
  tw.q = [=](double f) {
    const double e = f - 1.0;
    return lam * e * e - 2.0 * (n + 1.0) * e * e * e - (2.0 * (n + 1.0) + (n + 1.0) / n) * e * e * e * e;
  };
  tw.domain_note = "support y < 0, interface at y = 0, f -> 1 as y -> -inf";
  attach_pressure_residual(tw);
  return tw;
}

ExactTW example2(double n) {
  require_positive_n(n);
  ExactTW tw;
  tw.name = ExactName::EXAMPLE2;
  tw.n = n;
  tw.lambda0 = (n + 1.0) / (2.0 * n);
  // (e^{-y} - 1)/(e^{-y} + 1) = tanh(-y/2).
  tw.f = [](double y) { return y < 0 ? std::tanh(-0.5 * y) : 0.0; };
  tw.fp = [](double y) {
    if (y >= 0) return 0.0;
    const double t = std::tanh(-0.5 * y);
    return -0.5 * (1.0 - t) * (1.0 + t);
  };
  tw.fpp = [](double y) {
    if (y >= 0) return 0.0;
    const double t = std::tanh(-0.5 * y);
    return -0.5 * t * (1.0 - t) * (1.0 + t);
  };
  const double lam = tw.lambda0;
  tw.q = [=](double f) {
    return 0.5 * (1.0 - f) *
           (lam * (1.0 + f) + (n + 1.0) * f * f * (1.0 + f) - 0.5 * (n + 1.0) / n * (1.0 - f) * (1.0 + f) * (1.0 + f));
  };
  tw.domain_note = "support y < 0, interface at y = 0, f -> 1 as y -> -inf";
  attach_pressure_residual(tw);
  return tw;
}

namespace {

// With u = -y > 0 and f = u^3 (1+u)^{-3}:
//   -lambda f' = 3 lambda u^2 (1+u)^{-4},
//   (f^2)'''' = d^4/du^4 [u^6 (1+u)^{-6}]  (even order, so the sign of d/dy drops).
double fourth_of_square(double u) {
  static const double binom[5] = {1, 4, 6, 4, 1};
  double total = 0.0;
  for (int k = 0; k <= 4; ++k) {
    // d^k u^6
    double a = 1.0;
    for (int j = 0; j < k; ++j) a *= (6 - j);
    const double ua = std::pow(u, 6 - k);
    // d^{4-k} (1+u)^{-6}
    const int m = 4 - k;
    double b = 1.0;
    for (int j = 0; j < m; ++j) b *= -(6.0 + j);
    const double ub = std::pow(1.0 + u, -6 - m);
    total += binom[k] * a * ua * b * ub;
  }
  return total;
}

double example3_q_of_u(double u, double lambda) {
  return 3.0 * lambda * u * u * std::pow(1.0 + u, -4) + fourth_of_square(u);
}

// u from f through the inverse map u = W / (1 - W), W = f^{1/3}.
double u_of_f(double f) {
  const double lw = std::log(f) / 3.0;
  const double W = std::exp(lw);
  return W / (-std::expm1(lw));
}

struct Example3Source {
  double lambda;
  double t_lo, t_hi;
  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline;

  Example3Source(double lam, int samples, double f_lo, double one_minus_hi) : lambda(lam) {
    t_lo = std::log(f_lo) - std::log1p(-f_lo);
    t_hi = std::log1p(-one_minus_hi) - std::log(one_minus_hi);
    std::vector<double> vals(samples);
    const double dt = (t_hi - t_lo) / (samples - 1);
    for (int i = 0; i < samples; ++i) vals[i] = exact(f_of_t(t_lo + dt * i));
    spline = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(vals.begin(), vals.end(),
                                                                                            t_lo, dt);
  }
  static double f_of_t(double t) { return 1.0 / (1.0 + std::exp(-t)); }
  double exact(double f) const { return example3_q_of_u(u_of_f(f), lambda); }
  double operator()(double f) const {
    if (f <= 0.0) return 0.0;
    if (f >= 1.0) return 0.0;
    const double t = std::log(f) - std::log1p(-f);
    if (t < t_lo || t > t_hi) return exact(f);
    return (*spline)(t);
  }
};

}  // namespace

ExactTW example3(double lambda) {
  ExactTW tw;
  tw.name = ExactName::EXAMPLE3;
  tw.n = 1.0;
  tw.lambda0 = lambda;
  tw.f = [](double y) {
    if (y >= 0) return 0.0;
    const double r = -y / (1.0 - y);
    return r * r * r;
  };
  tw.fp = [](double y) {
    if (y >= 0) return 0.0;
    const double u = -y;
    return -3.0 * u * u * std::pow(1.0 + u, -4);
  };
  tw.fpp = [](double y) {
    if (y >= 0) return 0.0;
    // d/dy = -d/du applied to -3u^2(1+u)^{-4}.
    const double u = -y;
    return 6.0 * u * std::pow(1.0 + u, -4) - 12.0 * u * u * std::pow(1.0 + u, -5);
  };
  auto src = std::make_shared<Example3Source>(lambda, 16000, 1e-20, 1e-6);
  tw.q = [src](double f) { return (*src)(f); };
  tw.domain_note = "support y < 0, f ~ (-y)^3 at the interface y = 0, f -> 1 as y -> -inf";
  auto f = tw.f, fp = tw.fp, q = tw.q;
  tw.residual = [=](double y) {
    if (y >= 0) return 0.0;
    return -lambda * fp(y) + fourth_of_square(-y) - q(f(y));
  };
  return tw;
}

double fit_small_f_exponent(const ExactTW& tw, double f_min, double f_max, int points) {
  if (!(f_min > 0 && f_max > f_min) || points < 2) throw std::invalid_argument("fit window must satisfy 0 < f_min < f_max");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < points; ++i) {
    const double lf = std::log(f_min) + (std::log(f_max) - std::log(f_min)) * i / (points - 1);
    const double q = std::abs(tw.q(std::exp(lf)));
    if (!(q > 0)) throw std::runtime_error("fit_small_f_exponent: q vanishes inside the window");
    const double lq = std::log(q);
    sx += lf, sy += lq, sxx += lf * lf, sxy += lf * lq;
  }
  return (points * sxy - sx * sy) / (points * sxx - sx * sx);
}

ExactReport verify_exact(const ExactTW& tw, const Grid& grid, double tol, const ExactOptions& opt) {
  ExactReport rep;
  rep.name = exact_name(tw.name);
  rep.n = tw.n;
  rep.lambda0 = tw.lambda0;
  for (int i = 0; i < grid.size(); ++i) {
    const double y = grid.nodes[i];
    if (y >= 0) throw std::invalid_argument("verify_exact: grid must lie inside the support y < 0");
    const double r = std::abs(tw.residual(y));
    if (!(r <= rep.max_residual)) {
      rep.max_residual = r;
      rep.max_node = i;
      rep.max_y = y;
    }
  }
  rep.pass = std::isfinite(rep.max_residual) && rep.max_residual <= tol;
  if (tw.name == ExactName::EXAMPLE3) {
    rep.fit_window = {opt.fit_f_min, opt.fit_f_max};
    rep.fitted_exponent = fit_small_f_exponent(tw, opt.fit_f_min, opt.fit_f_max, opt.fit_points);
    rep.lipschitz_at_zero = *rep.fitted_exponent >= opt.lipschitz_threshold;
    rep.pass = rep.pass && *rep.lipschitz_at_zero;
  }
  return rep;
}

}  // namespace kpp
