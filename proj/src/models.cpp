#include "kpp/models.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "kpp/fd.hpp"

namespace kpp {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad numeric value for '" + key + "': " + v);
  }
}

}  // namespace

std::string family_name(Family fam) {
  switch (fam) {
    case Family::KPP2: return "KPP2";
    case Family::KPP2_PME: return "KPP2_PME";
    case Family::KPP4n: return "KPP4n";
    case Family::KPP4n_QUASI_SOURCE: return "KPP4n_QUASI_SOURCE";
    case Family::TFE4: return "TFE4";
    case Family::KPP6n: return "KPP6n";
    case Family::KPP8n: return "KPP8n";
  }
  return "?";
}

Family parse_family(std::string_view text) {
  static const std::map<std::string, Family> table{
      {"kpp2", Family::KPP2},          {"classic", Family::KPP2},
      {"kpp2_pme", Family::KPP2_PME},  {"pme", Family::KPP2_PME},
      {"kpp4n", Family::KPP4n},        {"kpp4", Family::KPP4n},
      {"kpp4n_quasi_source", Family::KPP4n_QUASI_SOURCE},
      {"quasi", Family::KPP4n_QUASI_SOURCE}, {"quasi_source", Family::KPP4n_QUASI_SOURCE},
      {"tfe4", Family::TFE4},          {"tfe", Family::TFE4},
      {"kpp6n", Family::KPP6n},        {"kpp6", Family::KPP6n},
      {"kpp8n", Family::KPP8n},        {"kpp8", Family::KPP8n}};
  std::string key = lower(trim(text));
  std::replace(key.begin(), key.end(), '-', '_');
  auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("unknown equation family: " + std::string(text));
  return it->second;
}

int family_order(Family fam) {
  switch (fam) {
    case Family::KPP2:
    case Family::KPP2_PME: return 2;
    case Family::KPP4n:
    case Family::KPP4n_QUASI_SOURCE:
    case Family::TFE4: return 4;
    case Family::KPP6n: return 6;
    case Family::KPP8n: return 8;
  }
  return 0;
}

bool solved_in_f(Family fam) { return fam == Family::TFE4 || fam == Family::KPP2_PME; }

int principal_sign(Family fam) {
  // From the PDE u_t = sign * D^{2m}(|u|^n u) + u(1-u) with the sign that
  // makes the operator dissipative, the travelling wave u = f(x - lambda t)
  // obeys F^(2m) = s (lambda f' + f(1-f)) with s = (-1)^m.
  return (family_order(fam) / 2) % 2 == 0 ? 1 : -1;
}

void ModelSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be >= 0");
  if (!std::isfinite(n) || !std::isfinite(lambda)) throw std::invalid_argument("n and lambda must be finite");
  if (family == Family::KPP4n_QUASI_SOURCE) {
    if (!(n > -1.0)) throw std::invalid_argument("quasi-source family requires n > -1");
  } else if (family == Family::KPP2_PME) {
    if (!(n > 0.0)) throw std::invalid_argument("pressure form requires n > 0");
  } else if (!(n >= 0.0)) {
    throw std::invalid_argument(family_name(family) + " requires n >= 0");
  }
}

std::string ModelSpec::to_record() const {
  std::ostringstream os;
  os.precision(17);
  os << "family = " << family_name(family) << "\n"
     << "n = " << n << "\n"
     << "lambda = " << lambda << "\n"
     << "epsilon = " << epsilon << "\n";
  return os.str();
}

ModelSpec ModelSpec::from_record(std::string_view text) {
  ModelSpec s;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (!trim(line).empty()) throw std::invalid_argument("malformed record line: " + line);
      continue;
    }
    const std::string key = lower(trim(std::string_view(line).substr(0, eq)));
    const std::string val = trim(std::string_view(line).substr(eq + 1));
    if (key == "family") s.family = parse_family(val);
    else if (key == "n") s.n = parse_double(key, val);
    else if (key == "lambda") s.lambda = parse_double(key, val);
    else if (key == "epsilon") s.epsilon = parse_double(key, val);
    else throw std::invalid_argument("unknown record key: " + key);
  }
  s.validate();
  return s;
}

Grid Grid::uniform(double y_left, double y_right, int m) {
  if (m < 2 || !(y_left < y_right)) throw std::invalid_argument("grid needs m >= 2 and y_left < y_right");
  Grid g;
  g.nodes.resize(m);
  const double h = (y_right - y_left) / (m - 1);
  for (int i = 0; i < m; ++i) g.nodes[i] = y_left + h * i;
  g.nodes.back() = y_right;
  return g;
}

bool Grid::is_uniform(double rel_tol) const {
  if (nodes.size() < 3) return true;
  const double h0 = nodes[1] - nodes[0];
  for (std::size_t i = 2; i < nodes.size(); ++i)
    if (std::abs((nodes[i] - nodes[i - 1]) - h0) > rel_tol * std::abs(h0) * 10) return false;
  return true;
}

int Grid::nearest(double y) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), y);
  if (it == nodes.end()) return size() - 1;
  int i = static_cast<int>(it - nodes.begin());
  if (i > 0 && std::abs(nodes[i - 1] - y) <= std::abs(nodes[i] - y)) --i;
  return i;
}

PowerMap::PowerMap(double n, double eps) : n_(n), eps_(eps), a_(n / (2.0 * (n + 1.0))) {
  if (!(n > -1.0)) throw std::invalid_argument("PowerMap requires n > -1");
  if (!(eps >= 0.0)) throw std::invalid_argument("PowerMap requires eps >= 0");
  c_ = std::pow(1.0 + eps * eps, a_);
}

double PowerMap::f(double F) const {
  if (n_ == 0.0) return F;
  if (eps_ == 0.0) return f_from_F(F, n_);
  return c_ * F * std::pow(eps_ * eps_ + F * F, -a_);
}

double PowerMap::df(double F) const {
  if (n_ == 0.0) return 1.0;
  if (eps_ == 0.0) {
    if (F == 0.0) throw std::domain_error("S(F) is singular at F = 0 without regularization");
    return std::pow(std::abs(F), -n_ / (n_ + 1.0)) / (n_ + 1.0);
  }
  const double e2 = eps_ * eps_, r = e2 + F * F;
  return c_ * std::pow(r, -a_ - 1.0) * ((n_ + 1.0) * e2 + F * F) / (n_ + 1.0);
}

double PowerMap::dS(double F) const {
  if (n_ == 0.0) return 0.0;
  if (eps_ == 0.0) {
    if (F == 0.0) throw std::domain_error("dS/dF is singular at F = 0 without regularization");
    const double p = -n_ / (n_ + 1.0);
    return p * std::pow(std::abs(F), p - 1.0) * (F > 0 ? 1.0 : -1.0);
  }
  const double e2 = eps_ * eps_, r = e2 + F * F;
  return c_ * 2.0 * F * std::pow(r, -a_ - 2.0) * (r - (a_ + 1.0) * ((n_ + 1.0) * e2 + F * F));
}

double PowerMap::F(double f_value) const {
  if (n_ == 0.0) return f_value;
  double F = F_from_f(f_value, n_);
  if (eps_ == 0.0) return F;
  // f_eps is strictly increasing; Newton from the unregularized guess.
  for (int it = 0; it < 100; ++it) {
    const double r = f(F) - f_value;
    const double d = df(F);
    const double step = r / d;
    F -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(F))) break;
  }
  return F;
}

double f_from_F(double F, double n) {
  if (F == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(F), 1.0 / (n + 1.0)), F);
}

double F_from_f(double f, double n) {
  if (f == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(f), n + 1.0), f);
}

void TWProfile::sync_from_F() {
  PowerMap map(spec.n, spec.epsilon);
  f.resize(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) f[i] = map.f(F[i]);
}

void TWProfile::sync_from_f() {
  F.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) F[i] = F_from_f(f[i], spec.n);
}

TWProfile constant_profile(const ModelSpec& spec, const Grid& grid, double f_value) {
  TWProfile p;
  p.spec = spec;
  p.grid = grid;
  p.f.assign(grid.size(), f_value);
  if (solved_in_f(spec.family)) {
    p.sync_from_f();
  } else {
    PowerMap map(spec.n, spec.epsilon);
    p.F.assign(grid.size(), map.F(f_value));
  }
  return p;
}

double tw_residual(const ModelSpec& spec, const TWProfile& profile, int i, const SourceFn* source) {
  const int order = spec.order();
  const int N = profile.grid.size();
  const int r = order == 4 && spec.family == Family::TFE4 ? 2 : fd::half_width(order);
  if (i - r < 0 || i + r >= N) throw std::out_of_range("tw_residual: stencil does not fit at node");
  const double h = profile.grid.h();
  const double lam = spec.lambda, n = spec.n;

  if (spec.family == Family::TFE4) {
    const auto& f = profile.f;
    auto R = [&](double v) {
      return spec.epsilon > 0 ? std::pow(spec.epsilon * spec.epsilon + v * v, 0.5 * n) : std::pow(std::abs(v), n);
    };
    auto third_half = [&](int j) {  // f''' at j + 1/2
      return (f[j + 2] - 3.0 * f[j + 1] + 3.0 * f[j] - f[j - 1]) / (h * h * h);
    };
    const double flux_p = R(0.5 * (f[i] + f[i + 1])) * third_half(i);
    const double flux_m = R(0.5 * (f[i - 1] + f[i])) * third_half(i - 1);
    const double fp = (f[i + 1] - f[i - 1]) / (2.0 * h);
    const double src = source ? (*source)(f[i]) : f[i] * (1.0 - f[i]);
    return lam * fp - (flux_p - flux_m) / h + src;
  }
  if (spec.family == Family::KPP2_PME) {
    const auto& f = profile.f;
    const double fp = fd::derivative(f, i, 1, h), fpp = fd::derivative(f, i, 2, h);
    const double q = source ? (*source)(f[i]) : f[i] * (1.0 - f[i]);
    return lam * fp + (n + 1.0) * f[i] * fpp + (n + 1.0) / n * fp * fp + q;
  }

  const auto& F = profile.F;
  const PowerMap map(n, spec.epsilon);
  const double Fi = F[i];
  const double Fp = fd::derivative(F, i, 1, h);
  const double top = fd::derivative(F, i, order, h);
  // lambda * d/dy f(F) = lambda f'(F) F'; the product extends by 0 at F = 0.
  double transport = 0.0;
  if (!(Fi == 0.0 && spec.epsilon == 0.0 && n != 0.0)) transport = lam * map.df(Fi) * Fp;
  double src;
  if (source) src = (*source)(Fi);
  else if (spec.family == Family::KPP4n_QUASI_SOURCE) src = Fi * (1.0 - Fi);
  else {
    const double fi = map.f(Fi);
    src = fi * (1.0 - fi);
  }
  return top - principal_sign(spec.family) * (transport + src);
}

double max_interior_residual(const ModelSpec& spec, const TWProfile& profile, const SourceFn* source) {
  const int N = profile.grid.size();
  const int r = spec.family == Family::TFE4 ? 2 : fd::half_width(spec.order());
  double m = 0.0;
  for (int i = r; i < N - r; ++i) m = std::max(m, std::abs(tw_residual(spec, profile, i, source)));
  return m;
}

double certificate_rhs_closed_form(Family fam, double n) {
  if (fam == Family::KPP4n_QUASI_SOURCE) return -1.0 / 6.0;
  return -(n + 1.0) * (1.0 / (n + 2.0) - 1.0 / (n + 3.0));
}

bool Certificate::holds() const {
  if (mass_balance) return std::abs(lhs - rhs) <= bound;
  return rhs < 0.0 && lhs < 0.0 && std::abs(lhs - rhs) <= bound;
}

namespace {

// Derivative column k of the profile: collocation state when present,
// otherwise centred differences with one-sided ends.
std::vector<double> derivative_column(const TWProfile& p, const std::vector<double>& v, int k) {
  const bool state_var = p.spec.family == Family::TFE4 ? &v == &p.f : &v == &p.F;
  if (k < static_cast<int>(p.state.size()) && state_var) return p.state[k];
  std::vector<double> out(v.size());
  const int N = static_cast<int>(v.size());
  const auto& y = p.grid.nodes;
  if (k != 1) throw std::invalid_argument("derivative_column: only first derivatives are differenced");
  for (int i = 0; i < N; ++i) {
    if (i == 0) out[i] = (v[1] - v[0]) / (y[1] - y[0]);
    else if (i == N - 1) out[i] = (v[N - 1] - v[N - 2]) / (y[N - 1] - y[N - 2]);
    else out[i] = (v[i + 1] - v[i - 1]) / (y[i + 1] - y[i - 1]);
  }
  return out;
}

// Trapezoid on the full grid and on every second node; returns the
// integral and a Richardson error estimate.
std::pair<double, double> integrate_with_error(const std::vector<double>& x, const std::vector<double>& g) {
  const double full = fd::trapezoid(x, g);
  std::vector<double> xc, gc;
  for (std::size_t i = 0; i < x.size(); i += 2) xc.push_back(x[i]), gc.push_back(g[i]);
  if (xc.back() != x.back()) xc.push_back(x.back()), gc.push_back(g.back());
  const double coarse = fd::trapezoid(xc, gc);
  return {full, std::abs(full - coarse) / 3.0};
}

// int_0^1 of the reaction term as a function of F.
double source_potential(const ModelSpec& spec) {
  const PowerMap map(spec.n, spec.epsilon);
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto g = [&](double F) {
    if (spec.family == Family::KPP4n_QUASI_SOURCE) return F * (1.0 - F);
    const double f = map.f(F);
    return f * (1.0 - f);
  };
  return integrator.integrate(g, 0.0, 1.0);
}

// Accumulated rounding in an N-term sum.
double rounding_floor(int N, double a, double b) {
  return 10.0 * N * std::numeric_limits<double>::epsilon() * (std::abs(a) + std::abs(b));
}

// The profile carries an O(h^2) error from the trapezoidal collocation. Its
// local size is (h^2/12) times the third derivative of each state column;
// weighting by |F'| gives the first-order effect on the multiplier integral.
double discretization_error(const TWProfile& p, const std::vector<double>& Fp) {
  const int N = p.grid.size();
  if (p.state.empty() || N < 5) return 0.0;
  const auto& y = p.grid.nodes;
  std::vector<double> g(N, 0.0);
  for (const auto& col : p.state) {
    for (int i = 2; i + 2 < N; ++i) {
      const double h = 0.25 * (y[i + 2] - y[i - 2]);
      const double d3 = (col[i + 2] - 2.0 * col[i + 1] + 2.0 * col[i - 1] - col[i - 2]) / (2.0 * h * h * h);
      g[i] += h * h / 12.0 * std::abs(d3) * std::abs(Fp[i]);
    }
  }
  return fd::trapezoid(y, g);
}

}  // namespace

Certificate lambda_sign_certificate(const TWProfile& p, double n) {
  Certificate c;
  const auto& y = p.grid.nodes;
  const int N = p.grid.size();
  if (N < 5) throw std::invalid_argument("certificate needs at least five nodes");
  if (p.spec.family == Family::TFE4) {
    // Integrating the divergence-form ODE: int f(1-f) = lambda (f(a) - f(b)) + [R f''']_a^b.
    c.mass_balance = true;
    std::vector<double> g(N);
    for (int i = 0; i < N; ++i) g[i] = p.f[i] * (1.0 - p.f[i]);
    auto [val, err] = integrate_with_error(y, g);
    c.lhs = val;
    c.rhs = p.spec.lambda;
    double flux = 0.0;
    if (p.state.size() >= 4) flux = std::abs(p.state[3][N - 1] - p.state[3][0]);
    flux += std::abs(p.spec.lambda) * (std::abs(p.f[0] - 1.0) + std::abs(p.f[N - 1]));
    const auto fp = derivative_column(p, p.f, 1);
    c.bound = 10.0 * err + flux + 10.0 * discretization_error(p, fp) + rounding_floor(N, c.lhs, c.rhs);
    return c;
  }
  if (solved_in_f(p.spec.family)) throw std::invalid_argument("certificate not defined for the pressure form");

  ModelSpec spec = p.spec;
  spec.n = n;
  const PowerMap map(n, spec.epsilon);
  const auto Fp = derivative_column(p, p.F, 1);
  std::vector<double> g(N);
  // (n+1)|f|^n f'^2 = f' F' with f' = f'(F) F'.
  for (int i = 0; i < N; ++i) g[i] = map.df(p.F[i]) * Fp[i] * Fp[i];
  auto [val, err] = integrate_with_error(y, g);
  c.lhs = -spec.lambda * val;
  c.rhs = certificate_rhs_closed_form(spec.family, n);

  // Boundary flux of int F^(2m) F' dy on the truncated interval.
  double flux = 0.0;
  const int m = spec.order() / 2;
  if (static_cast<int>(p.state.size()) >= 2 * m) {
    auto term = [&](int i) {
      double s = 0.0;
      for (int j = 0; j <= m - 2; ++j) s += ((j % 2) ? -1.0 : 1.0) * p.state[2 * m - 1 - j][i] * p.state[j + 1][i];
      s += (((m - 1) % 2) ? -1.0 : 1.0) * 0.5 * p.state[m][i] * p.state[m][i];
      return s;
    };
    flux = std::abs(term(N - 1) - term(0));
  }
  // Boundary values off their limits shift the potential difference.
  auto potential_gap = [&](double F) { return std::abs(F) * (std::abs(F) + 1.0); };
  flux += potential_gap(p.F[N - 1]) + potential_gap(p.F[0] - 1.0);
  const double reg_gap = spec.epsilon > 0 ? std::abs(source_potential(spec) + c.rhs) : 0.0;
  c.bound = 10.0 * err + flux + reg_gap + 10.0 * discretization_error(p, Fp) + rounding_floor(N, c.lhs, c.rhs);
  return c;
}

}  // namespace kpp
