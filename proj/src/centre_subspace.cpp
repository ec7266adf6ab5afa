#include "kpp/centre_subspace.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "kpp/fd.hpp"

namespace kpp {

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool same_spec(const ModelSpec& a, const ModelSpec& b) {
  return a.family == b.family && a.n == b.n && a.lambda == b.lambda && a.epsilon == b.epsilon;
}

using SpMat = Eigen::SparseMatrix<double>;

// Hager's 1-norm estimate of |K^-1| for symmetric K.
template <class Solver>
double inverse_norm1(const Solver& lu, int n) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
  double est = 0.0;
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd y = lu.solve(x);
    est = y.lpNorm<1>();
    const Eigen::VectorXd xi = y.unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; });
    const Eigen::VectorXd z = lu.solve(xi);
    Eigen::Index j;
    const double zmax = z.cwiseAbs().maxCoeff(&j);
    if (zmax <= z.dot(x)) break;
    x.setZero();
    x[j] = 1.0;
  }
  return est;
}

}  // namespace

bool LinearizedOperator::is_boundary_row(int i) const {
  return closure == Closure::DIRICHLET && (i < radius || i >= size() - radius);
}

std::vector<double> LinearizedOperator::apply(const std::vector<double>& w) const {
  const int N = size();
  if (static_cast<int>(w.size()) != N) throw std::invalid_argument("apply: vector length mismatch");
  std::vector<double> out(N, 0.0);
  for (int i = 0; i < N; ++i) {
    if (is_boundary_row(i)) continue;
    long double s = 0.0L;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(matrix, i); it; ++it)
      s += static_cast<long double>(it.value()) * w[it.col()];
    out[i] = static_cast<double>(s);
  }
  return out;
}

std::vector<double> LinearizedOperator::derivative(const std::vector<double>& w) const {
  const int N = static_cast<int>(w.size());
  std::vector<double> d(N);
  if (closure == Closure::PERIODIC) {
    for (int i = 0; i < N; ++i) d[i] = (w[(i + 1) % N] - w[(i - 1 + N) % N]) / (2.0 * h);
    return d;
  }
  for (int i = 1; i + 1 < N; ++i) d[i] = (w[i + 1] - w[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h);
  d[N - 1] = (3.0 * w[N - 1] - 4.0 * w[N - 2] + w[N - 3]) / (2.0 * h);
  return d;
}

LinearizedOperator build_linearized(const TWProfile& profile, const ModelSpec& spec, Closure closure) {
  if (!same_spec(profile.spec, spec)) throw std::invalid_argument("build_linearized: profile was computed for a different spec");
  if (solved_in_f(spec.family)) throw std::invalid_argument("build_linearized: family not posed in F = |f|^n f");
  const int N = profile.grid.size();
  const int order = spec.order();
  if (N < 2 * order + 4 || !profile.grid.is_uniform()) throw std::invalid_argument("build_linearized: needs a uniform grid");
  if (static_cast<int>(profile.F.size()) != N || static_cast<int>(profile.f.size()) != N)
    throw std::invalid_argument("build_linearized: profile arrays do not match the grid");

  LinearizedOperator op;
  op.profile = profile;
  op.spec = spec;
  op.closure = closure;
  op.h = profile.grid.h();
  op.radius = fd::half_width(order);
  const auto w = fd::central_weights(order);
  const int r = op.radius;
  const double hp = std::pow(op.h, -order);
  const double s = -principal_sign(spec.family);
  const PowerMap map(spec.n, spec.epsilon);
  const bool quasi = spec.family == Family::KPP4n_QUASI_SOURCE;

  std::vector<double> q(N), react(N);
  for (int i = 0; i < N; ++i) {
    const double F = profile.F[i];
    q[i] = 1.0 / map.df(F);
    // (d source / dF) * q, i.e. the source linearised in f.
    react[i] = quasi ? (1.0 - 2.0 * F) * q[i] : 1.0 - 2.0 * map.f(F);
  }

  op.matrix.resize(N, N);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(N) * (2 * r + 2));
  auto wrap = [&](int j) { return closure == Closure::PERIODIC ? (j % N + N) % N : j; };
  for (int i = 0; i < N; ++i) {
    if (op.is_boundary_row(i)) {
      trip.emplace_back(i, i, hp);
      continue;
    }
    for (int j = -r; j <= r; ++j) {
      const int c = wrap(i + j);
      trip.emplace_back(i, c, s * w[j + r] * hp * q[c]);
    }
    trip.emplace_back(i, i, react[i]);
    trip.emplace_back(i, wrap(i + 1), spec.lambda / (2.0 * op.h));
    trip.emplace_back(i, wrap(i - 1), -spec.lambda / (2.0 * op.h));
  }
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();

  op.fprime.assign(N, 0.0);
  if (profile.state.size() > 1 && static_cast<int>(profile.state[1].size()) == N) {
    for (int i = 0; i < N; ++i) op.fprime[i] = map.df(profile.F[i]) * profile.state[1][i];
  } else {
    op.fprime = op.derivative(profile.f);
  }
  op.closure_note = closure == Closure::PERIODIC
                        ? "periodic wrap"
                        : "w = 0 on the " + std::to_string(r) + " end nodes at each side";
  return op;
}

NullCheck null_vector_check(const LinearizedOperator& op) {
  NullCheck c;
  const auto Bf = op.apply(op.fprime);
  const double scale = max_abs(op.fprime);
  c.relative = scale > 0 ? max_abs(Bf) / scale : 0.0;
  c.h_squared = op.h * op.h;
  c.profile_residual = op.profile.residual_norm;
  for (int i = 0; i < op.size(); ++i)
    if (op.is_boundary_row(i)) c.boundary_truncation = std::max(c.boundary_truncation, std::abs(op.fprime[i]));
  if (scale > 0) c.boundary_truncation /= scale;
  return c;
}

ConstrainedSolve solve_constrained(const LinearizedOperator& op, const std::vector<double>& b) {
  const int N = op.size();
  if (static_cast<int>(b.size()) != N) throw std::invalid_argument("solve_constrained: rhs length mismatch");
  Eigen::VectorXd c(N);
  for (int i = 0; i < N; ++i) c[i] = op.fprime[i];
  const double cn = c.norm();
  if (!(cn > 0)) throw std::invalid_argument("solve_constrained: f' vanishes");
  c /= cn;

  const int M = 2 * N + 1;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(op.matrix.nonZeros()) * 2 + 3 * N);
  for (int i = 0; i < N; ++i) trip.emplace_back(i, i, 1.0);
  for (int i = 0; i < N; ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op.matrix, i); it; ++it) {
      trip.emplace_back(i, N + it.col(), it.value());
      trip.emplace_back(N + it.col(), i, it.value());
    }
  for (int i = 0; i < N; ++i) {
    if (c[i] == 0.0) continue;
    trip.emplace_back(N + i, 2 * N, c[i]);
    trip.emplace_back(2 * N, N + i, c[i]);
  }
  SpMat K(M, M);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();

  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(K);
  if (lu.info() != Eigen::Success) throw RankCollapse("augmented system is singular: " + lu.lastErrorMessage(), INFINITY);

  double knorm = 0.0;
  for (int j = 0; j < M; ++j) {
    double col = 0.0;
    for (SpMat::InnerIterator it(K, j); it; ++it) col += std::abs(it.value());
    knorm = std::max(knorm, col);
  }
  ConstrainedSolve out;
  out.condition = knorm * inverse_norm1(lu, M);
  if (!std::isfinite(out.condition) || out.condition * std::numeric_limits<double>::epsilon() > 1e-2)
    throw RankCollapse("augmented system is numerically rank deficient beyond the f' direction", out.condition);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M);
  for (int i = 0; i < N; ++i) rhs[i] = op.is_boundary_row(i) ? 0.0 : b[i];
  const Eigen::VectorXd sol = lu.solve(rhs);
  out.x.resize(N);
  for (int i = 0; i < N; ++i) out.x[i] = sol[N + i];
  out.multiplier = sol[2 * N];

  const auto Bx = op.apply(out.x);
  double rmax = 0.0, bmax = 0.0;
  for (int i = 0; i < N; ++i) {
    if (op.is_boundary_row(i)) continue;
    rmax = std::max(rmax, std::abs(b[i] - Bx[i]));
    bmax = std::max(bmax, std::abs(b[i]));
  }
  out.residual = bmax > 0 ? rmax / bmax : rmax;
  double dot = 0.0, xn = 0.0;
  for (int i = 0; i < N; ++i) dot += out.x[i] * c[i], xn += out.x[i] * out.x[i];
  xn = std::sqrt(xn);
  out.constraint_residual = xn > 0 ? std::abs(dot) / xn : 0.0;
  return out;
}

ExpansionPair solve_expansion(const LinearizedOperator& op, double k, ExpansionSign sign) {
  ExpansionPair p;
  p.y = op.profile.grid.nodes;
  p.k = k;
  p.sign = sign;
  p.constraint_note = "<psi, f'> = 0 and <phi, f'> = 0 (Lagrange multiplier on the augmented least-squares system)";
  p.psi_solve = solve_constrained(op, op.fprime);
  p.psi = p.psi_solve.x;
  const auto dpsi = op.derivative(p.psi);
  const double lin = sign == ExpansionSign::DERIVED ? -k : k;
  std::vector<double> rhs(p.psi.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = lin * p.psi[i] + k * k * (dpsi[i] + p.psi[i] * p.psi[i]);
  if (max_abs(rhs) == 0.0) {
    p.phi.assign(rhs.size(), 0.0);
    p.phi_solve.x = p.phi;
    p.phi_solve.condition = p.psi_solve.condition;
  } else {
    p.phi_solve = solve_constrained(op, rhs);
    p.phi = p.phi_solve.x;
  }
  return p;
}

AnsatzDefect ansatz_defect(const LinearizedOperator& op, const ExpansionPair& pair, double t_min, double t_max,
                           int count, double window) {
  if (!(t_min > 0 && t_max > t_min) || count < 2) throw std::invalid_argument("ansatz_defect: need 0 < t_min < t_max");
  AnsatzDefect d;
  d.window = window;
  const int N = op.size();
  const auto& y = op.profile.grid.nodes;
  const double k = pair.k;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j = 0; j < count; ++j) {
    const double t = t_min * std::pow(t_max / t_min, static_cast<double>(j) / (count - 1));
    std::vector<double> w(N), wt(N);
    for (int i = 0; i < N; ++i) {
      w[i] = k / t * pair.psi[i] + pair.phi[i] / (t * t);
      wt[i] = -k / (t * t) * pair.psi[i] - 2.0 * pair.phi[i] / (t * t * t);
    }
    const auto Bw = op.apply(w);
    const auto wy = op.derivative(w);
    const double g1 = k / t;
    double worst = 0.0;
    for (int i = 0; i < N; ++i) {
      if (op.is_boundary_row(i) || std::abs(y[i]) > window) continue;
      const long double rhs = static_cast<long double>(Bw[i]) - static_cast<long double>(g1) * op.fprime[i] -
                              static_cast<long double>(g1) * wy[i] - static_cast<long double>(w[i]) * w[i];
      worst = std::max(worst, static_cast<double>(std::abs(wt[i] - rhs)));
    }
    d.times.push_back(t);
    d.defects.push_back(worst);
    const double lx = std::log(t), ly = std::log(std::max(worst, std::numeric_limits<double>::min()));
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  d.exponent = -(count * sxy - sx * sy) / (count * sxx - sx * sx);
  return d;
}

OrderCheck order_check(double k, double t) {
  if (!(k > 0) || !(t > 0)) throw std::invalid_argument("order_check: need k > 0 and t > 0");
  OrderCheck c;
  c.t = t;
  c.g1 = k / t;
  c.g2 = k / (t * t);
  c.eps = 1.0 / (t * t);
  c.g1_squared = c.g1 * c.g1;
  const double t2 = t * t;
  const bool scales = std::abs(c.g2 * t2 - k) <= 1e-12 * k && std::abs(c.g1_squared * t2 - k * k) <= 1e-12 * k * k &&
                      std::abs(c.eps * t2 - 1.0) <= 1e-12;
  const bool hierarchy = t <= 1.0 / k || c.eps < c.g1;
  c.consistent = scales && hierarchy;
  return c;
}

}  // namespace kpp
