#include "kpp/tw_bvp.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace kpp {

std::string failure_name(FailureKind k) {
  switch (k) {
    case FailureKind::SINGULAR_JACOBIAN: return "SINGULAR_JACOBIAN";
    case FailureKind::MAX_ITERS: return "MAX_ITERS";
    case FailureKind::DIVERGED: return "DIVERGED";
  }
  return "?";
}

InitialGuess parse_initial_guess(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "heaviside") return InitialGuess::HEAVISIDE;
  if (t == "tanh") return InitialGuess::TANH;
  if (t == "prior" || t == "prior_solution") return InitialGuess::PRIOR_SOLUTION;
  throw std::invalid_argument("unknown initial guess: " + text);
}

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
// State layout: Y[i * p + k] is column k at node i.
using State = std::vector<double>;

class Collocation {
 public:
  Collocation(const ModelSpec& spec, const Grid& grid)
      : spec_(spec), map_(spec.n, spec.epsilon), y_(grid.nodes), N_(grid.size()) {
    p_ = spec.order();
    m_ = p_ / 2;
    sign_ = principal_sign(spec.family);
    tfe_ = spec.family == Family::TFE4;
    if (solved_in_f(spec.family) && !tfe_)
      throw std::invalid_argument("the collocation solver does not handle the pressure form");
    // Structural non-zeros of dG/dY.
    for (int k = 0; k + 1 < p_; ++k) pattern_.push_back({k, k + 1});
    if (tfe_) {
      pattern_.push_back({2, 0});
      pattern_.push_back({3, 0});
      pattern_.push_back({3, 1});
    } else {
      pattern_.push_back({p_ - 1, 0});
      pattern_.push_back({p_ - 1, 1});
    }
  }

  int p() const { return p_; }
  int m() const { return m_; }
  int nodes() const { return N_; }
  const std::vector<double>& y() const { return y_; }
  double half_level() const { return tfe_ ? 0.5 : map_.F(0.5); }

  void set_pin(std::optional<double> y_pin) {
    pinned_ = y_pin.has_value();
    if (!pinned_) return;
    const double yp = std::clamp(*y_pin, y_.front(), y_.back());
    auto it = std::upper_bound(y_.begin(), y_.end(), yp);
    pj_ = std::clamp(static_cast<int>(it - y_.begin()) - 1, 0, N_ - 2);
    ptheta_ = (yp - y_[pj_]) / (y_[pj_ + 1] - y_[pj_]);
  }
  bool pinned() const { return pinned_; }
  bool has_slack() const { return pinned_ && !projected_; }

  // Switch the end conditions to asymptotic projections: at each end the
  // state must have no component along the modes of the linearization that
  // grow away from the domain. Needs the counts to add up to p - 1 so that
  // the phase condition closes the system. Returns false when not applicable.
  bool use_projection() {
    auto rows_for = [&](const std::vector<double>& eq, bool right, std::vector<std::vector<double>>& out) {
      std::vector<double> g(p_), J(static_cast<std::size_t>(p_) * p_);
      G(eq.data(), g.data(), J.data());
      for (double v : J)
        if (!std::isfinite(v)) return false;
      Eigen::MatrixXd A(p_, p_);
      for (int r = 0; r < p_; ++r)
        for (int c = 0; c < p_; ++c) A(r, c) = J[r * p_ + c];
      Eigen::EigenSolver<Eigen::MatrixXd> es(A.transpose());
      if (es.info() != Eigen::Success) return false;
      const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
      for (int j = 0; j < p_; ++j) {
        const auto mu = es.eigenvalues()[j];
        if (std::abs(mu.real()) <= 1e-9 * std::max(1.0, scale)) return false;
        const bool excluded = right ? mu.real() > 0 : mu.real() < 0;
        if (!excluded || mu.imag() < 0) continue;
        const Eigen::VectorXcd l = es.eigenvectors().col(j);
        std::vector<double> re(p_), im(p_);
        for (int k = 0; k < p_; ++k) re[k] = l[k].real(), im[k] = l[k].imag();
        auto unit = [](std::vector<double> v) {
          double nv = 0;
          for (double x : v) nv += x * x;
          nv = std::sqrt(nv);
          for (double& x : v) x /= nv;
          return v;
        };
        out.push_back(unit(re));
        if (mu.imag() > 0) out.push_back(unit(im));
      }
      return true;
    };
    std::vector<double> left_eq(p_, 0.0), right_eq(p_, 0.0);
    left_eq[0] = 1.0;
    std::vector<std::vector<double>> L, R;
    if (!rows_for(left_eq, false, L) || !rows_for(right_eq, true, R)) return false;
    if (static_cast<int>(L.size() + R.size()) != p_ - 1) return false;
    left_rows_ = L;
    right_rows_ = R;
    projected_ = true;
    return true;
  }
  void use_dirichlet() { projected_ = false; }
  bool projected() const { return projected_; }

  // Largest violation of the homogeneous end conditions F^(k) = 0 (k < m)
  // on the right and F - 1, F^(k) on the left.
  double dirichlet_defect(const State& Y) const {
    double d = 0.0;
    for (int k = 0; k < m_; ++k) {
      d = std::max(d, std::abs(Y[k] - (k == 0 ? 1.0 : 0.0)));
      d = std::max(d, std::abs(Y[static_cast<std::size_t>(N_ - 1) * p_ + k]));
    }
    return d;
  }

  // Cubic Hermite weights on (F_j, F'_j, F_j+1, F'_j+1), so the pin level is
  // a smooth function of the pin position.
  std::array<double, 4> pin_weights() const {
    const double s = ptheta_, h = y_[pj_ + 1] - y_[pj_];
    return {(1 + 2 * s) * (1 - s) * (1 - s), h * s * (1 - s) * (1 - s), s * s * (3 - 2 * s), h * s * s * (s - 1)};
  }
  double pin_value(const Vec& X) const {
    const auto w = pin_weights();
    double v = 0.0;
    for (int c = 0; c < 4; ++c) v += w[c] * X[(pj_ + c / 2) * p_ + c % 2];
    return v;
  }
  int unknowns() const { return N_ * p_ + (has_slack() ? 1 : 0); }

  // G(Y) at one node and, if J is non-null, dG/dY (row-major p x p).
  void G(const double* Y, double* g, double* J) const {
    if (tfe_) {
      const double f = Y[0], f1 = Y[1], f2 = Y[2], w = Y[3];
      const double e2 = spec_.epsilon * spec_.epsilon, n = spec_.n;
      const double base = e2 + f * f;
      const double R = spec_.epsilon > 0 ? std::pow(base, 0.5 * n) : std::pow(std::abs(f), n);
      g[0] = f1;
      g[1] = f2;
      g[2] = w / R;
      g[3] = spec_.lambda * f1 + f * (1.0 - f);
      if (J) {
        std::fill(J, J + 16, 0.0);
        const double dR = spec_.epsilon > 0 ? n * f * std::pow(base, 0.5 * n - 1.0)
                                            : n * std::pow(std::abs(f), n - 1.0) * (f >= 0 ? 1.0 : -1.0);
        J[0 * 4 + 1] = 1.0;
        J[1 * 4 + 2] = 1.0;
        J[2 * 4 + 3] = 1.0 / R;
        J[2 * 4 + 0] = -w * dR / (R * R);
        J[3 * 4 + 1] = spec_.lambda;
        J[3 * 4 + 0] = 1.0 - 2.0 * f;
      }
      return;
    }
    const double F = Y[0], F1 = Y[1];
    for (int k = 0; k + 1 < p_; ++k) g[k] = Y[k + 1];
    const double df = map_.df(F);
    double src, dsrc;
    if (spec_.family == Family::KPP4n_QUASI_SOURCE) {
      src = F * (1.0 - F);
      dsrc = 1.0 - 2.0 * F;
    } else {
      const double f = map_.f(F);
      src = f * (1.0 - f);
      dsrc = (1.0 - 2.0 * f) * df;
    }
    g[p_ - 1] = sign_ * (spec_.lambda * df * F1 + src);
    if (J) {
      std::fill(J, J + p_ * p_, 0.0);
      for (int k = 0; k + 1 < p_; ++k) J[k * p_ + k + 1] = 1.0;
      const double d2f = map_.dS(F) / (spec_.n + 1.0);
      J[(p_ - 1) * p_ + 0] = sign_ * (spec_.lambda * d2f * F1 + dsrc);
      J[(p_ - 1) * p_ + 1] = sign_ * spec_.lambda * df;
    }
  }

  // Raw residual of the square system; also returns the scaled max norm.
  double residual(const Vec& X, Vec& R) const {
    R.resize(unknowns());
    std::vector<double> g(static_cast<std::size_t>(N_) * p_);
    for (int i = 0; i < N_; ++i) G(&X[i * p_], &g[static_cast<std::size_t>(i) * p_], nullptr);
    double scaled = 0.0;
    for (int i = 0; i + 1 < N_; ++i) {
      const double h = y_[i + 1] - y_[i];
      for (int k = 0; k < p_; ++k) {
        const double r = X[(i + 1) * p_ + k] - X[i * p_ + k] - 0.5 * h * (g[i * p_ + k] + g[(i + 1) * p_ + k]);
        R[i * p_ + k] = r;
        scaled = std::max(scaled, std::abs(r) / h);
      }
    }
    const int b = (N_ - 1) * p_;
    if (projected_) {
      int r = b;
      for (const auto& l : left_rows_) {
        double v = -l[0];
        for (int k = 0; k < p_; ++k) v += l[k] * X[k];
        R[r++] = v;
        scaled = std::max(scaled, std::abs(v));
      }
      for (const auto& l : right_rows_) {
        double v = 0.0;
        for (int k = 0; k < p_; ++k) v += l[k] * X[(N_ - 1) * p_ + k];
        R[r++] = v;
        scaled = std::max(scaled, std::abs(v));
      }
    } else {
      const double sigma = has_slack() ? X[N_ * p_] : 0.0;
      for (int k = 0; k < m_; ++k) {
        R[b + k] = X[k] - (k == 0 ? 1.0 : 0.0);
        R[b + m_ + k] = X[(N_ - 1) * p_ + k] - (k == m_ - 1 ? sigma : 0.0);
        scaled = std::max({scaled, std::abs(R[b + k]), std::abs(R[b + m_ + k])});
      }
    }
    if (pinned_) {
      const int row = unknowns() - 1;
      R[row] = pin_value(X) - half_level();
      scaled = std::max(scaled, std::abs(R[row]));
    }
    return scaled;
  }

  void jacobian(const Vec& X, SpMat& J) const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(N_) * p_ * 2 * (pattern_.size() / p_ + 3) + 64);
    std::vector<double> Jg(static_cast<std::size_t>(N_) * p_ * p_);
    std::vector<double> g(p_);
    for (int i = 0; i < N_; ++i) G(&X[i * p_], g.data(), &Jg[static_cast<std::size_t>(i) * p_ * p_]);
    for (int i = 0; i + 1 < N_; ++i) {
      const double h = y_[i + 1] - y_[i];
      for (int k = 0; k < p_; ++k) {
        const int r = i * p_ + k;
        t.emplace_back(r, (i + 1) * p_ + k, 1.0);
        t.emplace_back(r, i * p_ + k, -1.0);
      }
      for (auto [k, j] : pattern_) {
        const int r = i * p_ + k;
        t.emplace_back(r, (i + 1) * p_ + j, -0.5 * h * Jg[(static_cast<std::size_t>(i) + 1) * p_ * p_ + k * p_ + j]);
        t.emplace_back(r, i * p_ + j, -0.5 * h * Jg[static_cast<std::size_t>(i) * p_ * p_ + k * p_ + j]);
      }
    }
    const int b = (N_ - 1) * p_;
    if (projected_) {
      int r = b;
      for (const auto& l : left_rows_) {
        for (int k = 0; k < p_; ++k) t.emplace_back(r, k, l[k]);
        ++r;
      }
      for (const auto& l : right_rows_) {
        for (int k = 0; k < p_; ++k) t.emplace_back(r, (N_ - 1) * p_ + k, l[k]);
        ++r;
      }
    } else {
      for (int k = 0; k < m_; ++k) {
        t.emplace_back(b + k, k, 1.0);
        t.emplace_back(b + m_ + k, (N_ - 1) * p_ + k, 1.0);
      }
      if (has_slack()) t.emplace_back(b + 2 * m_ - 1, N_ * p_, -1.0);
    }
    if (pinned_) {
      const auto w = pin_weights();
      for (int c = 0; c < 4; ++c) t.emplace_back(unknowns() - 1, (pj_ + c / 2) * p_ + c % 2, w[c]);
    }
    J.resize(unknowns(), unknowns());
    J.setFromTriplets(t.begin(), t.end());
  }

  // dY/dy at every node (for Hermite interpolation).
  State slopes(const State& Y) const {
    State d(Y.size());
    for (int i = 0; i < N_; ++i) G(&Y[static_cast<std::size_t>(i) * p_], &d[static_cast<std::size_t>(i) * p_], nullptr);
    return d;
  }

 private:
  ModelSpec spec_;
  PowerMap map_;
  std::vector<double> y_;
  int N_, p_ = 4, m_ = 2, sign_ = 1;
  bool tfe_ = false;
  std::vector<std::pair<int, int>> pattern_;
  bool pinned_ = false;
  bool projected_ = false;
  std::vector<std::vector<double>> left_rows_, right_rows_;
  int pj_ = 0;
  double ptheta_ = 0.0;
};

struct NewtonOutcome {
  State Y;
  double sigma = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::optional<FailureKind> failure;
};

NewtonOutcome newton(const Collocation& sys, const State& Y0, double sigma0, int max_iters, double tol,
                     const LineSearch& ls, std::vector<double>& history) {
  const int nY = sys.nodes() * sys.p();
  Vec X(sys.unknowns());
  for (int i = 0; i < nY; ++i) X[i] = Y0[i];
  if (sys.has_slack()) X[nY] = sigma0;
  Vec R, Rt;
  SpMat J;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  NewtonOutcome out;
  double first = -1.0;
  for (int it = 0;; ++it) {
    const double r = sys.residual(X, R);
    history.push_back(r);
    out.residual = r;
    out.iterations = it;
    if (first < 0) first = r;
    if (!std::isfinite(r)) {
      out.failure = FailureKind::DIVERGED;
      break;
    }
    if (r <= tol) {
      out.converged = true;
      break;
    }
    if (r > 1e6 * std::max(first, 1e-300)) {
      out.failure = FailureKind::DIVERGED;
      break;
    }
    if (it >= max_iters) {
      out.failure = FailureKind::MAX_ITERS;
      break;
    }
    sys.jacobian(X, J);
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      out.failure = FailureKind::SINGULAR_JACOBIAN;
      break;
    }
    Vec dX = lu.solve(-R);
    const double xs = X.lpNorm<Eigen::Infinity>();
    if (lu.info() != Eigen::Success || !dX.allFinite() || dX.lpNorm<Eigen::Infinity>() > 1e10 * (1.0 + xs)) {
      out.failure = FailureKind::SINGULAR_JACOBIAN;
      break;
    }
    const double n0 = R.norm(), d0 = dX.norm();
    const bool natural = ls.natural_monotonicity;
    double t = 1.0;
    for (int k = 0; k < ls.max_halvings; ++k) {
      sys.residual(X + t * dX, Rt);
      if (Rt.allFinite()) {
        if (natural) {
          // Simplified Newton correction with the frozen factorization.
          const Vec dbar = lu.solve(-Rt);
          if (dbar.allFinite() && dbar.norm() <= (1.0 - 0.25 * t) * d0) break;
        } else if (Rt.norm() < (1.0 - ls.sufficient_decrease * t) * n0) {
          break;
        }
      }
      t *= 0.5;
    }
    X += t * dX;
  }
  out.Y.assign(X.data(), X.data() + nY);
  out.sigma = sys.has_slack() ? X[nY] : 0.0;
  return out;
}

// Hermite evaluation of every column at the point t.
void hermite_at(const Collocation& sys, const State& Y, const State& D, double t, double* out) {
  const auto& y = sys.y();
  const int p = sys.p(), N = sys.nodes();
  if (t <= y.front()) {
    for (int k = 0; k < p; ++k) out[k] = Y[k];
    return;
  }
  if (t >= y.back()) {
    for (int k = 0; k < p; ++k) out[k] = Y[static_cast<std::size_t>(N - 1) * p + k];
    return;
  }
  auto it = std::upper_bound(y.begin(), y.end(), t);
  const int j = std::clamp(static_cast<int>(it - y.begin()) - 1, 0, N - 2);
  const double h = y[j + 1] - y[j], s = (t - y[j]) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  for (int k = 0; k < p; ++k) {
    const std::size_t a = static_cast<std::size_t>(j) * p + k, b = a + p;
    out[k] = h00 * Y[a] + h10 * h * D[a] + h01 * Y[b] + h11 * h * D[b];
  }
}

// Y(y + delta) on the same nodes.
State shifted(const Collocation& sys, const State& Y, double delta) {
  const State D = sys.slopes(Y);
  State out(Y.size());
  const int p = sys.p();
  for (int i = 0; i < sys.nodes(); ++i) hermite_at(sys, Y, D, sys.y()[i] + delta, &out[static_cast<std::size_t>(i) * p]);
  return out;
}

State state_from_profile(const Collocation& sys, const TWProfile& prior, const ModelSpec& spec) {
  const int p = sys.p(), N = sys.nodes();
  State Y(static_cast<std::size_t>(N) * p, 0.0);
  // Columns on the prior's own grid.
  const int Np = prior.grid.size();
  std::vector<std::vector<double>> cols(p, std::vector<double>(Np, 0.0));
  if (static_cast<int>(prior.state.size()) == p) {
    cols = prior.state;
  } else {
    cols[0] = spec.family == Family::TFE4 ? prior.f : prior.F;
    for (int k = 1; k < p; ++k)
      for (int i = 1; i + 1 < Np; ++i)
        cols[k][i] = (cols[k - 1][i + 1] - cols[k - 1][i - 1]) / (prior.grid.nodes[i + 1] - prior.grid.nodes[i - 1]);
  }
  const auto& yp = prior.grid.nodes;
  for (int i = 0; i < N; ++i) {
    const double t = sys.y()[i];
    for (int k = 0; k < p; ++k) {
      double v;
      if (t <= yp.front()) v = cols[k].front();
      else if (t >= yp.back()) v = cols[k].back();
      else {
        auto it = std::upper_bound(yp.begin(), yp.end(), t);
        const int j = static_cast<int>(it - yp.begin()) - 1;
        const double s = (t - yp[j]) / (yp[j + 1] - yp[j]);
        v = (1 - s) * cols[k][j] + s * cols[k][j + 1];
      }
      Y[static_cast<std::size_t>(i) * p + k] = v;
    }
  }
  return Y;
}

State initial_state(const Collocation& sys, const ModelSpec& spec, const BvpConfig& cfg) {
  const int p = sys.p(), N = sys.nodes();
  const auto& y = sys.y();
  if (cfg.initial_guess == InitialGuess::PRIOR_SOLUTION) {
    if (!cfg.prior) throw std::invalid_argument("PRIOR_SOLUTION guess needs config.prior");
    return state_from_profile(sys, *cfg.prior, spec);
  }
  State Y(static_cast<std::size_t>(N) * p, 0.0);
  if (cfg.initial_guess == InitialGuess::HEAVISIDE) {
    for (int i = 0; i < N; ++i) Y[static_cast<std::size_t>(i) * p] = y[i] < 0 ? 1.0 : 0.0;
    const int i0 = std::clamp(static_cast<int>(std::lower_bound(y.begin(), y.end(), 0.0) - y.begin()), 0, N - 1);
    int ic = i0;
    if (i0 > 0 && std::abs(y[i0 - 1]) < std::abs(y[i0])) ic = i0 - 1;
    Y[static_cast<std::size_t>(ic) * p] = sys.half_level();
    return Y;
  }
  // tanh ramp in f, mapped to the solved variable; derivatives by differencing.
  const PowerMap map(spec.n, spec.epsilon);
  std::vector<double> col(N);
  for (int i = 0; i < N; ++i) {
    const double f = 0.5 * (1.0 - std::tanh(y[i] / cfg.tanh_width));
    col[i] = spec.family == Family::TFE4 ? f : map.F(f);
  }
  for (int k = 0; k < p; ++k) {
    for (int i = 0; i < N; ++i) Y[static_cast<std::size_t>(i) * p + k] = col[i];
    std::vector<double> next(N, 0.0);
    for (int i = 1; i + 1 < N; ++i) next[i] = (col[i + 1] - col[i - 1]) / (y[i + 1] - y[i - 1]);
    col = next;
  }
  return Y;
}

struct Attempt {
  NewtonOutcome outcome;
  std::string strategy;
};

bool accept(const NewtonOutcome& o, double tol) { return o.converged && std::abs(o.sigma) <= tol; }

// Pinned solve followed by release and, if needed, a search over the pin
// position for zero slack.
std::optional<Attempt> pinned_ladder(Collocation& sys, const State& guess, const BvpConfig& cfg,
                                     std::vector<double>& history, NewtonOutcome& last) {
  sys.set_pin(0.0);
  NewtonOutcome pin = newton(sys, guess, 0.0, cfg.max_newton_iters, cfg.newton_tol, cfg.damping, history);
  last = pin;
  if (accept(pin, cfg.newton_tol)) return Attempt{pin, "pinned"};

  if (pin.converged) {
    sys.set_pin(std::nullopt);
    NewtonOutcome rel = newton(sys, pin.Y, 0.0, cfg.release_iters, cfg.newton_tol, cfg.damping, history);
    if (rel.converged) return Attempt{rel, "pinned+release"};
  }

  if (cfg.allow_projection && sys.use_projection()) {
    sys.set_pin(0.0);
    NewtonOutcome pr = newton(sys, pin.converged ? pin.Y : guess, 0.0, cfg.max_newton_iters, cfg.newton_tol,
                              cfg.damping, history);
    sys.use_dirichlet();
    if (pr.converged && sys.dirichlet_defect(pr.Y) <= cfg.max_tail_defect) return Attempt{pr, "projected"};
    if (!pin.converged) last = pr;
  }
  if (!pin.converged) return std::nullopt;

  // Secant on slack(pin position), switching to Illinois regula falsi once
  // a sign change is bracketed. Each solve is warm-started from the last.
  double xa = 0.0, sa = pin.sigma;
  State Ya = pin.Y;
  double xb = cfg.pin_search_step;
  std::optional<std::pair<double, double>> lo, hi;  // (x, sigma) with sigma < 0 / > 0
  auto note = [&](double x, double sg) {
    if (sg < 0) lo = std::make_pair(x, sg);
    else hi = std::make_pair(x, sg);
  };
  note(xa, sa);
  int side = 0;
  for (int ev = 0; ev < cfg.pin_search_evals; ++ev) {
    sys.set_pin(xb);
    // Moving the pin right by d moves the front right: guess Y(y - d).
    const State g = shifted(sys, Ya, -(xb - xa));
    NewtonOutcome o = newton(sys, g, sa, cfg.max_newton_iters, cfg.newton_tol, cfg.damping, history);
    if (!o.converged) {
      xb = xa + 0.5 * (xb - xa);
      continue;
    }
    last = o;
    if (accept(o, cfg.newton_tol)) return Attempt{o, "pin-search"};
    note(xb, o.sigma);
    double xn;
    if (lo && hi) {
      // Illinois: halve the retained end's weight when the same side repeats.
      const int s_now = o.sigma < 0 ? -1 : 1;
      if (side == s_now) {
        if (s_now < 0) hi->second *= 0.5;
        else lo->second *= 0.5;
      }
      side = s_now;
      xn = lo->first - lo->second * (hi->first - lo->first) / (hi->second - lo->second);
    } else {
      if (o.sigma == sa) break;
      xn = xb - o.sigma * (xb - xa) / (o.sigma - sa);
      if (!std::isfinite(xn)) break;
      xn = std::clamp(xn, xb - 2.0, xb + 2.0);
    }
    const double reach = 0.25 * std::min(-sys.y().front(), sys.y().back());
    if (std::abs(xn) > reach) break;
    xa = xb, sa = o.sigma, Ya = std::move(o.Y);
    xb = xn;
  }
  return std::nullopt;
}

void build_profile(const Collocation& sys, const ModelSpec& spec, const State& Y, double residual,
                   BvpResult& res) {
  const int p = sys.p(), N = sys.nodes();
  TWProfile& prof = res.profile;
  prof.spec = spec;
  Grid g;
  g.nodes = sys.y();
  prof.grid = g;
  prof.state.assign(p, std::vector<double>(N));
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < p; ++k) prof.state[k][i] = Y[static_cast<std::size_t>(i) * p + k];
  if (spec.family == Family::TFE4) {
    prof.f = prof.state[0];
    prof.sync_from_f();
  } else {
    prof.F = prof.state[0];
    prof.sync_from_F();
  }
  prof.residual_norm = residual;
  prof.normalized = false;
}

}  // namespace

std::optional<double> leftmost_down_crossing(const std::vector<double>& x, const std::vector<double>& v,
                                             double level) {
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i] >= level && v[i + 1] < level) {
      const double s = (v[i] - level) / (v[i] - v[i + 1]);
      return x[i] + s * (x[i + 1] - x[i]);
    }
  }
  return std::nullopt;
}

double normalize_profile(TWProfile& prof) {
  const int N = prof.grid.size();
  const auto& y = prof.grid.nodes;
  auto cross = leftmost_down_crossing(y, prof.f, 0.5);
  if (!cross) throw std::runtime_error("normalize_profile: f never crosses 1/2 downward");
  const bool tfe = prof.spec.family == Family::TFE4;
  if (prof.state.empty()) {
    prof.state.push_back(tfe ? prof.f : prof.F);
    std::vector<double> d(N, 0.0);
    for (int i = 1; i + 1 < N; ++i) d[i] = (prof.state[0][i + 1] - prof.state[0][i - 1]) / (y[i + 1] - y[i - 1]);
    prof.state.push_back(d);
  }
  // Refine the crossing on the Hermite interpolant of f (column 0 through
  // the map) by a few Newton steps starting from the linear estimate.
  const PowerMap map(prof.spec.n, prof.spec.epsilon);
  auto f_at = [&](double t, double* dfdt) {
    auto it = std::upper_bound(y.begin(), y.end(), t);
    const int j = std::clamp(static_cast<int>(it - y.begin()) - 1, 0, N - 2);
    const double h = y[j + 1] - y[j], s = (t - y[j]) / h;
    const auto& c0 = prof.state[0];
    const auto& c1 = prof.state[1];
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    const double v = h00 * c0[j] + h10 * h * c1[j] + h01 * c0[j + 1] + h11 * h * c1[j + 1];
    const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1, d01 = -d00, d11 = 3 * s * s - 2 * s;
    const double dv = (d00 * c0[j] + d01 * c0[j + 1]) / h + d10 * c1[j] + d11 * c1[j + 1];
    if (tfe) {
      *dfdt = dv;
      return v;
    }
    *dfdt = map.df(v) * dv;
    return map.f(v);
  };
  double ys = *cross;
  for (int it = 0; it < 20; ++it) {
    double d;
    const double r = f_at(ys, &d) - 0.5;
    if (d == 0.0) break;
    const double step = r / d;
    ys -= step;
    if (std::abs(step) < 1e-14) break;
  }
  // Translate the grid itself: resampling would put interpolation error
  // and a clamped strip at one end into every stored column.
  for (double& v : prof.grid.nodes) v -= ys;
  prof.normalized = true;
  return ys;
}

namespace {

std::optional<Attempt> run_ladder(Collocation& sys, const ModelSpec& spec, const State& guess, const BvpConfig& cfg,
                                  std::vector<double>& history, NewtonOutcome& last) {
  if (cfg.try_free_first) {
    sys.set_pin(std::nullopt);
    last = newton(sys, guess, 0.0, cfg.max_newton_iters, cfg.newton_tol, cfg.damping, history);
    if (last.converged) return Attempt{last, "free"};
  }
  if (!cfg.allow_pin) return std::nullopt;
  if (auto w = pinned_ladder(sys, guess, cfg, history, last)) return w;
  if (!cfg.allow_homotopy || spec.n == 0.0) return std::nullopt;

  // Exponent homotopy from the semilinear profile with the pin kept.
  ModelSpec s0 = spec;
  s0.n = 0.0;
  Collocation sys0(s0, cfg.grid);
  if (cfg.allow_projection) sys0.use_projection();
  sys0.set_pin(0.0);
  NewtonOutcome cur = newton(sys0, guess, 0.0, cfg.max_newton_iters, cfg.newton_tol, cfg.damping, history);
  double n_at = 0.0, step = std::copysign(cfg.homotopy_step, spec.n);
  while (cur.converged && n_at != spec.n) {
    double n_next = n_at + step;
    if ((step > 0 && n_next > spec.n) || (step < 0 && n_next < spec.n)) n_next = spec.n;
    ModelSpec si = spec;
    si.n = n_next;
    Collocation sysi(si, cfg.grid);
    if (sys0.projected() && !sysi.use_projection()) break;
    sysi.set_pin(0.0);
    NewtonOutcome o = newton(sysi, cur.Y, cur.sigma, cfg.max_newton_iters, cfg.newton_tol, cfg.damping, history);
    if (o.converged) {
      cur = o;
      n_at = n_next;
      step = std::copysign(std::min(std::abs(step) * 1.5, cfg.homotopy_step), step);
    } else {
      step *= 0.5;
      if (std::abs(step) < 1e-3) break;
    }
  }
  if (!cur.converged || n_at != spec.n) return std::nullopt;
  auto w = pinned_ladder(sys, cur.Y, cfg, history, last);
  if (w) w->strategy = "homotopy+" + w->strategy;
  return w;
}

}  // namespace

BvpResult solve_tw(const ModelSpec& spec, const BvpConfig& cfg) {
  spec.validate();
  if (!(cfg.newton_tol > 0)) throw std::invalid_argument("newton_tol must be > 0");
  if (cfg.grid.size() < 10) throw std::invalid_argument("grid too small for the collocation solve");
  if (!(cfg.grid.left() < 0 && cfg.grid.right() > 0)) throw std::invalid_argument("grid must contain the origin");
  Collocation sys(spec, cfg.grid);
  BvpResult res;
  const State guess = initial_state(sys, spec, cfg);
  NewtonOutcome last;
  std::optional<Attempt> win = run_ladder(sys, spec, guess, cfg, res.history, last);
  if (!win && cfg.damping.natural_monotonicity) {
    // The plain residual test sometimes walks into a different basin.
    BvpConfig alt = cfg;
    alt.damping.natural_monotonicity = false;
    NewtonOutcome last_alt;
    win = run_ladder(sys, spec, guess, alt, res.history, last_alt);
    if (win) win->strategy += "+residual-damping";
  }

  int iters = static_cast<int>(res.history.size());
  if (win) {
    build_profile(sys, spec, win->outcome.Y, win->outcome.residual, res);
    res.converged = true;
    res.strategy = win->strategy;
    res.slack = win->outcome.sigma;
    res.bc_defect = sys.dirichlet_defect(win->outcome.Y);
    res.shift = normalize_profile(res.profile);
  } else {
    build_profile(sys, spec, last.Y, last.residual, res);
    res.converged = false;
    res.failure_kind = last.failure.value_or(FailureKind::MAX_ITERS);
    res.strategy = "failed";
    res.slack = last.sigma;
    if (!last.Y.empty()) res.bc_defect = sys.dirichlet_defect(last.Y);
    try {
      res.shift = normalize_profile(res.profile);
    } catch (const std::exception&) {
    }
  }
  res.iterations = iters;
  try {
    res.fd_residual = max_interior_residual(spec, res.profile);
  } catch (const std::exception&) {
    res.fd_residual = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

std::vector<BvpResult> continue_in_parameter(const ModelSpec& spec, const BvpConfig& cfg,
                                             std::pair<double, double> target) {
  std::vector<std::pair<double, double>> path = cfg.continuation_steps;
  if (path.empty() || path.back() != target) path.push_back(target);
  auto monotone = [&](auto get) {
    int dir = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
      const double d = get(path[i]) - get(path[i - 1]);
      if (d == 0) continue;
      const int s = d > 0 ? 1 : -1;
      if (dir != 0 && s != dir) return false;
      dir = s;
    }
    return true;
  };
  if (!monotone([](auto w) { return w.first; }) || !monotone([](auto w) { return w.second; }))
    throw std::invalid_argument("continuation waypoints must be monotone in each parameter");

  std::vector<BvpResult> out;
  BvpConfig c = cfg;
  std::size_t start = 0;
  if (cfg.prior) {
    BvpResult seed;
    seed.profile = *cfg.prior;
    seed.converged = true;
    seed.strategy = "seed";
    out.push_back(seed);
    if (path.size() == 1 && std::abs(path[0].first - cfg.prior->spec.n) < 1e-15 &&
        std::abs(path[0].second - cfg.prior->spec.lambda) < 1e-15)
      return out;
    c.initial_guess = InitialGuess::PRIOR_SOLUTION;
  }
  for (std::size_t i = start; i < path.size(); ++i) {
    ModelSpec s = spec;
    s.n = path[i].first;
    s.lambda = path[i].second;
    BvpResult r = solve_tw(s, c);
    if (!r.converged) {
      r.failed_waypoint = path[i];
      out.push_back(std::move(r));
      break;
    }
    c.prior = r.profile;
    c.initial_guess = InitialGuess::PRIOR_SOLUTION;
    out.push_back(std::move(r));
  }
  return out;
}

void write_bvp_csv(std::ostream& os, const BvpResult& r, const BvpConfig& cfg, int precision) {
  const auto& p = r.profile;
  os.precision(precision);
  os << "# family=" << family_name(p.spec.family) << " n=" << p.spec.n << " lambda=" << p.spec.lambda
     << " epsilon=" << p.spec.epsilon << " converged=" << (r.converged ? "true" : "false") << "\n";
  os << "# y_left=" << cfg.grid.left() << " y_right=" << cfg.grid.right() << " nodes=" << cfg.grid.size()
     << " newton_tol=" << cfg.newton_tol << " strategy=" << r.strategy << " residual_norm=" << p.residual_norm
     << " slack=" << r.slack << "\n";
  os << "y,F,f,residual\n";
  const int N = p.grid.size();
  for (int i = 0; i < N; ++i) {
    os << p.grid.nodes[i] << "," << p.F[i] << "," << p.f[i] << ",";
    try {
      os << tw_residual(p.spec, p, i);
    } catch (const std::out_of_range&) {
      os << "nan";
    }
    os << "\n";
  }
}

}  // namespace kpp
