#include "kpp/front_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "kpp/fd.hpp"

namespace kpp {

std::string stepper_name(Stepper s) {
  switch (s) {
    case Stepper::BACKWARD_EULER_NEWTON: return "backward_euler";
    case Stepper::BDF2_NEWTON: return "bdf2";
    case Stepper::BDF3_NEWTON: return "bdf3";
    case Stepper::EXPLICIT_GUARDED: return "explicit";
  }
  return "?";
}

Stepper parse_stepper(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "backward_euler" || t == "be" || t == "backward_euler_newton") return Stepper::BACKWARD_EULER_NEWTON;
  if (t == "bdf2" || t == "bdf2_newton") return Stepper::BDF2_NEWTON;
  if (t == "bdf3" || t == "bdf3_newton") return Stepper::BDF3_NEWTON;
  if (t == "explicit" || t == "explicit_guarded") return Stepper::EXPLICIT_GUARDED;
  throw std::invalid_argument("unknown stepper: " + text);
}

std::string data_kind_name(DataKind k) {
  switch (k) {
    case DataKind::HEAVISIDE: return "heaviside";
    case DataKind::SMOOTHED_STEP: return "smoothed_step";
    case DataKind::STEP_WITH_TAIL: return "step_with_tail";
    case DataKind::PROFILE: return "profile";
    case DataKind::CONSTANT: return "constant";
  }
  return "?";
}

DataKind parse_data_kind(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "heaviside") return DataKind::HEAVISIDE;
  if (t == "smoothed_step" || t == "smoothed" || t == "tanh") return DataKind::SMOOTHED_STEP;
  if (t == "step_with_tail" || t == "tail") return DataKind::STEP_WITH_TAIL;
  if (t == "profile" || t == "tw") return DataKind::PROFILE;
  if (t == "constant") return DataKind::CONSTANT;
  throw std::invalid_argument("unknown initial data: " + text);
}

std::string sim_error_name(SimErrorKind k) {
  return k == SimErrorKind::NEWTON_FAIL ? "NEWTON_FAIL" : "FRONT_EXITED";
}

namespace {

bool supported(Family f) { return !solved_in_f(f) && f != Family::TFE4; }

// Stencil weights (unscaled) for the principal derivative.
std::vector<double> principal_weights(int order, int accuracy) {
  if (accuracy == 0) accuracy = order <= 4 ? 4 : 2;
  if (accuracy == 2) {
    const auto w = fd::central_weights(order);
    return {w.begin(), w.end()};
  }
  if (accuracy == 4 && order == 2) return {-1.0 / 12, 4.0 / 3, -2.5, 4.0 / 3, -1.0 / 12};
  if (accuracy == 4 && order == 4) return {-1.0 / 6, 2.0, -6.5, 28.0 / 3, -6.5, 2.0, -1.0 / 6};
  throw std::invalid_argument("stencil_order 4 is available for orders 2 and 4 only");
}

double lagrange_cubic(const std::vector<double>& x, const std::vector<double>& u, int j, double t) {
  // Nodes j-1..j+2 clamped into range.
  const int N = static_cast<int>(x.size());
  int a = std::clamp(j - 1, 0, std::max(0, N - 4));
  double v = 0.0;
  for (int p = 0; p < 4 && a + p < N; ++p) {
    double l = 1.0;
    for (int q = 0; q < 4 && a + q < N; ++q)
      if (q != p) l *= (t - x[a + q]) / (x[a + p] - x[a + q]);
    v += l * u[a + p];
  }
  return v;
}

double interpolate(const std::vector<double>& x, const std::vector<double>& u, double t) {
  if (t <= x.front()) return u.front();
  if (t >= x.back()) return u.back();
  auto it = std::upper_bound(x.begin(), x.end(), t);
  const int j = static_cast<int>(it - x.begin()) - 1;
  return lagrange_cubic(x, u, j, t);
}

class Discretization {
 public:
  explicit Discretization(const SimConfig& c)
      : cfg_(c), map_(c.spec.n, c.spec.epsilon), x_(c.grid.nodes), N_(c.grid.size()) {
    const int order = c.spec.order();
    w_ = principal_weights(order, c.stencil_order);
    r_ = static_cast<int>(w_.size() / 2);
    const double h = c.grid.h();
    const double scale = std::pow(h, -order);
    for (double& v : w_) v *= scale;
    // u_t = s D^(2m) F + source: the travelling-wave sign flips.
    s_ = -principal_sign(c.spec.family);
    quasi_ = c.spec.family == Family::KPP4n_QUASI_SOURCE;
  }

  int size() const { return N_; }
  int radius() const { return r_; }
  const PowerMap& map() const { return map_; }

  void set_ends(double left, double right) {
    left_ = left;
    right_ = right;
  }

  double source(double F) const {
    if (quasi_) return F * (1.0 - F);
    const double f = map_.f(F);
    return f * (1.0 - f);
  }
  double dsource(double F) const {
    if (quasi_) return 1.0 - 2.0 * F;
    return (1.0 - 2.0 * map_.f(F)) * map_.df(F);
  }

  int column(int idx) const {
    if (idx < 0) return -idx;
    if (idx > N_ - 1) return N_ - 1;
    return idx;
  }

  // s D^(2m) F at interior node i.
  double diffusion(const std::vector<double>& F, int i) const {
    // Differences against F[i], so constant states give exactly zero.
    double v = 0.0;
    for (int j = -r_; j <= r_; ++j) v += w_[j + r_] * (F[column(i + j)] - F[i]);
    return s_ * v;
  }

  // Full right-hand side s D F + source at interior nodes (zero at ends).
  std::vector<double> rhs(const std::vector<double>& F) const {
    std::vector<double> out(N_, 0.0);
    for (int i = 1; i + 1 < N_; ++i) out[i] = diffusion(F, i) + source(F[i]);
    return out;
  }

  // Solves c0 f(F) - hist = s D F + source(F) for F by Newton.
  bool implicit_solve(std::vector<double>& F, double c0, const std::vector<double>& hist, int& iters) const {
    fd::BandMatrix J(N_, r_, r_);
    std::vector<double> R(N_);
    for (int it = 0; it < cfg_.max_newton_iters; ++it) {
      ++iters;
      J.set_zero();
      for (int i = 1; i + 1 < N_; ++i) {
        R[i] = -(c0 * map_.f(F[i]) - hist[i] - diffusion(F, i) - source(F[i]));
        J.at(i, i) += c0 * map_.df(F[i]) - dsource(F[i]);
        for (int j = -r_; j <= r_; ++j) J.at(i, column(i + j)) -= s_ * w_[j + r_];
      }
      R[0] = -(F[0] - left_);
      R[N_ - 1] = -(F[N_ - 1] - right_);
      J.at(0, 0) = 1.0;
      J.at(N_ - 1, N_ - 1) = 1.0;
      if (!J.factor()) return false;
      J.solve(R);
      double dmax = 0.0, fmax = 0.0;
      for (int i = 0; i < N_; ++i) {
        if (!std::isfinite(R[i])) return false;
        F[i] += R[i];
        dmax = std::max(dmax, std::abs(R[i]));
        fmax = std::max(fmax, std::abs(F[i]));
      }
      if (dmax <= cfg_.newton_tol * (1.0 + fmax)) return true;
    }
    return false;
  }

  // Largest dF/du on the grid.
  double max_diffusivity(const std::vector<double>& F) const {
    double d = 0.0;
    for (double v : F) d = std::max(d, 1.0 / map_.df(v));
    return d;
  }

 private:
  const SimConfig& cfg_;
  PowerMap map_;
  const std::vector<double>& x_;
  int N_;
  std::vector<double> w_;
  int r_ = 1, s_ = 1;
  bool quasi_ = false;
  double left_ = 1.0, right_ = 0.0;
};

}  // namespace

void SimConfig::validate() const {
  spec.validate();
  if (!supported(spec.family))
    throw std::invalid_argument("front_sim supports the F-form families (kpp2, kpp4n, quasi, kpp6n, kpp8n)");
  if (!(t_end > 0)) throw std::invalid_argument("t_end must be > 0");
  if (!(dt_initial > 0) || !(dt_min > 0)) throw std::invalid_argument("time steps must be > 0");
  if (grid.size() < 8 || !grid.is_uniform()) throw std::invalid_argument("front_sim needs a uniform grid of >= 8 nodes");
  if (stencil_order != 0 && stencil_order != 2 && stencil_order != 4)
    throw std::invalid_argument("stencil_order must be 0, 2 or 4");
  principal_weights(spec.order(), stencil_order);
  if (newton_tol <= 0 || max_newton_iters < 1) throw std::invalid_argument("bad Newton settings");
  if (initial.kind == DataKind::PROFILE &&
      (initial.profile_y.size() < 2 || initial.profile_y.size() != initial.profile_f.size()))
    throw std::invalid_argument("PROFILE data needs matching profile_y and profile_f");
  if (initial.kind == DataKind::SMOOTHED_STEP && !(initial.width > 0))
    throw std::invalid_argument("smoothed step width must be > 0");
  if (stepper == Stepper::EXPLICIT_GUARDED) {
    const PowerMap map(spec.n, spec.epsilon);
    const double d_ref = 1.0 / map.df(1.0);
    const double limit = explicit_safety * std::pow(grid.h(), spec.order()) / d_ref;
    if (dt_initial > limit)
      throw std::invalid_argument("explicit stepping needs dt <= " + std::to_string(limit) +
                                  " (safety * h^order / max diffusivity)");
  }
  if (fit_window && !(fit_window->first > 0 && fit_window->second > fit_window->first))
    throw std::invalid_argument("fit window must satisfy 0 < t_min < t_max");
}

double SimConfig::speed_for_fit() const {
  if (lambda0) return *lambda0;
  return spec.family == Family::KPP2 ? 2.0 : spec.lambda;
}

std::vector<double> initial_values(const SimConfig& c) {
  const auto& x = c.grid.nodes;
  std::vector<double> u(x.size());
  const auto& d = c.initial;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    switch (d.kind) {
      case DataKind::HEAVISIDE: u[i] = xi < 0 ? 1.0 : 0.0; break;
      case DataKind::SMOOTHED_STEP: u[i] = 0.5 * (1.0 - std::tanh(xi / d.width)); break;
      case DataKind::STEP_WITH_TAIL: u[i] = xi < 0 ? 1.0 : std::min(1.0, d.tail_amplitude * std::exp(-d.tail_rate * xi)); break;
      case DataKind::PROFILE:
        u[i] = xi - d.offset > d.profile_y.back() ? 0.0 : interpolate(d.profile_y, d.profile_f, xi - d.offset);
        break;
      case DataKind::CONSTANT: u[i] = d.value; break;
    }
  }
  return u;
}

std::optional<double> front_position(const std::vector<double>& x, const std::vector<double>& u, double level) {
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    if (u[i] >= level && u[i + 1] < level) {
      const int j = static_cast<int>(i);
      double a = x[i], b = x[i + 1];
      double fa = u[i] - level;
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = lagrange_cubic(x, u, j, m) - level;
        if ((fm >= 0) == (fa >= 0)) a = m, fa = fm;
        else b = m;
        if (b - a < 1e-14 * (1.0 + std::abs(a))) break;
      }
      return 0.5 * (a + b);
    }
  }
  return std::nullopt;
}

ShiftFit fit_front_shift(const FrontTrace& trace, double lambda0, std::pair<double, double> window) {
  if (!(window.first > 0 && window.second > window.first)) throw std::invalid_argument("fit window must satisfy 0 < t_min < t_max");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    const double t = trace.times[i];
    if (t < window.first || t > window.second || !(t > 0)) continue;
    const double lx = std::log(t), yv = trace.x_front[i] - lambda0 * t;
    sx += lx, sy += yv, sxx += lx * lx, sxy += lx * yv;
    lo = std::min(lo, lx), hi = std::max(hi, lx);
    ++n;
  }
  if (n < 3 || hi - lo < 0.05) throw std::invalid_argument("fit window too short for a log t fit");
  const double den = n * sxx - sx * sx;
  const double a = (n * sxy - sx * sy) / den;
  const double b = (sy - a * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    const double t = trace.times[i];
    if (t < window.first || t > window.second || !(t > 0)) continue;
    const double e = trace.x_front[i] - lambda0 * t - (a * std::log(t) + b);
    ss += e * e;
  }
  return {-a, b, std::sqrt(ss / n), n};
}

SimResult simulate(const SimConfig& cfg, const std::function<void(const Snapshot&)>& on_snapshot) {
  cfg.validate();
  Discretization disc(cfg);
  const PowerMap& map = disc.map();
  const auto& x = cfg.grid.nodes;
  const int N = cfg.grid.size();

  SimResult res;
  res.x = x;
  std::vector<double> u = initial_values(cfg);
  std::vector<double> F(N);
  for (int i = 0; i < N; ++i) F[i] = map.F(u[i]);
  disc.set_ends(F[0], F[N - 1]);

  std::vector<double> events = cfg.snapshot_times;
  std::sort(events.begin(), events.end());
  events.erase(std::remove_if(events.begin(), events.end(), [&](double t) { return t < 0 || t > cfg.t_end; }), events.end());
  std::size_t next_snap = 0;

  auto record = [&](double t) {
    auto xf = front_position(x, u);
    double sup = x.front();
    for (int i = N - 1; i >= 0; --i)
      if (std::abs(u[i]) > cfg.support_level) {
        sup = x[i];
        break;
      }
    double mn = std::numeric_limits<double>::infinity();
    if (xf) {
      for (int i = 0; i < N; ++i)
        if (x[i] > *xf) mn = std::min(mn, u[i]);
      res.trace.times.push_back(t);
      res.trace.x_front.push_back(*xf);
      res.trace.support_right.push_back(sup);
      res.trace.min_ahead.push_back(mn);
      if (*xf > x.back() - cfg.front_margin)
        throw SimulationError(SimErrorKind::FRONT_EXITED, "front reached the right end of the domain", t);
    }
  };
  auto emit = [&](double t) {
    Snapshot s{t, u, F};
    if (on_snapshot) on_snapshot(s);
    res.snapshots.push_back(std::move(s));
  };

  double t = 0.0;
  record(t);
  while (next_snap < events.size() && events[next_snap] <= 0.0) emit(t), ++next_snap;

  double dt = cfg.dt_initial;
  res.stats.dt_smallest = dt;
  res.stats.dt_largest = 0.0;
  // Previous levels u^{n-1}, u^{n-2} and the steps that led to u^n, u^{n-1}.
  std::vector<double> u_prev, u_prev2;
  double dt_prev = 0.0, dt_prev2 = 0.0;
  int streak = 0;
  const double h_pow = std::pow(cfg.grid.h(), cfg.spec.order());

  while (t < cfg.t_end * (1.0 - 1e-14)) {
    const double target = next_snap < events.size() ? std::min(events[next_snap], cfg.t_end) : cfg.t_end;
    double dt_use = dt;
    if (cfg.stepper == Stepper::EXPLICIT_GUARDED)
      dt_use = std::min(dt_use, cfg.explicit_safety * h_pow / disc.max_diffusivity(F));
    // Split the remaining interval evenly instead of leaving a sliver.
    const double remaining = target - t;
    const double pieces = std::ceil(remaining / dt_use - 1e-9);
    dt_use = remaining / std::max(1.0, pieces);

    std::vector<double> Fn = F;
    bool ok = true;
    if (cfg.stepper == Stepper::EXPLICIT_GUARDED) {
      const auto r = disc.rhs(F);
      for (int i = 1; i + 1 < N; ++i) Fn[i] = map.F(u[i] + dt_use * r[i]);
      for (double v : Fn) ok = ok && std::isfinite(v);
    } else {
      std::vector<double> hist(N);
      double c0;
      const double omega = dt_prev > 0 ? dt_use / dt_prev : 0.0;
      const auto same = [&](double a, double b) { return std::abs(a - b) <= 1e-10 * b; };
      const bool bdf3 = cfg.stepper == Stepper::BDF3_NEWTON && !u_prev2.empty() && same(dt_use, dt_prev) &&
                        same(dt_use, dt_prev2);
      const bool bdf2 = !bdf3 && cfg.stepper != Stepper::BACKWARD_EULER_NEWTON && !u_prev.empty() && omega < 2.0;
      if (bdf3) {
        c0 = 11.0 / (6.0 * dt_use);
        for (int i = 0; i < N; ++i) hist[i] = (18.0 * u[i] - 9.0 * u_prev[i] + 2.0 * u_prev2[i]) / (6.0 * dt_use);
      } else if (bdf2) {
        // Variable-step BDF2.
        c0 = (1.0 + 2.0 * omega) / ((1.0 + omega) * dt_use);
        for (int i = 0; i < N; ++i)
          hist[i] = ((1.0 + omega) * u[i] - omega * omega / (1.0 + omega) * u_prev[i]) / dt_use;
      } else {
        c0 = 1.0 / dt_use;
        for (int i = 0; i < N; ++i) hist[i] = u[i] / dt_use;
      }
      ok = disc.implicit_solve(Fn, c0, hist, res.stats.newton_iterations);
    }
    if (!ok) {
      ++res.stats.rejected;
      dt = 0.5 * dt_use;
      streak = 0;
      if (dt < cfg.dt_min)
      {
        double umin = u[0], umax = u[0];
        for (double v : u) umin = std::min(umin, v), umax = std::max(umax, v);
        const std::string what = cfg.stepper == Stepper::EXPLICIT_GUARDED ? "explicit update not finite"
                                                                          : "Newton did not converge";
        throw SimulationError(SimErrorKind::NEWTON_FAIL,
                              what + " with dt below dt_min; u in [" + std::to_string(umin) + ", " +
                                  std::to_string(umax) + "]",
                              t);
      }
      continue;
    }
    u_prev2 = std::move(u_prev);
    u_prev = u;
    dt_prev2 = dt_prev;
    dt_prev = dt_use;
    F = std::move(Fn);
    for (int i = 0; i < N; ++i) u[i] = map.f(F[i]);
    t += dt_use;
    if (std::abs(t - target) < 1e-12 * std::max(1.0, target)) t = target;
    ++res.stats.steps;
    res.stats.dt_smallest = std::min(res.stats.dt_smallest, dt_use);
    res.stats.dt_largest = std::max(res.stats.dt_largest, dt_use);
    if (++streak >= 5 && dt < cfg.dt_initial) {
      dt = std::min(cfg.dt_initial, 2.0 * dt);
      streak = 0;
    }
    record(t);
    while (next_snap < events.size() && events[next_snap] <= t + 1e-12) emit(t), ++next_snap;
  }

  res.final_state = Snapshot{t, u, F};
  if (cfg.fit_window) {
    const ShiftFit fit = fit_front_shift(res.trace, cfg.speed_for_fit(), *cfg.fit_window);
    res.trace.k_fit = fit.k_fit;
    res.trace.fit_residual = fit.residual;
    res.trace.fit_window = *cfg.fit_window;
    res.trace.lambda_fit = cfg.speed_for_fit();
    res.trace.fitted = true;
  }
  return res;
}

ComovingSeries comoving_convergence(const SimConfig& cfg, const std::vector<double>& py,
                                    const std::vector<double>& pf) {
  if (py.size() < 2 || py.size() != pf.size()) throw std::invalid_argument("profile arrays must match");
  ComovingSeries out;
  const auto& x = cfg.grid.nodes;
  auto measure = [&](const Snapshot& s) {
    auto xf = front_position(x, s.u);
    if (!xf) throw std::runtime_error("recentring failed: no 1/2 crossing at t = " + std::to_string(s.t));
    double err = 0.0;
    for (std::size_t k = 0; k < py.size(); ++k) {
      const double xx = *xf + py[k];
      if (xx < x.front() || xx > x.back()) continue;
      err = std::max(err, std::abs(interpolate(x, s.u, xx) - pf[k]));
    }
    out.times.push_back(s.t);
    out.errors.push_back(err);
    out.x_front.push_back(*xf);
  };
  SimConfig c = cfg;
  if (c.snapshot_times.empty()) {
    for (int k = 1; k <= 20; ++k) c.snapshot_times.push_back(cfg.t_end * k / 20.0);
  }
  simulate(c, measure);
  return out;
}

ComovingSeries comoving_convergence(const SimConfig& cfg, const TWProfile& profile) {
  return comoving_convergence(cfg, profile.grid.nodes, profile.f);
}

}  // namespace kpp
