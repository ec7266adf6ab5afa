#pragma once

#include <Eigen/SparseCore>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpp/models.hpp"

namespace kpp {

enum class Closure { DIRICHLET, PERIODIC };

// Discrete B w = s D^(2m)(q w) + (dsrc/dF) q w + lambda w_y about a
// travelling wave, with q = dF/df = 1 / f_eps'(F) the linearised change of
// variables, so the principal part is the model operator applied to
// (n+1)|f|^n w in regularised form. Centred order-2 stencils throughout.
// DIRICHLET: the m nodes at each end carry w = 0 (the linearisation of the
// solver's end conditions), scaled by h^(-2m) to match the interior rows.
// PERIODIC: indices wrap, for symbol checks on constant states.
struct LinearizedOperator {
  TWProfile profile;
  ModelSpec spec;
  Closure closure = Closure::DIRICHLET;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  double h = 0.0;
  int radius = 1;
  // Discrete f' of the base profile (from the collocation slopes when
  // available).
  std::vector<double> fprime;
  std::string closure_note;

  int size() const { return static_cast<int>(matrix.rows()); }
  bool is_boundary_row(int i) const;
  // B w, accumulated in extended precision; boundary rows give zero.
  std::vector<double> apply(const std::vector<double>& w) const;
  // Centred first derivative (one-sided at the ends unless periodic).
  std::vector<double> derivative(const std::vector<double>& w) const;
};

// Throws std::invalid_argument on a spec/profile mismatch, a non-uniform
// grid or a family posed directly in f.
LinearizedOperator build_linearized(const TWProfile& profile, const ModelSpec& spec,
                                    Closure closure = Closure::DIRICHLET);

struct NullCheck {
  // max |B f'| over interior rows divided by max |f'|.
  double relative = 0.0;
  double h_squared = 0.0;
  double profile_residual = 0.0;
  // max |f'| on the boundary rows, where the closure forces w = 0.
  double boundary_truncation = 0.0;
  double bound(double C) const { return C * (h_squared + profile_residual + boundary_truncation); }
};
NullCheck null_vector_check(const LinearizedOperator& op);

class RankCollapse : public std::runtime_error {
 public:
  RankCollapse(const std::string& what, double cond) : std::runtime_error(what), cond_(cond) {}
  double condition() const { return cond_; }

 private:
  double cond_;
};

struct ConstrainedSolve {
  std::vector<double> x;
  double multiplier = 0.0;
  // max |b - B x| over interior rows relative to max |b|.
  double residual = 0.0;
  // |<x, f'>| / (|x| |f'|).
  double constraint_residual = 0.0;
  // 1-norm condition estimate of the augmented matrix.
  double condition = 0.0;
};

// min |B x - b| subject to <x, f'> = 0, solved through the augmented system
//   [ I  B  0 ] [r]   [b]
//   [ B' 0  c ] [x] = [0]
//   [ 0  c' 0 ] [mu]  [0]
// with c = f'/|f'|. Throws RankCollapse when the factorisation fails or the
// condition estimate leaves no significant digits.
ConstrainedSolve solve_constrained(const LinearizedOperator& op, const std::vector<double>& b);

// Sign of the k psi term in the second equation. DERIVED follows from
// substituting w = (k/t) psi + phi/t^2 into the perturbed equation with
// g = k log t (giving -k psi); PRINTED keeps +k psi.
enum class ExpansionSign { DERIVED, PRINTED };

struct ExpansionPair {
  std::vector<double> y, psi, phi;
  double k = 0.0;
  ExpansionSign sign = ExpansionSign::DERIVED;
  ConstrainedSolve psi_solve, phi_solve;
  std::string constraint_note;
};

// B psi = f', then B phi = -/+ k psi + k^2 (psi' + psi^2), each under
// <., f'> = 0.
ExpansionPair solve_expansion(const LinearizedOperator& op, double k,
                              ExpansionSign sign = ExpansionSign::DERIVED);

struct AnsatzDefect {
  std::vector<double> times;
  std::vector<double> defects;
  // -slope of log defect against log t.
  double exponent = 0.0;
  double window = 0.0;
};

// Max-norm defect over |y| <= window of
//   w_t = B w - g' f' - g' w_y - w^2,  w = (k/t) psi + phi/t^2,  g' = k/t,
// at `count` log-spaced times in [t_min, t_max].
AnsatzDefect ansatz_defect(const LinearizedOperator& op, const ExpansionPair& pair, double t_min = 1e2,
                           double t_max = 1e4, int count = 9, double window = 10.0);

struct OrderCheck {
  double t = 0.0;
  double g1 = 0.0;   // |g'| = k/t
  double g2 = 0.0;   // |g''| = k/t^2
  double eps = 0.0;  // 1/t^2
  double g1_squared = 0.0;
  // All of g2, g1^2, eps are O(t^-2) with ratio to 1/t^2 fixed, and
  // eps < g1 once t > 1/k.
  bool consistent = false;
};
OrderCheck order_check(double k, double t);

}  // namespace kpp
