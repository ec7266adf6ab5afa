#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace kpp {

// Equation families. KPP2 is the classic second-order baseline
// u_t = (|u|^n u)_xx + u(1-u); the others carry their higher-order
// degenerate diffusion.
enum class Family { KPP2, KPP2_PME, KPP4n, KPP4n_QUASI_SOURCE, TFE4, KPP6n, KPP8n };

std::string family_name(Family fam);
// Accepts canonical names case-insensitively plus short aliases
// ("kpp4", "quasi", "tfe", ...). Throws std::invalid_argument.
Family parse_family(std::string_view text);
int family_order(Family fam);
// Families whose ODE is posed for f directly instead of F = |f|^n f.
bool solved_in_f(Family fam);
// Sign s in F^(2m) = s * (lambda f' + source): +1 for orders 4 and 8.
int principal_sign(Family fam);

inline constexpr double kDefaultEpsilon = 1e-3;

struct ModelSpec {
  Family family = Family::KPP4n;
  double n = 0.0;
  double lambda = 1.0;
  double epsilon = kDefaultEpsilon;

  int order() const { return family_order(family); }
  // Throws std::invalid_argument on inadmissible exponents or epsilon.
  void validate() const;
  // Flat "key = value" record, one field per line.
  std::string to_record() const;
  static ModelSpec from_record(std::string_view text);
};

struct Grid {
  std::vector<double> nodes;

  static Grid uniform(double y_left, double y_right, int m);
  int size() const { return static_cast<int>(nodes.size()); }
  double left() const { return nodes.front(); }
  double right() const { return nodes.back(); }
  // Spacing of a uniform grid (first interval otherwise).
  double h() const { return nodes[1] - nodes[0]; }
  bool is_uniform(double rel_tol = 1e-9) const;
  // Index of the node closest to y.
  int nearest(double y) const;
};

// Regularized change of variables between f and F = |f|^n f.
//
// With eps = 0 this is f = sign(F)|F|^{1/(n+1)}. For eps > 0 we use
//   f_eps(F) = c F (eps^2 + F^2)^{-a},  a = n / (2(n+1)),  c = (1+eps^2)^a,
// normalised so that f_eps(1) = 1, and define the transport coefficient as
//   S_eps(F) = (n+1) f_eps'(F) = c (eps^2+F^2)^{-a-1} ((n+1) eps^2 + F^2),
// which tends to |F|^{-n/(n+1)} as eps -> 0. Tying S to the derivative of
// the map keeps the regularized F-equation the exact travelling-wave
// reduction of a regularized PDE, so translation modes stay exact.
class PowerMap {
 public:
  PowerMap(double n, double eps);

  double n() const { return n_; }
  double eps() const { return eps_; }
  double f(double F) const;
  // df/dF.
  double df(double F) const;
  double S(double F) const { return (n_ + 1.0) * df(F); }
  // dS/dF.
  double dS(double F) const;
  // Inverse map f -> F (closed form for eps = 0, Newton otherwise).
  double F(double f) const;

 private:
  double n_, eps_, a_, c_;
};

// Unregularized inverse of F = |f|^n f.
double f_from_F(double F, double n);
double F_from_f(double f, double n);

struct TWProfile {
  ModelSpec spec;
  Grid grid;
  std::vector<double> F;
  std::vector<double> f;
  // Optional first-order-system columns from the collocation solver:
  // state[k][i] is the k-th derivative of F at node i (for TFE4 the
  // columns are f, f', f'', R(f) f''').
  std::vector<std::vector<double>> state;
  double residual_norm = 0.0;
  bool normalized = false;

  double lambda() const { return spec.lambda; }
  double n() const { return spec.n; }
  // Fill f from F (or F from f for families solved in f).
  void sync_from_F();
  void sync_from_f();
};

TWProfile constant_profile(const ModelSpec& spec, const Grid& grid, double f_value);

using SourceFn = std::function<double(double)>;

// Pointwise defect of the family's travelling-wave ODE at interior node i,
// using order-2 centred stencils.
//
// For F-form families `source` replaces the reaction term as a function of
// F (e.g. the truncated blow-up form -|F|); for KPP2_PME it is the supplied
// q(f) and defaults to f(1-f). Throws std::out_of_range when the stencil
// does not fit and std::domain_error for S(0) with eps = 0 in a
// standalone position.
double tw_residual(const ModelSpec& spec, const TWProfile& profile, int node_index,
                   const SourceFn* source = nullptr);

// Max |tw_residual| over all nodes where the stencil fits.
double max_interior_residual(const ModelSpec& spec, const TWProfile& profile,
                             const SourceFn* source = nullptr);

struct Certificate {
  // For F-form families: lhs = -lambda (n+1) int |f|^n f'^2 dy and rhs the
  // closed-form potential (regularized integral when eps > 0). For TFE4,
  // where the multiplier argument fails, the pair is the mass balance
  // (int f(1-f) dy, lambda) instead.
  double lhs = 0.0;
  double rhs = 0.0;
  // Quadrature error estimate (Richardson between h and 2h) plus the
  // boundary flux left over by domain truncation.
  double bound = 0.0;
  bool mass_balance = false;
  bool holds() const;
};

// Closed-form rhs for the multiplier identity: -(n+1)[1/(n+2) - 1/(n+3)],
// or -1/6 for the quasi-source family whose reaction term is F(1-F).
double certificate_rhs_closed_form(Family fam, double n);

Certificate lambda_sign_certificate(const TWProfile& profile, double n);

}  // namespace kpp
