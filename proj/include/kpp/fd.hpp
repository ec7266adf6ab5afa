#pragma once

#include <span>
#include <vector>

namespace kpp::fd {

// Order-2 centred stencil for the d-th derivative (1 <= d <= 8).
// Weights run over offsets -r..r with r = half_width(d); divide by h^d.
std::span<const double> central_weights(int d);
int half_width(int d);

// d-th derivative of samples v at index i on a uniform grid of spacing h.
double derivative(std::span<const double> v, int i, int d, double h);

// Trapezoidal rule on arbitrary nodes.
double trapezoid(std::span<const double> x, std::span<const double> y);

// Dense-storage banded matrix with kl sub- and ku super-diagonals,
// factored by Gaussian elimination without pivoting. Suitable for the
// implicit-step Jacobians, which carry a dominant 1/dt diagonal.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(int n, int kl, int ku);

  int size() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }
  void set_zero();
  double& at(int i, int j);
  double get(int i, int j) const;
  // In-place LU. Returns false when a pivot falls below `tiny` in
  // relative magnitude.
  bool factor(double tiny = 1e-300);
  // Solves in place using the stored factorisation.
  void solve(std::vector<double>& b) const;
  // y = A x (only valid before factor()).
  std::vector<double> multiply(const std::vector<double>& x) const;

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ld_ = 0;
  std::vector<double> a_;
};

}  // namespace kpp::fd
