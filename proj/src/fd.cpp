#include "kpp/fd.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace kpp::fd {
namespace {

constexpr std::array<double, 3> kD1{-0.5, 0.0, 0.5};
constexpr std::array<double, 3> kD2{1.0, -2.0, 1.0};
constexpr std::array<double, 5> kD3{-0.5, 1.0, 0.0, -1.0, 0.5};
constexpr std::array<double, 5> kD4{1.0, -4.0, 6.0, -4.0, 1.0};
constexpr std::array<double, 7> kD5{-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5};
constexpr std::array<double, 7> kD6{1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0};
constexpr std::array<double, 9> kD7{-0.5, 3.0, -7.0, 7.0, 0.0, -7.0, 7.0, -3.0, 0.5};
constexpr std::array<double, 9> kD8{1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0};

}  // namespace

std::span<const double> central_weights(int d) {
  switch (d) {
    case 1: return kD1;
    case 2: return kD2;
    case 3: return kD3;
    case 4: return kD4;
    case 5: return kD5;
    case 6: return kD6;
    case 7: return kD7;
    case 8: return kD8;
    default: throw std::invalid_argument("central_weights: derivative order must be 1..8");
  }
}

int half_width(int d) { return static_cast<int>(central_weights(d).size() / 2); }

double derivative(std::span<const double> v, int i, int d, double h) {
  const auto w = central_weights(d);
  const int r = static_cast<int>(w.size() / 2);
  if (i - r < 0 || i + r >= static_cast<int>(v.size()))
    throw std::out_of_range("finite-difference stencil does not fit at this node");
  double acc = 0.0;
  for (int k = -r; k <= r; ++k) acc += w[k + r] * v[i + k];
  return acc / std::pow(h, d);
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

BandMatrix::BandMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), ld_(kl + ku + 1), a_(static_cast<std::size_t>(n) * (kl + ku + 1), 0.0) {}

void BandMatrix::set_zero() { std::fill(a_.begin(), a_.end(), 0.0); }

// Row-major band storage: entry (i, j) lives at i*ld + (j - i + kl).
double& BandMatrix::at(int i, int j) {
  const int off = j - i + kl_;
  if (off < 0 || off >= ld_) throw std::out_of_range("BandMatrix: entry outside band");
  return a_[static_cast<std::size_t>(i) * ld_ + off];
}

double BandMatrix::get(int i, int j) const {
  const int off = j - i + kl_;
  if (off < 0 || off >= ld_) return 0.0;
  return a_[static_cast<std::size_t>(i) * ld_ + off];
}

bool BandMatrix::factor(double tiny) {
  double scale = 0.0;
  for (double v : a_) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return false;
  for (int k = 0; k < n_; ++k) {
    const double piv = a_[static_cast<std::size_t>(k) * ld_ + kl_];
    if (!(std::abs(piv) > tiny * scale)) return false;
    const int imax = std::min(n_ - 1, k + kl_);
    const int jmax = std::min(n_ - 1, k + ku_);
    for (int i = k + 1; i <= imax; ++i) {
      double& lik = a_[static_cast<std::size_t>(i) * ld_ + (k - i + kl_)];
      lik /= piv;
      if (lik == 0.0) continue;
      for (int j = k + 1; j <= jmax; ++j)
        a_[static_cast<std::size_t>(i) * ld_ + (j - i + kl_)] -=
            lik * a_[static_cast<std::size_t>(k) * ld_ + (j - k + kl_)];
    }
  }
  return true;
}

void BandMatrix::solve(std::vector<double>& b) const {
  for (int i = 0; i < n_; ++i) {
    double s = b[i];
    for (int j = std::max(0, i - kl_); j < i; ++j) s -= a_[static_cast<std::size_t>(i) * ld_ + (j - i + kl_)] * b[j];
    b[i] = s;
  }
  for (int i = n_ - 1; i >= 0; --i) {
    double s = b[i];
    const int jmax = std::min(n_ - 1, i + ku_);
    for (int j = i + 1; j <= jmax; ++j) s -= a_[static_cast<std::size_t>(i) * ld_ + (j - i + kl_)] * b[j];
    b[i] = s / a_[static_cast<std::size_t>(i) * ld_ + kl_];
  }
}

std::vector<double> BandMatrix::multiply(const std::vector<double>& x) const {
  std::vector<double> y(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    const int j0 = std::max(0, i - kl_), j1 = std::min(n_ - 1, i + ku_);
    double s = 0.0;
    for (int j = j0; j <= j1; ++j) s += a_[static_cast<std::size_t>(i) * ld_ + (j - i + kl_)] * x[j];
    y[i] = s;
  }
  return y;
}

}  // namespace kpp::fd
