#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "kpp/fd.hpp"

using namespace kpp::fd;

TEST_CASE("stencil weights annihilate constants") {
  for (int d = 1; d <= 8; ++d) {
    const auto w = central_weights(d);
    CHECK(static_cast<int>(w.size()) == 2 * half_width(d) + 1);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("derivatives of monomials are exact to order 2") {
  const double h = 0.1;
  std::vector<double> x(41), v(41);
  for (int i = 0; i < 41; ++i) x[i] = -2 + h * i;
  for (int d = 1; d <= 8; ++d) {
    // x^(d+1) is reproduced exactly by an order-2 centred stencil at the origin.
    for (int i = 0; i < 41; ++i) v[i] = std::pow(x[i], d);
    double fact = 1;
    for (int k = 2; k <= d; ++k) fact *= k;
    CHECK(derivative(v, 20, d, h) == doctest::Approx(fact).epsilon(1e-6));
  }
}

TEST_CASE("trapezoid integrates linear data exactly") {
  std::vector<double> x{0, 0.5, 2, 3}, y{1, 2, 5, 7};
  CHECK(trapezoid(x, y) == doctest::Approx(0.5 * 1.5 + 1.5 * 3.5 + 6.0));
}

TEST_CASE("band matrix solve matches a dense reference") {
  const int n = 30;
  BandMatrix A(n, 2, 3);
  std::vector<double> x(n), dense(n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    x[i] = std::sin(i + 1.0);
    for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 3); ++j) {
      const double a = i == j ? 10.0 + i : 1.0 / (1 + i + 2 * j);
      A.at(i, j) = a;
      dense[i * n + j] = a;
    }
  }
  std::vector<double> b = A.multiply(x);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < n; ++j) s += dense[i * n + j] * x[j];
    CHECK(b[i] == doctest::Approx(s));
  }
  REQUIRE(A.factor());
  A.solve(b);
  for (int i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-12));
}
