#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sflex/quadrature.hpp"

using namespace sflex;

TEST_SUITE("quadrature") {
  TEST_CASE("gauss-legendre integrates polynomials exactly") {
    for (int n : {1, 2, 5, 16, 64}) {
      const auto& rule = gauss_legendre(n);
      CHECK(rule.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
      const int deg = 2 * n - 1;
      const double v = rule.integrate([&](double x) { return std::pow(x, deg - (deg % 2 ? 1 : 0)); }, 0.0, 1.0);
      const int p = deg - (deg % 2 ? 1 : 0);
      CHECK(v == doctest::Approx(1.0 / (p + 1)).epsilon(1e-13));
    }
  }

  TEST_CASE("nodes are symmetric roots") {
    const auto& rule = gauss_legendre_64();
    for (int i = 0; i < 64; ++i) CHECK(rule.nodes[i] == doctest::Approx(-rule.nodes[63 - i]).epsilon(1e-15));
    for (int i = 1; i < 64; ++i) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
  }

  TEST_CASE("composite and adaptive") {
    auto f = [](double x) { return std::exp(-x) * std::sin(3 * x); };
    const double exact = (3 - std::exp(-2.0) * (std::sin(6.0) + 3 * std::cos(6.0))) / 10;
    CHECK(integrate_composite(f, 0, 2, 8) == doctest::Approx(exact).epsilon(1e-13));
    CHECK(integrate_adaptive(f, 0, 2) == doctest::Approx(exact).epsilon(1e-12));
  }

  TEST_CASE("log-weight moments of a shifted normal") {
    const double mu = 3.0, s2 = 0.25;
    auto lw = [&](double x) { return -(x - mu) * (x - mu) / (2 * s2) + 100.0; };
    const double inf = std::numeric_limits<double>::infinity();
    const auto m = log_weight_moments(lw, -inf, inf, 1.0);
    CHECK(m.mean == doctest::Approx(mu).epsilon(1e-12));
    CHECK(m.variance == doctest::Approx(s2).epsilon(1e-10));
    CHECK(m.log_norm == doctest::Approx(100 + 0.5 * std::log(2 * std::numbers::pi * s2)).epsilon(1e-12));
  }

  TEST_CASE("compensated sum") {
    CompensatedSum s;
    s += 1.0;
    for (int i = 0; i < 1000000; ++i) s += 1e-16;
    s += -1.0;
    CHECK(s.value() == doctest::Approx(1e-10).epsilon(1e-6));
  }
}
