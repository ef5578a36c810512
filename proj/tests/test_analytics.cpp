#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sflex/analytics.hpp"
#include "sflex/quadrature.hpp"

using namespace sflex;

namespace {

// Cov(J(s), J(t)) = int_0^s int_0^t min(u, v) dv du by piecewise Gauss-Legendre.
double j_cov_oracle(double s, double t) {
  const auto& rule = gauss_legendre(8);
  auto inner = [&](double u) {
    const double k = std::min(u, t);
    return rule.integrate([](double v) { return v; }, 0.0, k) +
           rule.integrate([&](double) { return u; }, k, t);
  };
  const double k = std::min(s, t);
  return rule.integrate(inner, 0.0, k) + (s > t ? rule.integrate(inner, k, s) : 0.0);
}

// Cov(W(1), J(t)) = int_0^t min(1, v) dv.
double wj_cov_oracle(double t) {
  return gauss_legendre(4).integrate([](double v) { return v; }, 0.0, t);
}

std::vector<double> random_grid(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> t;
  while (static_cast<int>(t.size()) < k) {
    const double v = u(rng);
    bool clash = false;
    for (double w : t) clash = clash || std::abs(w - v) < 1e-3;
    if (!clash) t.push_back(v);
  }
  std::sort(t.begin(), t.end());
  return t;
}

}  // namespace

TEST_SUITE("analytics") {
  TEST_CASE("q matrix against quadrature of the Brownian covariance") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      auto t = random_grid(rng, 1 + trial % 5);
      const Eigen::MatrixXd q = q_matrix(GridTimes(t));
      t.push_back(1.0);
      CHECK(q(0, 0) == 1.0);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const auto a = static_cast<Eigen::Index>(i + 1);
        CHECK(q(0, a) == doctest::Approx(wj_cov_oracle(t[i])).epsilon(1e-13));
        for (std::size_t j = 0; j < t.size(); ++j)
          CHECK(q(a, static_cast<Eigen::Index>(j + 1)) ==
                doctest::Approx(j_cov_oracle(t[i], t[j])).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("q matrix at t = 1/2") {
    const Eigen::MatrixXd q = q_matrix(GridTimes({0.5}));
    CHECK(q.rows() == 3);
    CHECK(q(0, 1) == doctest::Approx(0.125));
    CHECK(q(1, 1) == doctest::Approx(1.0 / 24));
    CHECK(q(1, 2) == doctest::Approx(5.0 / 48));
    CHECK(q(2, 2) == doctest::Approx(1.0 / 3));
  }

  TEST_CASE("q matrix is PSD on random grids") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) CHECK(is_psd(q_matrix(GridTimes(random_grid(rng, 1 + trial % 6)))));
  }

  TEST_CASE("theta covariance values") {
    CHECK(theta_cov(0.5, 0.5) == doctest::Approx(1.0 / 192).epsilon(1e-14));
    CHECK(theta_cov(0.25, 0.75) == doctest::Approx(13.0 / 12288).epsilon(1e-14));
    CHECK(theta_cov(0.75, 0.25) == doctest::Approx(13.0 / 12288).epsilon(1e-14));
    CHECK(theta_cov(0.0, 0.3) == 0.0);
    CHECK(theta_cov(0.3, 1.0) == 0.0);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 50; ++i) {
      const double t = u(rng);
      CHECK(theta_cov(t, t) == doctest::Approx(std::pow(t * (1 - t), 3) / 3).epsilon(1e-12));
    }
  }

  TEST_CASE("conditional gaussian agrees with closed forms") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 30; ++trial) {
      const auto t = random_grid(rng, 1 + trial % 6);
      const ConditionedSpec spec{g(rng), g(rng)};
      const auto cg = conditional_gaussian(GridTimes(t), spec);
      CHECK(is_psd(cg.covariance));
      for (std::size_t i = 0; i < t.size(); ++i) {
        const auto a = static_cast<Eigen::Index>(i);
        CHECK(std::abs(cg.mean[a] - theta_mean(t[i], spec)) < 1e-12);
        for (std::size_t j = 0; j < t.size(); ++j)
          CHECK(std::abs(cg.covariance(a, static_cast<Eigen::Index>(j)) - theta_cov(t[i], t[j])) < 1e-12);
      }
    }
  }

  TEST_CASE("theta mean boundary behaviour") {
    const ConditionedSpec spec{0.7, -1.3};
    const double h = 1e-5;
    CHECK(theta_mean(0.0, spec) == 0.0);
    CHECK(theta_mean(1.0, spec) == doctest::Approx(spec.b));
    CHECK(std::abs((theta_mean(h, spec) - theta_mean(0.0, spec)) / h) < 1e-4);
    CHECK((theta_mean(1.0, spec) - theta_mean(1 - h, spec)) / h == doctest::Approx(spec.a).epsilon(1e-4));
    CHECK(theta_mean(0.25, ConditionedSpec{1, 0}) == doctest::Approx(0.0625 * -0.75));
  }

  TEST_CASE("z covariance") {
    const Eigen::Matrix2d c = z_covariance(3, 1.0);
    CHECK(c(0, 0) == doctest::Approx(3));
    CHECK(c(0, 1) == doctest::Approx(1.5));
    CHECK(c(1, 1) == doctest::Approx(0.875));
    CHECK(c.determinant() == doctest::Approx(0.375));
    // Direct double sum of Cov(X_N, Y_N) = sum_j Cov(X_N, X_j)/(N+1).
    const int n = 17;
    double cxy = 0, cyy = 0;
    for (int i = 1; i <= n; ++i) {
      cxy += i / (n + 1.0);
      for (int j = 1; j <= n; ++j) cyy += std::min(i, j) / ((n + 1.0) * (n + 1.0));
    }
    const Eigen::Matrix2d z = z_covariance(n, 1.0);
    CHECK(z(0, 1) == doctest::Approx(cxy));
    CHECK(z(1, 1) == doctest::Approx(cyy));
  }

  TEST_CASE("exact boundary density") {
    CHECK(exact_boundary_density(3, 1, 1, 0, 0) == doctest::Approx(std::sqrt(24.0) / (18 * std::numbers::pi)).epsilon(1e-12));
    CHECK(exact_boundary_density(7, 1.3, 0.8, 0.2, -0.4) ==
          doctest::Approx(exact_boundary_density(7, 1.3, 0.8, -0.4, 0.2)).epsilon(1e-14));
    const double n = 1e5;
    CHECK(exact_boundary_density(100000, 1, 1, 0, 0) / (std::sqrt(12.0) / (2 * std::numbers::pi * n * n)) ==
          doctest::Approx(1.0).epsilon(1e-4));
    CHECK_THROWS_AS(exact_boundary_density(1, 1, 1, 0, 0), Error);
  }

  TEST_CASE("step law variance") {
    const ModelParams p(10, 0.1, 1.0);
    CHECK(sigma2_increment(Potential::gaussian(2.0), p) == doctest::Approx(5.0).epsilon(1e-14));
    // Quadrature path: a wide truncation leaves the Gaussian variance unchanged.
    CHECK(sigma2_increment(Potential::gaussian(2.0), p, 200.0) == doctest::Approx(5.0).epsilon(1e-10));
    // alpha = 4: Var = (eps kappa / 4)^{-1/2} Gamma(3/4) / Gamma(1/4).
    const double v4 = sigma2_increment(Potential::power_law(1.0, 4.0), p);
    CHECK(v4 == doctest::Approx(std::sqrt(40.0) * std::tgamma(0.75) / std::tgamma(0.25)).epsilon(1e-10));
    // Discrete: direct sum over eps^{-1} Z.
    const ModelParams d(10, 0.1, 1.0, HeightMode::discrete);
    double z = 0, m2 = 0;
    for (int k = -200; k <= 200; ++k) {
      const double x = k / 0.1;
      const double w = std::exp(-0.1 * 0.5 * 2.0 * x * x);
      z += w;
      m2 += w * x * x;
    }
    CHECK(sigma2_increment(Potential::gaussian(2.0), d) == doctest::Approx(m2 / z).epsilon(1e-12));
  }

  TEST_CASE("tilted moments") {
    const auto m = tilted_step_moments(Potential::gaussian(2.0), 0.1, HeightMode::continuous, 0.3);
    CHECK(m.mean == doctest::Approx(1.5));
    const auto q = tilted_step_moments(Potential::gaussian(2.0), 0.1, HeightMode::continuous, 0.3, 100.0);
    CHECK(q.mean == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(q.log_norm == doctest::Approx(m.log_norm).epsilon(1e-12));
  }

  TEST_CASE("grid validation") {
    CHECK_THROWS_AS(GridTimes({0.0, 0.5}), Error);
    CHECK_THROWS_AS(GridTimes({0.5, 0.5}), Error);
    CHECK_THROWS_AS(GridTimes({0.5, 1.0}), Error);
  }
}
