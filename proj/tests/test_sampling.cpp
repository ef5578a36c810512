#include <doctest.h>

#include <cmath>

#include "sflex/analytics.hpp"
#include "sflex/sampling.hpp"

using namespace sflex;

TEST_SUITE("sampling") {
  TEST_CASE("discrete increment law matches direct weights") {
    const ModelParams p(10, 0.5, 5.0, HeightMode::discrete);
    const auto pot = Potential::gaussian(1.0);
    const auto dist = build_increment_dist(pot, p, 4.0);
    REQUIRE(dist.support().size() == 5);  // eta in {-4,-2,0,2,4}
    double z = 0;
    for (double x : dist.support()) z += std::exp(-0.5 * 0.5 * x * x);
    for (std::size_t i = 0; i < dist.support().size(); ++i) {
      const double x = dist.support()[i];
      CHECK(dist.probabilities()[i] == doctest::Approx(std::exp(-0.25 * x * x) / z).epsilon(1e-13));
    }
    CHECK(dist.admissible(4.0));
    CHECK_FALSE(dist.admissible(6.0));
  }

  TEST_CASE("continuous table reproduces the law's moments") {
    const ModelParams p(10, 0.1, 1.0);
    const auto dist = build_increment_dist(Potential::power_law(1.0, 4.0), p);
    Rng rng = make_rng(7, 0);
    const int n = 200000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = dist.sample(rng);
      s1 += x;
      s2 += x * x;
    }
    const double var = dist.sigma2();
    CHECK(std::abs(s1 / n) < 5 * std::sqrt(var / n));
    CHECK(s2 / n == doctest::Approx(var).epsilon(0.02));
  }

  TEST_CASE("free sampler second moments") {
    const int n = 30;
    const ModelParams p = ModelParams::from_length(n, 1.0);
    const auto pot = Potential::gaussian(1.0);
    const auto dist = build_increment_dist(pot, p);
    ChainSettings s;
    s.n_samples = 20000;
    s.seed = 99;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(s.n_samples), 2);
    Eigen::Index r = 0;
    stream_free(p, dist, 0.0, s, [&](std::span<const PolymerConfig> b) {
      for (const auto& phi : b) {
        const Eigen::VectorXd y = integrated_walk(phi, p);
        rows(r, 0) = (phi[n + 1] - phi[n] - phi[1]) / p.epsilon();
        rows(r, 1) = y[n];
        ++r;
      }
    });
    REQUIRE(r == rows.rows());
    const SampleMoments m = estimate_moments(rows);
    const Eigen::Matrix2d z = z_covariance(n, dist.sigma2());
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(std::abs(m.covariance(i, j) - z(i, j)) < 5 * m.covariance_se(i, j));
  }

  TEST_CASE("sample order does not depend on workers") {
    const ModelParams p = ModelParams::from_length(12, 1.0);
    const auto dist = build_increment_dist(Potential::gaussian(1.0), p);
    ChainSettings a;
    a.n_samples = 1500;
    a.seed = 4;
    ChainSettings b = a;
    b.workers = 3;
    const auto x = sample_free(p, dist, 0.2, a), y = sample_free(p, dist, 0.2, b);
    REQUIRE(x.size() == 1500);
    REQUIRE(y.size() == 1500);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].heights == y[i].heights);
    const BoundaryConditions bc(0.1, -0.2, 0.3, 12);
    const auto u = sample_gaussian_bridge(p, Potential::gaussian(1.0), bc, a);
    const auto v = sample_gaussian_bridge(p, Potential::gaussian(1.0), bc, b);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i].heights == v[i].heights);
  }

  TEST_CASE("bridge samples satisfy the constraints") {
    const int n = 25;
    const ModelParams p = ModelParams::from_length(n, 1.0);
    const BoundaryConditions bc(0.3, -0.7, 1.1, n);
    ChainSettings s;
    s.n_samples = 700;
    for (const auto& phi : sample_gaussian_bridge(p, Potential::gaussian(2.0), bc, s)) {
      CHECK(phi[0] == 0);
      CHECK(bc.max_violation(phi) < 1e-9);
    }
    const ModelParams d(n, 1.0 / n, 1.0, HeightMode::discrete);
    CHECK_THROWS_AS(sample_gaussian_bridge(d, Potential::gaussian(1.0), bc, s), Error);
    CHECK_THROWS_AS(sample_gaussian_bridge(p, Potential::power_law(1.0, 4.0), bc, s), Error);
  }

  TEST_CASE("jackknife errors of iid normals") {
    Rng rng = make_rng(1, 2);
    std::normal_distribution<double> g(1.0, 2.0);
    Eigen::MatrixXd rows(40000, 1);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) rows(i, 0) = g(rng);
    const SampleMoments m = estimate_moments(rows);
    CHECK(m.mean_se[0] == doctest::Approx(2.0 / 200).epsilon(0.25));
    CHECK(std::abs(m.mean[0] - 1.0) < 5 * m.mean_se[0]);
    CHECK(std::abs(m.covariance(0, 0) - 4.0) < 5 * m.covariance_se(0, 0));
  }

  TEST_CASE("settings validation") {
    ChainSettings s;
    s.thin = 0;
    CHECK_THROWS_AS(s.validate(), Error);
  }
}
