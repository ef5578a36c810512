#include <doctest.h>

#include <cmath>
#include <random>

#include "sflex/analytics.hpp"
#include "sflex/mcmc.hpp"

using namespace sflex;

TEST_SUITE("mcmc") {
  TEST_CASE("delta energy matches recomputed energy") {
    const int n = 12;
    const ModelParams p = ModelParams::from_length(n, 1.0);
    const auto pot = Potential::power_law(1.0, 3.0);
    const BoundaryConditions bc(0.2, 0.1, -0.4, n);
    const auto dist = build_increment_dist(pot, p);
    const BridgeMcmc chain(p, pot, bc, dist);
    PolymerConfig phi = chain.initial_config();
    CHECK(bc.max_violation(phi) < 1e-9);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> site(2, n - 1), mode(0, n - 3);
    std::normal_distribution<double> g(0.0, 0.05);
    for (int trial = 0; trial < 300; ++trial) {
      McmcMove m;
      const int kind = trial % 3;
      if (kind == 0) {
        m.kind = McmcMove::Kind::site;
        m.first = m.last = site(rng);
      } else if (kind == 1) {
        m.kind = McmcMove::Kind::block;
        m.first = site(rng);
        m.last = std::uniform_int_distribution<int>(m.first, n - 1)(rng);
      } else {
        m.kind = McmcMove::Kind::mode;
        m.mode = mode(rng);
      }
      m.amount = g(rng);
      const double before = hamiltonian(phi, p, pot);
      const double de = chain.delta_energy(phi, m);
      PolymerConfig next = phi;
      chain.apply(next, m);
      CHECK(de == doctest::Approx(hamiltonian(next, p, pot) - before).epsilon(1e-9));
      CHECK(bc.max_violation(next) < 1e-9);
      chain.apply(next, BridgeMcmc::reverse(m));
      CHECK((next.heights - phi.heights).cwiseAbs().maxCoeff() < 1e-12);
      phi = next;
    }
  }

  TEST_CASE("modes diagonalize the bending form") {
    const ModelParams p = ModelParams::from_length(9, 1.0);
    const BridgeMcmc chain(p, Potential::gaussian(1.0), BoundaryConditions::zero(9),
                           build_increment_dist(Potential::gaussian(1.0), p));
    const Eigen::MatrixXd& v = chain.modes();
    CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(chain.mode_stiffness().minCoeff() > 0);
  }

  TEST_CASE("discrete start respects the increment bound") {
    const int n = 7;
    const ModelParams p(n, 1.0 / n, 1.0, HeightMode::discrete);
    const auto pot = Potential::gaussian(1.0);
    const BoundaryConditions bc(1.0, 0.0, 4.0, n);
    const auto dist = build_increment_dist(pot, p, 1.0 / p.epsilon());
    const BridgeMcmc chain(p, pot, bc, dist);
    const PolymerConfig phi = chain.initial_config();
    CHECK(bc.max_violation(phi) == 0.0);
    CHECK(laplacian(phi).cwiseAbs().maxCoeff() <= 1.0);
    // Unreachable target: endpoint too far for |Delta phi| <= 1.
    const BoundaryConditions far(0.0, 0.0, 100.0, n);
    CHECK_THROWS_AS(BridgeMcmc(p, pot, far, dist).initial_config(), Error);
    CHECK_THROWS_AS(BridgeMcmc(p, pot, BoundaryConditions(0.5, 0, 0, n), dist), Error);
  }

  TEST_CASE("too few sites") {
    const ModelParams p = ModelParams::from_length(3, 1.0);
    try {
      BridgeMcmc(p, Potential::gaussian(1.0), BoundaryConditions::zero(3),
                 build_increment_dist(Potential::gaussian(1.0), p));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::no_free_sites);
    }
  }

  TEST_CASE("continuous chain agrees with the exact bridge") {
    const int n = 20;
    const ModelParams p = ModelParams::from_length(n, 1.0);
    const auto pot = Potential::gaussian(1.0);
    const BoundaryConditions bc(0.5, -0.25, 0.2, n);
    const auto dist = build_increment_dist(pot, p);
    ChainSettings s;
    s.seed = 12;
    s.sweeps = 40000;
    s.burn_in = 2000;
    s.chains = 2;
    std::vector<ChainReport> reports;
    const auto mc = BridgeMcmc(p, pot, bc, dist).sample(s, &reports);
    s.n_samples = 40000;
    const auto ex = sample_gaussian_bridge(p, pot, bc, s);
    const GridTimes times({0.25, 0.5, 0.75});
    const double sigma = std::sqrt(dist.sigma2());
    const SampleMoments a = estimate_theta_stats(mc, p, times, sigma);
    const SampleMoments b = estimate_theta_stats(ex, p, times, sigma);
    for (int i = 0; i < 3; ++i) {
      const double se = std::hypot(a.mean_se[i], b.mean_se[i]);
      CHECK(std::abs(a.mean[i] - b.mean[i]) < 4 * se);
      const double cse = std::hypot(a.covariance_se(i, i), b.covariance_se(i, i));
      CHECK(std::abs(a.covariance(i, i) - b.covariance(i, i)) < 4 * cse);
    }
    for (const auto& r : reports) {
      CHECK(r.site_acceptance > 0.2);
      CHECK(r.collective_acceptance > 0.2);
      CHECK(r.energy_autocorrelation >= 1.0);
    }
  }

  TEST_CASE("autocorrelation time of an AR(1) series") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::vector<double> x(200000);
    double v = 0;
    for (auto& e : x) {
      v = 0.8 * v + g(rng);
      e = v;
    }
    CHECK(integrated_autocorrelation(x) == doctest::Approx(9.0).epsilon(0.1));
    std::vector<double> iid(100000);
    for (auto& e : iid) e = g(rng);
    CHECK(integrated_autocorrelation(iid) == doctest::Approx(1.0).epsilon(0.1));
  }
}
