#include "sflex/oracle.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "sflex/analytics.hpp"
#include "sflex/confinement.hpp"
#include "sflex/mcmc.hpp"
#include "sflex/parallel.hpp"
#include "sflex/quadrature.hpp"
#include "sflex/sampling.hpp"

namespace sflex {

namespace {

struct Partial {
  CompensatedSum z, event, stat;
  std::uint64_t total = 0, hits = 0;
};

std::vector<double> step_weights(const EnumerationSpec& spec) {
  const double eps = spec.params.epsilon();
  std::vector<double> w;
  for (double d : spec.support) {
    const double eta = d / eps;
    w.push_back(spec.pot.defined_at(eta) ? std::exp(-eps * spec.pot(eta)) : 0.0);
  }
  return w;
}

void check_size(const EnumerationSpec& spec) {
  const int n = spec.params.n_sites();
  require(!spec.support.empty(), ErrorKind::invalid_input, "empty increment support");
  const double count = std::pow(static_cast<double>(spec.support.size()), n);
  if (count > static_cast<double>(kEnumerationCap)) {
    std::ostringstream msg;
    msg << "enumeration of " << count << " configurations exceeds the cap " << kEnumerationCap;
    throw Error(ErrorKind::too_large, msg.str());
  }
}

// Depth-first over increments k..N with phi_0..phi_k already set.
template <typename Visit>
void descend(int k, int n, double weight, PolymerConfig& phi, const std::vector<double>& support,
             const std::vector<double>& w, Visit& visit) {
  if (k > n) {
    visit(phi, weight);
    return;
  }
  for (std::size_t i = 0; i < support.size(); ++i) {
    phi.heights[k + 1] = 2 * phi.heights[k] - phi.heights[k - 1] + support[i];
    descend(k + 1, n, weight * w[i], phi, support, w, visit);
  }
}

}  // namespace

void enumerate_each(const EnumerationSpec& spec,
                    const std::function<void(const PolymerConfig&, double)>& visit) {
  check_size(spec);
  const int n = spec.params.n_sites();
  const auto w = step_weights(spec);
  PolymerConfig phi{Eigen::VectorXd::Zero(n + 2)};
  phi.heights[1] = spec.xi_left;
  descend(1, n, 1.0, phi, spec.support, w, visit);
}

EnumerationResult enumerate(const EnumerationSpec& spec, const ConfigPredicate& event,
                            const ConfigStatistic& statistic, unsigned workers) {
  check_size(spec);
  const int n = spec.params.n_sites();
  const auto w = step_weights(spec);
  bool unit = true;
  for (double v : w) unit = unit && v == 1.0;

  // Split on the first increment; partial sums are reduced in index order.
  auto partials = parallel_map<Partial>(spec.support.size(), workers, [&](std::size_t first) {
    Partial p;
    PolymerConfig phi{Eigen::VectorXd::Zero(n + 2)};
    phi.heights[1] = spec.xi_left;
    phi.heights[2] = 2 * phi.heights[1] + spec.support[first];
    auto visit = [&](const PolymerConfig& cfg, double weight) {
      ++p.total;
      p.z += weight;
      if (event && !event(cfg)) return;
      ++p.hits;
      p.event += weight;
      if (statistic) p.stat += weight * statistic(cfg);
    };
    descend(2, n, w[first], phi, spec.support, w, visit);
    return p;
  });
  Partial all;
  for (const auto& p : partials) {
    all.z.merge(p.z);
    all.event.merge(p.event);
    all.stat.merge(p.stat);
    all.total += p.total;
    all.hits += p.hits;
  }
  EnumerationResult r;
  r.z = all.z.value();
  r.event_weight = all.event.value();
  r.total_count = all.total;
  r.event_count = all.hits;
  r.exact_counts = unit;
  if (unit)
    r.probability = static_cast<double>(all.hits) / static_cast<double>(all.total);
  else
    r.probability = r.z > 0 ? r.event_weight / r.z : 0.0;
  r.conditional_mean = r.event_weight > 0 ? all.stat.value() / r.event_weight : 0.0;
  return r;
}

ConfigPredicate bridge_event(const BoundaryConditions& bc, double tol) {
  return [bc, tol](const PolymerConfig& phi) { return bc.satisfied_by(phi, tol); };
}

ConfigPredicate tube_event(double radius) {
  return [radius](const PolymerConfig& phi) {
    const int n = phi.n_sites();
    return phi.heights.segment(1, n).cwiseAbs().maxCoeff() <= radius;
  };
}

double gaussian_functional_density(int n_sites, double sigma2, double x, double y) {
  require(n_sites >= 2, ErrorKind::degenerate_distribution,
          "covariance of (X_N, Y_N) is singular for N < 2");
  require(sigma2 > 0, ErrorKind::invalid_input, "sigma2 must be positive");
  const Eigen::Matrix2d cov = z_covariance(n_sites, sigma2);
  const double det = cov.determinant();
  require(det > 0, ErrorKind::degenerate_distribution, "singular covariance");
  const Eigen::Vector2d z(x, y);
  const double q = z.dot(cov.inverse() * z);
  return std::exp(-0.5 * q) / (2 * std::numbers::pi * std::sqrt(det));
}

double mapped_boundary_density(int n_sites, double kappa, double c, double xi_left, double xi_right) {
  const ModelParams params = ModelParams::from_length(n_sites, c);
  const BoundaryConditions bc(xi_left, xi_right, 0.0, n_sites);
  const WalkTargets t = map_boundary(bc, params);
  return gaussian_functional_density(n_sites, 1.0 / (params.epsilon() * kappa), t.x_target,
                                     t.y_target);
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

OracleCheck check(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok, std::move(detail)};
}

}  // namespace

std::vector<OracleCheck> run_oracle_sweep(unsigned workers, std::uint64_t seed,
                                          std::size_t mcmc_sweeps) {
  std::vector<OracleCheck> out;
  const std::vector<double> unit{-1.0, 0.0, 1.0};
  const Potential flat = Potential::flat(1e300);

  {
    const EnumerationSpec spec{ModelParams(2, 1.0, 2.0, HeightMode::discrete), flat, unit};
    const auto r = enumerate(spec, nullptr, nullptr, workers);
    out.push_back(check("flat_counting_z", r.z == 9.0 && r.total_count == 9,
                        "Z=" + fmt(r.z)));
  }
  {
    const EnumerationSpec spec{ModelParams(2, 1.0, 2.0, HeightMode::discrete),
                               Potential::gaussian(2.0), unit};
    const auto r = enumerate(spec, nullptr, nullptr, workers);
    const double expect = std::pow(1 + 2 * std::exp(-1.0), 2);
    out.push_back(check("gaussian_two_step_z", std::abs(r.z - expect) < 1e-12 * expect,
                        "Z=" + fmt(r.z) + " expected " + fmt(expect)));
  }
  {
    const double d = gaussian_functional_density(3, 1.0, 0.0, 0.0);
    const double expect = 1.0 / (2 * std::numbers::pi * std::sqrt(0.375));
    out.push_back(check("functional_density_n3", std::abs(d - expect) < 1e-12,
                        "density=" + fmt(d)));
  }
  {
    // Z is unchanged when the support is mirrored.
    const ModelParams p(5, 0.5, 2.5, HeightMode::discrete);
    const EnumerationSpec a{p, Potential::gaussian(1.3), unit};
    const EnumerationSpec b{p, Potential::gaussian(1.3), {1.0, 0.0, -1.0}};
    const double za = enumerate(a, nullptr, nullptr, workers).z;
    const double zb = enumerate(b, nullptr, nullptr, workers).z;
    out.push_back(check("reflection_invariance", std::abs(za - zb) <= 1e-13 * za,
                        "Z=" + fmt(za) + " vs " + fmt(zb)));
  }
  {
    // Symmetric boundary values: conditional midpoint equals the midpoint of the ends.
    const int n = 6;
    const ModelParams p(n, 0.5, 3.0, HeightMode::discrete);
    const BoundaryConditions bc(1.0, -1.0, 2.0, n);
    const EnumerationSpec spec{p, Potential::gaussian(1.0), unit, bc.xi_left};
    const auto r = enumerate(
        spec, bridge_event(bc), [](const PolymerConfig& phi) { return phi[3] + phi[4]; },
        workers);
    const double expect = 2.0;  // phi_3 + phi_4 reflects onto 2 - phi_4 + 2 - phi_3
    out.push_back(check("bridge_reflection_mean", std::abs(r.conditional_mean - expect) < 1e-12,
                        "E[phi_3+phi_4]=" + fmt(r.conditional_mean)));
  }
  {
    // Transfer path sums against enumeration of the tube event.
    bool ok = true;
    double worst = 0.0;
    for (const Potential& pot : {Potential::gaussian(1.0), flat}) {
      for (int n = 2; n <= 6; ++n) {
        const ModelParams p(n, 1.0 / n, 1.0, HeightMode::discrete);
        for (double radius : {1.0, 2.0, 3.0}) {
          const EnumerationSpec spec{p, pot, unit};
          const auto r = enumerate(spec, tube_event(radius), nullptr, workers);
          TubeSpec tube;
          tube.radius = radius;
          tube.grad_cut = n + 1;
          tube.max_step = 1;
          const auto op = build_transfer(p, pot, tube);
          const double ps = path_sum(op, p);
          const double rel = std::abs(ps - r.event_weight) / r.event_weight;
          worst = std::max(worst, rel);
          ok = ok && rel < 1e-12;
        }
      }
    }
    out.push_back(check("transfer_vs_enumeration", ok, "max relative deviation " + fmt(worst)));
  }
  {
    // Constant ratio of the closed-form density to the mapped functional density.
    std::vector<double> ratios;
    for (int n : {3, 5, 10})
      ratios.push_back(exact_boundary_density(n, 1.0, 1.0, 0.0, 0.0) /
                       mapped_boundary_density(n, 1.0, 1.0, 0.0, 0.0));
    const bool ok = std::abs(ratios[1] / ratios[0] - 1) < 1e-6 &&
                    std::abs(ratios[2] / ratios[0] - 1) < 1e-6;
    out.push_back(check("exact_density_constant_ratio", ok,
                        "ratios " + fmt(ratios[0]) + ", " + fmt(ratios[1]) + ", " + fmt(ratios[2])));
  }
  {
    // MCMC marginals of the pinned measure against enumeration.
    const int n = 6;
    const ModelParams p(n, 1.0 / n, 1.0, HeightMode::discrete);
    const BoundaryConditions bc(1.0, 0.0, 4.0, n);
    double worst = 0.0;
    for (const Potential& pot : {Potential::gaussian(1.0), flat}) {
      const EnumerationSpec spec{p, pot, unit, bc.xi_left};
      std::map<std::pair<int, long>, double> exact;
      double total = 0;
      const auto in_bridge = bridge_event(bc);
      enumerate_each(spec, [&](const PolymerConfig& phi, double w) {
        if (!in_bridge(phi)) return;
        total += w;
        for (int k = 2; k <= n - 1; ++k) exact[{k, std::lround(phi[k])}] += w;
      });
      const auto dist = build_increment_dist(pot, p, 1.0 / p.epsilon());
      const BridgeMcmc chain(p, pot, bc, dist);
      ChainSettings s;
      s.seed = seed;
      s.sweeps = mcmc_sweeps;
      s.burn_in = 1000;
      std::map<std::pair<int, long>, double> seen;
      double count = 0;
      chain.run_chain(0, s, [&](const PolymerConfig& phi) {
        count += 1;
        for (int k = 2; k <= n - 1; ++k) seen[{k, std::lround(phi[k])}] += 1;
      });
      for (const auto& [key, w] : exact) worst = std::max(worst, std::abs(w / total - seen[key] / count));
      for (const auto& [key, c] : seen)
        if (!exact.count(key)) worst = std::max(worst, c / count);
    }
    out.push_back(check("mcmc_marginals_vs_enumeration", worst < 0.01,
                        "max marginal deviation " + fmt(worst) + " over " +
                            std::to_string(mcmc_sweeps) + " sweeps"));
  }
  return out;
}

}  // namespace sflex
