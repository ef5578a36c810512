#include "sflex/ldp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sflex/analytics.hpp"
#include "sflex/quadrature.hpp"

namespace sflex {

double tilt_domain(const Potential& pot, double epsilon, HeightMode mode,
                   std::optional<double> truncation) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Bounded support: every tilt is finite.
  if (pot.support() || truncation) return inf;
  (void)mode;
  if (const auto* p = std::get_if<Potential::PowerLaw>(&pot.family())) {
    if (p->alpha > 1) return inf;
    // exp(-eps kappa |x| + h x) needs |h| < eps kappa; alpha < 1 admits no tilt at all.
    if (p->alpha == 1) return 0.99 * epsilon * p->kappa;
    return 0.0;
  }
  return inf;
}

LogMgf step_log_mgf(const Potential& pot, const ModelParams& params,
                    std::optional<double> truncation) {
  const double eps = params.epsilon();
  const HeightMode mode = params.height_mode();
  LogMgf L;
  L.h_max = tilt_domain(pot, eps, mode, truncation);
  if (pot.is_gaussian() && mode == HeightMode::continuous && !truncation) {
    const double s2 = 1.0 / (eps * pot.kappa());
    L.value = [s2](double h) { return 0.5 * s2 * h * h; };
    L.first = [s2](double h) { return s2 * h; };
    L.second = [s2](double) { return s2; };
    return L;
  }
  const double base = tilted_step_moments(pot, eps, mode, 0.0, truncation).log_norm;
  const double h_max = L.h_max;
  auto check = [h_max](double h) {
    require(std::abs(h) < h_max, ErrorKind::out_of_domain, "tilt outside the finite region of the MGF");
  };
  L.value = [=](double h) {
    check(h);
    return tilted_step_moments(pot, eps, mode, h, truncation).log_norm - base;
  };
  L.first = [=](double h) {
    check(h);
    return tilted_step_moments(pot, eps, mode, h, truncation).mean;
  };
  L.second = [=](double h) {
    check(h);
    return tilted_step_moments(pot, eps, mode, h, truncation).variance;
  };
  return L;
}

double log_mgf(const Potential& pot, const ModelParams& params, double h) {
  return step_log_mgf(pot, params)(h);
}

namespace {

constexpr int kLimitSizes[3] = {1000, 10000, 100000};

struct Rescaled {
  LogMgf L;
  double sigma;
};

Rescaled rescaled_at(const Potential& pot, HeightMode mode, double c, int n) {
  const ModelParams params(n, c / n, c, mode);
  Rescaled r{step_log_mgf(pot, params), 0.0};
  r.sigma = std::sqrt(r.L.second(0.0));
  return r;
}

}  // namespace

LimitProbe probe_limit(const Potential& pot, HeightMode mode, double macro_length, double h) {
  LimitProbe p{h, {0, 0, 0}};
  for (int i = 0; i < 3; ++i) {
    const Rescaled r = rescaled_at(pot, mode, macro_length, kLimitSizes[i]);
    p.values[i] = r.L(h / r.sigma);
  }
  return p;
}

LogMgf limit_log_mgf(const Potential& pot, HeightMode mode, double macro_length) {
  LogMgf L;
  if (pot.is_gaussian() && mode == HeightMode::continuous) {
    L.value = [](double h) { return 0.5 * h * h; };
    L.first = [](double h) { return h; };
    L.second = [](double) { return 1.0; };
    return L;
  }
  const Rescaled fine = rescaled_at(pot, mode, macro_length, kLimitSizes[2]);
  L.h_max = fine.L.h_max * fine.sigma;
  L.value = [=](double h) {
    const LimitProbe p = probe_limit(pot, mode, macro_length, h);
    if (std::abs(p.values[2] - p.values[1]) >= 1e-6) {
      std::ostringstream msg;
      msg << "rescaled log-MGF does not settle at h=" << h << ": " << p.values[0] << ", "
          << p.values[1] << ", " << p.values[2];
      throw Error(ErrorKind::no_limit, msg.str());
    }
    return p.values[2];
  };
  const double s = fine.sigma;
  L.first = [=](double h) { return fine.L.first(h / s) / s; };
  L.second = [=](double h) { return fine.L.second(h / s) / (s * s); };
  return L;
}

namespace {

template <typename F>
double integrate_unit(F&& f, int nodes) {
  return gauss_legendre(nodes).integrate(std::forward<F>(f), 0.0, 1.0);
}

void check_domain(double u, double v, const LogMgf& L) {
  require(L.in_domain(u) && L.in_domain(u + v), ErrorKind::out_of_domain,
          "u + y v leaves the domain of L for some y in [0,1]");
}

}  // namespace

double l_infinity(double u, double v, const LogMgf& L, int nodes) {
  check_domain(u, v, L);
  return integrate_unit([&](double x) { return L.value(u + (1 - x) * v); }, nodes);
}

Eigen::Vector2d l_infinity_gradient(double u, double v, const LogMgf& L, int nodes) {
  check_domain(u, v, L);
  const auto& rule = gauss_legendre(nodes);
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const double y = 0.5 * (1 + rule.nodes[i]);
    const double w = 0.5 * rule.weights[i] * L.first(u + y * v);
    g[0] += w;
    g[1] += w * y;
  }
  return g;
}

Eigen::Matrix2d l_infinity_hessian(double u, double v, const LogMgf& L, int nodes) {
  check_domain(u, v, L);
  const auto& rule = gauss_legendre(nodes);
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const double y = 0.5 * (1 + rule.nodes[i]);
    const double w = 0.5 * rule.weights[i] * L.second(u + y * v);
    h(0, 0) += w;
    h(0, 1) += w * y;
    h(1, 1) += w * y * y;
  }
  h(1, 0) = h(0, 1);
  return h;
}

Eigen::Vector2d tilt_targets(const LdBoundary& bc, double c) {
  require(c > 0, ErrorKind::invalid_input, "c must be positive");
  return {-(bc.xi_right + bc.xi_left) / c, -(bc.xi_left - bc.a) / c};
}

TiltSolution solve_tilts(const LdBoundary& bc, double c, const LogMgf& L, int nodes) {
  const Eigen::Vector2d target = tilt_targets(bc, c);
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  auto residual = [&](const Eigen::Vector2d& p) {
    return Eigen::Vector2d(l_infinity_gradient(p[0], p[1], L, nodes) - target);
  };
  auto admissible = [&](const Eigen::Vector2d& p) {
    return L.in_domain(p[0]) && L.in_domain(p[0] + p[1]);
  };
  Eigen::Vector2d r = residual(z);
  TiltSolution sol;
  for (int it = 0; it <= 100; ++it) {
    sol.iterations = it;
    if (r.lpNorm<Eigen::Infinity>() < 1e-10) break;
    if (it == 100) {
      std::ostringstream msg;
      msg << "Newton did not converge; last iterate (" << z[0] << ", " << z[1] << "), residual "
          << r.norm();
      throw Error(ErrorKind::no_solution, msg.str());
    }
    const Eigen::Matrix2d hess = l_infinity_hessian(z[0], z[1], L, nodes);
    const Eigen::Vector2d step = hess.ldlt().solve(r);
    double lambda = 1.0;
    Eigen::Vector2d next = z - step;
    Eigen::Vector2d rn;
    for (int halving = 0;; ++halving) {
      if (admissible(next)) {
        rn = residual(next);
        if (rn.norm() < r.norm()) break;
      }
      if (halving == 60) {
        std::ostringstream msg;
        msg << "damped Newton stalled at (" << z[0] << ", " << z[1] << "), residual " << r.norm();
        throw Error(ErrorKind::no_solution, msg.str());
      }
      lambda *= 0.5;
      next = z - lambda * step;
    }
    z = next;
    r = rn;
  }
  sol.u_star = z[0];
  sol.v_star = z[1];
  sol.residual = r;
  sol.hessian = l_infinity_hessian(z[0], z[1], L, nodes);
  sol.rate = target.dot(z) - l_infinity(z[0], z[1], L, nodes);
  return sol;
}

double sharp_ld_probability(int n_sites, const TiltSolution& sol) {
  require(n_sites >= 1, ErrorKind::invalid_input, "N must be positive");
  const double n = n_sites;
  const double det = sol.hessian.determinant();
  require(det > 0, ErrorKind::numeric, "tilt Hessian is not positive definite");
  return std::exp(-n * sol.rate) / (2 * std::numbers::pi * n * n * std::sqrt(det));
}

double sharp_ld_probability(int n_sites, const LdBoundary& bc, double c, const LogMgf& L) {
  return sharp_ld_probability(n_sites, solve_tilts(bc, c, L));
}

double mean_profile(double t, const LdBoundary& bc, double c, const LogMgf& L,
                    const TiltSolution& sol, int nodes) {
  require(t >= 0 && t <= 1, ErrorKind::invalid_input, "t must lie in [0,1]");
  if (t == 0) return 0.0;
  const double integral = gauss_legendre(nodes).integrate(
      [&](double x) { return (t - x) * L.first(sol.u_star + (1 - x) * sol.v_star); }, 0.0, t);
  return t * bc.xi_left + c * integral;
}

double mean_profile(double t, const LdBoundary& bc, double c, const LogMgf& L) {
  return mean_profile(t, bc, c, L, solve_tilts(bc, c, L));
}

}  // namespace sflex
