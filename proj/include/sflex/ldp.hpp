#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>

#include "sflex/model.hpp"

namespace sflex {

// A log-MGF h -> L(h) with its first two derivatives, finite on |h| < h_max.
struct LogMgf {
  std::function<double(double)> value;
  std::function<double(double)> first;
  std::function<double(double)> second;
  double h_max = std::numeric_limits<double>::infinity();

  double operator()(double h) const { return value(h); }
  bool in_domain(double h) const { return std::abs(h) < h_max; }
};

// Largest |h| with finite tilted normalizer, less a 1% margin.
double tilt_domain(const Potential& pot, double epsilon, HeightMode mode,
                   std::optional<double> truncation = std::nullopt);

// L_N(h) = log E exp(h eta) for the single-step law.
LogMgf step_log_mgf(const Potential& pot, const ModelParams& params,
                    std::optional<double> truncation = std::nullopt);
double log_mgf(const Potential& pot, const ModelParams& params, double h);

// L(h) = lim L_N(h / sigma_N). Closed form h^2/2 for the Gaussian; otherwise
// evaluated at N = 1e3, 1e4, 1e5 and required to settle to 1e-6.
LogMgf limit_log_mgf(const Potential& pot, HeightMode mode = HeightMode::continuous,
                     double macro_length = 1.0);

struct LimitProbe {
  double h;
  double values[3];  // at N = 1e3, 1e4, 1e5
};
LimitProbe probe_limit(const Potential& pot, HeightMode mode, double macro_length, double h);

// L_inf(u, v) = int_0^1 L(u + (1 - x) v) dx and its derivatives.
double l_infinity(double u, double v, const LogMgf& L, int nodes = 64);
Eigen::Vector2d l_infinity_gradient(double u, double v, const LogMgf& L, int nodes = 64);
Eigen::Matrix2d l_infinity_hessian(double u, double v, const LogMgf& L, int nodes = 64);

struct LdBoundary {
  double xi_left = 0.0;
  double xi_right = 0.0;
  double a = 0.0;  // macroscopic endpoint slope
};

struct TiltSolution {
  double u_star = 0.0;
  double v_star = 0.0;
  Eigen::Vector2d residual = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Identity();
  double rate = 0.0;  // convex dual at the constraint point
  int iterations = 0;
};

// Right-hand side of the tilt equations.
Eigen::Vector2d tilt_targets(const LdBoundary& bc, double c);

TiltSolution solve_tilts(const LdBoundary& bc, double c, const LogMgf& L, int nodes = 64);

double sharp_ld_probability(int n_sites, const LdBoundary& bc, double c, const LogMgf& L);
double sharp_ld_probability(int n_sites, const TiltSolution& sol);

double mean_profile(double t, const LdBoundary& bc, double c, const LogMgf& L);
double mean_profile(double t, const LdBoundary& bc, double c, const LogMgf& L,
                    const TiltSolution& sol, int nodes = 64);

}  // namespace sflex
