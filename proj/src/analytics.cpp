#include "sflex/analytics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sflex/quadrature.hpp"

namespace sflex {

GridTimes::GridTimes(std::vector<double> times) : times_(std::move(times)) {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    require(times_[i] > 0 && times_[i] < 1, ErrorKind::invalid_input, "grid times must lie in (0,1)");
    if (i > 0)
      require(times_[i] > times_[i - 1], ErrorKind::invalid_input,
              "grid times must be strictly increasing");
  }
}

double natural_scale(const Potential& pot, double epsilon) {
  if (const auto s = pot.support()) return std::max(std::abs(s->first), std::abs(s->second));
  const auto& fam = pot.family();
  if (const auto* p = std::get_if<Potential::PowerLaw>(&fam))
    return std::pow(epsilon * p->kappa, -1.0 / p->alpha);
  return 1.0 / std::sqrt(epsilon * pot.kappa());
}

namespace {

StepMoments discrete_moments(const Potential& pot, double epsilon, double tilt,
                             std::optional<double> truncation) {
  // Support eps^{-1} Z, intersected with [-M, M] and the tabulated range.
  double limit = std::numeric_limits<double>::infinity();
  if (truncation) limit = *truncation;
  if (const auto s = pot.support()) limit = std::min(limit, s->second);
  const double scale = natural_scale(pot, epsilon);

  auto log_w = [&](double x) { return -epsilon * pot(x) + tilt * x; };
  // Shift by the largest log-weight near the origin first; refined below.
  double ref = log_w(0.0);
  std::vector<std::pair<double, double>> terms{{0.0, ref}};
  for (int sign : {1, -1}) {
    double prev = ref;
    for (long k = 1;; ++k) {
      const double x = sign * static_cast<double>(k) / epsilon;
      if (std::abs(x) > limit * (1 + 1e-12)) break;
      const double lw = log_w(x);
      terms.emplace_back(x, lw);
      ref = std::max(ref, lw);
      // Past the bulk with log-weight falling steeply: remaining tail < 1e-16.
      if (std::abs(x) > scale && lw < ref - 45.0 && lw < prev) break;
      prev = lw;
      require(k < 100'000'000L, ErrorKind::divergence, "discrete step law does not decay");
    }
  }
  CompensatedSum m0, m1;
  for (const auto& [x, lw] : terms) {
    const double w = std::exp(lw - ref);
    m0 += w;
    m1 += w * x;
  }
  require(m0.value() > 0, ErrorKind::degenerate_distribution, "vanishing normalizer");
  const double mean = m1.value() / m0.value();
  CompensatedSum m2;
  for (const auto& [x, lw] : terms) m2 += std::exp(lw - ref) * (x - mean) * (x - mean);
  return {std::log(m0.value()) + ref, mean, m2.value() / m0.value()};
}

}  // namespace

StepMoments tilted_step_moments(const Potential& pot, double epsilon, HeightMode mode, double tilt,
                                std::optional<double> truncation) {
  require(epsilon > 0, ErrorKind::invalid_input, "eps must be positive");
  if (mode == HeightMode::discrete) return discrete_moments(pot, epsilon, tilt, truncation);

  if (pot.is_gaussian() && !truncation) {
    // exp(-eps kappa x^2/2 + h x): normal with mean h/(eps kappa), variance 1/(eps kappa).
    const double prec = epsilon * pot.kappa();
    const double log_norm = 0.5 * std::log(2 * std::numbers::pi / prec) + tilt * tilt / (2 * prec);
    return {log_norm, tilt / prec, 1.0 / prec};
  }
  double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
  if (const auto s = pot.support()) {
    lo = s->first;
    hi = s->second;
  }
  if (truncation) {
    lo = std::max(lo, -*truncation);
    hi = std::min(hi, *truncation);
  }
  auto log_w = [&](double x) {
    if (x < lo || x > hi) return -std::numeric_limits<double>::infinity();
    return -epsilon * pot(x) + tilt * x;
  };
  const auto m = log_weight_moments(log_w, lo, hi, natural_scale(pot, epsilon));
  return {m.log_norm, m.mean, m.variance};
}

double sigma2_increment(const Potential& pot, const ModelParams& params,
                        std::optional<double> truncation) {
  return tilted_step_moments(pot, params.epsilon(), params.height_mode(), 0.0, truncation).variance;
}

XYMoments xy_moments(int m, int n_sites, double sigma2) {
  require(m >= 1 && m <= n_sites, ErrorKind::invalid_input, "m must lie in 1..N");
  const double md = m, n1 = n_sites + 1.0;
  return {md * sigma2, md * (md + 1) * sigma2 / (2 * n1),
          md * (md + 1) * (2 * md + 1) * sigma2 / (6 * n1 * n1)};
}

Eigen::Matrix2d z_covariance(int n_sites, double sigma2) {
  const XYMoments mo = xy_moments(n_sites, n_sites, sigma2);
  Eigen::Matrix2d c;
  c << mo.var_x, mo.cov_xy, mo.cov_xy, mo.var_y;
  return c;
}

ConditionalGaussian conditional_gaussian(const GridTimes& times, const ConditionedSpec& spec) {
  const Eigen::MatrixXd q = q_matrix(times);
  const Eigen::Index k = static_cast<Eigen::Index>(times.size());
  const Eigen::Index last = k + 1;
  // Conditioning block over (w_1, J(1)), free block over J(t_1..t_k).
  Eigen::Matrix2d cond;
  cond << q(0, 0), q(0, last), q(last, 0), q(last, last);
  Eigen::MatrixXd cross(k, 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    cross(i, 0) = q(i + 1, 0);
    cross(i, 1) = q(i + 1, last);
  }
  const Eigen::FullPivLU<Eigen::Matrix2d> lu(cond);
  require(lu.isInvertible(), ErrorKind::numeric, "singular conditioning block");
  const Eigen::MatrixXd gain = cross * lu.inverse();
  ConditionalGaussian out;
  out.mean = gain * Eigen::Vector2d(spec.a, spec.b);
  out.covariance = q.block(1, 1, k, k) - gain * cross.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

double exact_boundary_density(int n_sites, double kappa, double c, double xi_left, double xi_right) {
  require(n_sites > 1, ErrorKind::invalid_input, "N must exceed 1");
  require(kappa > 0 && c > 0, ErrorKind::invalid_input, "kappa and c must be positive");
  const double n = n_sites;
  const double prefactor = kappa / (2 * std::numbers::pi * n * n) * std::sqrt(12 * (n + 1) / (n - 1));
  const double form = (2 * n + 1) * xi_left * xi_left - 2 * (n + 2) * xi_left * xi_right +
                      (2 * n + 1) * xi_right * xi_right;
  return prefactor * std::exp(-form * n * kappa / (c * (n - 1)));
}

bool is_psd(const Eigen::MatrixXd& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.size() == 0) return true;
  const double largest = std::max(0.0, ev.maxCoeff());
  return ev.minCoeff() >= -1e-10 * std::max(largest, 1e-300);
}

}  // namespace sflex
