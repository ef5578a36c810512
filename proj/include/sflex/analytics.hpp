#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "sflex/error.hpp"
#include "sflex/model.hpp"

namespace sflex {

// Interior times 0 < t_1 < ... < t_k < 1.
class GridTimes {
 public:
  GridTimes() = default;
  explicit GridTimes(std::vector<double> times);

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }

 private:
  std::vector<double> times_;
};

struct ConditionedSpec {
  double a = 0.0;  // limit of X_N / (sigma sqrt N)
  double b = 0.0;  // limit of Y_N / (sigma sqrt N)
};

// Typical size of an increment: (eps kappa)^{-1/alpha}, or the tabulated half-width.
double natural_scale(const Potential& pot, double epsilon);

// Moments of the tilted step law with weight exp(-eps Phi(x) + tilt x).
struct StepMoments {
  double log_norm;
  double mean;
  double variance;
};

StepMoments tilted_step_moments(const Potential& pot, double epsilon, HeightMode mode, double tilt,
                                std::optional<double> truncation = std::nullopt);

// Variance of the increment law with weight exp(-eps Phi(x)). Continuous
// mode integrates over the real line (or the tabulated support); discrete
// mode sums over eps^{-1} Z, optionally cut at |x| <= truncation.
double sigma2_increment(const Potential& pot, const ModelParams& params,
                        std::optional<double> truncation = std::nullopt);

struct XYMoments {
  double var_x;
  double cov_xy;
  double var_y;
};

XYMoments xy_moments(int m, int n_sites, double sigma2);

// Covariance of (X_N, Y_N).
Eigen::Matrix2d z_covariance(int n_sites, double sigma2);

template <typename Scalar>
Scalar f_entry(Scalar t) {
  return t * t / Scalar(2);
}

// g(s,t) = s^2 (3t - s) / 6 for s <= t, symmetric otherwise.
template <typename Scalar>
Scalar g_entry(Scalar s, Scalar t) {
  if (s > t) std::swap(s, t);
  return s * s * (Scalar(3) * t - s) / Scalar(6);
}

// Q^k over (w_1, J(t_1), ..., J(t_k), J(1)); (k+2) x (k+2).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> q_matrix(const std::vector<Scalar>& interior) {
  std::vector<Scalar> t(interior);
  t.push_back(Scalar(1));
  const auto dim = static_cast<Eigen::Index>(t.size() + 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> q(dim, dim);
  q(0, 0) = Scalar(1);
  for (Eigen::Index l = 1; l < dim; ++l) {
    q(0, l) = q(l, 0) = f_entry(t[l - 1]);
    for (Eigen::Index m = l; m < dim; ++m) q(l, m) = q(m, l) = g_entry(t[l - 1], t[m - 1]);
  }
  return q;
}

inline Eigen::MatrixXd q_matrix(const GridTimes& times) { return q_matrix<double>(times.times()); }

template <typename Scalar>
Scalar theta_mean(Scalar t, Scalar a, Scalar b) {
  return t * t * (t - Scalar(1)) * a + t * t * (Scalar(3) - Scalar(2) * t) * b;
}

inline double theta_mean(double t, const ConditionedSpec& spec) {
  require(t >= 0 && t <= 1, ErrorKind::invalid_input, "t must lie in [0,1]");
  return theta_mean<double>(t, spec.a, spec.b);
}

template <typename Scalar>
Scalar theta_cov(Scalar s, Scalar t) {
  if (s > t) std::swap(s, t);
  const Scalar one(1);
  return s * s * (one - t) * (one - t) * (Scalar(2) * t * (one - s) + t - s) / Scalar(6);
}

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Law of (theta(t_1), ..., theta(t_k)) via the Schur complement of Q^k over
// the (w_1, J(1)) block.
ConditionalGaussian conditional_gaussian(const GridTimes& times, const ConditionedSpec& spec);

// Closed-form density of the right-end boundary event in the Gaussian model, a = 0.
double exact_boundary_density(int n_sites, double kappa, double c, double xi_left, double xi_right);

// Smallest eigenvalue >= -1e-10 * largest.
bool is_psd(const Eigen::MatrixXd& m);

}  // namespace sflex
