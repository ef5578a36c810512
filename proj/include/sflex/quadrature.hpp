#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>

namespace sflex {

// Gauss-Legendre nodes and weights on [-1, 1].
template <typename Scalar = double>
struct GaussLegendre {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    using std::abs;
    using std::cos;
    const Scalar pi = std::numbers::pi_v<Scalar>;
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
      // Newton on P_n from the Chebyshev-like initial guess.
      Scalar z = cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
      Scalar dp = 0;
      for (int iter = 0; iter < 100; ++iter) {
        Scalar p1 = 1, p2 = 0;
        for (int j = 1; j <= n; ++j) {
          const Scalar p3 = p2;
          p2 = p1;
          p1 = ((Scalar(2 * j - 1)) * z * p2 - Scalar(j - 1) * p3) / Scalar(j);
        }
        dp = Scalar(n) * (z * p1 - p2) / (z * z - Scalar(1));
        const Scalar step = p1 / dp;
        z -= step;
        if (abs(step) <= Scalar(4) * std::numeric_limits<Scalar>::epsilon()) break;
      }
      {
        Scalar p1 = 1, p2 = 0;
        for (int j = 1; j <= n; ++j) {
          const Scalar p3 = p2;
          p2 = p1;
          p1 = ((Scalar(2 * j - 1)) * z * p2 - Scalar(j - 1) * p3) / Scalar(j);
        }
        dp = Scalar(n) * (z * p1 - p2) / (z * z - Scalar(1));
      }
      const Scalar w = Scalar(2) / ((Scalar(1) - z * z) * dp * dp);
      nodes[i] = -z;
      nodes[n - 1 - i] = z;
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
  }

  template <typename F>
  Scalar integrate(F&& f, Scalar a, Scalar b) const {
    const Scalar mid = (a + b) / 2, half = (b - a) / 2;
    Scalar sum = 0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i) sum += weights[i] * f(mid + half * nodes[i]);
    return half * sum;
  }
};

// Shared 64-node rule.
const GaussLegendre<double>& gauss_legendre_64();
const GaussLegendre<double>& gauss_legendre(int n);

// Composite rule: `panels` equal panels, each with a `nodes`-point Gauss-Legendre rule.
double integrate_composite(const std::function<double(double)>& f, double a, double b, int panels,
                           int nodes = 16);

// Panel doubling until successive estimates agree to rel_tol (or abs_tol).
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-13, double abs_tol = 1e-300);

// Moments of the un-normalized density exp(log_w(x)) on a line or interval.
struct LogWeightMoments {
  double log_norm;  // log of the integral of exp(log_w)
  double mean;
  double variance;
};

// Integrates over [lo, hi]; infinite bounds trigger a search for the region
// carrying the mass, starting at `scale` around zero.
LogWeightMoments log_weight_moments(const std::function<double(double)>& log_w, double lo,
                                    double hi, double scale);

// Kahan-Babuska-Neumaier accumulator.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      c_ += (sum_ - t) + v;
    else
      c_ += (v - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  void merge(const CompensatedSum& o) noexcept {
    add(o.sum_);
    add(o.c_);
  }
  double value() const noexcept { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

}  // namespace sflex
