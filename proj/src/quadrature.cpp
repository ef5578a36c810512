#include "sflex/quadrature.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <vector>

#include "sflex/error.hpp"

namespace sflex {

const GaussLegendre<double>& gauss_legendre_64() {
  static const GaussLegendre<double> rule(64);
  return rule;
}

const GaussLegendre<double>& gauss_legendre(int n) {
  require(n >= 1, ErrorKind::invalid_input, "Gauss-Legendre rule needs at least one node");
  static std::mutex mutex;
  static std::map<int, GaussLegendre<double>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, GaussLegendre<double>(n)).first;
  return it->second;
}

double integrate_composite(const std::function<double(double)>& f, double a, double b, int panels,
                           int nodes) {
  require(panels >= 1, ErrorKind::invalid_input, "need at least one panel");
  const auto& rule = gauss_legendre(nodes);
  const double h = (b - a) / panels;
  CompensatedSum sum;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    sum += rule.integrate(f, lo, lo + h);
  }
  return sum.value();
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, double abs_tol) {
  int panels = 4;
  double prev = integrate_composite(f, a, b, panels);
  for (int round = 0; round < 16; ++round) {
    panels *= 2;
    const double cur = integrate_composite(f, a, b, panels);
    if (std::abs(cur - prev) <= std::max(rel_tol * std::abs(cur), abs_tol)) return cur;
    prev = cur;
  }
  throw Error(ErrorKind::convergence_failure, "adaptive quadrature did not converge");
}

namespace {

// Expands [lo, hi] outward from the bulk until log_w has dropped by `drop`
// at both ends, or clips to finite bounds.
std::pair<double, double> locate_mass(const std::function<double(double)>& log_w, double lo,
                                      double hi, double scale) {
  constexpr double drop = 60.0;
  constexpr int probes = 4001;
  double half = scale;
  for (int round = 0; round < 80; ++round) {
    const double a = std::max(lo, -half), b = std::min(hi, half);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < probes; ++i) best = std::max(best, log_w(a + (b - a) * i / (probes - 1)));
    require(std::isfinite(best), ErrorKind::degenerate_distribution,
            "weight vanishes on the probed region");
    const bool left_ok = a > -half || log_w(a) < best - drop;
    const bool right_ok = b < half || log_w(b) < best - drop;
    if (left_ok && right_ok) {
      // Tighten to where the weight is non-negligible, keeping a margin.
      double first = a, last = b;
      const double step = (b - a) / (probes - 1);
      for (int i = 0; i < probes; ++i) {
        if (log_w(a + step * i) >= best - drop) {
          first = a + step * std::max(0, i - 1);
          break;
        }
      }
      for (int i = probes - 1; i >= 0; --i) {
        if (log_w(a + step * i) >= best - drop) {
          last = a + step * std::min(probes - 1, i + 1);
          break;
        }
      }
      return {first, last};
    }
    half *= 2;
    require(half < 1e300, ErrorKind::divergence, "weight does not decay: normalizer diverges");
  }
  throw Error(ErrorKind::divergence, "weight does not decay: normalizer diverges");
}

}  // namespace

LogWeightMoments log_weight_moments(const std::function<double(double)>& log_w, double lo,
                                    double hi, double scale) {
  require(lo < hi, ErrorKind::invalid_input, "empty integration range");
  require(scale > 0, ErrorKind::invalid_input, "scale must be positive");
  const auto [a, b] = locate_mass(log_w, lo, hi, scale);

  // Reference log level so the exponentials stay in range. The peak location doubles as the centring point for the moments.
  double ref = -std::numeric_limits<double>::infinity();
  double center = 0.5 * (a + b);
  for (int i = 0; i <= 2000; ++i) {
    const double x = a + (b - a) * i / 2000.0;
    const double v = log_w(x);
    if (v > ref) {
      ref = v;
      center = x;
    }
  }

  auto moments = [&](int panels) {
    const auto& rule = gauss_legendre(16);
    const double h = (b - a) / panels;
    CompensatedSum m0, m1, m2;
    for (int p = 0; p < panels; ++p) {
      const double mid = a + (p + 0.5) * h;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        const double x = mid + 0.5 * h * rule.nodes[i];
        const double w = 0.5 * h * rule.weights[i] * std::exp(log_w(x) - ref);
        const double dx = x - center;
        m0 += w;
        m1 += w * dx;
        m2 += w * dx * dx;
      }
    }
    return Eigen::Vector3d(m0.value(), m1.value(), m2.value());
  };

  int panels = 64;
  Eigen::Vector3d prev = moments(panels);
  for (int round = 0; round < 12; ++round) {
    panels *= 2;
    const Eigen::Vector3d cur = moments(panels);
    const double scale0 = std::abs(cur[0]);
    const double spread = b - a;
    const bool ok = std::abs(cur[0] - prev[0]) <= 1e-14 * scale0 &&
                    std::abs(cur[1] - prev[1]) <= 1e-13 * scale0 * spread &&
                    std::abs(cur[2] - prev[2]) <= 1e-13 * std::abs(cur[2]) + 1e-300;
    prev = cur;
    if (ok) break;
  }
  require(prev[0] > 0, ErrorKind::degenerate_distribution, "vanishing normalizer");
  const double shift = prev[1] / prev[0];
  const double var = std::max(0.0, prev[2] / prev[0] - shift * shift);
  return {std::log(prev[0]) + ref, center + shift, var};
}

}  // namespace sflex
