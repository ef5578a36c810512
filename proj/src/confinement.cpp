#include "sflex/confinement.hpp"

#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>
#include <thread>

#include "sflex/analytics.hpp"
#include "sflex/quadrature.hpp"

namespace sflex {

TubeSpec make_tube(const ModelParams& params, const Potential& pot, double rho, double grad_cut_sd,
                   int mesh, std::optional<int> max_step) {
  require(rho > 0, ErrorKind::invalid_input, "rho must be positive");
  require(grad_cut_sd > 0 && mesh >= 1, ErrorKind::invalid_input, "bad gradient cutoff or mesh");
  const double eps = params.epsilon();
  std::optional<double> trunc;
  if (max_step) {
    require(params.discrete(), ErrorKind::invalid_input, "max_step applies to discrete heights");
    require(*max_step >= 0, ErrorKind::invalid_input, "max_step must be non-negative");
    trunc = *max_step / eps;
  }
  const double sigma = std::sqrt(sigma2_increment(pot, params, trunc));
  const double s = eps * sigma;
  TubeSpec t;
  t.rho = rho;
  t.radius = rho * sigma * std::sqrt(static_cast<double>(params.n_sites()));
  if (params.discrete()) t.radius = std::floor(t.radius + 1e-9);
  require(t.radius > 0, ErrorKind::invalid_input, "tube radius rounds to zero");
  t.block_length = std::pow(t.radius / s, 2.0 / 3.0);
  t.grad_cut = grad_cut_sd * s * std::sqrt(std::max(1.0, t.block_length));
  if (params.discrete()) t.grad_cut = std::ceil(t.grad_cut - 1e-9);
  t.mesh = mesh;
  t.max_step = max_step;
  return t;
}

TransferOperator build_transfer(const ModelParams& params, const Potential& pot,
                                const TubeSpec& tube, std::size_t state_cap, unsigned workers) {
  require(tube.radius >= 0 && tube.grad_cut >= 0, ErrorKind::invalid_input,
          "tube radius and gradient cutoff must be non-negative");
  const double eps = params.epsilon();
  TransferOperator op;
  op.mode = params.height_mode();
  op.workers = std::max(1u, workers);
  if (params.discrete()) {
    op.step = 1.0;
    op.tap_half = tube.max_step
                      ? *tube.max_step
                      : static_cast<int>(std::floor(eps * default_truncation(pot, params) + 1e-9));
  } else {
    const double s = eps * std::sqrt(sigma2_increment(pot, params));
    op.step = s / tube.mesh;
    op.tap_half = 8 * tube.mesh;
  }
  op.height_half = static_cast<int>(std::floor(tube.radius / op.step + 1e-9));
  op.grad_half = static_cast<int>(params.discrete() ? std::floor(tube.grad_cut + 1e-9)
                                                    : std::ceil(tube.grad_cut / op.step - 1e-9));
  const double count = (2.0 * op.height_half + 1) * (2.0 * op.grad_half + 1);
  if (count > static_cast<double>(state_cap)) {
    std::ostringstream msg;
    msg << "transfer operator needs " << count << " states, cap is " << state_cap;
    throw Error(ErrorKind::too_large, msg.str());
  }
  op.taps.assign(2 * static_cast<std::size_t>(op.tap_half) + 1, 0.0);
  CompensatedSum z;
  for (int k = -op.tap_half; k <= op.tap_half; ++k) {
    const double eta = k * op.step / eps;
    if (!pot.defined_at(eta)) continue;
    double w = std::exp(-eps * pot(eta));
    if (!params.discrete()) w *= op.step;
    op.taps[static_cast<std::size_t>(k + op.tap_half)] = w;
    z += w;
  }
  op.single_step_norm = z.value();
  require(op.single_step_norm > 0, ErrorKind::degenerate_distribution, "no admissible step");
  return op;
}

Eigen::VectorXd TransferOperator::apply(const Eigen::VectorXd& psi) const {
  require(static_cast<std::size_t>(psi.size()) == states(), ErrorKind::invalid_input,
          "vector size does not match the state count");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(psi.size());
  const int gc = static_cast<int>(grad_count());
  auto rows = [&](int h_lo, int h_hi) {
    for (int hp = h_lo; hp <= h_hi; ++hp) {
      for (int gp = -grad_half; gp <= grad_half; ++gp) {
        const int h = hp - gp;
        if (h < -height_half || h > height_half) continue;
        const double* src = psi.data() + static_cast<std::ptrdiff_t>(h + height_half) * gc;
        // Sum over g = gp - k with |g| <= grad_half.
        const int k_lo = std::max(-tap_half, gp - grad_half);
        const int k_hi = std::min(tap_half, gp + grad_half);
        double acc = 0.0;
        for (int k = k_lo; k <= k_hi; ++k)
          acc += taps[static_cast<std::size_t>(k + tap_half)] * src[gp - k + grad_half];
        out[static_cast<Eigen::Index>(index(hp, gp))] = acc;
      }
    }
  };
  const unsigned w = std::min<unsigned>(workers, static_cast<unsigned>(height_count()));
  if (w <= 1 || states() < 20000) {
    rows(-height_half, height_half);
    return out;
  }
  std::vector<std::thread> pool;
  const int total = static_cast<int>(height_count());
  for (unsigned i = 0; i < w; ++i) {
    const int lo = -height_half + static_cast<int>(i) * total / static_cast<int>(w);
    const int hi = -height_half + static_cast<int>(i + 1) * total / static_cast<int>(w) - 1;
    pool.emplace_back(rows, lo, hi);
  }
  for (auto& t : pool) t.join();
  return out;
}

std::size_t TransferOperator::retained_states() const {
  if (height_half < 0 || grad_half < 0) return 0;
  const std::size_t n = states();
  auto walk = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::deque<std::pair<int, int>> queue{{0, 0}};
    seen[index(0, 0)] = 1;
    while (!queue.empty()) {
      const auto [h, g] = queue.front();
      queue.pop_front();
      for (int k = -tap_half; k <= tap_half; ++k) {
        if (taps[static_cast<std::size_t>(k + tap_half)] <= 0) continue;
        int h2, g2;
        if (forward) {
          g2 = g + k;
          h2 = h + g2;
        } else {
          h2 = h - g;
          g2 = g - k;
        }
        if (std::abs(g2) > grad_half || std::abs(h2) > height_half) continue;
        const std::size_t id = index(h2, g2);
        if (!seen[id]) {
          seen[id] = 1;
          queue.emplace_back(h2, g2);
        }
      }
    }
    return seen;
  };
  const auto fwd = walk(true), bwd = walk(false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += fwd[i] && bwd[i];
  return count;
}

EigenResult dominant_eigenvalue(const TransferOperator& op, std::optional<Eigen::VectorXd> start,
                                double tol, int max_iter) {
  Eigen::VectorXd psi = start ? *start : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.states()));
  require(static_cast<std::size_t>(psi.size()) == op.states(), ErrorKind::invalid_input,
          "start vector has the wrong size");
  require((psi.array() >= 0).all() && psi.sum() > 0, ErrorKind::invalid_input,
          "start vector must be non-negative and non-zero");
  psi /= psi.maxCoeff();
  double lambda = 0.0, prev_change = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd next = op.apply(psi);
    const double mass = next.sum();
    require(mass > 0, ErrorKind::convergence_failure, "power iteration collapsed to zero");
    const double est = mass / psi.sum();
    const double change = std::abs(est - lambda);
    psi = next / next.maxCoeff();
    // Geometric tail of the remaining error from the observed contraction.
    const double ratio = prev_change > 0 ? change / prev_change : 1.0;
    const double remaining = ratio < 1 ? change / (1 - ratio) : change;
    lambda = est;
    prev_change = change;
    if (it > 2 && change <= tol * est && remaining <= tol * est) return {lambda, it};
  }
  std::ostringstream msg;
  msg << "power iteration did not reach " << tol << " in " << max_iter << " iterations";
  throw Error(ErrorKind::convergence_failure, msg.str());
}

FreeEnergy free_energy(const TransferOperator& op, const ModelParams& params,
                       std::optional<Eigen::VectorXd> start) {
  const EigenResult e = dominant_eigenvalue(op, std::move(start));
  FreeEnergy f;
  f.lambda_max = e.lambda_max;
  f.iterations = e.iterations;
  f.states = op.states();
  f.value = -std::log(e.lambda_max / op.single_step_norm) / params.epsilon();
  return f;
}

namespace {

// log of the restricted sum, normalized by the single-step total per step.
double log_path_probability(const TransferOperator& op, const ModelParams& params, double xi_left) {
  const int n = params.n_sites();
  const double pos = xi_left / op.step;
  const int start = static_cast<int>(std::lround(pos));
  require(std::abs(pos - start) < 1e-9, ErrorKind::invalid_input,
          "xi_left must lie on the height lattice");
  require(std::abs(start) <= op.grad_half, ErrorKind::out_of_range,
          "initial gradient exceeds the gradient cutoff");
  if (std::abs(start) > op.height_half) return -std::numeric_limits<double>::infinity();
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.states()));
  psi[static_cast<Eigen::Index>(op.index(start, start))] = 1.0;
  double log_scale = 0.0;
  for (int k = 1; k < n; ++k) {
    psi = op.apply(psi) / op.single_step_norm;
    const double m = psi.sum();
    if (m <= 0) return -std::numeric_limits<double>::infinity();
    psi /= m;
    log_scale += std::log(m);
  }
  // The last step is unconstrained and contributes the full normalizer.
  return log_scale + std::log(psi.sum());
}

}  // namespace

double path_probability(const TransferOperator& op, const ModelParams& params, double xi_left) {
  return std::exp(log_path_probability(op, params, xi_left));
}

double path_sum(const TransferOperator& op, const ModelParams& params, double xi_left) {
  return std::exp(log_path_probability(op, params, xi_left) +
                  params.n_sites() * std::log(op.single_step_norm));
}

SurvivalEstimate mc_survival(const ModelParams& params, const IncrementDistribution& dist,
                             const TubeSpec& tube, const ChainSettings& settings) {
  SurvivalEstimate est;
  const int n = params.n_sites();
  stream_free(params, dist, 0.0, settings, [&](std::span<const PolymerConfig> batch) {
    for (const auto& phi : batch) {
      ++est.samples;
      if (phi.heights.segment(1, n).cwiseAbs().maxCoeff() <= tube.radius) ++est.survivors;
    }
  });
  require(est.samples > 0, ErrorKind::too_few_samples, "no samples drawn");
  const double p = static_cast<double>(est.survivors) / static_cast<double>(est.samples);
  est.estimate = p;
  est.stderr_ = std::sqrt(p * (1 - p) / static_cast<double>(est.samples));
  est.underflow = est.survivors == 0;
  return est;
}

PowerFit exponent_fit(const std::vector<double>& rhos, const std::vector<double>& fs) {
  require(rhos.size() == fs.size(), ErrorKind::invalid_input, "rho and F lengths differ");
  require(rhos.size() >= 5, ErrorKind::insufficient_span, "need at least 5 points");
  const auto [lo, hi] = std::minmax_element(rhos.begin(), rhos.end());
  require(*lo > 0, ErrorKind::invalid_input, "rho must be positive");
  require(*hi >= 10 * *lo * (1 - 1e-12), ErrorKind::insufficient_span,
          "rho values must span at least one decade");
  const std::size_t n = rhos.size();
  Eigen::VectorXd x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(fs[i] > 0, ErrorKind::invalid_input, "F must be positive for a log-log fit");
    x[static_cast<Eigen::Index>(i)] = std::log(rhos[i]);
    y[static_cast<Eigen::Index>(i)] = std::log(fs[i]);
  }
  const double mx = x.mean(), my = y.mean();
  const double sxx = (x.array() - mx).square().sum();
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  const double syy = (y.array() - my).square().sum();
  PowerFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace sflex
