#include "sflex/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sflex/quadrature.hpp"

namespace sflex {

void ChainSettings::validate() const {
  require(n_samples >= 1, ErrorKind::invalid_input, "n_samples must be positive");
  require(sweeps >= 1, ErrorKind::invalid_input, "sweeps must be positive");
  require(thin >= 1, ErrorKind::invalid_input, "thin must be positive");
  require(chains >= 1, ErrorKind::invalid_input, "chains must be positive");
  require(workers >= 1, ErrorKind::invalid_input, "workers must be positive");
}

bool IncrementDistribution::admissible(double eta) const {
  if (exact_normal_) return true;
  if (std::abs(eta) > truncation_ * (1 + 1e-12)) return false;
  return pot_.defined_at(eta);
}

double IncrementDistribution::sample(Rng& rng) const {
  if (exact_normal_) {
    std::normal_distribution<double> normal(0.0, std::sqrt(sigma2_));
    return normal(rng);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = static_cast<std::size_t>(
      std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(probs_.size()) - 1));
  if (mode_ == HeightMode::discrete) return support_[idx];
  // Continuous table: uniform within the selected cell.
  return support_[idx] + unif(rng) * (support_[idx + 1] - support_[idx]);
}

double default_truncation(const Potential& pot, const ModelParams& params) {
  if (const auto s = pot.support()) return std::max(std::abs(s->first), std::abs(s->second));
  const double eps = params.epsilon();
  const auto full = tilted_step_moments(pot, eps, HeightMode::continuous, 0.0);
  double m = 8 * std::sqrt(full.variance);
  for (int round = 0; round < 30; ++round) {
    const auto inner = tilted_step_moments(pot, eps, HeightMode::continuous, 0.0, m);
    const double tail = -std::expm1(inner.log_norm - full.log_norm);
    if (tail < 1e-10) return m;
    m *= 2;
  }
  throw Error(ErrorKind::divergence, "could not bound the tail mass of the increment law");
}

IncrementDistribution build_increment_dist(const Potential& pot, const ModelParams& params,
                                           std::optional<double> truncation) {
  IncrementDistribution dist(pot);
  dist.epsilon_ = params.epsilon();
  dist.mode_ = params.height_mode();
  const double eps = params.epsilon();

  if (!params.discrete() && pot.is_gaussian() && !truncation) {
    dist.exact_normal_ = true;
    dist.truncation_ = std::numeric_limits<double>::infinity();
    dist.sigma2_ = 1.0 / (eps * pot.kappa());
    return dist;
  }

  const double m = truncation ? *truncation : default_truncation(pot, params);
  require(m > 0, ErrorKind::invalid_input, "truncation must be positive");
  dist.truncation_ = m;
  double lo = -m, hi = m;
  if (const auto s = pot.support()) {
    lo = std::max(lo, s->first);
    hi = std::min(hi, s->second);
  }

  std::vector<double> weights;
  double ref = -std::numeric_limits<double>::infinity();
  if (params.discrete()) {
    const auto kmax = static_cast<long>(std::floor(std::min(-lo, hi) * eps * (1 + 1e-12)));
    for (long k = -kmax; k <= kmax; ++k) dist.support_.push_back(static_cast<double>(k) / eps);
    for (double x : dist.support_) ref = std::max(ref, -eps * pot(x));
    for (double x : dist.support_) weights.push_back(std::exp(-eps * pot(x) - ref));
  } else {
    constexpr int cells = 1 << 14;
    const auto& rule = gauss_legendre(4);
    for (int i = 0; i <= cells; ++i) dist.support_.push_back(lo + (hi - lo) * i / cells);
    for (int i = 0; i <= cells; ++i) ref = std::max(ref, -eps * pot(dist.support_[i]));
    for (int i = 0; i < cells; ++i) {
      weights.push_back(rule.integrate([&](double x) { return std::exp(-eps * pot(x) - ref); },
                                       dist.support_[i], dist.support_[i + 1]));
    }
  }

  CompensatedSum total;
  for (double w : weights) total += w;
  require(total.value() > 0 && std::isfinite(total.value()), ErrorKind::degenerate_distribution,
          "increment law has vanishing normalizer");
  dist.probs_.reserve(weights.size());
  CompensatedSum running;
  for (double w : weights) {
    dist.probs_.push_back(w / total.value());
    running += w / total.value();
    dist.cdf_.push_back(running.value());
  }
  dist.cdf_.back() = 1.0;

  if (params.discrete()) {
    CompensatedSum m1, m2;
    for (std::size_t i = 0; i < dist.probs_.size(); ++i) {
      m1 += dist.probs_[i] * dist.support_[i];
      m2 += dist.probs_[i] * dist.support_[i] * dist.support_[i];
    }
    dist.sigma2_ = m2.value() - m1.value() * m1.value();
  } else {
    dist.sigma2_ = tilted_step_moments(pot, eps, HeightMode::continuous, 0.0, m).variance;
  }
  require(dist.sigma2_ > 0, ErrorKind::degenerate_distribution, "increment law is degenerate");
  return dist;
}

namespace {

// Runs `make_chunk(index, rng)` for every chunk, `workers` chunks at a time,
// handing results to the sink in chunk order.
template <typename MakeChunk>
void stream_chunks(const ChainSettings& settings, const SampleSink& sink, MakeChunk&& make_chunk) {
  settings.validate();
  const std::size_t n_chunks = (settings.n_samples + kSampleChunk - 1) / kSampleChunk;
  const std::size_t wave = std::max<std::size_t>(1, settings.workers);
  for (std::size_t first = 0; first < n_chunks; first += wave) {
    const std::size_t count = std::min(wave, n_chunks - first);
    auto batches = parallel_map<std::vector<PolymerConfig>>(count, settings.workers, [&](std::size_t i) {
      const std::size_t chunk = first + i;
      const std::size_t begin = chunk * kSampleChunk;
      const std::size_t size = std::min(kSampleChunk, settings.n_samples - begin);
      Rng rng = make_rng(settings.seed, chunk);
      std::vector<PolymerConfig> out;
      out.reserve(size);
      for (std::size_t s = 0; s < size; ++s) out.push_back(make_chunk(rng));
      return out;
    });
    for (const auto& b : batches) sink(b);
  }
}

std::vector<PolymerConfig> collect(const std::function<void(const SampleSink&)>& run) {
  std::vector<PolymerConfig> all;
  run([&](std::span<const PolymerConfig> batch) { all.insert(all.end(), batch.begin(), batch.end()); });
  return all;
}

}  // namespace

void stream_free(const ModelParams& params, const IncrementDistribution& dist, double xi1,
                 const ChainSettings& settings, const SampleSink& sink) {
  require(std::abs(dist.epsilon() - params.epsilon()) <= 1e-15 * params.epsilon(),
          ErrorKind::invalid_input, "distribution built for a different eps");
  const int n = params.n_sites();
  stream_chunks(settings, sink, [&](Rng& rng) {
    IncrementPath path{xi1, Eigen::VectorXd(n)};
    for (int j = 0; j < n; ++j) path.etas[j] = dist.sample(rng);
    return from_increments(path, params);
  });
}

std::vector<PolymerConfig> sample_free(const ModelParams& params, const IncrementDistribution& dist,
                                       double xi1, const ChainSettings& settings) {
  return collect([&](const SampleSink& sink) { stream_free(params, dist, xi1, settings, sink); });
}

void stream_gaussian_bridge(const ModelParams& params, const Potential& pot,
                            const BoundaryConditions& bc, const ChainSettings& settings,
                            const SampleSink& sink) {
  require(!params.discrete(), ErrorKind::unsupported,
          "exact bridge sampling needs continuous heights; use the MCMC sampler");
  require(pot.is_gaussian(), ErrorKind::unsupported,
          "exact bridge sampling needs a Gaussian potential; use the MCMC sampler");
  const int n = params.n_sites();
  const double sigma = 1.0 / std::sqrt(params.epsilon() * pot.kappa());
  const WalkTargets target = map_boundary(bc, params);

  // Rows of the constraint map eta -> (X_N, Y_N).
  Eigen::VectorXd weight_y(n);
  for (int j = 1; j <= n; ++j) weight_y[j - 1] = static_cast<double>(n + 1 - j) / (n + 1);
  Eigen::Matrix2d gram = z_covariance(n, 1.0);
  const Eigen::Matrix2d gram_inv = gram.inverse();

  stream_chunks(settings, sink, [&](Rng& rng) {
    std::normal_distribution<double> normal(0.0, sigma);
    IncrementPath path{bc.xi_left, Eigen::VectorXd(n)};
    for (int j = 0; j < n; ++j) path.etas[j] = normal(rng);
    const Eigen::Vector2d miss(target.x_target - path.etas.sum(),
                               target.y_target - path.etas.dot(weight_y));
    const Eigen::Vector2d coef = gram_inv * miss;
    path.etas.array() += coef[0] + coef[1] * weight_y.array();
    PolymerConfig phi = from_increments(path, params);
    // Pin the two right-end heights exactly; the projection leaves only rounding here.
    phi.heights[n + 1] = bc.endpoint;
    phi.heights[n] = bc.endpoint + bc.xi_right;
    return phi;
  });
}

std::vector<PolymerConfig> sample_gaussian_bridge(const ModelParams& params, const Potential& pot,
                                                  const BoundaryConditions& bc,
                                                  const ChainSettings& settings) {
  return collect(
      [&](const SampleSink& sink) { stream_gaussian_bridge(params, pot, bc, settings, sink); });
}

SampleMoments estimate_moments(const Eigen::MatrixXd& rows, int blocks) {
  const Eigen::Index n = rows.rows(), k = rows.cols();
  require(n >= 2, ErrorKind::too_few_samples, "need at least two samples");
  SampleMoments out;
  out.count = static_cast<std::size_t>(n);

  auto moments = [&](Eigen::Index skip_begin, Eigen::Index skip_end) {
    const Eigen::Index m = n - (skip_end - skip_begin);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i)
      if (i < skip_begin || i >= skip_end) mean += rows.row(i).transpose();
    mean /= static_cast<double>(m);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i >= skip_begin && i < skip_end) continue;
      const Eigen::VectorXd d = rows.row(i).transpose() - mean;
      cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(m - 1);
    return std::make_pair(mean, cov);
  };

  std::tie(out.mean, out.covariance) = moments(0, 0);

  const Eigen::Index b = std::min<Eigen::Index>(std::max(2, blocks), n / 2 >= 2 ? n / 2 : 2);
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd cov_acc = Eigen::MatrixXd::Zero(k, k);
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::Index lo = i * n / b, hi = (i + 1) * n / b;
    auto [m, c] = moments(lo, hi);
    means.push_back(m);
    covs.push_back(c);
    mean_acc += m;
    cov_acc += c;
  }
  mean_acc /= static_cast<double>(b);
  cov_acc /= static_cast<double>(b);
  Eigen::VectorXd mean_var = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd cov_var = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < b; ++i) {
    mean_var += (means[i] - mean_acc).array().square().matrix();
    cov_var += (covs[i] - cov_acc).array().square().matrix();
  }
  const double factor = static_cast<double>(b - 1) / static_cast<double>(b);
  out.mean_se = (factor * mean_var).array().sqrt();
  out.covariance_se = (factor * cov_var).array().sqrt();
  return out;
}

ThetaAccumulator::ThetaAccumulator(const ModelParams& params, GridTimes times, double sigma)
    : params_(params), times_(std::move(times)), sigma_(sigma) {
  require(sigma > 0, ErrorKind::invalid_input, "sigma must be positive");
}

void ThetaAccumulator::add(const PolymerConfig& phi) {
  const int n = params_.n_sites();
  require(phi.size() == n + 2, ErrorKind::invalid_input, "configuration length must be N+2");
  const double y_scale = 1.0 / ((n + 1) * params_.epsilon());
  const double theta_scale = 1.0 / (sigma_ * std::sqrt(static_cast<double>(n)));
  auto y = [&](Eigen::Index m) { return (phi[m + 1] - (m + 1) * phi[1]) * y_scale; };
  Eigen::VectorXd v(static_cast<Eigen::Index>(times_.size()));
  for (std::size_t i = 0; i < times_.size(); ++i) {
    const double pos = times_.times()[i] * n;
    const auto m = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), n - 1);
    const double w = pos - static_cast<double>(m);
    v[static_cast<Eigen::Index>(i)] = ((1 - w) * y(m) + w * y(m + 1)) * theta_scale;
  }
  values_.push_back(std::move(v));
}

SampleMoments ThetaAccumulator::result(int blocks) const {
  const auto n = static_cast<Eigen::Index>(values_.size());
  require(n >= 2, ErrorKind::too_few_samples, "need at least two samples");
  Eigen::MatrixXd rows(n, static_cast<Eigen::Index>(times_.size()));
  for (Eigen::Index i = 0; i < n; ++i) rows.row(i) = values_[i].transpose();
  return estimate_moments(rows, blocks);
}

SampleMoments estimate_theta_stats(std::span<const PolymerConfig> samples,
                                   const ModelParams& params, const GridTimes& times, double sigma) {
  ThetaAccumulator acc(params, times, sigma);
  acc.add(samples);
  return acc.result();
}

}  // namespace sflex
