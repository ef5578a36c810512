#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sflex/analytics.hpp"
#include "sflex/model.hpp"
#include "sflex/parallel.hpp"

namespace sflex {

struct ChainSettings {
  std::uint64_t seed = 1;
  std::size_t n_samples = 1000;  // exact samplers
  std::size_t sweeps = 1000;     // MCMC sweeps recorded after burn-in, per chain
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::size_t chains = 1;
  unsigned workers = 1;

  void validate() const;
};

// Law of eta: weight exp(-eps Phi(x)), exact normal in the continuous Gaussian
// case, an inverse-CDF table otherwise.
class IncrementDistribution {
 public:
  const Potential& potential() const noexcept { return pot_; }
  double epsilon() const noexcept { return epsilon_; }
  HeightMode mode() const noexcept { return mode_; }
  double truncation() const noexcept { return truncation_; }
  double sigma2() const noexcept { return sigma2_; }
  bool exact_normal() const noexcept { return exact_normal_; }

  // Discrete mode: the lattice points eps^{-1} Z inside [-M, M] and their probabilities.
  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& probabilities() const noexcept { return probs_; }

  // eta admissible under the law (inside the truncation / support).
  bool admissible(double eta) const;

  double sample(Rng& rng) const;

 private:
  friend IncrementDistribution build_increment_dist(const Potential&, const ModelParams&,
                                                    std::optional<double>);
  IncrementDistribution(Potential pot) : pot_(std::move(pot)) {}

  Potential pot_;
  double epsilon_ = 1.0;
  HeightMode mode_ = HeightMode::continuous;
  double truncation_ = 0.0;
  double sigma2_ = 0.0;
  bool exact_normal_ = false;
  std::vector<double> support_;  // discrete values, or continuous cell edges
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

// Default truncation: 8 standard deviations of the continuous law, widened
// until the discarded tail mass is below 1e-10.
double default_truncation(const Potential& pot, const ModelParams& params);

IncrementDistribution build_increment_dist(const Potential& pot, const ModelParams& params,
                                           std::optional<double> truncation = std::nullopt);

// Samples arrive in deterministic order, one chunk at a time.
using SampleSink = std::function<void(std::span<const PolymerConfig>)>;

inline constexpr std::size_t kSampleChunk = 512;

void stream_free(const ModelParams& params, const IncrementDistribution& dist, double xi1,
                 const ChainSettings& settings, const SampleSink& sink);

std::vector<PolymerConfig> sample_free(const ModelParams& params, const IncrementDistribution& dist,
                                       double xi1, const ChainSettings& settings);

// Exact bridge samples in the continuous Gaussian model: unconstrained eta,
// projected onto the two linear constraints fixed by the boundary values.
void stream_gaussian_bridge(const ModelParams& params, const Potential& pot,
                            const BoundaryConditions& bc, const ChainSettings& settings,
                            const SampleSink& sink);

std::vector<PolymerConfig> sample_gaussian_bridge(const ModelParams& params, const Potential& pot,
                                                  const BoundaryConditions& bc,
                                                  const ChainSettings& settings);

// Sample mean and unbiased covariance of the rows, with delete-one-block
// jackknife standard errors over contiguous blocks.
struct SampleMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd covariance_se;
  std::size_t count = 0;
};

SampleMoments estimate_moments(const Eigen::MatrixXd& rows, int blocks = 50);

class ThetaAccumulator {
 public:
  ThetaAccumulator(const ModelParams& params, GridTimes times, double sigma);

  void add(const PolymerConfig& phi);
  void add(std::span<const PolymerConfig> batch) {
    for (const auto& phi : batch) add(phi);
  }
  std::size_t count() const noexcept { return values_.size(); }
  SampleMoments result(int blocks = 50) const;

 private:
  ModelParams params_;
  GridTimes times_;
  double sigma_;
  std::vector<Eigen::VectorXd> values_;
};

// theta_N at the grid times, averaged over the samples.
SampleMoments estimate_theta_stats(std::span<const PolymerConfig> samples,
                                   const ModelParams& params, const GridTimes& times, double sigma);

}  // namespace sflex
