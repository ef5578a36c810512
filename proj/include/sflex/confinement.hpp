#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "sflex/model.hpp"
#include "sflex/sampling.hpp"

namespace sflex {

// Tube |phi_k| <= R = rho sigma_N sqrt(N), k = 1..N.
struct TubeSpec {
  double rho = 0.0;
  double radius = 0.0;     // R, height units
  double grad_cut = 0.0;   // G, height units
  double block_length = 0.0;  // D = (R / (eps sigma_N))^{2/3}, in steps
  int mesh = 4;            // continuous mode: grid points per sd of one gradient change
  std::optional<int> max_step;  // discrete mode: |Delta phi| <= max_step
};

// grad_cut_sd scales the gradient cutoff in units of eps sigma_N sqrt(D).
TubeSpec make_tube(const ModelParams& params, const Potential& pot, double rho,
                   double grad_cut_sd = 8.0, int mesh = 4,
                   std::optional<int> max_step = std::nullopt);

// Kernel on (h, g) = (phi_k, grad phi_k): g' = g + Delta, h' = h + g', weight
// exp(-eps Phi(Delta / eps)); states outside the tube are dropped. Heights and
// gradients share one lattice of spacing `step`.
class TransferOperator {
 public:
  HeightMode mode = HeightMode::continuous;
  double step = 1.0;
  int height_half = 0;  // |h| <= height_half * step
  int grad_half = 0;    // |g| <= grad_half * step
  int tap_half = 0;     // Delta = k * step, |k| <= tap_half
  std::vector<double> taps;  // unnormalized weights (times step in continuous mode)
  double single_step_norm = 0.0;  // sum of taps
  unsigned workers = 1;

  std::size_t height_count() const { return 2 * static_cast<std::size_t>(height_half) + 1; }
  std::size_t grad_count() const { return 2 * static_cast<std::size_t>(grad_half) + 1; }
  std::size_t states() const { return height_count() * grad_count(); }
  std::size_t index(int h, int g) const {
    return static_cast<std::size_t>(h + height_half) * grad_count() +
           static_cast<std::size_t>(g + grad_half);
  }

  // One forward step of a mass vector (no normalization).
  Eigen::VectorXd apply(const Eigen::VectorXd& psi) const;

  // States in the communicating class of (0, 0).
  std::size_t retained_states() const;
};

TransferOperator build_transfer(const ModelParams& params, const Potential& pot,
                                const TubeSpec& tube, std::size_t state_cap = 4'000'000,
                                unsigned workers = 1);

struct EigenResult {
  double lambda_max = 0.0;
  int iterations = 0;
};

// Power iteration to relative change < tol in the eigenvalue.
EigenResult dominant_eigenvalue(const TransferOperator& op,
                                std::optional<Eigen::VectorXd> start = std::nullopt,
                                double tol = 1e-10, int max_iter = 200000);

struct FreeEnergy {
  double value = 0.0;  // F = -(1/eps) log(lambda_max / single-step normalizer)
  double lambda_max = 0.0;
  std::size_t states = 0;
  int iterations = 0;
};

FreeEnergy free_energy(const TransferOperator& op, const ModelParams& params,
                       std::optional<Eigen::VectorXd> start = std::nullopt);

// Unnormalized restricted partition sum over N steps from (phi_0, phi_1) = (0, xi_left):
// phi_2..phi_N must stay in the tube, the last step to phi_{N+1} is free.
double path_sum(const TransferOperator& op, const ModelParams& params, double xi_left = 0.0);

// path_sum over the unconstrained total, i.e. the tube probability.
double path_probability(const TransferOperator& op, const ModelParams& params, double xi_left = 0.0);

struct SurvivalEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t survivors = 0;
  std::size_t samples = 0;
  bool underflow = false;
};

SurvivalEstimate mc_survival(const ModelParams& params, const IncrementDistribution& dist,
                             const TubeSpec& tube, const ChainSettings& settings);

struct PowerFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of log F against log rho.
PowerFit exponent_fit(const std::vector<double>& rhos, const std::vector<double>& fs);

}  // namespace sflex
