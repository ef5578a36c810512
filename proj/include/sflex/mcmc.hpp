#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "sflex/model.hpp"
#include "sflex/sampling.hpp"

namespace sflex {

// A symmetric proposal that only touches interior heights 2..N-1, so the four
// boundary constraints hold along the whole chain.
struct McmcMove {
  enum class Kind { site, block, mode };
  Kind kind = Kind::site;
  int first = 0;  // site index, or first site of a block
  int last = 0;   // last site of a block (== first for a site move)
  int mode = 0;   // eigenmode index for mode moves
  double amount = 0.0;
};

struct ChainReport {
  std::size_t chain = 0;
  double site_acceptance = 0.0;
  double collective_acceptance = 0.0;
  double site_width = 0.0;
  double mode_width = 0.0;
  std::vector<double> energies;  // at every recorded sample
  double energy_autocorrelation = 0.0;  // integrated time, in recorded samples
};

// Integrated autocorrelation time with a self-consistent window (c = 6).
double integrated_autocorrelation(const std::vector<double>& series);

// Metropolis sampler for the pinned measure with an arbitrary potential.
// Single-site moves are complemented by block shifts (discrete heights) or
// moves along the bending eigenmodes (continuous heights); without the
// collective moves the long-wavelength relaxation time grows like N^4 sweeps.
class BridgeMcmc {
 public:
  BridgeMcmc(const ModelParams& params, const Potential& pot, const BoundaryConditions& bc,
             const IncrementDistribution& dist);

  // Admissible starting point satisfying every constraint.
  PolymerConfig initial_config() const;

  // H(after) - H(before); +infinity when the move leaves the support.
  double delta_energy(const PolymerConfig& phi, const McmcMove& move) const;
  void apply(PolymerConfig& phi, const McmcMove& move) const;
  static McmcMove reverse(McmcMove move) {
    move.amount = -move.amount;
    return move;
  }

  ChainReport run_chain(std::size_t chain_index, const ChainSettings& settings,
                        const std::function<void(const PolymerConfig&)>& observer) const;

  // Runs settings.chains chains (in parallel) and concatenates their samples in chain order.
  std::vector<PolymerConfig> sample(const ChainSettings& settings,
                                    std::vector<ChainReport>* reports = nullptr) const;

  const Eigen::MatrixXd& modes() const noexcept { return modes_; }
  const Eigen::VectorXd& mode_stiffness() const noexcept { return stiffness_; }
  int n_sites() const noexcept { return params_.n_sites(); }

 private:
  double term(double lap) const;  // eps Phi(lap / eps), +inf outside support
  double energy(const PolymerConfig& phi) const;

  ModelParams params_;
  Potential pot_;
  BoundaryConditions bc_;
  IncrementDistribution dist_;
  Eigen::MatrixXd modes_;      // columns: eigenvectors over sites 2..N-1
  Eigen::VectorXd stiffness_;  // matching eigenvalues of B^T B
};

// sample_bridge_mcmc in one call.
std::vector<PolymerConfig> sample_bridge_mcmc(const ModelParams& params, const Potential& pot,
                                              const BoundaryConditions& bc,
                                              const IncrementDistribution& dist,
                                              const ChainSettings& settings);

}  // namespace sflex
