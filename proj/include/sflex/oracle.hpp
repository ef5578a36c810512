#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sflex/model.hpp"

namespace sflex {

// Every (Delta phi_1 .. Delta phi_N) in support^N, with phi_0 = 0, phi_1 = xi_left.
struct EnumerationSpec {
  ModelParams params;
  Potential pot;
  std::vector<double> support;  // Delta phi values, height units
  double xi_left = 0.0;
};

using ConfigPredicate = std::function<bool(const PolymerConfig&)>;
using ConfigStatistic = std::function<double(const PolymerConfig&)>;

struct EnumerationResult {
  double z = 0.0;             // sum of exp(-H) over all tuples
  double event_weight = 0.0;  // ... restricted to the event
  double probability = 0.0;
  double conditional_mean = 0.0;  // E[statistic | event]
  std::uint64_t total_count = 0;
  std::uint64_t event_count = 0;
  bool exact_counts = false;  // all weights are 1: probability = event_count / total_count
};

inline constexpr std::uint64_t kEnumerationCap = 100'000'000;

EnumerationResult enumerate(const EnumerationSpec& spec, const ConfigPredicate& event,
                            const ConfigStatistic& statistic = {}, unsigned workers = 1);

// Visits every admissible configuration with its weight; serial.
void enumerate_each(const EnumerationSpec& spec,
                    const std::function<void(const PolymerConfig&, double)>& visit);

ConfigPredicate bridge_event(const BoundaryConditions& bc, double tol = 1e-9);
ConfigPredicate tube_event(double radius);

// Bivariate normal density of (X_N, Y_N) at (x, y).
double gaussian_functional_density(int n_sites, double sigma2, double x, double y);

// The same density evaluated at the walk targets of zero-endpoint boundary values.
double mapped_boundary_density(int n_sites, double kappa, double c, double xi_left, double xi_right);

struct OracleCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Desk-scale validation sweep.
std::vector<OracleCheck> run_oracle_sweep(unsigned workers = 1, std::uint64_t seed = 1,
                                          std::size_t mcmc_sweeps = 1'000'000);

}  // namespace sflex
