#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "sflex/model.hpp"
#include "sflex/sampling.hpp"

namespace sflex {

struct TubeConfig {
  double rho = 0.1;
  double grad_cut_sd = 8.0;
  int mesh = 4;
  std::optional<int> max_step;
};

// Everything a run needs; loaded from JSON, then overridden by flags.
struct RunConfig {
  int n_sites = 100;
  std::optional<double> epsilon;  // defaults to macro_length / n_sites
  double macro_length = 1.0;
  HeightMode mode = HeightMode::continuous;
  Potential potential = Potential::gaussian(1.0);
  double xi_left = 0.0;
  double xi_right = 0.0;
  double endpoint = 0.0;
  ChainSettings sampler;
  std::optional<double> truncation;  // increment cutoff M for the step law
  std::optional<TubeConfig> tube;
  std::string output_dir;

  ModelParams params() const;
  BoundaryConditions boundary() const;
};

// Throws Error(invalid_input) on malformed JSON, unknown keys or bad values.
RunConfig parse_run_config(const std::string& json_text);

// Canonical JSON of the config; worker count and output directory excluded,
// so they never change the config hash.
std::string canonical_config(const RunConfig& cfg);

// Exit codes: 0 success, 1 domain or validation error, 2 usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sflex
