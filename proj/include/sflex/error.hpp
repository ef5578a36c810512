#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sflex {

enum class ErrorKind {
  invalid_input,
  invalid_boundary,
  out_of_range,
  scaling_violation,
  divergence,
  degenerate_distribution,
  unsupported,
  no_free_sites,
  too_few_samples,
  out_of_domain,
  no_limit,
  no_solution,
  too_large,
  convergence_failure,
  insufficient_span,
  numeric,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every domain failure in the library is reported through this type; the
// kind lets callers (and the CLI exit-code contract) branch without parsing
// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_boundary: return "invalid-boundary";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::scaling_violation: return "scaling-violation";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::degenerate_distribution: return "degenerate-distribution";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::no_free_sites: return "no-free-sites";
    case ErrorKind::too_few_samples: return "too-few-samples";
    case ErrorKind::out_of_domain: return "out-of-domain";
    case ErrorKind::no_limit: return "no-limit";
    case ErrorKind::no_solution: return "no-solution";
    case ErrorKind::too_large: return "too-large";
    case ErrorKind::convergence_failure: return "convergence-failure";
    case ErrorKind::insufficient_span: return "insufficient-span";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace sflex
