#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "sflex/error.hpp"

namespace sflex {

enum class HeightMode { continuous, discrete };

// Lattice size N, spacing eps and macroscopic length c with |N eps - c| <= eps.
class ModelParams {
 public:
  ModelParams(int n_sites, double epsilon, double macro_length,
              HeightMode mode = HeightMode::continuous);

  // eps = c / N.
  static ModelParams from_length(int n_sites, double macro_length,
                                 HeightMode mode = HeightMode::continuous);

  int n_sites() const noexcept { return n_sites_; }
  double epsilon() const noexcept { return epsilon_; }
  double macro_length() const noexcept { return macro_length_; }
  HeightMode height_mode() const noexcept { return mode_; }
  bool discrete() const noexcept { return mode_ == HeightMode::discrete; }

 private:
  int n_sites_;
  double epsilon_;
  double macro_length_;
  HeightMode mode_;
};

// Bending potential Phi. Even and bounded below by construction.
class Potential {
 public:
  struct Gaussian {
    double kappa;
  };
  // kappa |x|^alpha / alpha, so alpha = 2 coincides with Gaussian.
  struct PowerLaw {
    double kappa;
    double alpha;
  };
  // Piecewise-linear interpolation inside the grid, hard error outside.
  struct Tabulated {
    std::vector<double> x;
    std::vector<double> phi;
  };

  static Potential gaussian(double kappa);
  static Potential power_law(double kappa, double alpha);
  static Potential tabulated(std::vector<double> x, std::vector<double> phi);
  // Phi == 0 on [-half_width, half_width].
  static Potential flat(double half_width);

  double operator()(double x) const;

  bool is_gaussian() const noexcept;
  // Gaussian stiffness; also kappa for PowerLaw. Throws for Tabulated.
  double kappa() const;
  // Finite support [lo, hi] of the tabulated family, nullopt otherwise.
  std::optional<std::pair<double, double>> support() const;
  // Whether x lies where Phi is defined.
  bool defined_at(double x) const;

  const auto& family() const noexcept { return family_; }

 private:
  using Family = std::variant<Gaussian, PowerLaw, Tabulated>;
  explicit Potential(Family f) : family_(std::move(f)) {}
  Family family_;
};

// Heights phi_0 .. phi_{N+1}.
struct PolymerConfig {
  Eigen::VectorXd heights;

  Eigen::Index size() const noexcept { return heights.size(); }
  int n_sites() const noexcept { return static_cast<int>(heights.size()) - 2; }
  double operator[](Eigen::Index k) const { return heights[k]; }
};

void validate(const PolymerConfig& phi, const ModelParams& params);

struct BoundaryConditions {
  double xi_left = 0.0;
  double xi_right = 0.0;
  double endpoint = 0.0;
  double macro_slope = 0.0;  // d_{N+1} / (N+1)

  BoundaryConditions() = default;
  BoundaryConditions(double xi_l, double xi_r, double d, int n_sites)
      : xi_left(xi_l), xi_right(xi_r), endpoint(d), macro_slope(d / (n_sites + 1)) {}

  static BoundaryConditions zero(int n_sites) { return {0.0, 0.0, 0.0, n_sites}; }

  // phi_0 = 0, grad phi_1 = xiL, grad phi_{N+1} = -xiR, phi_{N+1} = d.
  bool satisfied_by(const PolymerConfig& phi, double tol) const;
  double max_violation(const PolymerConfig& phi) const;
};

struct IncrementPath {
  double xi1 = 0.0;
  Eigen::VectorXd etas;  // eta_1 .. eta_N
};

struct ContinuumProfile {
  std::function<double(double)> f;
  double length = 1.0;  // f lives on [0, length]
  double gamma = 1.0;
  double delta = 1.0;
  // Optional exact f''; finite differences otherwise.
  std::function<double(double)> f_second{};
};

// Forward difference: out[k-1] = phi_k - phi_{k-1}, k = 1..N+1.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> gradient(
    const Eigen::MatrixBase<Derived>& phi) {
  require(phi.size() >= 2, ErrorKind::invalid_input, "gradient needs at least two heights");
  const Eigen::Index n = phi.size();
  return phi.tail(n - 1) - phi.head(n - 1);
}

// out[k-1] = phi_{k+1} - 2 phi_k + phi_{k-1}, k = 1..N.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> laplacian(
    const Eigen::MatrixBase<Derived>& phi) {
  require(phi.size() >= 3, ErrorKind::invalid_input, "laplacian needs at least three heights");
  const Eigen::Index n = phi.size();
  return phi.tail(n - 2) - 2 * phi.segment(1, n - 2) + phi.head(n - 2);
}

inline Eigen::VectorXd gradient(const PolymerConfig& phi) { return gradient(phi.heights); }
inline Eigen::VectorXd laplacian(const PolymerConfig& phi) { return laplacian(phi.heights); }

// eps * sum_j Phi(eps^{-1} Laplacian_j).
double hamiltonian(const PolymerConfig& phi, const ModelParams& params, const Potential& pot);

// eps * sum_j Phi(eps^{-delta} Laplacian_j); the continuum-limit energy.
double hamiltonian_scaled(const PolymerConfig& phi, double epsilon, double delta,
                          const Potential& pot);

IncrementPath to_increments(const PolymerConfig& phi, const ModelParams& params);
PolymerConfig from_increments(const IncrementPath& path, const ModelParams& params);

struct PartialSums {
  Eigen::VectorXd x;  // X_1 .. X_N
  Eigen::VectorXd y;  // Y_1 .. Y_N
};

PartialSums partial_sums(const IncrementPath& path, int n_sites);

struct WalkTargets {
  double x_target;
  double y_target;
};

// Values of (X_N, Y_N) equivalent to the four boundary constraints.
WalkTargets map_boundary(const BoundaryConditions& bc, const ModelParams& params);

// Piecewise-linear process on [0,1] with nodes at m / N.
class ThetaPath {
 public:
  explicit ThetaPath(Eigen::VectorXd nodes) : nodes_(std::move(nodes)) {}

  double operator()(double t) const;
  const Eigen::VectorXd& nodes() const noexcept { return nodes_; }

 private:
  Eigen::VectorXd nodes_;  // values at m/N, m = 0..N
};

ThetaPath theta_path(const IncrementPath& path, double sigma, int n_sites);

// Y_m recovered from heights: (phi_{m+1} - (m+1) phi_1) / ((N+1) eps), m = 0..N.
Eigen::VectorXd integrated_walk(const PolymerConfig& phi, const ModelParams& params);

PolymerConfig discretize_profile(const ContinuumProfile& cp, const ModelParams& params);

struct EnergyCheckRow {
  double epsilon;
  int n_sites;
  double discrete_energy;
  double continuum_energy;
  double error;
};

std::vector<EnergyCheckRow> continuum_energy_check(const ContinuumProfile& cp, const Potential& pot,
                                                   const std::vector<double>& eps_list);

}  // namespace sflex
