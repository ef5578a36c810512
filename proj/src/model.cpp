#include "sflex/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sflex/quadrature.hpp"

namespace sflex {

ModelParams::ModelParams(int n_sites, double epsilon, double macro_length, HeightMode mode)
    : n_sites_(n_sites), epsilon_(epsilon), macro_length_(macro_length), mode_(mode) {
  require(n_sites >= 2, ErrorKind::invalid_input, "N must be at least 2");
  require(epsilon > 0 && std::isfinite(epsilon), ErrorKind::invalid_input, "eps must be positive");
  require(macro_length > 0 && std::isfinite(macro_length), ErrorKind::invalid_input,
          "c must be positive");
  const double mismatch = std::abs(n_sites * epsilon - macro_length);
  if (mismatch > epsilon * (1 + 1e-12)) {
    std::ostringstream os;
    os << "|N eps - c| = " << mismatch << " exceeds eps = " << epsilon;
    throw Error(ErrorKind::invalid_input, os.str());
  }
}

ModelParams ModelParams::from_length(int n_sites, double macro_length, HeightMode mode) {
  require(n_sites >= 2, ErrorKind::invalid_input, "N must be at least 2");
  return ModelParams(n_sites, macro_length / n_sites, macro_length, mode);
}

Potential Potential::gaussian(double kappa) {
  require(kappa > 0 && std::isfinite(kappa), ErrorKind::invalid_input, "kappa must be positive");
  return Potential(Gaussian{kappa});
}

Potential Potential::power_law(double kappa, double alpha) {
  require(kappa > 0 && std::isfinite(kappa), ErrorKind::invalid_input, "kappa must be positive");
  require(alpha >= 1 && std::isfinite(alpha), ErrorKind::invalid_input, "alpha must be >= 1");
  return Potential(PowerLaw{kappa, alpha});
}

Potential Potential::tabulated(std::vector<double> x, std::vector<double> phi) {
  require(x.size() == phi.size() && x.size() >= 2, ErrorKind::invalid_input,
          "tabulated potential needs matching grids of size >= 2");
  for (std::size_t i = 1; i < x.size(); ++i)
    require(x[i] > x[i - 1], ErrorKind::invalid_input, "tabulated grid must be increasing");
  for (double v : phi) require(std::isfinite(v), ErrorKind::invalid_input, "non-finite Phi value");
  const double span = std::max(std::abs(x.front()), std::abs(x.back()));
  require(std::abs(x.front() + x.back()) <= 1e-12 * span, ErrorKind::invalid_input,
          "tabulated grid must be symmetric about zero");
  Potential pot(Tabulated{std::move(x), std::move(phi)});
  // Evenness on every grid point and its mirror image.
  const auto& tab = std::get<Tabulated>(pot.family_);
  double scale = 0;
  for (double v : tab.phi) scale = std::max(scale, std::abs(v));
  for (double xi : tab.x) {
    const double mirror = std::clamp(-xi, tab.x.front(), tab.x.back());
    require(std::abs(pot(xi) - pot(mirror)) <= 1e-9 * std::max(1.0, scale),
            ErrorKind::invalid_input, "tabulated potential must be even");
  }
  return pot;
}

Potential Potential::flat(double half_width) {
  require(half_width > 0, ErrorKind::invalid_input, "flat potential needs positive half-width");
  return tabulated({-half_width, half_width}, {0.0, 0.0});
}

double Potential::operator()(double x) const {
  return std::visit(
      [x](const auto& fam) -> double {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return 0.5 * fam.kappa * x * x;
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          return fam.kappa * std::pow(std::abs(x), fam.alpha) / fam.alpha;
        } else {
          if (x < fam.x.front() || x > fam.x.back()) {
            std::ostringstream os;
            os << "tabulated potential probed at " << x << " outside [" << fam.x.front() << ", "
               << fam.x.back() << "]";
            throw Error(ErrorKind::out_of_range, os.str());
          }
          const auto it = std::upper_bound(fam.x.begin(), fam.x.end(), x);
          if (it == fam.x.end()) return fam.phi.back();
          const auto hi = static_cast<std::size_t>(it - fam.x.begin());
          const std::size_t lo = hi - 1;
          const double w = (x - fam.x[lo]) / (fam.x[hi] - fam.x[lo]);
          return (1 - w) * fam.phi[lo] + w * fam.phi[hi];
        }
      },
      family_);
}

bool Potential::is_gaussian() const noexcept {
  if (std::holds_alternative<Gaussian>(family_)) return true;
  if (const auto* p = std::get_if<PowerLaw>(&family_)) return p->alpha == 2.0;
  return false;
}

double Potential::kappa() const {
  if (const auto* g = std::get_if<Gaussian>(&family_)) return g->kappa;
  if (const auto* p = std::get_if<PowerLaw>(&family_)) return p->kappa;
  throw Error(ErrorKind::unsupported, "tabulated potential has no stiffness parameter");
}

std::optional<std::pair<double, double>> Potential::support() const {
  if (const auto* t = std::get_if<Tabulated>(&family_))
    return std::make_pair(t->x.front(), t->x.back());
  return std::nullopt;
}

bool Potential::defined_at(double x) const {
  const auto s = support();
  return !s || (x >= s->first && x <= s->second);
}

void validate(const PolymerConfig& phi, const ModelParams& params) {
  require(phi.size() == params.n_sites() + 2, ErrorKind::invalid_input,
          "configuration length must be N+2");
  if (params.discrete()) {
    for (Eigen::Index k = 0; k < phi.size(); ++k)
      require(phi[k] == std::round(phi[k]), ErrorKind::invalid_input,
              "discrete mode requires integer heights");
  }
}

double BoundaryConditions::max_violation(const PolymerConfig& phi) const {
  const Eigen::Index n1 = phi.size() - 1;
  require(n1 >= 2, ErrorKind::invalid_input, "configuration too short");
  double v = std::abs(phi[0]);
  v = std::max(v, std::abs((phi[1] - phi[0]) - xi_left));
  v = std::max(v, std::abs((phi[n1] - phi[n1 - 1]) + xi_right));
  v = std::max(v, std::abs(phi[n1] - endpoint));
  return v;
}

bool BoundaryConditions::satisfied_by(const PolymerConfig& phi, double tol) const {
  return max_violation(phi) <= tol;
}

double hamiltonian_scaled(const PolymerConfig& phi, double epsilon, double delta,
                          const Potential& pot) {
  const Eigen::VectorXd lap = laplacian(phi);
  const double scale = std::pow(epsilon, -delta);
  CompensatedSum sum;
  for (Eigen::Index j = 0; j < lap.size(); ++j) sum += pot(scale * lap[j]);
  return epsilon * sum.value();
}

double hamiltonian(const PolymerConfig& phi, const ModelParams& params, const Potential& pot) {
  require(phi.size() == params.n_sites() + 2, ErrorKind::invalid_input,
          "configuration length must be N+2");
  return hamiltonian_scaled(phi, params.epsilon(), 1.0, pot);
}

IncrementPath to_increments(const PolymerConfig& phi, const ModelParams& params) {
  require(phi.size() == params.n_sites() + 2, ErrorKind::invalid_input,
          "configuration length must be N+2");
  require(phi[0] == 0.0, ErrorKind::invalid_boundary, "phi_0 must be 0");
  IncrementPath path;
  path.xi1 = phi[1] - phi[0];
  path.etas = laplacian(phi) / params.epsilon();
  return path;
}

PolymerConfig from_increments(const IncrementPath& path, const ModelParams& params) {
  const Eigen::Index n = path.etas.size();
  require(n == params.n_sites(), ErrorKind::invalid_input, "path must carry N increments");
  // phi_{k+1} = 2 phi_k - phi_{k-1} + eps eta_k, which sums to
  // phi_k = k xi_1 + eps sum_{j<k} (k - j) eta_j.
  PolymerConfig phi{Eigen::VectorXd::Zero(n + 2)};
  double slope = path.xi1;
  phi.heights[1] = path.xi1;
  for (Eigen::Index k = 1; k <= n; ++k) {
    slope += params.epsilon() * path.etas[k - 1];
    phi.heights[k + 1] = phi.heights[k] + slope;
  }
  return phi;
}

PartialSums partial_sums(const IncrementPath& path, int n_sites) {
  require(path.etas.size() == n_sites, ErrorKind::invalid_input, "path must carry N increments");
  PartialSums out{Eigen::VectorXd(n_sites), Eigen::VectorXd(n_sites)};
  double x = 0, y = 0;
  for (int k = 0; k < n_sites; ++k) {
    x += path.etas[k];
    y += x;  // sum_{j<=k} X_j = sum_{j<=k} (k+1-j) eta_j
    out.x[k] = x;
    out.y[k] = y / (n_sites + 1);
  }
  return out;
}

WalkTargets map_boundary(const BoundaryConditions& bc, const ModelParams& params) {
  const double eps = params.epsilon();
  const int n = params.n_sites();
  return {-(bc.xi_left + bc.xi_right) / eps, (bc.endpoint / (n + 1) - bc.xi_left) / eps};
}

double ThetaPath::operator()(double t) const {
  require(t >= 0 && t <= 1, ErrorKind::invalid_input, "theta path lives on [0,1]");
  const Eigen::Index n = nodes_.size() - 1;
  const double pos = t * static_cast<double>(n);
  const auto m = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), n - 1);
  const double w = pos - static_cast<double>(m);
  return (1 - w) * nodes_[m] + w * nodes_[m + 1];
}

ThetaPath theta_path(const IncrementPath& path, double sigma, int n_sites) {
  require(sigma > 0, ErrorKind::invalid_input, "sigma must be positive");
  const PartialSums s = partial_sums(path, n_sites);
  Eigen::VectorXd nodes(n_sites + 1);
  nodes[0] = 0;
  nodes.tail(n_sites) = s.y / (sigma * std::sqrt(static_cast<double>(n_sites)));
  return ThetaPath(std::move(nodes));
}

Eigen::VectorXd integrated_walk(const PolymerConfig& phi, const ModelParams& params) {
  const int n = params.n_sites();
  require(phi.size() == n + 2, ErrorKind::invalid_input, "configuration length must be N+2");
  const double scale = 1.0 / ((n + 1) * params.epsilon());
  Eigen::VectorXd y(n + 1);
  for (int m = 0; m <= n; ++m) y[m] = (phi[m + 1] - (m + 1) * phi[1]) * scale;
  return y;
}

PolymerConfig discretize_profile(const ContinuumProfile& cp, const ModelParams& params) {
  require(static_cast<bool>(cp.f), ErrorKind::invalid_input, "profile has no function");
  const int n = params.n_sites();
  const double eps = params.epsilon();
  const double scale = std::pow(eps, -cp.gamma);
  PolymerConfig phi{Eigen::VectorXd(n + 2)};
  for (int k = 0; k <= n + 1; ++k) {
    const double v = cp.f(k * eps);
    require(std::isfinite(v), ErrorKind::invalid_input, "profile undefined at a grid point");
    phi.heights[k] = scale * v;
  }
  return phi;
}

std::vector<EnergyCheckRow> continuum_energy_check(const ContinuumProfile& cp, const Potential& pot,
                                                   const std::vector<double>& eps_list) {
  require(std::abs(cp.gamma + cp.delta - 2.0) <= 1e-12, ErrorKind::scaling_violation,
          "gamma + delta must equal 2");
  require(static_cast<bool>(cp.f), ErrorKind::invalid_input, "profile has no function");
  const double c = cp.length;

  std::function<double(double)> second = cp.f_second;
  if (!second) {
    const double h = 1e-4 * std::max(1.0, c);
    second = [f = cp.f, h](double x) { return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h); };
  }
  const double integral =
      integrate_composite([&](double x) { return pot(second(x)); }, 0.0, c, 64, 16);

  std::vector<EnergyCheckRow> rows;
  rows.reserve(eps_list.size());
  for (double eps : eps_list) {
    require(eps > 0, ErrorKind::invalid_input, "eps must be positive");
    const int n = static_cast<int>(std::floor(c / eps + 1e-9));
    const ModelParams params(n, eps, c);
    const PolymerConfig phi = discretize_profile(cp, params);
    const double h = hamiltonian_scaled(phi, eps, cp.delta, pot);
    rows.push_back({eps, n, h, integral, std::abs(h - integral)});
  }
  return rows;
}

}  // namespace sflex
