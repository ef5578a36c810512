#include "sflex/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sflex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_integer(double v) { return v == std::round(v); }

}  // namespace

double integrated_autocorrelation(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return 1.0;
  double mean = 0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (c0 <= 0) return 1.0;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (series[i] - mean) * (series[i + lag] - mean);
    c /= static_cast<double>(n) * c0;
    tau += 2 * c;
    if (static_cast<double>(lag) >= 6 * tau) break;
  }
  return std::max(tau, 1.0);
}

BridgeMcmc::BridgeMcmc(const ModelParams& params, const Potential& pot, const BoundaryConditions& bc,
                       const IncrementDistribution& dist)
    : params_(params), pot_(pot), bc_(bc), dist_(dist) {
  const int n = params.n_sites();
  require(n >= 4, ErrorKind::no_free_sites, "MCMC needs N >= 4");
  require(dist.mode() == params.height_mode(), ErrorKind::invalid_input,
          "distribution and model disagree on the height mode");
  if (params.discrete()) {
    require(is_integer(bc.xi_left) && is_integer(bc.xi_right) && is_integer(bc.endpoint),
            ErrorKind::invalid_boundary, "discrete mode needs integer boundary values");
    return;
  }
  // B maps the free heights phi_2..phi_{N-1} to the N Laplacians.
  const int free = n - 2;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, free);
  for (int f = 0; f < free; ++f) {
    const int site = f + 2;
    b(site - 2, f) += 1;  // Laplacian index site-1
    b(site - 1, f) -= 2;
    b(site, f) += 1;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.transpose() * b);
  modes_ = es.eigenvectors();
  stiffness_ = es.eigenvalues();
}

double BridgeMcmc::term(double lap) const {
  const double eta = lap / params_.epsilon();
  if (params_.discrete()) {
    if (!dist_.admissible(eta)) return kInf;
  } else if (!pot_.defined_at(eta)) {
    return kInf;
  }
  return params_.epsilon() * pot_(eta);
}

double BridgeMcmc::energy(const PolymerConfig& phi) const {
  double e = 0;
  for (int j = 1; j <= params_.n_sites(); ++j) e += term(phi[j + 1] - 2 * phi[j] + phi[j - 1]);
  return e;
}

double BridgeMcmc::delta_energy(const PolymerConfig& phi, const McmcMove& move) const {
  const int n = params_.n_sites();
  if (move.kind == McmcMove::Kind::mode) {
    PolymerConfig trial = phi;
    apply(trial, move);
    const double after = energy(trial);
    if (!std::isfinite(after)) return kInf;
    return after - energy(phi);
  }
  const int first = move.first, last = move.last;
  require(first >= 2 && last <= n - 1 && first <= last, ErrorKind::invalid_input,
          "move must stay on interior sites 2..N-1");
  auto shifted = [&](int k) { return phi[k] + ((k >= first && k <= last) ? move.amount : 0.0); };
  int touched[4] = {first - 1, first, last, last + 1};
  std::sort(std::begin(touched), std::end(touched));
  double delta = 0;
  for (int i = 0; i < 4; ++i) {
    const int j = touched[i];
    if (i > 0 && j == touched[i - 1]) continue;
    const double before = term(phi[j + 1] - 2 * phi[j] + phi[j - 1]);
    const double after = term(shifted(j + 1) - 2 * shifted(j) + shifted(j - 1));
    if (!std::isfinite(after)) return kInf;
    delta += after - before;
  }
  return delta;
}

void BridgeMcmc::apply(PolymerConfig& phi, const McmcMove& move) const {
  if (move.kind == McmcMove::Kind::mode) {
    phi.heights.segment(2, params_.n_sites() - 2) += move.amount * modes_.col(move.mode);
    return;
  }
  for (int k = move.first; k <= move.last; ++k) phi.heights[k] += move.amount;
}

PolymerConfig BridgeMcmc::initial_config() const {
  const int n = params_.n_sites();
  PolymerConfig phi{Eigen::VectorXd::Zero(n + 2)};
  phi.heights[1] = bc_.xi_left;
  phi.heights[n] = bc_.endpoint + bc_.xi_right;
  phi.heights[n + 1] = bc_.endpoint;

  if (!params_.discrete()) {
    // Minimiser of sum (Laplacian)^2 with the boundary heights held fixed.
    const int free = n - 2;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, free);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int j = 1; j <= n; ++j) {
      for (int k : {j - 1, j, j + 1}) {
        const double coef = (k == j) ? -2.0 : 1.0;
        if (k >= 2 && k <= n - 1)
          b(j - 1, k - 2) += coef;
        else
          rhs[j - 1] -= coef * phi[k];
      }
    }
    const Eigen::VectorXd x = (b.transpose() * b).ldlt().solve(b.transpose() * rhs);
    phi.heights.segment(2, free) = x;
    require(std::isfinite(energy(phi)), ErrorKind::invalid_boundary,
            "boundary values admit no configuration inside the potential's support");
    return phi;
  }

  // Discrete: depth-first search over second differences honouring both
  // right-end constraints, smallest increments first.
  const double eps = params_.epsilon();
  std::vector<long> values;
  const auto kmax = static_cast<long>(std::floor(dist_.truncation() * eps * (1 + 1e-12)));
  for (long k = 0; k <= kmax; ++k) {
    for (long v : {k, -k}) {
      if (k == 0 && v < 0) continue;
      if (std::isfinite(term(static_cast<double>(v)))) values.push_back(v);
    }
  }
  require(!values.empty(), ErrorKind::degenerate_distribution, "empty increment support");
  const long kabs = kmax;
  const auto xi_l = static_cast<long>(bc_.xi_left);
  const long target_x = -static_cast<long>(bc_.xi_right) - xi_l;
  const long target_y = static_cast<long>(bc_.endpoint) - (n + 1) * xi_l;
  std::vector<long> chosen(static_cast<std::size_t>(n), 0);
  long nodes = 0;

  std::function<bool(int, long, long)> dfs = [&](int k, long sx, long sy) -> bool {
    if (++nodes > 20'000'000) return false;
    const long rest = n - k;
    if (rest == 0) return sx == target_x && sy == target_y;
    if (std::abs(target_x - sx) > kabs * rest) return false;
    if (std::abs(target_y - sy) > kabs * rest * (rest + 1) / 2) return false;
    const long w = n - k;  // (N + 1 - j) for j = k + 1
    for (long v : values) {
      chosen[static_cast<std::size_t>(k)] = v;
      if (dfs(k + 1, sx + v, sy + w * v)) return true;
    }
    return false;
  };
  require(dfs(0, 0, 0), ErrorKind::invalid_boundary,
          "no admissible discrete configuration for these boundary values");
  IncrementPath path{bc_.xi_left, Eigen::VectorXd(n)};
  for (int j = 0; j < n; ++j) path.etas[j] = static_cast<double>(chosen[static_cast<std::size_t>(j)]) / eps;
  phi = from_increments(path, params_);
  for (Eigen::Index k = 0; k < phi.size(); ++k) phi.heights[k] = std::round(phi.heights[k]);
  return phi;
}

ChainReport BridgeMcmc::run_chain(std::size_t chain_index, const ChainSettings& settings,
                                  const std::function<void(const PolymerConfig&)>& observer) const {
  settings.validate();
  const int n = params_.n_sites();
  const int free = n - 2;
  const bool discrete = params_.discrete();
  Rng rng = make_rng(settings.seed, chain_index);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick_site(2, n - 1);
  std::uniform_int_distribution<int> pick_mode(0, free - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Single-step gradient change scale.
  const double step = params_.epsilon() * std::sqrt(dist_.sigma2());
  double site_width = discrete ? 1.0 : 0.8 * step;
  double mode_width = discrete ? 1.0 : 2.0 * step;

  PolymerConfig phi = initial_config();
  std::size_t site_tries = 0, site_acc = 0, bulk_tries = 0, bulk_acc = 0;

  auto metropolis = [&](const McmcMove& move) {
    const double de = delta_energy(phi, move);
    if (!std::isfinite(de)) return false;
    if (de <= 0 || unif(rng) < std::exp(-de)) {
      apply(phi, move);
      return true;
    }
    return false;
  };

  auto sweep = [&] {
    for (int r = 0; r < free; ++r) {
      McmcMove m;
      m.kind = McmcMove::Kind::site;
      m.first = m.last = pick_site(rng);
      m.amount = discrete ? (unif(rng) < 0.5 ? -1.0 : 1.0) : site_width * normal(rng);
      ++site_tries;
      site_acc += metropolis(m);
    }
    for (int r = 0; r < free; ++r) {
      McmcMove m;
      if (discrete) {
        m.kind = McmcMove::Kind::block;
        m.first = pick_site(rng);
        m.last = std::uniform_int_distribution<int>(m.first, n - 1)(rng);
        m.amount = unif(rng) < 0.5 ? -1.0 : 1.0;
      } else {
        m.kind = McmcMove::Kind::mode;
        m.mode = pick_mode(rng);
        m.amount = mode_width * normal(rng) / std::sqrt(stiffness_[m.mode]);
      }
      ++bulk_tries;
      bulk_acc += metropolis(m);
    }
  };

  // Burn-in with width adaptation towards 30-60% acceptance.
  constexpr std::size_t window = 50;
  for (std::size_t s = 0; s < settings.burn_in; ++s) {
    sweep();
    if (!discrete && (s + 1) % window == 0) {
      const double sa = static_cast<double>(site_acc) / static_cast<double>(site_tries);
      const double ba = static_cast<double>(bulk_acc) / static_cast<double>(bulk_tries);
      if (sa > 0.6) site_width *= 1.25;
      if (sa < 0.3) site_width *= 0.8;
      if (ba > 0.6) mode_width *= 1.25;
      if (ba < 0.3) mode_width *= 0.8;
      site_tries = site_acc = bulk_tries = bulk_acc = 0;
    }
  }
  site_tries = site_acc = bulk_tries = bulk_acc = 0;

  ChainReport report;
  report.chain = chain_index;
  report.energies.reserve(settings.sweeps / settings.thin);
  for (std::size_t s = 0; s < settings.sweeps; ++s) {
    sweep();
    if ((s + 1) % settings.thin == 0) {
      report.energies.push_back(energy(phi));
      if (observer) observer(phi);
    }
  }
  report.site_acceptance = site_tries ? static_cast<double>(site_acc) / site_tries : 0.0;
  report.collective_acceptance = bulk_tries ? static_cast<double>(bulk_acc) / bulk_tries : 0.0;
  report.site_width = site_width;
  report.mode_width = mode_width;
  report.energy_autocorrelation = integrated_autocorrelation(report.energies);
  return report;
}

std::vector<PolymerConfig> BridgeMcmc::sample(const ChainSettings& settings,
                                              std::vector<ChainReport>* reports) const {
  settings.validate();
  struct ChainOutput {
    std::vector<PolymerConfig> samples;
    ChainReport report;
  };
  auto outputs = parallel_map<ChainOutput>(settings.chains, settings.workers, [&](std::size_t c) {
    ChainOutput out;
    out.report = run_chain(c, settings, [&](const PolymerConfig& phi) { out.samples.push_back(phi); });
    return out;
  });
  std::vector<PolymerConfig> all;
  for (auto& o : outputs) {
    all.insert(all.end(), o.samples.begin(), o.samples.end());
    if (reports) reports->push_back(std::move(o.report));
  }
  return all;
}

std::vector<PolymerConfig> sample_bridge_mcmc(const ModelParams& params, const Potential& pot,
                                              const BoundaryConditions& bc,
                                              const IncrementDistribution& dist,
                                              const ChainSettings& settings) {
  return BridgeMcmc(params, pot, bc, dist).sample(settings);
}

}  // namespace sflex
