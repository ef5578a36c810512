#include "sflex/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "sflex/analytics.hpp"
#include "sflex/confinement.hpp"
#include "sflex/io.hpp"
#include "sflex/ldp.hpp"
#include "sflex/mcmc.hpp"
#include "sflex/oracle.hpp"
#include "sflex/svg.hpp"

namespace sflex {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

ModelParams RunConfig::params() const {
  if (epsilon) return ModelParams(n_sites, *epsilon, macro_length, mode);
  return ModelParams::from_length(n_sites, macro_length, mode);
}

BoundaryConditions RunConfig::boundary() const {
  return BoundaryConditions(xi_left, xi_right, endpoint, n_sites);
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  require(obj.is_object(), ErrorKind::invalid_input, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    require(ok, ErrorKind::invalid_input, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& into, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::invalid_input, std::string("bad value for '") + key + "' in " + where);
  }
}

Potential parse_potential(const json& p) {
  std::string family = "gaussian";
  read(p, "family", family, "potential");
  if (family == "gaussian") {
    check_keys(p, {"family", "kappa"}, "potential");
    double kappa = 1.0;
    read(p, "kappa", kappa, "potential");
    return Potential::gaussian(kappa);
  }
  if (family == "power_law") {
    check_keys(p, {"family", "kappa", "alpha"}, "potential");
    double kappa = 1.0, alpha = 2.0;
    read(p, "kappa", kappa, "potential");
    read(p, "alpha", alpha, "potential");
    return Potential::power_law(kappa, alpha);
  }
  if (family == "tabulated") {
    check_keys(p, {"family", "x", "phi"}, "potential");
    std::vector<double> x, phi;
    read(p, "x", x, "potential");
    read(p, "phi", phi, "potential");
    return Potential::tabulated(std::move(x), std::move(phi));
  }
  if (family == "flat") {
    check_keys(p, {"family", "half_width"}, "potential");
    double hw = 1.0;
    read(p, "half_width", hw, "potential");
    return Potential::flat(hw);
  }
  throw Error(ErrorKind::invalid_input, "unknown potential family '" + family + "'");
}

json potential_json(const Potential& pot) {
  return std::visit(
      [](const auto& fam) -> json {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, Potential::Gaussian>) {
          return {{"family", "gaussian"}, {"kappa", fam.kappa}};
        } else if constexpr (std::is_same_v<T, Potential::PowerLaw>) {
          return {{"family", "power_law"}, {"kappa", fam.kappa}, {"alpha", fam.alpha}};
        } else {
          return {{"family", "tabulated"}, {"x", fam.x}, {"phi", fam.phi}};
        }
      },
      pot.family());
}

HeightMode parse_mode(const std::string& s) {
  if (s == "continuous") return HeightMode::continuous;
  if (s == "discrete") return HeightMode::discrete;
  throw Error(ErrorKind::invalid_input, "height_mode must be 'continuous' or 'discrete'");
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, {"model", "potential", "boundary", "sampler", "tube", "output_dir"}, "config");
  RunConfig cfg;
  if (root.contains("model")) {
    const auto& m = root["model"];
    check_keys(m, {"n_sites", "epsilon", "macro_length", "height_mode"}, "model");
    read(m, "n_sites", cfg.n_sites, "model");
    read(m, "macro_length", cfg.macro_length, "model");
    if (m.contains("epsilon")) {
      double e = 0;
      read(m, "epsilon", e, "model");
      cfg.epsilon = e;
    }
    std::string mode = "continuous";
    read(m, "height_mode", mode, "model");
    cfg.mode = parse_mode(mode);
  }
  if (root.contains("potential")) cfg.potential = parse_potential(root["potential"]);
  if (root.contains("boundary")) {
    const auto& b = root["boundary"];
    check_keys(b, {"xi_left", "xi_right", "endpoint"}, "boundary");
    read(b, "xi_left", cfg.xi_left, "boundary");
    read(b, "xi_right", cfg.xi_right, "boundary");
    read(b, "endpoint", cfg.endpoint, "boundary");
  }
  if (root.contains("sampler")) {
    const auto& s = root["sampler"];
    check_keys(s, {"seed", "n_samples", "sweeps", "burn_in", "thin", "chains", "workers", "truncation"},
               "sampler");
    read(s, "seed", cfg.sampler.seed, "sampler");
    read(s, "n_samples", cfg.sampler.n_samples, "sampler");
    read(s, "sweeps", cfg.sampler.sweeps, "sampler");
    read(s, "burn_in", cfg.sampler.burn_in, "sampler");
    read(s, "thin", cfg.sampler.thin, "sampler");
    read(s, "chains", cfg.sampler.chains, "sampler");
    read(s, "workers", cfg.sampler.workers, "sampler");
    if (s.contains("truncation")) {
      double t = 0;
      read(s, "truncation", t, "sampler");
      cfg.truncation = t;
    }
  }
  if (root.contains("tube")) {
    const auto& t = root["tube"];
    check_keys(t, {"rho", "grad_cut_sd", "mesh", "max_step"}, "tube");
    TubeConfig tc;
    read(t, "rho", tc.rho, "tube");
    read(t, "grad_cut_sd", tc.grad_cut_sd, "tube");
    read(t, "mesh", tc.mesh, "tube");
    if (t.contains("max_step")) {
      int m = 0;
      read(t, "max_step", m, "tube");
      tc.max_step = m;
    }
    cfg.tube = tc;
  }
  read(root, "output_dir", cfg.output_dir, "config");
  cfg.params();
  cfg.sampler.validate();
  return cfg;
}

std::string canonical_config(const RunConfig& cfg) {
  json j;
  j["model"] = {{"n_sites", cfg.n_sites},
                {"epsilon", cfg.params().epsilon()},
                {"macro_length", cfg.macro_length},
                {"height_mode", cfg.mode == HeightMode::discrete ? "discrete" : "continuous"}};
  j["potential"] = potential_json(cfg.potential);
  j["boundary"] = {{"xi_left", cfg.xi_left}, {"xi_right", cfg.xi_right}, {"endpoint", cfg.endpoint}};
  json s = {{"seed", cfg.sampler.seed},     {"n_samples", cfg.sampler.n_samples},
            {"sweeps", cfg.sampler.sweeps}, {"burn_in", cfg.sampler.burn_in},
            {"thin", cfg.sampler.thin},     {"chains", cfg.sampler.chains}};
  if (cfg.truncation) s["truncation"] = *cfg.truncation;
  j["sampler"] = s;
  if (cfg.tube) {
    json t = {{"rho", cfg.tube->rho}, {"grad_cut_sd", cfg.tube->grad_cut_sd}, {"mesh", cfg.tube->mesh}};
    if (cfg.tube->max_step) t["max_step"] = *cfg.tube->max_step;
    j["tube"] = t;
  }
  return j.dump();
}

namespace {

// Where artifacts go: files under --out, or stdout when no directory is set.
class Output {
 public:
  Output(std::ostream& out, std::string dir, std::uint64_t hash, std::uint64_t seed)
      : out_(out), dir_(std::move(dir)), hash_(hash), seed_(seed) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }

  bool to_files() const { return !dir_.empty(); }
  std::uint64_t hash() const { return hash_; }
  std::uint64_t seed() const { return seed_; }
  fs::path path(const std::string& name) const { return fs::path(dir_) / name; }

  // CSV body goes after the provenance comment line.
  void csv(const std::string& name, const std::string& body) {
    const std::string text = provenance_line(hash_, seed_) + "\n" + body;
    if (!to_files()) {
      out_ << text;
      return;
    }
    std::ofstream f(path(name), std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::invalid_input, "cannot write " + path(name).string());
    f << text;
    files_.push_back(path(name).string());
  }

  void json_doc(const std::string& name, json doc) {
    json full = {{"config_hash", hex(hash_)}, {"seed", seed_}};
    for (auto& [k, v] : doc.items()) full[k] = v;
    const std::string text = full.dump(2) + "\n";
    if (!to_files()) {
      out_ << text;
      return;
    }
    std::ofstream f(path(name), std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::invalid_input, "cannot write " + path(name).string());
    f << text;
    files_.push_back(path(name).string());
  }

  void add_file(const std::string& p) { files_.push_back(p); }

  // Summary on stdout when writing files.
  void finish(json extra = json::object()) {
    if (!to_files()) return;
    json s = {{"config_hash", hex(hash_)}, {"seed", seed_}, {"files", files_}};
    for (auto& [k, v] : extra.items()) s[k] = v;
    out_ << s.dump() << "\n";
  }

  static std::string hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::ostream& out_;
  std::string dir_;
  std::uint64_t hash_, seed_;
  std::vector<std::string> files_;
};

std::string csv_row(std::initializer_list<double> values) {
  std::string s;
  bool first = true;
  for (double v : values) {
    if (!first) s += ',';
    s += format_double(v);
    first = false;
  }
  return s + "\n";
}

// Samples to a file (CSV or binary) or CSV on stdout.
class SampleOutput {
 public:
  SampleOutput(Output& o, std::ostream& out, const std::string& format, int n_sites)
      : out_(out), n_sites_(n_sites) {
    if (o.to_files()) {
      const std::string name = format == "bin" ? "samples.bin" : "samples.csv";
      writer_ = std::make_unique<SampleWriter>(o.path(name), n_sites, o.hash(), o.seed());
      o.add_file(o.path(name).string());
    } else {
      require(format == "csv", ErrorKind::invalid_input, "binary samples need --out");
      out_ << provenance_line(o.hash(), o.seed()) << "\n";
      for (int k = 0; k < n_sites + 2; ++k) out_ << (k ? "," : "") << "phi_" << k;
      out_ << "\n";
    }
  }
  void write(std::span<const PolymerConfig> batch) {
    if (writer_) {
      writer_->write(batch);
      return;
    }
    for (const auto& phi : batch) {
      for (Eigen::Index k = 0; k < phi.size(); ++k) out_ << (k ? "," : "") << format_double(phi[k]);
      out_ << "\n";
    }
  }
  void close() {
    if (writer_) writer_->close();
  }

 private:
  std::ostream& out_;
  int n_sites_;
  std::unique_ptr<SampleWriter> writer_;
};

std::vector<double> geometric(double lo, double hi, int steps) {
  require(lo > 0 && hi > lo && steps >= 2, ErrorKind::invalid_input,
          "need 0 < rho-min < rho-max and at least 2 steps");
  std::vector<double> v;
  for (int i = 0; i < steps; ++i) v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (steps - 1)));
  return v;
}

ConditionedSpec conditioned_spec(const RunConfig& cfg, double sigma) {
  const ModelParams p = cfg.params();
  const WalkTargets t = map_boundary(cfg.boundary(), p);
  const double scale = sigma * std::sqrt(static_cast<double>(p.n_sites()));
  return {t.x_target / scale, t.y_target / scale};
}

bool exact_bridge_applies(const RunConfig& cfg) {
  return cfg.mode == HeightMode::continuous && cfg.potential.is_gaussian() && !cfg.truncation;
}

// Flags shared by every subcommand; std::nullopt means "keep the config value".
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out_dir;
  std::optional<int> n_sites;
  std::optional<double> epsilon, macro_length, kappa, alpha, half_width;
  std::optional<std::string> mode, potential;
  std::optional<double> xi_left, xi_right, endpoint, truncation;
  std::optional<std::size_t> samples, sweeps, burn_in, thin, chains;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    require(f.good(), ErrorKind::invalid_input, "cannot read config " + o.config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    cfg = parse_run_config(ss.str());
  }
  if (o.n_sites) cfg.n_sites = *o.n_sites;
  if (o.epsilon) cfg.epsilon = *o.epsilon;
  if (o.macro_length) cfg.macro_length = *o.macro_length;
  if (o.mode) cfg.mode = parse_mode(*o.mode);
  if (o.potential || o.kappa || o.alpha || o.half_width) {
    json p = potential_json(cfg.potential);
    if (o.potential) {
      const std::string fam = *o.potential;
      if (fam != p["family"]) {
        p = {{"family", fam}};
        if (fam == "power_law" || fam == "gaussian") p["kappa"] = 1.0;
      }
    }
    if (o.kappa) p["kappa"] = *o.kappa;
    if (o.alpha) p["alpha"] = *o.alpha;
    if (o.half_width) p["half_width"] = *o.half_width;
    cfg.potential = parse_potential(p);
  }
  if (o.xi_left) cfg.xi_left = *o.xi_left;
  if (o.xi_right) cfg.xi_right = *o.xi_right;
  if (o.endpoint) cfg.endpoint = *o.endpoint;
  if (o.truncation) cfg.truncation = *o.truncation;
  if (o.seed) cfg.sampler.seed = *o.seed;
  if (o.workers) cfg.sampler.workers = *o.workers;
  if (o.samples) cfg.sampler.n_samples = *o.samples;
  if (o.sweeps) cfg.sampler.sweeps = *o.sweeps;
  if (o.burn_in) cfg.sampler.burn_in = *o.burn_in;
  if (o.thin) cfg.sampler.thin = *o.thin;
  if (o.chains) cfg.sampler.chains = *o.chains;
  if (o.out_dir) cfg.output_dir = *o.out_dir;
  cfg.params();
  cfg.sampler.validate();
  return cfg;
}

struct CommandArgs {
  std::string format = "csv";
  std::string method = "auto";
  std::string source = "bridge";
  std::vector<double> times;
  std::optional<double> a;
  int points = 101;
  double rho_min = 0.02, rho_max = 0.2;
  int rho_steps = 6;
  double grad_cut = 8.0;
  int mesh = 4;
  std::optional<int> max_step;
  std::string svg;
  std::size_t mc_samples = 0;
  std::string input;
  std::vector<double> rhos, fs;
  std::size_t oracle_sweeps = 1'000'000;
  std::string profile = "quadratic";
  std::vector<double> eps_list;
  double gamma = 1.0, delta = 1.0;
};

void run_sample(const RunConfig& cfg, const CommandArgs& args, Output& o, std::ostream& out) {
  const ModelParams p = cfg.params();
  const auto dist = build_increment_dist(cfg.potential, p, cfg.truncation);
  SampleOutput so(o, out, args.format, p.n_sites());
  stream_free(p, dist, cfg.xi_left, cfg.sampler, [&](std::span<const PolymerConfig> b) { so.write(b); });
  so.close();
  o.finish({{"samples", cfg.sampler.n_samples}});
}

void run_bridge(const RunConfig& cfg, const CommandArgs& args, Output& o, std::ostream& out) {
  const ModelParams p = cfg.params();
  const BoundaryConditions bc = cfg.boundary();
  const bool exact = args.method == "exact" || (args.method == "auto" && exact_bridge_applies(cfg));
  require(args.method == "auto" || args.method == "exact" || args.method == "mcmc",
          ErrorKind::invalid_input, "method must be auto, exact or mcmc");
  SampleOutput so(o, out, args.format, p.n_sites());
  if (exact) {
    stream_gaussian_bridge(p, cfg.potential, bc, cfg.sampler,
                           [&](std::span<const PolymerConfig> b) { so.write(b); });
    so.close();
    o.finish({{"method", "exact"}, {"samples", cfg.sampler.n_samples}});
    return;
  }
  const auto dist = build_increment_dist(cfg.potential, p, cfg.truncation);
  const BridgeMcmc chain(p, cfg.potential, bc, dist);
  std::vector<ChainReport> reports;
  const auto samples = chain.sample(cfg.sampler, &reports);
  so.write(samples);
  so.close();
  json chains = json::array();
  for (const auto& r : reports)
    chains.push_back({{"chain", r.chain},
                      {"site_acceptance", r.site_acceptance},
                      {"collective_acceptance", r.collective_acceptance},
                      {"energy_autocorrelation", r.energy_autocorrelation}});
  if (o.to_files()) o.json_doc("mcmc.json", {{"chains", chains}});
  o.finish({{"method", "mcmc"}, {"samples", samples.size()}});
}

void run_theta_stats(const RunConfig& cfg, const CommandArgs& args, Output& o) {
  const ModelParams p = cfg.params();
  const GridTimes times(args.times.empty() ? std::vector<double>{0.25, 0.5, 0.75} : args.times);
  const auto dist = build_increment_dist(cfg.potential, p, cfg.truncation);
  const double sigma = std::sqrt(dist.sigma2());
  ThetaAccumulator acc(p, times, sigma);
  auto sink = [&](std::span<const PolymerConfig> b) { acc.add(b); };
  ConditionalGaussian theory;
  if (args.source == "free") {
    stream_free(p, dist, 0.0, cfg.sampler, sink);
    // Free walk: theta(t) ~ J(t), unconditioned.
    const Eigen::MatrixXd q = q_matrix(times);
    const auto k = static_cast<Eigen::Index>(times.size());
    theory.mean = Eigen::VectorXd::Zero(k);
    theory.covariance = q.block(1, 1, k, k);
  } else {
    require(args.source == "bridge", ErrorKind::invalid_input, "source must be bridge or free");
    const BoundaryConditions bc = cfg.boundary();
    if (exact_bridge_applies(cfg) && args.method != "mcmc") {
      stream_gaussian_bridge(p, cfg.potential, bc, cfg.sampler, sink);
    } else {
      const BridgeMcmc chain(p, cfg.potential, bc, dist);
      const auto samples = chain.sample(cfg.sampler);
      acc.add(samples);
    }
    theory = conditional_gaussian(times, conditioned_spec(cfg, sigma));
  }
  const SampleMoments m = acc.result();
  std::string body = "t,mean,mean_se,mean_theory,var,var_se,var_theory\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    body += csv_row({times.times()[i], m.mean[k], m.mean_se[k], theory.mean[k], m.covariance(k, k),
                     m.covariance_se(k, k), theory.covariance(k, k)});
  }
  o.csv("theta_stats.csv", body);
  if (o.to_files()) {
    std::vector<std::string> labels;
    for (double t : times.times()) labels.push_back("t=" + format_double(t));
    std::ostringstream cov;
    write_matrix_csv(cov, m.covariance, labels);
    o.csv("theta_cov.csv", cov.str());
  }
  o.finish({{"samples", m.count}});
}

void run_qmatrix(const CommandArgs& args, Output& o) {
  require(!args.times.empty(), ErrorKind::invalid_input, "--times is required");
  const GridTimes times(args.times);
  const Eigen::MatrixXd q = q_matrix(times);
  std::vector<std::string> labels{"w1"};
  for (double t : times.times()) labels.push_back("J(" + format_double(t) + ")");
  labels.push_back("J(1)");
  std::ostringstream s;
  write_matrix_csv(s, q, labels);
  o.csv("qmatrix.csv", s.str());
  o.finish();
}

void run_exact_gauss(const RunConfig& cfg, Output& o) {
  require(cfg.potential.is_gaussian(), ErrorKind::unsupported, "exact-gauss needs a Gaussian potential");
  const int n = cfg.n_sites;
  const double kappa = cfg.potential.kappa(), c = cfg.macro_length;
  const double exact = exact_boundary_density(n, kappa, c, cfg.xi_left, cfg.xi_right);
  const double oracle = mapped_boundary_density(n, kappa, c, cfg.xi_left, cfg.xi_right);
  json doc = {{"n_sites", n},
              {"kappa", kappa},
              {"c", c},
              {"xi_left", cfg.xi_left},
              {"xi_right", cfg.xi_right},
              {"exact_density", exact},
              {"functional_density", oracle},
              {"ratio", exact / oracle}};
  try {
    const double ld = sharp_ld_probability(n, LdBoundary{cfg.xi_left, cfg.xi_right, 0.0}, c,
                                           limit_log_mgf(cfg.potential, HeightMode::continuous, c));
    doc["sharp_ld"] = ld;
    doc["sharp_ld_over_exact"] = ld / exact;
  } catch (const Error& e) {
    doc["sharp_ld_error"] = e.what();
  }
  o.json_doc("exact_gauss.json", doc);
  o.finish();
}

LdBoundary ld_boundary(const RunConfig& cfg, const CommandArgs& args) {
  return {cfg.xi_left, cfg.xi_right, args.a ? *args.a : cfg.endpoint / (cfg.n_sites + 1)};
}

void run_tilts(const RunConfig& cfg, const CommandArgs& args, Output& o) {
  const LogMgf L = limit_log_mgf(cfg.potential, cfg.mode, cfg.macro_length);
  const TiltSolution s = solve_tilts(ld_boundary(cfg, args), cfg.macro_length, L);
  o.json_doc("tilts.json", {{"u_star", s.u_star},
                            {"v_star", s.v_star},
                            {"residual", {s.residual[0], s.residual[1]}},
                            {"det_hessian", s.hessian.determinant()},
                            {"rate", s.rate}});
  o.finish();
}

void run_profile(const RunConfig& cfg, const CommandArgs& args, Output& o) {
  require(args.points >= 2, ErrorKind::invalid_input, "--points must be at least 2");
  const LogMgf L = limit_log_mgf(cfg.potential, cfg.mode, cfg.macro_length);
  const LdBoundary bc = ld_boundary(cfg, args);
  const TiltSolution s = solve_tilts(bc, cfg.macro_length, L);
  std::string body = "t,profile\n";
  for (int i = 0; i < args.points; ++i) {
    const double t = static_cast<double>(i) / (args.points - 1);
    body += csv_row({t, mean_profile(t, bc, cfg.macro_length, L, s)});
  }
  o.csv("profile.csv", body);
  o.finish();
}

void run_confine(const RunConfig& cfg, const CommandArgs& args, Output& o) {
  const ModelParams p = cfg.params();
  const auto rhos = geometric(args.rho_min, args.rho_max, args.rho_steps);
  struct Row {
    double rho, f, lambda, mesh_delta, cut_delta;
    std::size_t states;
  };
  const auto rows = parallel_map<Row>(rhos.size(), cfg.sampler.workers, [&](std::size_t i) {
    const TubeSpec tube = make_tube(p, cfg.potential, rhos[i], args.grad_cut, args.mesh, args.max_step);
    const FreeEnergy fe = free_energy(build_transfer(p, cfg.potential, tube), p);
    Row r{rhos[i], fe.value, fe.lambda_max, 0.0, 0.0, fe.states};
    if (!p.discrete()) {
      const TubeSpec coarse = make_tube(p, cfg.potential, rhos[i], args.grad_cut,
                                        std::max(1, args.mesh / 2), args.max_step);
      r.mesh_delta = fe.value - free_energy(build_transfer(p, cfg.potential, coarse), p).value;
    }
    TubeSpec wide = tube;
    wide.grad_cut *= 1.5;
    r.cut_delta = std::abs(free_energy(build_transfer(p, cfg.potential, wide), p).value - fe.value) /
                  fe.value;
    return r;
  });
  std::string body = "rho,F,lambda_max,states,mesh_delta\n";
  std::vector<double> fs;
  double worst_cut = 0;
  bool decreasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    body += format_double(r.rho) + "," + format_double(r.f) + "," + format_double(r.lambda) + "," +
            std::to_string(r.states) + "," + format_double(r.mesh_delta) + "\n";
    fs.push_back(r.f);
    worst_cut = std::max(worst_cut, r.cut_delta);
    if (i > 0) decreasing = decreasing && r.f < rows[i - 1].f;
  }
  o.csv("confine.csv", body);
  json fit_doc = {{"points", rows.size()}, {"strictly_decreasing", decreasing},
                  {"grad_cut_relative_change", worst_cut}};
  if (rhos.size() >= 5 && rhos.back() >= 10 * rhos.front() * (1 - 1e-12)) {
    const PowerFit fit = exponent_fit(rhos, fs);
    fit_doc["slope"] = fit.slope;
    fit_doc["intercept"] = fit.intercept;
    fit_doc["r2"] = fit.r2;
    json local = json::array();
    for (std::size_t i = 1; i < rhos.size(); ++i)
      local.push_back(std::log(fs[i] / fs[i - 1]) / std::log(rhos[i] / rhos[i - 1]));
    fit_doc["local_slopes"] = local;
  } else {
    fit_doc["fit_skipped"] = "need at least 5 points spanning a decade";
  }
  if (args.mc_samples > 0) {
    json mc = json::array();
    std::optional<double> trunc = cfg.truncation;
    if (!trunc && args.max_step) trunc = *args.max_step / p.epsilon();
    const auto dist = build_increment_dist(cfg.potential, p, trunc);
    ChainSettings s = cfg.sampler;
    s.n_samples = args.mc_samples;
    for (double rho : rhos) {
      const TubeSpec tube = make_tube(p, cfg.potential, rho, args.grad_cut, args.mesh, args.max_step);
      const auto est = mc_survival(p, dist, tube, s);
      const double ps = path_probability(build_transfer(p, cfg.potential, tube), p);
      mc.push_back({{"rho", rho}, {"mc", est.estimate}, {"stderr", est.stderr_},
                    {"underflow", est.underflow}, {"path_probability", ps}});
    }
    fit_doc["survival"] = mc;
  }
  o.json_doc("fit.json", fit_doc);
  if (!args.svg.empty()) {
    fs::path svg_path = args.svg;
    if (o.to_files() && svg_path.is_relative()) svg_path = o.path(args.svg);
    std::ofstream f(svg_path);
    require(f.good(), ErrorKind::invalid_input, "cannot write " + svg_path.string());
    std::vector<PlotSeries> series{{"F(rho)", rhos, fs}};
    std::vector<double> ref;
    for (double r : rhos) ref.push_back(fs.front() * std::pow(r / rhos.front(), -2.0 / 3.0));
    series.push_back({"rho^(-2/3)", rhos, ref, "#d62728", false});
    write_svg_plot(f, series, {"confined free energy", "rho", "F", true, true});
    o.add_file(svg_path.string());
  }
  o.finish();
}

void run_exponent_fit(const CommandArgs& args, Output& o) {
  std::vector<double> rhos = args.rhos, fs = args.fs;
  if (!args.input.empty()) {
    const Eigen::MatrixXd m = read_samples(args.input);
    require(m.cols() >= 2, ErrorKind::invalid_input, "input needs columns rho,F");
    rhos.clear();
    fs.clear();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      rhos.push_back(m(i, 0));
      fs.push_back(m(i, 1));
    }
  }
  const PowerFit fit = exponent_fit(rhos, fs);
  o.json_doc("exponent_fit.json", {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}});
  o.finish();
}

bool run_oracle_check(const RunConfig& cfg, const CommandArgs& args, Output& o) {
  const auto checks = run_oracle_sweep(cfg.sampler.workers, cfg.sampler.seed, args.oracle_sweeps);
  json list = json::array();
  bool all = true;
  for (const auto& c : checks) {
    list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    all = all && c.passed;
  }
  o.json_doc("oracle_check.json", {{"all_passed", all}, {"checks", list}});
  o.finish();
  return all;
}

void run_continuum_check(const RunConfig& cfg, const CommandArgs& args, Output& o) {
  ContinuumProfile cp;
  cp.length = cfg.macro_length;
  cp.gamma = args.gamma;
  cp.delta = args.delta;
  if (args.profile == "quadratic") {
    cp.f = [](double x) { return x * x; };
    cp.f_second = [](double) { return 2.0; };
  } else if (args.profile == "cubic") {
    cp.f = [](double x) { return x * x * x; };
    cp.f_second = [](double x) { return 6 * x; };
  } else if (args.profile == "sine") {
    cp.f = [](double x) { return std::sin(x); };
    cp.f_second = [](double x) { return -std::sin(x); };
  } else {
    throw Error(ErrorKind::invalid_input, "profile must be quadratic, cubic or sine");
  }
  const std::vector<double> eps =
      args.eps_list.empty() ? std::vector<double>{0.1, 0.05, 0.025, 0.0125} : args.eps_list;
  const auto rows = continuum_energy_check(cp, cfg.potential, eps);
  std::string body = "epsilon,n_sites,discrete_energy,continuum_energy,error\n";
  for (const auto& r : rows)
    body += format_double(r.epsilon) + "," + std::to_string(r.n_sites) + "," +
            format_double(r.discrete_energy) + "," + format_double(r.continuum_energy) + "," +
            format_double(r.error) + "\n";
  o.csv("continuum_check.csv", body);
  o.finish();
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete semiflexible polymer toolkit", "sflex"};
  app.fallthrough();
  app.require_subcommand(1);
  Overrides ov;
  CommandArgs args;
  app.add_option("--config", ov.config_path, "JSON run configuration");
  app.add_option("--seed", ov.seed, "master seed");
  app.add_option("--workers", ov.workers, "worker threads");
  app.add_option("--out", ov.out_dir, "output directory (stdout when absent)");
  app.add_option("--n", ov.n_sites, "lattice size N");
  app.add_option("--eps", ov.epsilon, "lattice spacing");
  app.add_option("--c", ov.macro_length, "macroscopic length");
  app.add_option("--mode", ov.mode, "continuous|discrete");
  app.add_option("--potential", ov.potential, "gaussian|power_law|flat");
  app.add_option("--kappa", ov.kappa, "stiffness");
  app.add_option("--alpha", ov.alpha, "power-law exponent");
  app.add_option("--half-width", ov.half_width, "flat potential half-width");
  app.add_option("--xi-left", ov.xi_left, "left boundary gradient");
  app.add_option("--xi-right", ov.xi_right, "right boundary gradient (enters as -xi_right)");
  app.add_option("--endpoint", ov.endpoint, "phi_{N+1}");
  app.add_option("--truncation", ov.truncation, "increment cutoff M");

  auto sampling_flags = [&](CLI::App* s) {
    s->add_option("--samples", ov.samples, "number of exact samples");
    s->add_option("--sweeps", ov.sweeps, "MCMC sweeps per chain");
    s->add_option("--burn-in", ov.burn_in, "MCMC burn-in sweeps");
    s->add_option("--thin", ov.thin, "MCMC thinning");
    s->add_option("--chains", ov.chains, "MCMC chains");
  };
  auto* sample = app.add_subcommand("sample", "free-measure samples");
  sampling_flags(sample);
  sample->add_option("--format", args.format, "csv|bin")->check(CLI::IsMember({"csv", "bin"}));
  auto* bridge = app.add_subcommand("bridge", "pinned-measure samples");
  sampling_flags(bridge);
  bridge->add_option("--format", args.format, "csv|bin")->check(CLI::IsMember({"csv", "bin"}));
  bridge->add_option("--method", args.method, "auto|exact|mcmc")->check(CLI::IsMember({"auto", "exact", "mcmc"}));
  auto* theta = app.add_subcommand("theta-stats", "empirical theta_N moments against theory");
  sampling_flags(theta);
  theta->add_option("--times", args.times, "grid times in (0,1)")->delimiter(',');
  theta->add_option("--source", args.source, "bridge|free")->check(CLI::IsMember({"bridge", "free"}));
  theta->add_option("--method", args.method, "auto|mcmc")->check(CLI::IsMember({"auto", "mcmc"}));
  auto* qm = app.add_subcommand("qmatrix", "covariance of (w1, J(t_1..t_k), J(1))");
  qm->add_option("--times", args.times, "grid times in (0,1)")->delimiter(',');
  auto* eg = app.add_subcommand("exact-gauss", "closed-form Gaussian boundary density");
  auto* tilts = app.add_subcommand("tilts", "optimal tilts and rate");
  tilts->add_option("--a", args.a, "macroscopic endpoint slope (default endpoint/(N+1))");
  auto* profile = app.add_subcommand("profile", "conditional mean profile");
  profile->add_option("--a", args.a, "macroscopic endpoint slope (default endpoint/(N+1))");
  profile->add_option("--points", args.points, "number of t points");
  auto* confine = app.add_subcommand("confine", "tube free energy sweep");
  confine->add_option("--rho-min", args.rho_min);
  confine->add_option("--rho-max", args.rho_max);
  confine->add_option("--rho-steps", args.rho_steps);
  confine->add_option("--grad-cut", args.grad_cut, "gradient cutoff in standard deviations");
  confine->add_option("--mesh", args.mesh, "grid points per step standard deviation");
  confine->add_option("--max-step", args.max_step, "discrete |Delta phi| bound");
  confine->add_option("--svg", args.svg, "log-log plot file");
  confine->add_option("--mc-samples", args.mc_samples, "direct survival samples per rho");
  auto* ef = app.add_subcommand("exponent-fit", "log-log fit of F against rho");
  ef->add_option("--input", args.input, "CSV with columns rho,F");
  ef->add_option("--rho", args.rhos)->delimiter(',');
  ef->add_option("--F", args.fs)->delimiter(',');
  auto* oc = app.add_subcommand("oracle-check", "desk-scale validation sweep");
  oc->add_option("--sweeps", args.oracle_sweeps, "MCMC sweeps for the marginal check");
  auto* cc = app.add_subcommand("continuum-check", "discrete vs continuum energy");
  cc->add_option("--profile", args.profile, "quadratic|cubic|sine");
  cc->add_option("--eps", args.eps_list, "lattice spacings")->delimiter(',');
  cc->add_option("--gamma", args.gamma);
  cc->add_option("--delta", args.delta);

  if (argc <= 1) {
    err << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    const RunConfig cfg = resolve(ov);
    CLI::App* sub = app.get_subcommands().front();
    if (cfg.tube) {
      if (!confine->count("--grad-cut")) args.grad_cut = cfg.tube->grad_cut_sd;
      if (!confine->count("--mesh")) args.mesh = cfg.tube->mesh;
      if (!confine->count("--max-step")) args.max_step = cfg.tube->max_step;
    }
    if (sub == qm && args.times.empty()) {
      err << "error: --times is required\n";
      return 2;
    }
    const std::string identity =
        canonical_config(cfg) + "\n" + sub->get_name() + "\n" + sub->config_to_str(true, false);
    Output o(out, cfg.output_dir, fnv1a64(identity), cfg.sampler.seed);
    if (sub == sample) run_sample(cfg, args, o, out);
    else if (sub == bridge) run_bridge(cfg, args, o, out);
    else if (sub == theta) run_theta_stats(cfg, args, o);
    else if (sub == qm) run_qmatrix(args, o);
    else if (sub == eg) run_exact_gauss(cfg, o);
    else if (sub == tilts) run_tilts(cfg, args, o);
    else if (sub == profile) run_profile(cfg, args, o);
    else if (sub == confine) run_confine(cfg, args, o);
    else if (sub == ef) run_exponent_fit(args, o);
    else if (sub == oc) return run_oracle_check(cfg, args, o) ? 0 : 1;
    else if (sub == cc) run_continuum_check(cfg, args, o);
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sflex
