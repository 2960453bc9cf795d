// Command-line front end: runs the packaged experiments from a JSON config
// and writes plot-ready CSV/JSON outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebbb/dynamics.hpp"
#include "ebbb/ensemble.hpp"
#include "ebbb/models.hpp"

using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitConfig = 2;
constexpr int kExitEngine = 3;
// Configurations holding less probability than this are skipped by the
// consistency scan: their jump rates are dominated by the discrete drain of a
// nearly empty state, which the sampler resolves by halving the step.
constexpr double kVerifyFloor = 1e-3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double require_number(const json& block, const std::string& field,
                      const std::string& context) {
  if (!block.contains(field))
    throw ConfigError("missing required field `" + field + "` in " + context);
  if (!block[field].is_number())
    throw ConfigError("field `" + field + "` in " + context + " must be a number");
  return block[field].get<double>();
}

double number_or(const json& block, const std::string& field, double fallback) {
  if (!block.contains(field)) return fallback;
  if (!block[field].is_number())
    throw ConfigError("field `" + field + "` must be a number");
  return block[field].get<double>();
}

struct LoadedConfig {
  json raw;
  std::string experiment;
  int stage = 1;
  ebbb::ExperimentSpec spec;
  ebbb::EnsembleConfig ensemble;
  bool dump_trajectories = false;
  std::string out_dir = "out";
};

LoadedConfig load_config(const std::string& path, std::optional<int> stage_override,
                         std::optional<std::uint64_t> seed_override,
                         std::optional<long long> n_override,
                         std::optional<std::string> out_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  LoadedConfig cfg;
  try {
    in >> cfg.raw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!cfg.raw.contains("experiment") || !cfg.raw["experiment"].is_string())
    throw ConfigError("missing required field `experiment`");
  cfg.experiment = cfg.raw["experiment"].get<std::string>();

  const json params = cfg.raw.value("params", json::object());
  const std::string ctx = "`params`";
  const double eps = require_number(params, "eps", ctx);

  cfg.stage = stage_override.value_or(cfg.raw.value("stage", 1));

  try {
    if (cfg.experiment == "larmor") {
      ebbb::LarmorParams p;
      p.eps = eps;
      p.s = number_or(params, "s", p.s);
      p.mu1 = number_or(params, "mu1", p.mu1);
      p.mu2 = number_or(params, "mu2", p.mu2);
      p.theta1 = number_or(params, "theta1", p.theta1);
      p.phi1 = number_or(params, "phi1", p.phi1);
      p.theta2 = number_or(params, "theta2", p.theta2);
      p.phi2 = number_or(params, "phi2", p.phi2);
      p.m1 = number_or(params, "m1", p.m1);
      p.m2 = number_or(params, "m2", p.m2);
      p.duration = number_or(params, "duration", p.duration);
      cfg.spec = ebbb::build_larmor(p);
    } else if (cfg.experiment == "eprb") {
      ebbb::EprbParams p;
      p.eps = eps;
      p.gamma_alpha_1 = number_or(params, "gamma_alpha_1", p.gamma_alpha_1.real());
      p.gamma_alpha_2 = number_or(params, "gamma_alpha_2", p.gamma_alpha_2.real());
      p.alpha = number_or(params, "alpha", p.alpha);
      p.beta = number_or(params, "beta", p.beta);
      p.n_substeps = static_cast<int>(
          number_or(params, "n_substeps", static_cast<double>(p.n_substeps)));
      if (cfg.stage == 1)
        cfg.spec = ebbb::build_eprb_stage1(p);
      else if (cfg.stage == 2)
        cfg.spec = ebbb::build_eprb_stage2(p, ebbb::eprb_allset_state(p));
      else
        throw ConfigError("field `stage` must be 1 or 2 for experiment `eprb`");
    } else if (cfg.experiment == "surreal") {
      ebbb::SurrealParams p;
      p.eps = eps;
      p.lattice_size = static_cast<int>(
          number_or(params, "lattice_size", static_cast<double>(p.lattice_size)));
      p.width = number_or(params, "width", p.width);
      p.x0 = number_or(params, "x0", p.x0);
      p.p = number_or(params, "p", p.p);
      p.mass = number_or(params, "mass", p.mass);
      p.duration = number_or(params, "duration", p.duration);
      p.single_packet = params.value("single_packet", false);
      const std::string mode = params.value("guidance", "marginal");
      if (mode == "marginal")
        p.guidance = ebbb::Guidance::Marginal;
      else if (mode == "ebbb")
        p.guidance = ebbb::Guidance::Full;
      else
        throw ConfigError("field `guidance` must be `marginal` or `ebbb`");
      cfg.spec = ebbb::build_surreal(p);
    } else {
      throw ConfigError("field `experiment` must be larmor, eprb or surreal");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const json ens = cfg.raw.value("ensemble", json::object());
  cfg.ensemble.n_trajectories =
      n_override.value_or(static_cast<long long>(number_or(ens, "n", 1000)));
  cfg.ensemble.base_seed = seed_override.value_or(
      static_cast<std::uint64_t>(number_or(ens, "seed", 1)));
  cfg.ensemble.record_every = static_cast<int>(number_or(ens, "record_every", 1));
  cfg.ensemble.workers = static_cast<int>(number_or(ens, "workers", 0));
  cfg.dump_trajectories = ens.value("dump_trajectories", false);
  cfg.ensemble.keep_trajectories = true;  // needed for summaries

  if (const char* env = std::getenv("EBBB_THREADS"))
    cfg.ensemble.workers = std::max(1, std::atoi(env));

  const json out = cfg.raw.value("output", json::object());
  cfg.out_dir = out_override.value_or(out.value("dir", std::string("out")));

  if (cfg.ensemble.n_trajectories < 1)
    throw ConfigError("field `n` in `ensemble` must be >= 1");
  if (cfg.ensemble.record_every < 1)
    throw ConfigError("field `record_every` in `ensemble` must be >= 1");
  return cfg;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

void write_probabilities(const LoadedConfig& cfg, const ebbb::EnsembleResult& result,
                         const std::filesystem::path& dir) {
  std::ofstream out(dir / "probabilities.csv");
  out << "time,label,exact,freq,stderr\n";
  const ebbb::EnsembleStats& s = result.stats;
  for (Eigen::Index r = 0; r < s.times.size(); ++r)
    for (Eigen::Index g = 0; g < s.exact.cols(); ++g)
      out << fmt(s.times(r)) << ",\"" << s.labels[static_cast<size_t>(g)] << "\","
          << fmt(s.exact(r, g)) << "," << fmt(s.freq(r, g)) << ","
          << fmt(s.std_error(r, g)) << "\n";
}

void write_trajectories(const LoadedConfig& cfg, const ebbb::EnsembleResult& result,
                        const std::filesystem::path& dir) {
  std::ofstream out(dir / "trajectories.csv");
  const int n_particles = cfg.spec.space.particle_count();
  out << "trajectory,time,label";
  if (cfg.spec.uses_frames)
    for (int i = 0; i < n_particles; ++i)
      out << ",theta" << i + 1 << ",phi_angle" << i + 1;
  out << "\n";
  const ebbb::EnsembleStats& s = result.stats;
  const long long n = s.n_trajectories;
  for (long long k = 0; k < n; ++k)
    for (size_t r = 0; r < result.trajectories.size(); ++r) {
      const std::uint32_t label = result.trajectories[r][static_cast<size_t>(k)];
      out << k << "," << fmt(s.times(static_cast<Eigen::Index>(r))) << ",\""
          << s.labels[label] << "\"";
      if (cfg.spec.uses_frames) {
        const auto x = cfg.spec.space.external_of(static_cast<ebbb::Index>(label));
        const auto& angles = result.frames[r].angles[static_cast<size_t>(x)];
        for (const auto& fit : angles)
          out << "," << fmt(fit.theta) << "," << fmt(fit.phi);
      }
      out << "\n";
    }
}

json correlation_block(const LoadedConfig& cfg, const ebbb::EnsembleResult& result) {
  json block = json::object();
  if (cfg.experiment != "eprb" || cfg.stage != 2) return block;
  const auto& final_labels = result.trajectories.back();
  const char* names[2] = {"alpha", "beta"};
  for (int p1 = 0; p1 < 2; ++p1)
    for (int p2 = 0; p2 < 2; ++p2) {
      const auto est =
          ebbb::spin_correlation(cfg.spec, final_labels, p1, p2);
      const double exact =
          ebbb::exact_spin_correlation(cfg.spec, result.final_state, p1, p2);
      block["C_" + std::string(names[p1]) + "_" + names[p2]] = {
          {"value", est.value}, {"stderr", est.std_error}, {"n", est.count},
          {"exact", exact}};
    }
  for (int particle = 0; particle < 2; ++particle)
    for (int phi = 0; phi < 2; ++phi) {
      const auto est = ebbb::single_spin_mean(cfg.spec, final_labels, particle, phi);
      block["mean_sigma" + std::to_string(particle + 1) + "_" + names[phi]] = {
          {"value", est.value}, {"stderr", est.std_error}, {"n", est.count}};
    }
  return block;
}

void write_summary(const LoadedConfig& cfg, const ebbb::EnsembleResult& result,
                   const std::filesystem::path& dir) {
  json summary;
  summary["version"] = kVersion;
  summary["experiment"] = cfg.experiment;
  summary["stage"] = cfg.stage;
  summary["seed"] = cfg.ensemble.base_seed;
  summary["n_trajectories"] = cfg.ensemble.n_trajectories;
  summary["workers"] = cfg.ensemble.workers;
  summary["config"] = cfg.raw;
  summary["consistency"] = {{"halvings", result.halvings},
                            {"max_halving_depth", result.max_halving_depth}};
  summary["warnings"] = cfg.spec.warnings;
  summary["correlations"] = correlation_block(cfg, result);
  std::ofstream out(dir / "summary.json");
  out << summary.dump(2) << "\n";
}

int cmd_run(const LoadedConfig& cfg) {
  for (const std::string& w : cfg.spec.warnings) std::cerr << "warning: " << w << "\n";
  ebbb::EnsembleResult result;
  try {
    result = ebbb::run_ensemble(cfg.spec, cfg.ensemble);
  } catch (const std::exception& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return kExitEngine;
  }
  std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::cerr << "config error: cannot create output directory `" << cfg.out_dir
              << "`: " << ec.message() << "\n";
    return kExitConfig;
  }
  write_probabilities(cfg, result, dir);
  if (cfg.dump_trajectories) write_trajectories(cfg, result, dir);
  write_summary(cfg, result, dir);
  std::cout << "wrote " << (dir / "probabilities.csv").string() << " and "
            << (dir / "summary.json").string() << "\n";
  return 0;
}

int cmd_verify(const LoadedConfig& cfg) {
  using namespace ebbb;
  const ExperimentSpec& spec = cfg.spec;
  bool ok = true;
  auto check = [&ok](bool pass, const std::string& what) {
    std::cout << (pass ? "pass" : "FAIL") << "  " << what << "\n";
    if (!pass) ok = false;
  };

  check(is_normalized(spec.initial_state), "initial state normalized");
  for (const Stage& stage : spec.schedule) {
    check(is_unitary(stage.unitary), "stage `" + stage.label + "` unitary");
    check(is_unitary(stage.substep), "stage `" + stage.label + "` sub-step unitary");
    Matrix acc = Matrix::Identity(stage.substep.rows(), stage.substep.cols());
    for (int k = 0; k < stage.n_substeps; ++k) acc = stage.substep * acc;
    check(max_abs(Matrix(acc - stage.unitary)) < 1e-8,
          "stage `" + stage.label + "` sub-steps compose to the stage operator");
  }

  // Jump-probability consistency scan along the exact evolution, without
  // step-size adaptation: for every occupied label, the jump probabilities
  // out of it must not exceed one.
  const auto groups = spec.guidance == Guidance::Marginal
                          ? external_groups(spec.space)
                          : singleton_groups(spec.space.total_dim());
  Vector psi = spec.initial_state;
  BasisFrame frame_t;
  if (spec.uses_frames) {
    const BasisFrame seed = identity_frame(spec.space);
    frame_t = build_frame(psi, spec.space, spec.spin_ops, spec.fit_mode, &seed);
  }
  long long step = 0, violations = 0, first_violation = -1;
  double worst = 0.0;
  for (const Stage& stage : spec.schedule) {
    for (int sub = 0; sub < stage.n_substeps; ++sub) {
      BasisFrame frame_next;
      Matrix w_t, w_next;
      if (spec.uses_frames) {
        frame_next = build_frame(Vector(stage.substep * psi), spec.space,
                                 spec.spin_ops, spec.fit_mode, &frame_t);
        w_t = frame_matrix(spec.space, frame_t);
        w_next = frame_matrix(spec.space, frame_next);
      }
      const StageStepper stepper(stage.substep, std::move(w_t), std::move(w_next),
                                 psi, groups);
      for (size_t g = 0; g < groups.size(); ++g) {
        double p = 0.0;
        for (Index n : groups[g]) p += std::norm(stepper.psi_rep_t()(n));
        if (p <= kVerifyFloor) continue;
        try {
          jump_distribution(stepper.psi_rep_next(), stepper.substep_rep(),
                            stepper.psi_rep_t(), groups, static_cast<Index>(g));
        } catch (const ConsistencyViolation& e) {
          ++violations;
          worst = std::max(worst, e.total);
          if (first_violation < 0) first_violation = step;
        }
      }
      psi = stepper.psi_next();
      if (spec.uses_frames) frame_t = std::move(frame_next);
      ++step;
    }
  }
  if (violations == 0) {
    check(true, "jump-probability consistency along the exact evolution");
  } else {
    std::ostringstream msg;
    msg << "jump-probability consistency: " << violations
        << " violations, first at time index " << first_violation
        << " (worst total " << worst << ")";
    check(false, msg.str());
  }
  std::cout << (ok ? "verification passed" : "verification FAILED") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic quantum-trajectory simulator for discrete systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> stage;
  std::optional<std::uint64_t> seed;
  std::optional<long long> n;
  std::optional<std::string> out_dir;

  CLI::App* run = app.add_subcommand("run", "run an experiment and write outputs");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--stage", stage, "override experiment stage");
  run->add_option("--seed", seed, "override ensemble base seed");
  run->add_option("--n", n, "override ensemble size");
  run->add_option("--out", out_dir, "override output directory");

  CLI::App* verify = app.add_subcommand("verify", "check invariants without sampling");
  verify->add_option("config", config_path, "JSON config file")->required();
  verify->add_option("--stage", stage, "override experiment stage");

  CLI11_PARSE(app, argc, argv);

  LoadedConfig cfg;
  try {
    cfg = load_config(config_path, stage, seed, n, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(cfg);
    return cmd_verify(cfg);
  } catch (const std::exception& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return kExitEngine;
  }
}
