// Command-line front end: mobility matrices, homogenization sweeps,
// identity validation, dense oracles and Floquet diagnostics from one
// declarative JSON config.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcm/config.hpp"
#include "rcm/homogenize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rcm::ConfigError("config", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string omega_tag(double w) {
  std::ostringstream os;
  os << w;
  std::string s = os.str();
  for (char& c : s)
    if (c == '.' || c == '+') c = 'p';
  return s;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string format;
  int jobs = 1;
};

rcm::RunConfig load_config(const CommonArgs& args) {
  rcm::RunConfig cfg = args.config_path.empty()
                           ? rcm::RunConfig::defaults()
                           : rcm::RunConfig::parse(read_file(args.config_path));
  if (!args.out_dir.empty()) cfg.output.dir = args.out_dir;
  if (!args.format.empty()) {
    if (args.format != "csv" && args.format != "json")
      throw rcm::ConfigError("output.format", "must be csv or json");
    cfg.output.format = args.format;
  }
  return cfg;
}

void write_sigma_files(const rcm::RunConfig& cfg, const rcm::MobilityMatrix& sigma,
                       std::uint64_t seed, const std::string& prefix,
                       const std::string& stamp) {
  const std::string hash = cfg.hash();
  std::ostringstream name;
  name << prefix << "_n" << sigma.n << "_w" << omega_tag(sigma.omega) << "_s" << seed;
  const fs::path base = fs::path(cfg.output.dir) / name.str();
  if (cfg.output.format == "json")
    write_file(base.string() + ".json", mobility_record_json(sigma, seed, hash, stamp));
  else
    write_file(base.string() + ".csv", mobility_record_csv(sigma, seed, hash, stamp));
}

int cmd_mobility(const CommonArgs& args, bool dense_oracle) {
  rcm::RunConfig cfg = load_config(args);
  rcm::SolveConfig solver = cfg.solver;
  if (dense_oracle) solver.method = rcm::SolveMethod::dense;
  const std::string stamp = rcm::iso_timestamp();
  const std::string prefix = dense_oracle ? "oracle" : "mobility";
  for (std::int64_t n : cfg.ns) {
    for (std::uint64_t seed : cfg.seeds) {
      rcm::EnvironmentSpec env = cfg.env;
      env.seed = seed;
      const rcm::TorusModel model = rcm::make_torus(env, cfg.nbhd, n);
      for (double w : cfg.omegas) {
        const rcm::MobilityMatrix sigma =
            w > 0.0 ? rcm::mobility_matrix(model, w, solver)
                    : rcm::diffusion_matrix(model, solver);
        write_sigma_files(cfg, sigma, seed, prefix, stamp);
      }
    }
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const rcm::RunConfig cfg = load_config(args);
  const std::string stamp = rcm::iso_timestamp();
  const auto records =
      rcm::n_sweep(cfg.env, cfg.nbhd, cfg.ns, cfg.omegas, cfg.seeds, cfg.solver, args.jobs);
  write_file(fs::path(cfg.output.dir) / "sweep.csv",
             rcm::sweep_csv(records, cfg.hash(), stamp));
  const auto report = rcm::convergence_report(records);
  write_file(fs::path(cfg.output.dir) / "sweep_summary.json",
             rcm::convergence_report_json(report, cfg.hash(), stamp));
  int failures = 0;
  for (const auto& r : records)
    if (!r.ok) ++failures;
  if (failures > 0)
    std::cerr << "sweep: " << failures << " cell(s) failed; see sweep.csv\n";
  return 0;
}

int cmd_validate(const CommonArgs& args) {
  const rcm::RunConfig cfg = load_config(args);
  const std::string stamp = rcm::iso_timestamp();
  for (std::int64_t n : cfg.ns) {
    for (std::uint64_t seed : cfg.seeds) {
      rcm::EnvironmentSpec env = cfg.env;
      env.seed = seed;
      const rcm::TorusModel model = rcm::make_torus(env, cfg.nbhd, n);
      for (double w : cfg.omegas) {
        if (!(w > 0.0)) continue;  // identity suite needs a positive frequency
        const double gradient_dev = rcm::gradient_formula_check(model, w, cfg.solver);
        const rcm::QuadraticSplit qs =
            rcm::quadratic_form_split(model, w, cfg.floquet.v, cfg.solver);

        // conjugation: flip the sign of the frequency in the block system
        const rcm::MobilityAssembly fwd = rcm::assemble_mobility(model, w, cfg.solver);
        const rcm::MobilityAssembly bwd = rcm::assemble_mobility(model, -w, cfg.solver);
        double conj_dev = 0.0;
        for (int j = 0; j < model.dim(); ++j)
          for (int k = 0; k < model.dim(); ++k)
            conj_dev = std::max(conj_dev, std::abs(bwd.sigma.at(j, k) -
                                                   std::conj(fwd.sigma.at(j, k))));

        rcm::EnergyIdentityErrors energy;
        for (int k = 0; k < model.dim(); ++k) {
          const auto e = rcm::energy_identity_errors(model, w, fwd.gamma[k], fwd.theta[k]);
          energy.l2_identity = std::max(energy.l2_identity, e.l2_identity);
          energy.dirichlet_identity =
              std::max(energy.dirichlet_identity, e.dirichlet_identity);
        }

        const double T = 2.0 * M_PI / w;
        std::vector<double> times;
        for (int i = 0; i < cfg.floquet.phases; ++i)
          times.push_back(T * i / cfg.floquet.phases);
        rcm::FloquetConfig fcfg{cfg.floquet.steps_per_period, cfg.floquet.power_tol,
                                cfg.floquet.power_max_iter};
        const auto lr = rcm::linear_response_check(model, w, cfg.floquet.v,
                                                   cfg.floquet.lambda, times,
                                                   cfg.solver, fcfg);

        std::ostringstream name;
        name << "validate_n" << n << "_w" << omega_tag(w) << "_s" << seed << ".json";
        write_file(fs::path(cfg.output.dir) / name.str(),
                   rcm::validation_report_json(lr, gradient_dev, qs, conj_dev, energy,
                                               n, seed, cfg.hash(), stamp));
      }
    }
  }
  return 0;
}

int cmd_floquet(const CommonArgs& args) {
  const rcm::RunConfig cfg = load_config(args);
  const std::string stamp = rcm::iso_timestamp();
  for (std::int64_t n : cfg.ns) {
    for (std::uint64_t seed : cfg.seeds) {
      rcm::EnvironmentSpec env = cfg.env;
      env.seed = seed;
      const rcm::TorusModel model = rcm::make_torus(env, cfg.nbhd, n);
      for (double w : cfg.omegas) {
        if (!(w > 0.0)) continue;
        const rcm::DriveSpec drive{w, cfg.floquet.lambda, cfg.floquet.v};
        rcm::PeriodMap pm(model, drive, cfg.floquet.steps_per_period);
        const rcm::Distribution oss =
            rcm::oss_distribution(pm, cfg.floquet.power_tol, cfg.floquet.power_max_iter);
        const double T = drive.period();
        json curve = json::array();
        for (int i = 0; i < cfg.floquet.phases; ++i) {
          const double t = T * i / cfg.floquet.phases;
          curve.push_back({{"t", t},
                           {"v", rcm::mean_velocity(model, drive, oss, t,
                                                    cfg.floquet.steps_per_period)}});
        }
        json out;
        out["tool_version"] = rcm::kToolVersion;
        out["config_hash"] = cfg.hash();
        out["generated_at"] = stamp;
        out["n"] = n;
        out["seed"] = seed;
        out["omega"] = w;
        out["lambda"] = cfg.floquet.lambda;
        out["oss"] = oss.p;
        out["velocity"] = curve;
        std::ostringstream name;
        name << "floquet_n" << n << "_w" << omega_tag(w) << "_s" << seed << ".json";
        write_file(fs::path(cfg.output.dir) / name.str(), out.dump(2) + "\n");
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC mobility of random-conductance walks on discrete tori"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config path");
    sub->add_option("--out", args.out_dir, "output directory (overrides config)");
    sub->add_option("--format", args.format, "csv or json (overrides config)");
    sub->add_option("--jobs", args.jobs, "task parallelism")->check(CLI::PositiveNumber);
  };

  auto* mobility = app.add_subcommand("mobility", "mobility matrix per (n, omega, seed)");
  add_common(mobility);
  auto* sweep = app.add_subcommand("sweep", "homogenization n-sweep with summary");
  add_common(sweep);
  auto* validate = app.add_subcommand("validate", "algebraic identities + linear response");
  add_common(validate);
  auto* oracle = app.add_subcommand("oracle", "dense-solver mobility for cross-checks");
  add_common(oracle);
  auto* floquet = app.add_subcommand("floquet", "oscillatory steady state and velocity curve");
  add_common(floquet);
  auto* defaults = app.add_subcommand("defaults", "print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (defaults->parsed()) {
      std::cout << rcm::RunConfig::defaults().canonical_json() << "\n";
      return 0;
    }
    if (mobility->parsed()) return cmd_mobility(args, false);
    if (oracle->parsed()) return cmd_mobility(args, true);
    if (sweep->parsed()) return cmd_sweep(args);
    if (validate->parsed()) return cmd_validate(args);
    if (floquet->parsed()) return cmd_floquet(args);
  } catch (const rcm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rcm::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rcm::SolveError& e) {
    std::cerr << "numeric failure: " << e.what()
              << " (best residual " << e.best_residual << ")\n";
    return kExitNumeric;
  } catch (const rcm::QuadratureError& e) {
    std::cerr << "numeric failure: " << e.what() << " (tail " << e.tail << ")\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
