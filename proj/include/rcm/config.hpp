#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/floquet.hpp"
#include "rcm/homogenize.hpp"

namespace rcm {

/// Configuration problem; the field name is part of the message so the
/// CLI can point at the offending key.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string f, const std::string& msg)
      : std::runtime_error(f + ": " + msg), field(std::move(f)) {}
};

struct FloquetRunConfig {
  double lambda = 1e-3;
  std::vector<double> v;  // defaults to e_1
  int steps_per_period = 4096;
  int phases = 8;
  double power_tol = 1e-12;
  int power_max_iter = 100000;
};

struct OutputConfig {
  std::string format = "csv";  // csv or json
  std::string dir = "out";
};

/// One declarative run document; everything a subcommand needs.
struct RunConfig {
  int dim = 1;
  Neighborhood nbhd;
  EnvironmentSpec env;
  std::vector<std::int64_t> ns;
  std::vector<double> omegas;
  std::vector<std::uint64_t> seeds;
  SolveConfig solver;
  FloquetRunConfig floquet;
  OutputConfig output;

  static RunConfig defaults();

  /// Parse + validate a JSON document; throws ConfigError naming the
  /// offending field.
  static RunConfig parse(const std::string& text);

  /// Canonical JSON dump (stable key order, 17 significant digits).
  std::string canonical_json() const;

  /// FNV-1a hash of the canonical dump, embedded in every output.
  std::string hash() const;
};

inline constexpr const char* kToolVersion = "0.1.0";

// --- output writers (schemas documented in the README) ---

std::string mobility_record_json(const MobilityMatrix& sigma, std::uint64_t seed,
                                 const std::string& config_hash,
                                 const std::string& generated_at);
std::string mobility_record_csv(const MobilityMatrix& sigma, std::uint64_t seed,
                                const std::string& config_hash,
                                const std::string& generated_at);
std::string sweep_csv(const std::vector<SweepRecord>& records,
                      const std::string& config_hash, const std::string& generated_at);
std::string convergence_report_json(const ConvergenceReport& rep,
                                    const std::string& config_hash,
                                    const std::string& generated_at);
std::string validation_report_json(const LinearResponseResult& lr,
                                   double gradient_dev, const QuadraticSplit& qs,
                                   double conj_dev,
                                   const EnergyIdentityErrors& energy,
                                   std::int64_t n, std::uint64_t seed,
                                   const std::string& config_hash,
                                   const std::string& generated_at);

std::string iso_timestamp();
std::string format_double17(double v);

}  // namespace rcm
