#pragma once

#include <string>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/mobility.hpp"

namespace rcm {

/// One (n, omega, seed) cell of a homogenization sweep.
struct SweepRecord {
  std::int64_t n = 0;
  double omega = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;           // set when the cell's solve failed
  MobilityMatrix sigma;        // valid when ok
  std::vector<double> avg_c;   // per half direction, cell mean of c
  std::vector<double> avg_c2;  // and of c^2
  // a-priori bound diagnostics (omega > 0 cells): worst corrector norm
  // and Dirichlet energy over the d directions; stay bounded along n
  double theta_l2 = 0.0;
  double theta_energy = 0.0;
};

/// Runs every (n, omega, seed) cell. Each seed indexes one fixed
/// realization: sampling is box independent, so all n periodize the same
/// field. Individual failures are recorded and the sweep continues.
/// Records come back sorted by (n, omega, seed).
std::vector<SweepRecord> n_sweep(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                                 const std::vector<std::int64_t>& ns,
                                 const std::vector<double>& omegas,
                                 const std::vector<std::uint64_t>& seeds,
                                 const SolveConfig& cfg, int jobs = 1);

/// Environment viewed from the particle, restricted to the finite set of
/// translations of a periodic pattern. rate(s, fi) indexes the full jump
/// set (half directions first, then their negations), and shift(s, fi) is
/// the translated state.
struct EnvChain {
  Neighborhood nbhd;
  ivec periods;
  std::size_t n_states = 0;
  std::vector<double> rates;                      // n_states x n_full
  std::vector<std::vector<std::uint32_t>> shift;  // per full direction
  std::vector<std::vector<double>> drift;         // [k][state]

  double rate(std::size_t s, int fi) const {
    return rates[s * static_cast<std::size_t>(2 * nbhd.n_half()) + fi];
  }
};

EnvChain make_env_chain(const Periodic& pattern, const Neighborhood& nbhd);

/// Limiting mobility matrix of a finite-period environment, computed
/// exactly on the environment chain: solve (i omega - L) Theta_k = gamma_k
/// over the pattern translations and assemble
/// sigma[j][k] = sum_z E[c_z] z_j z_k - 2 <gamma_j, Theta_k> under the
/// uniform law on states. omega = 0 goes through the deflated
/// (pseudoinverse) solve.
MobilityMatrix periodic_exact_sigma(const Periodic& pattern, const Neighborhood& nbhd,
                                    double omega);

/// Per-(omega, entry) cross-seed statistics along the n chain.
struct EntrySeries {
  int j = 0, k = 0;
  std::vector<double> mean_re, std_re, mean_im, std_im;  // per n
  std::vector<double> diff_re, diff_im;  // |mean_{n_{i+1}} - mean_{n_i}|
  bool monotone_shrinking = false;
};

struct ConvergenceReport {
  std::vector<std::int64_t> ns;
  std::vector<double> omegas;
  std::vector<std::vector<EntrySeries>> series;  // [omega][entry]
  bool all_monotone = false;
};

/// Summarizes a sweep: cross-seed mean and sample standard deviation per
/// n, successive differences of the means, and a MONOTONE_SHRINKING flag
/// per entry when both sequences decrease (within a small tolerance).
ConvergenceReport convergence_report(const std::vector<SweepRecord>& records);

}  // namespace rcm
