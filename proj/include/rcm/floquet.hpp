#pragma once

#include <cstdint>
#include <vector>

#include "rcm/mobility.hpp"
#include "rcm/solver.hpp"
#include "rcm/torus.hpp"

namespace rcm {

/// Oscillating drive: rates are multiplied by exp(lambda cos(omega t) z.v).
struct DriveSpec {
  double omega = 1.0;
  double lambda = 0.0;
  std::vector<double> v;

  double period() const { return 2.0 * M_PI / omega; }
  void validate(int dim) const;
};

/// Probability distribution over torus sites.
struct Distribution {
  std::vector<double> p;

  static Distribution uniform(std::size_t n_sites);
  double mass_defect() const;                     // |sum p - 1|
  double tv_distance(const Distribution& q) const;  // (1/2) l1
  void validate() const;                          // mass and positivity
};

/// Driven rates at time t over the full jump set; entry (site, fi) with
/// fi < n_half meaning +z_fi and fi >= n_half meaning -z_{fi - n_half}.
std::vector<double> perturbed_rates(const TorusModel& m, const DriveSpec& drive,
                                    double t);

/// One-period propagator of the forward (master) equation dp/dt = A(t)^T p,
/// integrated with fixed-step RK4. The step count must resolve the
/// stiffness bound: steps >= 10 * T * max total exit rate.
class PeriodMap {
 public:
  PeriodMap(const TorusModel& m, DriveSpec drive, int steps_per_period);

  const TorusModel& model() const { return m_; }
  const DriveSpec& drive() const { return drive_; }
  int steps_per_period() const { return steps_; }

  /// p(0) -> p(T); mass is checked to 1e-10 after the sweep.
  Distribution apply(const Distribution& p) const;

  /// Advance a raw distribution from absolute time t0 by dt.
  void advance(std::vector<double>& p, double t0, double dt) const;

  /// Densified propagator, row-major (row = target site), for small models.
  std::vector<double> dense(std::size_t site_cap = 4096) const;

 private:
  const TorusModel& m_;
  DriveSpec drive_;
  int steps_;
};

/// Unique fixed point of the period map (the oscillatory steady state at
/// phase 0), by power iteration to total-variation tolerance.
Distribution oss_distribution(const PeriodMap& pm, double tol = 1e-12,
                              int max_iter = 100000);

/// Mean instantaneous velocity at time t starting from the phase-0 OSS:
/// V(t) = sum_x p_t(x) sum_z rate_t(x,z) z.
std::vector<double> mean_velocity(const TorusModel& m, const DriveSpec& drive,
                                  const Distribution& oss, double t,
                                  int steps_per_period);

struct FloquetConfig {
  int steps_per_period = 4096;
  double power_tol = 1e-12;
  int power_max_iter = 100000;
};

/// Central-difference response D(t) = [V^{+l}(t) - V^{-l}(t)] / (2 l)
/// against the prediction Re(e^{i w t} sigma(w) v), sampled at the given
/// times. The lambda-attributable part of the deviation is isolated by
/// Richardson differences of D at lambda, lambda/2, lambda/4, so the
/// integrator error cancels; its ratio across the halving is ~4 when the
/// finite difference is genuinely second order.
struct LinearResponseResult {
  double omega = 0.0;
  double lambda = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> fd;         // D(t) at lambda
  std::vector<std::vector<double>> predicted;  // Re(e^{iwt} sigma v)
  double deviation = 0.0;       // max_t ||fd - predicted||_inf at lambda
  double deviation_half = 0.0;  // same at lambda/2
  double lambda_part = 0.0;       // estimated quadratic part at lambda
  double lambda_part_half = 0.0;  // estimated quadratic part at lambda/2
  double lambda_ratio = 0.0;      // lambda_part / lambda_part_half
};
LinearResponseResult linear_response_check(const TorusModel& m, double omega,
                                           const std::vector<double>& v, double lambda,
                                           const std::vector<double>& times,
                                           const SolveConfig& scfg,
                                           const FloquetConfig& fcfg);

/// Monte Carlo cross-check: time-inhomogeneous walk sampled by thinning
/// under a constant majorant rate. Occupation is recorded at the final
/// time; velocities are jump-flux averages over [0, t_end]. With
/// n_phase_bins > 0 the jump flux after t_burn is also binned by drive
/// phase, giving instantaneous-velocity estimates per phase window.
struct WalkStats {
  std::vector<double> occupation;   // empirical distribution at t_end
  std::vector<double> velocity;     // mean displacement / t_end
  std::vector<double> velocity_stderr;
  std::uint64_t n_paths = 0;
  double majorant_rate = 0.0;
  double min_acceptance = 1.0;  // smallest thinning acceptance seen
  double max_acceptance = 0.0;  // largest (must stay <= 1)
  int n_phase_bins = 0;
  double t_burn = 0.0;
  std::vector<std::vector<double>> phase_velocity;         // [bin][dim]
  std::vector<std::vector<double>> phase_velocity_stderr;  // [bin][dim]
};
WalkStats simulate_walk(const TorusModel& m, const DriveSpec& drive, double t_end,
                        std::uint64_t n_paths, std::uint64_t seed, int jobs = 1,
                        int n_phase_bins = 0, double t_burn = 0.0);

}  // namespace rcm
