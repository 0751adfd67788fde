#include "rcm/floquet.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "rcm/numerics.hpp"

namespace rcm {

void DriveSpec::validate(int dim) const {
  if (!(omega > 0.0)) throw ValidationError("drive: omega must be positive");
  if (static_cast<int>(v.size()) != dim)
    throw ValidationError("drive: field direction dimension mismatch");
  if (std::all_of(v.begin(), v.end(), [](double c) { return c == 0.0; }))
    throw ValidationError("drive: field direction must be nonzero");
  if (!std::isfinite(lambda)) throw ValidationError("drive: lambda not finite");
}

Distribution Distribution::uniform(std::size_t n_sites) {
  Distribution d;
  d.p.assign(n_sites, 1.0 / static_cast<double>(n_sites));
  return d;
}

double Distribution::mass_defect() const {
  return std::abs(pairwise_sum(p) - 1.0);
}

double Distribution::tv_distance(const Distribution& q) const {
  return 0.5 * pairwise_reduce(p.size(),
                               [&](std::size_t i) { return std::abs(p[i] - q.p[i]); });
}

void Distribution::validate() const {
  if (mass_defect() > 1e-10) throw ValidationError("distribution: mass not 1");
  for (double x : p)
    if (x < -1e-12) throw ValidationError("distribution: negative entry");
}

namespace {

double zdotv(const ivec& z, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) s += static_cast<double>(z[k]) * v[k];
  return s;
}

// sup over t of the total exit rate, using |cos| <= 1
double majorant_exit_rate(const TorusModel& m, const DriveSpec& drive) {
  const int nh = m.neighborhood().n_half();
  std::vector<double> boost(nh);
  for (int zi = 0; zi < nh; ++zi)
    boost[zi] = std::exp(std::abs(drive.lambda) *
                         std::abs(zdotv(m.neighborhood().half_set[zi], drive.v)));
  double worst = 0.0;
  for (std::size_t s = 0; s < m.n_sites(); ++s) {
    double r = 0.0;
    for (int zi = 0; zi < nh; ++zi)
      r += boost[zi] * (m.cond(s, zi) + m.cond(m.minus(s, zi), zi));
    worst = std::max(worst, r);
  }
  return worst;
}

// master-equation right-hand side at time t
void forward_rhs(const TorusModel& m, const DriveSpec& drive, double t,
                 const std::vector<double>& p, std::vector<double>& dp) {
  const std::size_t n = m.n_sites();
  std::fill(dp.begin(), dp.end(), 0.0);
  const double u = drive.lambda * std::cos(drive.omega * t);
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
    const double za = zdotv(m.neighborhood().half_set[zi], drive.v);
    const double ep = std::exp(u * za);   // rate boost for jumps along +z
    const double em = std::exp(-u * za);  // and along -z
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t sp = m.plus(s, zi);
      const double c = m.cond(s, zi);
      const double fwd = c * ep * p[s];   // s -> s+z
      const double bwd = c * em * p[sp];  // s+z -> s
      dp[s] += bwd - fwd;
      dp[sp] += fwd - bwd;
    }
  }
}

void rk4_sweep(const TorusModel& m, const DriveSpec& drive, std::vector<double>& p,
               double t0, double dt, int nsteps) {
  const std::size_t n = p.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  const double h = dt / nsteps;
  for (int step = 0; step < nsteps; ++step) {
    const double t = t0 + step * h;
    forward_rhs(m, drive, t, p, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
    forward_rhs(m, drive, t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
    forward_rhs(m, drive, t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + h * k3[i];
    forward_rhs(m, drive, t + h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

}  // namespace

std::vector<double> perturbed_rates(const TorusModel& m, const DriveSpec& drive,
                                    double t) {
  drive.validate(m.dim());
  if (t < 0.0) throw ValidationError("perturbed_rates: t must be nonnegative");
  const int nh = m.neighborhood().n_half();
  const std::size_t n = m.n_sites();
  std::vector<double> r(n * static_cast<std::size_t>(2 * nh));
  const double u = drive.lambda * std::cos(drive.omega * t);
  for (int zi = 0; zi < nh; ++zi) {
    const double za = zdotv(m.neighborhood().half_set[zi], drive.v);
    const double ep = std::exp(u * za);
    const double em = std::exp(-u * za);
    for (std::size_t s = 0; s < n; ++s) {
      r[s * static_cast<std::size_t>(2 * nh) + zi] = m.cond(s, zi) * ep;
      // rate along -z reads the symmetric partner edge
      r[s * static_cast<std::size_t>(2 * nh) + nh + zi] =
          m.cond(m.minus(s, zi), zi) * em;
    }
  }
  return r;
}

PeriodMap::PeriodMap(const TorusModel& m, DriveSpec drive, int steps_per_period)
    : m_(m), drive_(std::move(drive)), steps_(steps_per_period) {
  drive_.validate(m.dim());
  const double needed = 10.0 * drive_.period() * majorant_exit_rate(m, drive_);
  if (static_cast<double>(steps_) < needed)
    throw ValidationError("period_map: step count does not resolve the stiffness bound");
}

Distribution PeriodMap::apply(const Distribution& p) const {
  if (p.p.size() != m_.n_sites())
    throw ValidationError("period_map: distribution size mismatch");
  Distribution q = p;
  rk4_sweep(m_, drive_, q.p, 0.0, drive_.period(), steps_);
  if (q.mass_defect() > 1e-10)
    throw SolveError("period_map: mass not preserved", q.mass_defect(), steps_);
  return q;
}

void PeriodMap::advance(std::vector<double>& p, double t0, double dt) const {
  if (dt <= 0.0) return;
  const double h_base = drive_.period() / steps_;
  const int nsteps = std::max(1, static_cast<int>(std::ceil(dt / h_base)));
  rk4_sweep(m_, drive_, p, t0, dt, nsteps);
}

std::vector<double> PeriodMap::dense(std::size_t site_cap) const {
  const std::size_t n = m_.n_sites();
  if (n > site_cap) throw ValidationError("period_map: model exceeds dense cap");
  std::vector<double> P(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    rk4_sweep(m_, drive_, e, 0.0, drive_.period(), steps_);
    for (std::size_t i = 0; i < n; ++i) P[i * n + j] = e[i];
  }
  return P;
}

Distribution oss_distribution(const PeriodMap& pm, double tol, int max_iter) {
  Distribution p = Distribution::uniform(pm.model().n_sites());
  double tv = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Distribution q = pm.apply(p);
    tv = p.tv_distance(q);
    p = std::move(q);
    if (tv <= tol) return p;
  }
  throw SolveError("oss: power iteration did not converge", tv, max_iter);
}

std::vector<double> mean_velocity(const TorusModel& m, const DriveSpec& drive,
                                  const Distribution& oss, double t,
                                  int steps_per_period) {
  drive.validate(m.dim());
  if (t < 0.0 || t > drive.period())
    throw ValidationError("mean_velocity: t must lie in [0, T]");
  PeriodMap pm(m, drive, steps_per_period);
  std::vector<double> p = oss.p;
  pm.advance(p, 0.0, t);

  const int d = m.dim();
  const std::size_t n = m.n_sites();
  std::vector<double> vel(d, 0.0);
  const double u = drive.lambda * std::cos(drive.omega * t);
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
    const ivec& z = m.neighborhood().half_set[zi];
    const double za = zdotv(z, drive.v);
    const double ep = std::exp(u * za);
    const double em = std::exp(-u * za);
    // net flux along +z minus the flux along -z, weighted by p
    const double flux = pairwise_reduce(n, [&](std::size_t s) {
      return p[s] * (m.cond(s, zi) * ep - m.cond(m.minus(s, zi), zi) * em);
    });
    for (int k = 0; k < d; ++k) vel[k] += flux * static_cast<double>(z[k]);
  }
  return vel;
}

namespace {

// D(t) = [V^{+l}(t) - V^{-l}(t)] / (2 l) at each requested time
std::vector<std::vector<double>> central_difference_response(
    const TorusModel& m, double omega, const std::vector<double>& v, double lambda,
    const std::vector<double>& times, const FloquetConfig& fcfg) {
  std::vector<std::vector<double>> D(times.size(), std::vector<double>(m.dim(), 0.0));
  for (int sgn : {+1, -1}) {
    DriveSpec drive{omega, sgn * lambda, v};
    PeriodMap pm(m, drive, fcfg.steps_per_period);
    const Distribution oss = oss_distribution(pm, fcfg.power_tol, fcfg.power_max_iter);

    // walk the sorted times once, advancing incrementally
    std::vector<std::size_t> order(times.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    std::vector<double> p = oss.p;
    double t_cur = 0.0;
    for (std::size_t oi : order) {
      const double t = times[oi];
      if (t > t_cur) {
        pm.advance(p, t_cur, t - t_cur);
        t_cur = t;
      }
      const std::size_t n = m.n_sites();
      const double u = drive.lambda * std::cos(drive.omega * t);
      for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
        const ivec& z = m.neighborhood().half_set[zi];
        const double za = zdotv(z, drive.v);
        const double ep = std::exp(u * za), em = std::exp(-u * za);
        const double flux = pairwise_reduce(n, [&](std::size_t s) {
          return p[s] * (m.cond(s, zi) * ep - m.cond(m.minus(s, zi), zi) * em);
        });
        for (int k = 0; k < m.dim(); ++k)
          D[oi][k] += sgn * flux * static_cast<double>(z[k]) / (2.0 * lambda);
      }
    }
  }
  return D;
}

double max_dev(const std::vector<std::vector<double>>& a,
               const std::vector<std::vector<double>>& b) {
  double dev = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k)
      dev = std::max(dev, std::abs(a[i][k] - b[i][k]));
  return dev;
}

}  // namespace

LinearResponseResult linear_response_check(const TorusModel& m, double omega,
                                           const std::vector<double>& v, double lambda,
                                           const std::vector<double>& times,
                                           const SolveConfig& scfg,
                                           const FloquetConfig& fcfg) {
  if (!(lambda > 0.0)) throw ValidationError("linear_response: lambda must be positive");
  DriveSpec{omega, lambda, v}.validate(m.dim());
  for (double t : times)
    if (t < 0.0 || t >= 2.0 * M_PI / omega)
      throw ValidationError("linear_response: times must sample [0, T)");

  const MobilityMatrix sigma = mobility_matrix(m, omega, scfg);

  LinearResponseResult res;
  res.omega = omega;
  res.lambda = lambda;
  res.times = times;
  res.predicted.assign(times.size(), std::vector<double>(m.dim(), 0.0));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::complex<double> phase(std::cos(omega * times[i]),
                                     std::sin(omega * times[i]));
    for (int j = 0; j < m.dim(); ++j) {
      std::complex<double> acc = 0.0;
      for (int k = 0; k < m.dim(); ++k) acc += sigma.at(j, k) * v[k];
      res.predicted[i][j] = (phase * acc).real();
    }
  }

  const auto D1 = central_difference_response(m, omega, v, lambda, times, fcfg);
  const auto D2 = central_difference_response(m, omega, v, lambda / 2.0, times, fcfg);
  const auto D4 = central_difference_response(m, omega, v, lambda / 4.0, times, fcfg);

  res.fd = D1;
  res.deviation = max_dev(D1, res.predicted);
  res.deviation_half = max_dev(D2, res.predicted);
  // quadratic-in-lambda part via Richardson differences: D_l - D_{l/2}
  // equals (3/4) A l^2 up to O(l^4), with the integrator bias cancelling
  res.lambda_part = (4.0 / 3.0) * max_dev(D1, D2);
  res.lambda_part_half = (4.0 / 3.0) * max_dev(D2, D4);
  res.lambda_ratio =
      res.lambda_part_half > 0.0 ? res.lambda_part / res.lambda_part_half : 0.0;
  return res;
}

namespace {

struct SplitMix {
  std::uint64_t s;
  std::uint64_t next() {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = s;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  double unit() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }
};

struct WalkBlockStats {
  std::vector<std::uint64_t> counts;
  std::vector<double> disp_sum;   // per dimension
  std::vector<double> disp_sum2;  // per dimension, of per-path velocity squares
  std::vector<double> phase_sum;   // [bin*d + k], per-path phase velocities
  std::vector<double> phase_sum2;  // same, squared
  double min_acc = 1.0, max_acc = 0.0;
};

WalkBlockStats run_walk_block(const TorusModel& m, const DriveSpec& drive, double t_end,
                              std::uint64_t first_path, std::uint64_t n_paths,
                              std::uint64_t seed, double R, int n_bins, double t_burn) {
  const int d = m.dim();
  const int nh = m.neighborhood().n_half();
  WalkBlockStats st;
  st.counts.assign(m.n_sites(), 0);
  st.disp_sum.assign(d, 0.0);
  st.disp_sum2.assign(d, 0.0);
  st.phase_sum.assign(static_cast<std::size_t>(std::max(0, n_bins)) * d, 0.0);
  st.phase_sum2.assign(st.phase_sum.size(), 0.0);

  const double T = drive.period();
  // exposure time of each phase bin in (t_burn, t_end]
  const double bin_exposure =
      n_bins > 0 ? (t_end - t_burn) / static_cast<double>(n_bins) : 0.0;

  std::vector<double> rates(2 * nh);
  std::vector<double> path_phase(st.phase_sum.size());
  for (std::uint64_t pi = 0; pi < n_paths; ++pi) {
    SplitMix rng{seed ^ (0x94d049bb133111ebULL * (first_path + pi + 1))};
    rng.next();
    std::size_t x = static_cast<std::size_t>(rng.next() % m.n_sites());
    std::vector<double> disp(d, 0.0);
    std::fill(path_phase.begin(), path_phase.end(), 0.0);
    double t = 0.0;
    while (true) {
      t += -std::log(rng.unit()) / R;
      if (t > t_end) break;
      const double u = drive.lambda * std::cos(drive.omega * t);
      double tot = 0.0;
      for (int zi = 0; zi < nh; ++zi) {
        const double za = zdotv(m.neighborhood().half_set[zi], drive.v);
        rates[zi] = m.cond(x, zi) * std::exp(u * za);
        rates[nh + zi] = m.cond(m.minus(x, zi), zi) * std::exp(-u * za);
        tot += rates[zi] + rates[nh + zi];
      }
      const double acc = tot / R;
      st.min_acc = std::min(st.min_acc, acc);
      st.max_acc = std::max(st.max_acc, acc);
      const double draw = rng.unit() * R;
      if (draw >= tot) continue;  // thinning: phantom event
      double cum = 0.0;
      int chosen = 2 * nh - 1;
      for (int fi = 0; fi < 2 * nh; ++fi) {
        cum += rates[fi];
        if (draw < cum) {
          chosen = fi;
          break;
        }
      }
      const int zi = chosen % nh;
      const ivec& z = m.neighborhood().half_set[zi];
      const double sgn = chosen < nh ? 1.0 : -1.0;
      x = chosen < nh ? m.plus(x, zi) : m.minus(x, zi);
      for (int k = 0; k < d; ++k) disp[k] += sgn * static_cast<double>(z[k]);
      if (n_bins > 0 && t >= t_burn) {
        const double phase = std::fmod(t, T) / T;
        const int bin = std::min(n_bins - 1, static_cast<int>(phase * n_bins));
        for (int k = 0; k < d; ++k)
          path_phase[static_cast<std::size_t>(bin) * d + k] +=
              sgn * static_cast<double>(z[k]);
      }
    }
    ++st.counts[x];
    for (int k = 0; k < d; ++k) {
      const double vel = disp[k] / t_end;
      st.disp_sum[k] += vel;
      st.disp_sum2[k] += vel * vel;
    }
    for (std::size_t b = 0; b < path_phase.size(); ++b) {
      const double vel = path_phase[b] / bin_exposure;
      st.phase_sum[b] += vel;
      st.phase_sum2[b] += vel * vel;
    }
  }
  return st;
}

}  // namespace

WalkStats simulate_walk(const TorusModel& m, const DriveSpec& drive, double t_end,
                        std::uint64_t n_paths, std::uint64_t seed, int jobs,
                        int n_phase_bins, double t_burn) {
  drive.validate(m.dim());
  if (n_paths < 1) throw ValidationError("simulate_walk: need at least one path");
  if (!(t_end > 0.0)) throw ValidationError("simulate_walk: t_end must be positive");
  if (n_phase_bins > 0 && !(t_burn < t_end))
    throw ValidationError("simulate_walk: t_burn must precede t_end");

  const double R = majorant_exit_rate(m, drive);
  const int d = m.dim();

  // fixed-size blocks keep the aggregation order independent of the
  // thread count
  const std::uint64_t block = 4096;
  const std::uint64_t n_blocks = (n_paths + block - 1) / block;
  std::vector<WalkBlockStats> parts(n_blocks);

  const int workers = std::max(1, jobs);
  std::atomic<std::uint64_t> next_block{0};
  auto worker = [&]() {
    while (true) {
      const std::uint64_t bi = next_block.fetch_add(1);
      if (bi >= n_blocks) break;
      const std::uint64_t first = bi * block;
      const std::uint64_t count = std::min(block, n_paths - first);
      parts[bi] =
          run_walk_block(m, drive, t_end, first, count, seed, R, n_phase_bins, t_burn);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  WalkStats ws;
  ws.n_paths = n_paths;
  ws.majorant_rate = R;
  ws.n_phase_bins = n_phase_bins;
  ws.t_burn = t_burn;
  ws.occupation.assign(m.n_sites(), 0.0);
  ws.velocity.assign(d, 0.0);
  ws.velocity_stderr.assign(d, 0.0);
  std::vector<double> sum2(d, 0.0);
  const std::size_t nb = static_cast<std::size_t>(std::max(0, n_phase_bins));
  std::vector<double> psum(nb * d, 0.0), psum2(nb * d, 0.0);
  for (const auto& st : parts) {
    for (std::size_t i = 0; i < ws.occupation.size(); ++i)
      ws.occupation[i] += static_cast<double>(st.counts[i]);
    for (int k = 0; k < d; ++k) {
      ws.velocity[k] += st.disp_sum[k];
      sum2[k] += st.disp_sum2[k];
    }
    for (std::size_t b = 0; b < psum.size(); ++b) {
      psum[b] += st.phase_sum[b];
      psum2[b] += st.phase_sum2[b];
    }
    ws.min_acceptance = std::min(ws.min_acceptance, st.min_acc);
    ws.max_acceptance = std::max(ws.max_acceptance, st.max_acc);
  }
  const double np = static_cast<double>(n_paths);
  for (double& o : ws.occupation) o /= np;
  for (int k = 0; k < d; ++k) {
    ws.velocity[k] /= np;
    const double var = std::max(0.0, sum2[k] / np - ws.velocity[k] * ws.velocity[k]);
    ws.velocity_stderr[k] = std::sqrt(var / np);
  }
  ws.phase_velocity.assign(nb, std::vector<double>(d, 0.0));
  ws.phase_velocity_stderr.assign(nb, std::vector<double>(d, 0.0));
  for (std::size_t b = 0; b < nb; ++b) {
    for (int k = 0; k < d; ++k) {
      const double mu = psum[b * d + k] / np;
      const double var = std::max(0.0, psum2[b * d + k] / np - mu * mu);
      ws.phase_velocity[b][k] = mu;
      ws.phase_velocity_stderr[b][k] = std::sqrt(var / np);
    }
  }
  return ws;
}

}  // namespace rcm
