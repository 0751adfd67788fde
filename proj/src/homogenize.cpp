#include "rcm/homogenize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <Eigen/Dense>

#include "rcm/numerics.hpp"

namespace rcm {

std::vector<SweepRecord> n_sweep(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                                 const std::vector<std::int64_t>& ns,
                                 const std::vector<double>& omegas,
                                 const std::vector<std::uint64_t>& seeds,
                                 const SolveConfig& cfg, int jobs) {
  validate_spec(spec, nbhd);
  cfg.validate();
  if (ns.empty() || omegas.empty() || seeds.empty())
    throw ValidationError("n_sweep: ns, omegas and seeds must be nonempty");
  for (std::int64_t n : ns)
    if (n <= 2 * nbhd.max_norm)
      throw ValidationError("n_sweep: torus side must exceed twice the neighbourhood radius");
  for (double w : omegas)
    if (w < 0.0) throw ValidationError("n_sweep: omegas must be nonnegative");

  std::vector<std::int64_t> sns = ns;
  std::vector<double> sws = omegas;
  std::vector<std::uint64_t> sseeds = seeds;
  std::sort(sns.begin(), sns.end());
  std::sort(sws.begin(), sws.end());
  std::sort(sseeds.begin(), sseeds.end());

  struct Cell {
    std::int64_t n;
    double omega;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::int64_t n : sns)
    for (double w : sws)
      for (std::uint64_t s : sseeds) cells.push_back({n, w, s});

  std::vector<SweepRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      const Cell& cell = cells[i];
      SweepRecord& rec = records[i];
      rec.n = cell.n;
      rec.omega = cell.omega;
      rec.seed = cell.seed;
      EnvironmentSpec cell_spec = spec;
      cell_spec.seed = cell.seed;
      try {
        const ConductanceField field =
            sample_field(cell_spec, nbhd, Box::cube(nbhd.dim, 0, cell.n));
        const TorusModel model = periodize(field, cell.n);
        rec.avg_c = ergodic_average(field, cell.n, 1);
        rec.avg_c2 = ergodic_average(field, cell.n, 2);
        if (cell.omega > 0.0) {
          const MobilityAssembly as = assemble_mobility(model, cell.omega, cfg);
          rec.sigma = as.sigma;
          for (int k = 0; k < model.dim(); ++k) {
            rec.theta_l2 = std::max(rec.theta_l2, std::sqrt(norm2(model, as.theta[k])));
            RealField tr(model.n_sites()), ti(model.n_sites());
            tr.v = as.theta[k].re;
            ti.v = as.theta[k].im;
            rec.theta_energy =
                std::max(rec.theta_energy, dirichlet_form(model, tr, tr) +
                                               dirichlet_form(model, ti, ti));
          }
        } else {
          rec.sigma = diffusion_matrix(model, cfg);
        }
        rec.ok = true;
      } catch (const SolveError& e) {
        rec.ok = false;
        rec.error = e.what();
      } catch (const QuadratureError& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
  };
  const int workers = std::max(1, jobs);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

EnvChain make_env_chain(const Periodic& pattern, const Neighborhood& nbhd) {
  EnvironmentSpec spec;
  spec.kind = pattern;
  validate_spec(spec, nbhd);

  EnvChain ch;
  ch.nbhd = nbhd;
  ch.periods = pattern.periods;
  std::size_t states = 1;
  for (std::int64_t p : pattern.periods) states *= static_cast<std::size_t>(p);
  ch.n_states = states;

  const int nh = nbhd.n_half();
  const int nf = 2 * nh;
  ch.rates.assign(states * static_cast<std::size_t>(nf), 0.0);
  ch.shift.assign(nf, std::vector<std::uint32_t>(states));
  ch.drift.assign(nbhd.dim, std::vector<double>(states, 0.0));

  auto state_of = [&](const ivec& x) {
    std::size_t idx = 0, stride = 1;
    for (int k = 0; k < nbhd.dim; ++k) {
      const std::int64_t p = pattern.periods[k];
      idx += static_cast<std::size_t>(((x[k] % p) + p) % p) * stride;
      stride *= static_cast<std::size_t>(p);
    }
    return idx;
  };

  ivec x(nbhd.dim, 0);
  for (std::size_t s = 0; s < states; ++s) {
    for (int fi = 0; fi < nf; ++fi) {
      const int zi = fi % nh;
      const bool neg = fi >= nh;
      const ivec& zh = nbhd.half_set[zi];
      ivec target(nbhd.dim), edge_base(nbhd.dim);
      for (int k = 0; k < nbhd.dim; ++k) {
        const std::int64_t zk = neg ? -zh[k] : zh[k];
        target[k] = x[k] + zk;
        // rate c_{x, x-z} lives on the edge anchored at x-z
        edge_base[k] = neg ? x[k] - zh[k] : x[k];
      }
      ch.shift[fi][s] = static_cast<std::uint32_t>(state_of(target));
      ch.rates[s * static_cast<std::size_t>(nf) + fi] =
          pattern.values[state_of(edge_base)][zi];
      for (int k = 0; k < nbhd.dim; ++k)
        ch.drift[k][s] += ch.rates[s * static_cast<std::size_t>(nf) + fi] *
                          static_cast<double>(neg ? -zh[k] : zh[k]);
    }
    for (int k = 0; k < nbhd.dim; ++k) {
      if (++x[k] < pattern.periods[k]) break;
      x[k] = 0;
    }
  }
  return ch;
}

MobilityMatrix periodic_exact_sigma(const Periodic& pattern, const Neighborhood& nbhd,
                                    double omega) {
  if (omega < 0.0)
    throw ValidationError("periodic_exact_sigma: omega must be nonnegative");
  const EnvChain ch = make_env_chain(pattern, nbhd);
  const int d = nbhd.dim;
  const int nf = 2 * nbhd.n_half();
  const auto S = static_cast<Eigen::Index>(ch.n_states);

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(S, S);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (int fi = 0; fi < nf; ++fi) {
      const double r = ch.rate(static_cast<std::size_t>(s), fi);
      const auto sp = static_cast<Eigen::Index>(ch.shift[fi][static_cast<std::size_t>(s)]);
      L(s, sp) += r;
      L(s, s) -= r;
    }
  }

  // uniform-average rates per full direction
  std::vector<double> erate(nf, 0.0);
  for (int fi = 0; fi < nf; ++fi) {
    for (std::size_t s = 0; s < ch.n_states; ++s) erate[fi] += ch.rate(s, fi);
    erate[fi] /= static_cast<double>(ch.n_states);
  }
  std::vector<double> first(static_cast<std::size_t>(d) * d, 0.0);
  for (int fi = 0; fi < nf; ++fi) {
    const int zi = fi % nbhd.n_half();
    const double sgn = fi < nbhd.n_half() ? 1.0 : -1.0;
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        first[j * d + k] += erate[fi] * sgn * static_cast<double>(nbhd.half_set[zi][j]) *
                            sgn * static_cast<double>(nbhd.half_set[zi][k]);
  }

  Eigen::MatrixXd gamma(S, d);
  for (int k = 0; k < d; ++k)
    for (Eigen::Index s = 0; s < S; ++s)
      gamma(s, k) = ch.drift[k][static_cast<std::size_t>(s)];

  Eigen::MatrixXcd theta(S, d);
  double worst_res = 0.0;
  if (omega > 0.0) {
    Eigen::MatrixXcd A = -L.cast<std::complex<double>>();
    for (Eigen::Index s = 0; s < S; ++s) A(s, s) += std::complex<double>(0.0, omega);
    const auto lu = A.partialPivLu();
    for (int k = 0; k < d; ++k) {
      const Eigen::VectorXcd rhs = gamma.col(k).cast<std::complex<double>>();
      theta.col(k) = lu.solve(rhs);
      const double gn = rhs.norm();
      if (gn > 0.0)
        worst_res = std::max(worst_res, (A * theta.col(k) - rhs).norm() / gn);
    }
  } else {
    // deflated solve: pseudoinverse of -L on the mean-zero subspace
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-L);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cutoff = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (int k = 0; k < d; ++k) {
      Eigen::VectorXd sol = Eigen::VectorXd::Zero(S);
      for (Eigen::Index q = 0; q < S; ++q) {
        if (ev(q) <= cutoff) continue;
        const double coef = es.eigenvectors().col(q).dot(gamma.col(k)) / ev(q);
        sol += coef * es.eigenvectors().col(q);
      }
      theta.col(k) = sol.cast<std::complex<double>>();
      const double gn = gamma.col(k).norm();
      if (gn > 0.0)
        worst_res = std::max(worst_res, (-L * sol - gamma.col(k)).norm() / gn);
    }
  }

  MobilityMatrix sig;
  sig.dim = d;
  sig.n = 0;  // not tied to a torus side
  sig.omega = omega;
  sig.entries.assign(static_cast<std::size_t>(d) * d, {});
  sig.solver_iterations = 0;
  sig.solver_residual = worst_res;
  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k) {
      const std::complex<double> g =
          gamma.col(j).cast<std::complex<double>>().dot(theta.col(k)) /
          static_cast<double>(ch.n_states);
      const std::complex<double> v = first[j * d + k] - 2.0 * g;
      sig.entries[j * d + k] = v;
      sig.entries[k * d + j] = v;
    }
  }
  return sig;
}

ConvergenceReport convergence_report(const std::vector<SweepRecord>& records) {
  ConvergenceReport rep;
  for (const auto& r : records) {
    if (std::find(rep.ns.begin(), rep.ns.end(), r.n) == rep.ns.end())
      rep.ns.push_back(r.n);
    if (std::find(rep.omegas.begin(), rep.omegas.end(), r.omega) == rep.omegas.end())
      rep.omegas.push_back(r.omega);
  }
  std::sort(rep.ns.begin(), rep.ns.end());
  std::sort(rep.omegas.begin(), rep.omegas.end());
  if (rep.ns.size() < 2)
    throw ValidationError("convergence_report: need at least two distinct n values");

  int d = 0;
  for (const auto& r : records)
    if (r.ok) d = r.sigma.dim;
  if (d == 0) throw ValidationError("convergence_report: no successful cells");

  rep.all_monotone = true;
  rep.series.resize(rep.omegas.size());
  for (std::size_t wi = 0; wi < rep.omegas.size(); ++wi) {
    for (int j = 0; j < d; ++j) {
      for (int k = j; k < d; ++k) {
        EntrySeries es;
        es.j = j;
        es.k = k;
        for (std::int64_t n : rep.ns) {
          std::vector<double> re, im;
          for (const auto& r : records)
            if (r.ok && r.n == n && r.omega == rep.omegas[wi]) {
              re.push_back(r.sigma.at(j, k).real());
              im.push_back(r.sigma.at(j, k).imag());
            }
          auto mean_std = [](const std::vector<double>& xs) {
            if (xs.empty()) return std::make_pair(0.0, 0.0);
            double mu = 0.0;
            for (double x : xs) mu += x;
            mu /= static_cast<double>(xs.size());
            double var = 0.0;
            for (double x : xs) var += (x - mu) * (x - mu);
            var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
            return std::make_pair(mu, std::sqrt(var));
          };
          const auto [mr, sr] = mean_std(re);
          const auto [mi, si] = mean_std(im);
          es.mean_re.push_back(mr);
          es.std_re.push_back(sr);
          es.mean_im.push_back(mi);
          es.std_im.push_back(si);
        }
        for (std::size_t i = 0; i + 1 < rep.ns.size(); ++i) {
          es.diff_re.push_back(std::abs(es.mean_re[i + 1] - es.mean_re[i]));
          es.diff_im.push_back(std::abs(es.mean_im[i + 1] - es.mean_im[i]));
        }
        double scale = 0.0;
        for (std::size_t i = 0; i < rep.ns.size(); ++i)
          scale = std::max({scale, std::abs(es.mean_re[i]), std::abs(es.mean_im[i])});
        const double tol = 1e-9 * scale + 1e-12;
        auto non_increasing = [&](const std::vector<double>& xs) {
          for (std::size_t i = 0; i + 1 < xs.size(); ++i)
            if (xs[i + 1] > xs[i] + tol) return false;
          return true;
        };
        es.monotone_shrinking = non_increasing(es.std_re) && non_increasing(es.std_im) &&
                                non_increasing(es.diff_re) && non_increasing(es.diff_im);
        rep.all_monotone = rep.all_monotone && es.monotone_shrinking;
        rep.series[wi].push_back(std::move(es));
      }
    }
  }
  return rep;
}

}  // namespace rcm
