#include "rcm/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rcm/numerics.hpp"

namespace rcm {

namespace {

std::vector<double> edge_means(const TorusModel& m) {
  const std::size_t n = m.n_sites();
  std::vector<double> mbar(m.neighborhood().n_half());
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi)
    mbar[zi] =
        pairwise_reduce(n, [&](std::size_t s) { return m.cond(s, zi); }) /
        static_cast<double>(n);
  return mbar;
}

// sum_{z in N} m_N[c_z] z_j z_k; pairing z with -z doubles the half-set sum
std::vector<double> first_term(const TorusModel& m, const std::vector<double>& mbar) {
  const int d = m.dim();
  std::vector<double> f(static_cast<std::size_t>(d) * d, 0.0);
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
    const ivec& z = m.neighborhood().half_set[zi];
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        f[j * d + k] += 2.0 * mbar[zi] * static_cast<double>(z[j]) *
                        static_cast<double>(z[k]);
  }
  return f;
}

double field_l2(const TorusModel& m, const RealField& f) {
  return std::sqrt(inner(m, f, f));
}

}  // namespace

MobilityAssembly assemble_mobility(const TorusModel& m, double omega,
                                   const SolveConfig& cfg) {
  if (omega == 0.0)
    throw ValidationError("mobility: omega must be nonzero (use diffusion_matrix)");
  const int d = m.dim();

  MobilityAssembly out;
  out.edge_mean = edge_means(m);
  const std::vector<double> first = first_term(m, out.edge_mean);

  out.gamma.reserve(d);
  out.theta.reserve(d);
  int iters = 0;
  double worst = 0.0;
  for (int k = 0; k < d; ++k) {
    out.gamma.push_back(local_drift(m, k));
    auto [theta, rep] = solve_corrector_signed(m, omega, out.gamma[k], cfg);
    iters += rep.iterations;
    worst = std::max(worst, rep.residual);
    out.theta.push_back(std::move(theta));
  }

  MobilityMatrix& sig = out.sigma;
  sig.dim = d;
  sig.n = m.side();
  sig.omega = omega;
  sig.entries.assign(static_cast<std::size_t>(d) * d, {});
  sig.solver_iterations = iters;
  sig.solver_residual = worst;

  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k) {
      const std::complex<double> gjk = inner(m, out.gamma[j], out.theta[k]);
      if (k > j) {
        // transposed evaluation must agree up to solver tolerance;
        // checked, never averaged
        const std::complex<double> gkj = inner(m, out.gamma[k], out.theta[j]);
        const double scale = field_l2(m, out.gamma[j]) * std::sqrt(norm2(m, out.theta[k])) +
                             field_l2(m, out.gamma[k]) * std::sqrt(norm2(m, out.theta[j]));
        if (std::abs(gjk - gkj) > 100.0 * cfg.tol * scale + 1e-300)
          throw SolveError("mobility: transposed assembly disagrees beyond tolerance",
                           std::abs(gjk - gkj), iters);
      }
      const std::complex<double> v = first[j * d + k] - 2.0 * gjk;
      sig.entries[j * d + k] = v;
      sig.entries[k * d + j] = v;
    }
  }
  return out;
}

MobilityMatrix mobility_matrix(const TorusModel& m, double omega,
                               const SolveConfig& cfg) {
  if (!(omega > 0.0))
    throw ValidationError("mobility: omega must be positive (use diffusion_matrix at 0)");
  return assemble_mobility(m, omega, cfg).sigma;
}

MobilityMatrix diffusion_matrix(const TorusModel& m, const SolveConfig& cfg) {
  const int d = m.dim();
  const std::vector<double> mbar = edge_means(m);
  const std::vector<double> first = first_term(m, mbar);

  std::vector<RealField> gamma;
  std::vector<RealField> theta0;
  int iters = 0;
  double worst = 0.0;
  for (int k = 0; k < d; ++k) {
    gamma.push_back(local_drift(m, k));
    auto [t0, rep] = solve_deflated(m, gamma[k], cfg);
    iters += rep.iterations;
    worst = std::max(worst, rep.residual);
    theta0.push_back(std::move(t0));
  }

  MobilityMatrix sig;
  sig.dim = d;
  sig.n = m.side();
  sig.omega = 0.0;
  sig.entries.assign(static_cast<std::size_t>(d) * d, {});
  sig.solver_iterations = iters;
  sig.solver_residual = worst;
  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k) {
      const double v = first[j * d + k] - 2.0 * inner(m, gamma[j], theta0[k]);
      sig.entries[j * d + k] = v;
      sig.entries[k * d + j] = v;
    }
  }
  return sig;
}

EnergyIdentityErrors energy_identity_errors(const TorusModel& m, double omega,
                                            const RealField& gamma,
                                            const ComplexField& theta) {
  RealField tr(theta.size()), ti(theta.size());
  tr.v = theta.re;
  ti.v = theta.im;

  const double lhs1 = omega * norm2(m, theta);
  const double rhs1 = -inner(m, ti, gamma);
  const double lhs2 = dirichlet_form(m, tr, tr) + dirichlet_form(m, ti, ti);
  const double rhs2 = inner(m, tr, gamma);

  EnergyIdentityErrors e;
  e.l2_identity =
      std::abs(lhs1 - rhs1) / std::max({std::abs(lhs1), std::abs(rhs1), 1e-300});
  e.dirichlet_identity =
      std::abs(lhs2 - rhs2) / std::max({std::abs(lhs2), std::abs(rhs2), 1e-300});
  return e;
}

QuadraticSplit quadratic_form_split(const TorusModel& m, double omega,
                                    const std::vector<double>& a,
                                    const SolveConfig& cfg) {
  const int d = m.dim();
  if (static_cast<int>(a.size()) != d)
    throw ValidationError("quadratic_form_split: direction dimension mismatch");
  if (std::all_of(a.begin(), a.end(), [](double c) { return c == 0.0; }))
    throw ValidationError("quadratic_form_split: direction must be nonzero");
  if (!(omega > 0.0))
    throw ValidationError("quadratic_form_split: omega must be positive");

  const MobilityAssembly as = assemble_mobility(m, omega, cfg);
  std::complex<double> direct = 0.0;
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) direct += a[j] * as.sigma.at(j, k) * a[k];

  // independent route: one corrector solve with the drift projected on a
  RealField ga(m.n_sites());
  for (int k = 0; k < d; ++k)
    for (std::size_t s = 0; s < m.n_sites(); ++s) ga[s] += a[k] * as.gamma[k][s];
  auto [theta, rep] = solve_corrector(m, omega, ga, cfg);
  (void)rep;

  double first_a = 0.0;
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
    const ivec& z = m.neighborhood().half_set[zi];
    double za = 0.0;
    for (int k = 0; k < d; ++k) za += static_cast<double>(z[k]) * a[k];
    first_a += 2.0 * as.edge_mean[zi] * za * za;
  }

  QuadraticSplit qs;
  qs.direct = direct;
  qs.re_energy = first_a - 2.0 * dirichlet_form(m, theta, theta).real();
  qs.im_magnitude = 2.0 * omega * norm2(m, theta);
  qs.im_sign_observed = direct.imag() > 0.0 ? 1 : (direct.imag() < 0.0 ? -1 : 0);
  qs.re_discrepancy = std::abs(direct.real() - qs.re_energy);
  qs.im_discrepancy = std::abs(std::abs(direct.imag()) - qs.im_magnitude);
  return qs;
}

double gradient_formula_check(const TorusModel& m, double omega,
                              const SolveConfig& cfg) {
  if (!(omega > 0.0))
    throw ValidationError("gradient_formula_check: omega must be positive");
  const int d = m.dim();
  const std::size_t n = m.n_sites();
  const MobilityAssembly as = assemble_mobility(m, omega, cfg);

  // S[zi][k] = m_N[ c_z (z_k + grad theta_k(.,z)) ] for z in the half set
  const int nh = m.neighborhood().n_half();
  std::vector<std::complex<double>> S(static_cast<std::size_t>(nh) * d);
  for (int zi = 0; zi < nh; ++zi) {
    const ivec& z = m.neighborhood().half_set[zi];
    for (int k = 0; k < d; ++k) {
      const ComplexField& th = as.theta[k];
      const double re = pairwise_reduce(n, [&](std::size_t s) {
        const std::size_t sp = m.plus(s, zi);
        return m.cond(s, zi) * (static_cast<double>(z[k]) + th.re[sp] - th.re[s]);
      });
      const double im = pairwise_reduce(n, [&](std::size_t s) {
        const std::size_t sp = m.plus(s, zi);
        return m.cond(s, zi) * (th.im[sp] - th.im[s]);
      });
      S[static_cast<std::size_t>(zi) * d + k] =
          std::complex<double>(re, im) / static_cast<double>(n);
    }
  }

  double dev = 0.0;
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < d; ++k) {
      std::complex<double> g = 0.0;
      for (int zi = 0; zi < nh; ++zi)
        g += 2.0 * static_cast<double>(m.neighborhood().half_set[zi][j]) *
             S[static_cast<std::size_t>(zi) * d + k];
      dev = std::max(dev, std::abs(g - as.sigma.at(j, k)));
    }
  }
  return dev;
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double kA[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kC[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kB5[7] = {35.0 / 384,     0, 500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84,       0};
constexpr double kB4[7] = {5179.0 / 57600,    0,           7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

TimeIntegralMobility time_integral_mobility(const TorusModel& m, double omega,
                                            double s_max, std::size_t max_steps,
                                            const SolveConfig& cfg, double tail_tol) {
  if (!(omega > 0.0))
    throw ValidationError("time_integral_mobility: omega must be positive");
  if (!(s_max > 0.0))
    throw ValidationError("time_integral_mobility: s_max must be positive");
  cfg.validate();

  const int d = m.dim();
  const std::size_t n = m.n_sites();
  const std::vector<double> mbar = edge_means(m);
  const std::vector<double> first = first_term(m, mbar);

  std::vector<RealField> gamma;
  std::vector<double> gnorm(d);
  for (int k = 0; k < d; ++k) {
    gamma.push_back(local_drift(m, k));
    gnorm[k] = field_l2(m, gamma[k]);
  }

  TimeIntegralMobility out;
  out.sigma.dim = d;
  out.sigma.n = m.side();
  out.sigma.omega = omega;
  out.sigma.entries.assign(static_cast<std::size_t>(d) * d, {});

  // resolvent-term integrals, I[j + k*d] = int_0^{s_max} e^{-i w s} <g_j, e^{Ls} g_k> ds
  std::vector<std::complex<double>> integral(static_cast<std::size_t>(d) * d, 0.0);
  const std::size_t dim_state = n + 2 * static_cast<std::size_t>(d);

  double tail = 0.0;
  double worst_gnorm_end = 0.0;

  for (int k = 0; k < d; ++k) {
    if (gnorm[k] == 0.0) continue;  // integrand vanishes

    std::vector<double> y(dim_state, 0.0);
    std::copy(gamma[k].v.begin(), gamma[k].v.end(), y.begin());

    auto deriv = [&](double s, const std::vector<double>& st, std::vector<double>& dst) {
      apply_generator(m, st.data(), dst.data());
      const double cw = std::cos(omega * s), sw = std::sin(omega * s);
      for (int j = 0; j < d; ++j) {
        const double ip = pairwise_reduce(n, [&](std::size_t i) {
                            return gamma[j][i] * st[i];
                          }) /
                          static_cast<double>(n);
        dst[n + 2 * j] = ip * cw;
        dst[n + 2 * j + 1] = -ip * sw;
      }
    };

    const double rtol = 1e-11;
    const double atol = 1e-14 * gnorm[k];
    std::vector<std::vector<double>> ks(7, std::vector<double>(dim_state));
    std::vector<double> ytmp(dim_state), ynew(dim_state);

    double s = 0.0;
    double h = std::min(0.01 / (1.0 + omega), s_max);
    std::size_t steps = 0;
    double prev_s = 0.0, prev_gn = gnorm[k];

    while (s < s_max) {
      if (steps >= max_steps)
        throw QuadratureError("time_integral_mobility: step budget exhausted", tail);
      h = std::min(h, s_max - s);

      deriv(s, y, ks[0]);
      for (int stage = 1; stage < 7; ++stage) {
        for (std::size_t i = 0; i < dim_state; ++i) {
          double acc = y[i];
          for (int q = 0; q < stage; ++q) acc += h * kA[stage][q] * ks[q][i];
          ytmp[i] = acc;
        }
        deriv(s + kC[stage] * h, ytmp, ks[stage]);
      }
      double errnorm = 0.0;
      for (std::size_t i = 0; i < dim_state; ++i) {
        double y5 = y[i], err = 0.0;
        for (int q = 0; q < 7; ++q) {
          y5 += h * kB5[q] * ks[q][i];
          err += h * (kB5[q] - kB4[q]) * ks[q][i];
        }
        ynew[i] = y5;
        const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y5));
        errnorm += (err / sc) * (err / sc);
      }
      errnorm = std::sqrt(errnorm / static_cast<double>(dim_state));
      if (errnorm <= 1.0) {
        // track the norm decay for the tail bound
        if (s >= 0.5 * s_max) {
          prev_s = s;
          prev_gn = std::sqrt(pairwise_reduce(n, [&](std::size_t i) {
                      return y[i] * y[i];
                    }) /
                    static_cast<double>(n));
        }
        s += h;
        y.swap(ynew);
        ++steps;
      }
      const double factor =
          std::clamp(0.9 * std::pow(std::max(errnorm, 1e-10), -0.2), 0.2, 5.0);
      h *= factor;
    }
    out.ode_steps += steps;

    const double gn_end = std::sqrt(pairwise_reduce(n, [&](std::size_t i) {
                            return y[i] * y[i];
                          }) /
                          static_cast<double>(n));
    worst_gnorm_end = std::max(worst_gnorm_end, gn_end / gnorm[k]);

    // exponential-decay tail bound from the last observed rate; fall back
    // to the whole-run average rate when the norm has hit the roundoff
    // floor and the windowed estimate degenerates
    double lam = 0.0;
    if (gn_end > 0.0 && prev_gn > gn_end && s_max > prev_s)
      lam = std::log(prev_gn / gn_end) / (s_max - prev_s);
    if (!(lam > 0.0) && gn_end > 0.0 && gnorm[k] > gn_end)
      lam = std::log(gnorm[k] / gn_end) / s_max;
    const double gmax = *std::max_element(gnorm.begin(), gnorm.end());
    const double tail_k = lam > 0.0
                              ? 2.0 * gmax * gn_end / lam
                              : (gn_end == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    tail = std::max(tail, tail_k);

    for (int j = 0; j < d; ++j)
      integral[static_cast<std::size_t>(j) * d + k] = {y[n + 2 * j], y[n + 2 * j + 1]};
  }

  out.tail_estimate = tail;
  out.gnorm_end = worst_gnorm_end;
  if (!(tail <= tail_tol))
    throw QuadratureError("time_integral_mobility: truncation tail above tolerance",
                          tail);

  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k) {
      const std::complex<double> v =
          first[j * d + k] - 2.0 * integral[static_cast<std::size_t>(j) * d + k];
      out.sigma.entries[j * d + k] = v;
      out.sigma.entries[k * d + j] = v;
    }
  }
  out.sigma.solver_iterations = static_cast<int>(out.ode_steps);
  out.sigma.solver_residual = tail;
  return out;
}

}  // namespace rcm
