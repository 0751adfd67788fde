#include "rcm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "rcm/numerics.hpp"

namespace rcm {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return pairwise_reduce(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

double nrm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Symmetric block form of the corrector system: the unknown is
// (theta_R, -theta_I) and the operator is [[-L, s*I], [s*I, L]], which is
// real symmetric indefinite for any nonzero signed frequency s.
struct BlockOperator {
  const TorusModel& m;
  double s;
  std::size_t n;  // sites

  void apply(const std::vector<double>& x, std::vector<double>& out) const {
    apply_generator(m, x.data(), out.data());          // L u
    apply_generator(m, x.data() + n, out.data() + n);  // L w
    for (std::size_t i = 0; i < n; ++i) {
      const double lu = out[i];
      out[i] = -lu + s * x[n + i];
      out[n + i] = s * x[i] + out[n + i];
    }
  }
};

// Jacobi weights |i*s + d_x| = sqrt(s^2 + d_x^2), duplicated on both
// block components; SPD as required by MINRES.
std::vector<double> block_jacobi(const TorusModel& m, double s) {
  const std::size_t n = m.n_sites();
  std::vector<double> p(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = m.total_rate(i);
    p[i] = p[n + i] = std::sqrt(s * s + d * d);
  }
  return p;
}

struct MinresOutcome {
  int iterations = 0;
  double est_residual = 0.0;
};

// Preconditioned MINRES for a symmetric (indefinite) operator, Lanczos
// recurrence with Givens rotations. `precond` holds SPD diagonal weights
// (empty for none). Stops when the preconditioned residual estimate falls
// below tol_abs. Solution is accumulated into x (x need not be zero; the
// caller passes the residual as rhs).
template <typename Op>
MinresOutcome minres(const Op& op, const std::vector<double>& b,
                     const std::vector<double>& precond, double tol_abs, int max_iter,
                     std::vector<double>& x) {
  const std::size_t n = b.size();
  auto apply_minv = [&](const std::vector<double>& r, std::vector<double>& y) {
    if (precond.empty())
      y = r;
    else
      for (std::size_t i = 0; i < n; ++i) y[i] = r[i] / precond[i];
  };

  std::vector<double> r1 = b, r2 = b, y(n), v(n), av(n);
  std::vector<double> w(n, 0.0), w1(n, 0.0), w2(n, 0.0);

  apply_minv(r1, y);
  double beta1 = dot(r1, y);
  if (beta1 < 0.0) throw SolveError("minres: preconditioner not positive definite", 0, 0);
  beta1 = std::sqrt(beta1);
  if (beta1 == 0.0) return {0, 0.0};

  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;

  MinresOutcome out;
  for (int itn = 1; itn <= max_iter; ++itn) {
    for (std::size_t i = 0; i < n; ++i) v[i] = y[i] / beta;
    op.apply(v, av);
    if (itn >= 2)
      for (std::size_t i = 0; i < n; ++i) av[i] -= (beta / oldb) * r1[i];
    const double alfa = dot(v, av);
    for (std::size_t i = 0; i < n; ++i) av[i] -= (alfa / beta) * r2[i];
    r1.swap(r2);
    r2.swap(av);
    apply_minv(r2, y);
    oldb = beta;
    beta = dot(r2, y);
    if (beta < 0.0) throw SolveError("minres: preconditioner not positive definite", 0, itn);
    beta = std::sqrt(beta);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::hypot(gbar, beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1.swap(w2);
    w2.swap(w);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
    for (std::size_t i = 0; i < n; ++i) x[i] += phi * w[i];

    out.iterations = itn;
    out.est_residual = phibar;
    if (phibar <= tol_abs) break;
  }
  return out;
}

std::pair<ComplexField, SolveReport> solve_minres_block(const TorusModel& m, double s,
                                                        const RealField& rhs,
                                                        const SolveConfig& cfg) {
  const std::size_t n = m.n_sites();
  BlockOperator op{m, s, n};
  std::vector<double> b(2 * n, 0.0);
  std::copy(rhs.v.begin(), rhs.v.end(), b.begin());
  const double bnorm = nrm2(b);

  ComplexField theta(n);
  SolveReport rep;
  rep.method = SolveMethod::coupled_real_minres;
  if (bnorm == 0.0) return {theta, rep};

  std::vector<double> precond;
  double pmax = 1.0;
  if (cfg.precond == Precond::diagonal) {
    precond = block_jacobi(m, s);
    pmax = *std::max_element(precond.begin(), precond.end());
  }
  const double target = cfg.tol * bnorm;

  std::vector<double> x(2 * n, 0.0), r(2 * n), mx(2 * n);
  double rn = bnorm;
  int total = 0;
  // Outer verification loop: the Lanczos residual estimate lives in the
  // preconditioned norm, so re-check the true residual and continue if
  // rounding left it above target.
  for (int attempt = 0; attempt < 6 && total < cfg.max_iter; ++attempt) {
    op.apply(x, mx);
    for (std::size_t i = 0; i < 2 * n; ++i) r[i] = b[i] - mx[i];
    rn = nrm2(r);
    if (rn <= target) break;
    const double inner_tol = 0.25 * target / std::sqrt(pmax);
    MinresOutcome o = minres(op, r, precond, inner_tol, cfg.max_iter - total, x);
    total += o.iterations;
  }
  op.apply(x, mx);
  for (std::size_t i = 0; i < 2 * n; ++i) r[i] = b[i] - mx[i];
  rn = nrm2(r);

  rep.iterations = total;
  rep.residual = rn / bnorm;
  if (rep.residual > cfg.tol)
    throw SolveError("minres: no convergence within iteration budget", rep.residual,
                     total);
  for (std::size_t i = 0; i < n; ++i) {
    theta.re[i] = x[i];
    theta.im[i] = -x[n + i];
  }
  return {theta, rep};
}

using cvec = std::vector<std::complex<double>>;

std::complex<double> udot(const cvec& a, const cvec& b) {
  // unconjugated bilinear form, the natural pairing for complex-symmetric
  // operators
  const double re = pairwise_reduce(a.size(), [&](std::size_t i) {
    return a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
  });
  const double im = pairwise_reduce(a.size(), [&](std::size_t i) {
    return a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
  });
  return {re, im};
}

double cnrm2(const cvec& a) {
  return std::sqrt(pairwise_reduce(a.size(), [&](std::size_t i) { return std::norm(a[i]); }));
}

std::pair<ComplexField, SolveReport> solve_cocg(const TorusModel& m, double s,
                                                const RealField& rhs,
                                                const SolveConfig& cfg) {
  const std::size_t n = m.n_sites();
  SolveReport rep;
  rep.method = SolveMethod::cocg;

  cvec b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = rhs.v[i];
  const double bnorm = cnrm2(b);
  ComplexField theta(n);
  if (bnorm == 0.0) return {theta, rep};
  const double target = cfg.tol * bnorm;

  cvec minv(n, {1.0, 0.0});
  if (cfg.precond == Precond::diagonal)
    for (std::size_t i = 0; i < n; ++i)
      minv[i] = 1.0 / std::complex<double>(m.total_rate(i), s);

  // apply A = i*s - L on split planes
  std::vector<double> vre(n), vim(n), lre(n), lim(n);
  auto apply_a = [&](const cvec& v, cvec& out) {
    for (std::size_t i = 0; i < n; ++i) {
      vre[i] = v[i].real();
      vim[i] = v[i].imag();
    }
    apply_generator(m, vre.data(), lre.data());
    apply_generator(m, vim.data(), lim.data());
    for (std::size_t i = 0; i < n; ++i)
      out[i] = {-s * vim[i] - lre[i], s * vre[i] - lim[i]};
  };

  cvec x(n, 0.0), r = b, z(n), p(n), q(n);
  std::complex<double> rho_old = 0.0;
  double rn = bnorm;
  int itn = 0;
  for (; itn < cfg.max_iter; ++itn) {
    for (std::size_t i = 0; i < n; ++i) z[i] = minv[i] * r[i];
    const std::complex<double> rho = udot(r, z);
    if (itn == 0)
      p = z;
    else {
      const std::complex<double> beta = rho / rho_old;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    apply_a(p, q);
    const std::complex<double> denom = udot(p, q);
    if (denom == std::complex<double>(0.0, 0.0))
      throw SolveError("cocg: breakdown (p^T A p = 0)", rn / bnorm, itn);
    const std::complex<double> alpha = rho / denom;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rho_old = rho;
    rn = cnrm2(r);
    if (rn <= target) {
      ++itn;
      break;
    }
  }
  // recompute the residual from the returned iterate
  apply_a(x, q);
  for (std::size_t i = 0; i < n; ++i) q[i] = b[i] - q[i];
  rn = cnrm2(q);
  rep.iterations = itn;
  rep.residual = rn / bnorm;
  if (rep.residual > cfg.tol)
    throw SolveError("cocg: no convergence within iteration budget", rep.residual, itn);
  for (std::size_t i = 0; i < n; ++i) {
    theta.re[i] = x[i].real();
    theta.im[i] = x[i].imag();
  }
  return {theta, rep};
}

Eigen::MatrixXd dense_generator(const TorusModel& m) {
  const std::size_t n = m.n_sites();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t sp = m.plus(s, zi);
      const double c = m.cond(s, zi);
      L(s, sp) += c;
      L(s, s) -= c;
      L(sp, s) += c;
      L(sp, sp) -= c;
    }
  }
  return L;
}

}  // namespace

std::pair<ComplexField, SolveReport> solve_corrector_signed(const TorusModel& m,
                                                            double omega,
                                                            const RealField& rhs,
                                                            const SolveConfig& cfg) {
  cfg.validate();
  if (omega == 0.0)
    throw ValidationError("solve_corrector: omega must be nonzero (use solve_deflated)");
  if (rhs.size() != m.n_sites())
    throw ValidationError("solve_corrector: rhs size mismatch");
  for (double v : rhs.v)
    if (!std::isfinite(v)) throw ValidationError("solve_corrector: rhs not finite");

  switch (cfg.method) {
    case SolveMethod::cocg:
      return solve_cocg(m, omega, rhs, cfg);
    case SolveMethod::dense: {
      ComplexField theta = dense_solve(m, omega, rhs, cfg.dense_site_cap);
      SolveReport rep;
      rep.method = SolveMethod::dense;
      rep.residual = corrector_residual(m, omega, rhs, theta);
      return {std::move(theta), rep};
    }
    case SolveMethod::coupled_real_minres:
    default:
      return solve_minres_block(m, omega, rhs, cfg);
  }
}

std::pair<ComplexField, SolveReport> solve_corrector(const TorusModel& m, double omega,
                                                     const RealField& rhs,
                                                     const SolveConfig& cfg) {
  if (!(omega > 0.0)) throw ValidationError("solve_corrector: omega must be positive");
  return solve_corrector_signed(m, omega, rhs, cfg);
}

std::pair<RealField, SolveReport> solve_deflated(const TorusModel& m,
                                                 const RealField& rhs,
                                                 const SolveConfig& cfg) {
  cfg.validate();
  const std::size_t n = m.n_sites();
  if (rhs.size() != n) throw ValidationError("solve_deflated: rhs size mismatch");

  const double bnorm = nrm2(rhs.v);
  SolveReport rep;
  rep.method = cfg.method;
  RealField x(n);
  if (bnorm == 0.0) return {x, rep};

  const double bmean = pairwise_sum(rhs.v) / static_cast<double>(n);
  if (std::abs(bmean) > 1e-12 * bnorm / std::sqrt(static_cast<double>(n)) + 1e-300)
    throw ValidationError("solve_deflated: rhs must have zero mean");

  auto project = [&](std::vector<double>& v) {
    const double mv = pairwise_sum(v) / static_cast<double>(n);
    for (double& e : v) e -= mv;
  };

  std::vector<double> minv;
  if (cfg.precond == Precond::diagonal) {
    minv.resize(n);
    for (std::size_t i = 0; i < n; ++i) minv[i] = 1.0 / m.total_rate(i);
  }

  const double target = cfg.tol * bnorm;
  std::vector<double> r = rhs.v, z(n), p(n), q(n);
  project(r);
  if (minv.empty())
    z = r;
  else
    for (std::size_t i = 0; i < n; ++i) z[i] = minv[i] * r[i];
  project(z);
  p = z;
  double rho = dot(r, z);
  double rn = nrm2(r);
  int itn = 0;
  for (; itn < cfg.max_iter && rn > target; ++itn) {
    apply_generator(m, p.data(), q.data());
    for (double& e : q) e = -e;
    project(q);
    const double pq = dot(p, q);
    if (pq <= 0.0)
      throw SolveError("deflated cg: operator lost definiteness", rn / bnorm, itn);
    const double alpha = rho / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x.v[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    project(r);
    rn = nrm2(r);
    if (rn <= target) {
      ++itn;
      break;
    }
    if (minv.empty())
      z = r;
    else
      for (std::size_t i = 0; i < n; ++i) z[i] = minv[i] * r[i];
    project(z);
    const double rho_new = dot(r, z);
    const double beta = rho_new / rho;
    rho = rho_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  project(x.v);
  // recomputed residual of -L x = rhs
  apply_generator(m, x.v.data(), q.data());
  for (std::size_t i = 0; i < n; ++i) q[i] = -q[i] - rhs.v[i];
  rep.iterations = itn;
  rep.residual = nrm2(q) / bnorm;
  if (rep.residual > cfg.tol)
    throw SolveError("deflated cg: no convergence within iteration budget",
                     rep.residual, itn);
  return {x, rep};
}

ComplexField dense_solve(const TorusModel& m, double omega, const RealField& rhs,
                         std::size_t site_cap) {
  const std::size_t n = m.n_sites();
  if (n > site_cap) throw ValidationError("dense_solve: model exceeds site cap");
  if (omega == 0.0) throw ValidationError("dense_solve: omega must be nonzero");
  if (rhs.size() != n) throw ValidationError("dense_solve: rhs size mismatch");

  const Eigen::MatrixXd L = dense_generator(m);
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd A(2 * ni, 2 * ni);
  // real 2x2 block form: rows (-L, -w I; w I, -L) acting on (theta_R, theta_I)
  A.topLeftCorner(ni, ni) = -L;
  A.topRightCorner(ni, ni) = -omega * Eigen::MatrixXd::Identity(ni, ni);
  A.bottomLeftCorner(ni, ni) = omega * Eigen::MatrixXd::Identity(ni, ni);
  A.bottomRightCorner(ni, ni) = -L;

  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * ni);
  for (Eigen::Index i = 0; i < ni; ++i) b(i) = rhs.v[static_cast<std::size_t>(i)];
  const Eigen::VectorXd sol = A.partialPivLu().solve(b);

  ComplexField theta(n);
  for (std::size_t i = 0; i < n; ++i) {
    theta.re[i] = sol(static_cast<Eigen::Index>(i));
    theta.im[i] = sol(static_cast<Eigen::Index>(n + i));
  }
  return theta;
}

double corrector_residual(const TorusModel& m, double omega, const RealField& rhs,
                          const ComplexField& x) {
  const std::size_t n = m.n_sites();
  std::vector<double> lre(n), lim(n);
  apply_generator(m, x.re.data(), lre.data());
  apply_generator(m, x.im.data(), lim.data());
  const double num = pairwise_reduce(n, [&](std::size_t i) {
    const double rr = rhs.v[i] + omega * x.im[i] + lre[i];
    const double ri = -omega * x.re[i] + lim[i];
    return rr * rr + ri * ri;
  });
  const double den = pairwise_reduce(n, [&](std::size_t i) { return rhs.v[i] * rhs.v[i]; });
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

}  // namespace rcm
