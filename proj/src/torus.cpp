#include "rcm/torus.hpp"

#include <cmath>

#include "rcm/numerics.hpp"

namespace rcm {

TorusModel::TorusModel(Neighborhood nbhd, std::int64_t n, std::vector<double> cond)
    : nbhd_(std::move(nbhd)), n_(n) {
  if (n_ <= 2 * nbhd_.max_norm)
    throw ValidationError("torus: side must exceed twice the neighbourhood radius");
  std::size_t sites = 1;
  for (int k = 0; k < nbhd_.dim; ++k) sites *= static_cast<std::size_t>(n_);
  n_sites_ = sites;
  const std::size_t nh = nbhd_.half_set.size();
  if (cond.size() != n_sites_ * nh)
    throw ValidationError("torus: conductance array has wrong size");
  for (double c : cond)
    if (!(c > 0.0) || !std::isfinite(c))
      throw ValidationError("torus: conductances must be positive and finite");
  cond_ = std::move(cond);

  plus_.assign(nh, std::vector<std::uint32_t>(n_sites_));
  minus_.assign(nh, std::vector<std::uint32_t>(n_sites_));
  ivec x(nbhd_.dim, 0);
  for (std::size_t s = 0; s < n_sites_; ++s) {
    for (std::size_t zi = 0; zi < nh; ++zi) {
      const ivec& z = nbhd_.half_set[zi];
      std::size_t ip = 0, im = 0, stride = 1;
      for (int k = 0; k < nbhd_.dim; ++k) {
        const std::int64_t xp = ((x[k] + z[k]) % n_ + n_) % n_;
        const std::int64_t xm = ((x[k] - z[k]) % n_ + n_) % n_;
        ip += static_cast<std::size_t>(xp) * stride;
        im += static_cast<std::size_t>(xm) * stride;
        stride *= static_cast<std::size_t>(n_);
      }
      plus_[zi][s] = static_cast<std::uint32_t>(ip);
      minus_[zi][s] = static_cast<std::uint32_t>(im);
    }
    // advance coordinates, first coordinate fastest
    for (int k = 0; k < nbhd_.dim; ++k) {
      if (++x[k] < n_) break;
      x[k] = 0;
    }
  }
}

std::size_t TorusModel::site_index(const ivec& x) const {
  std::size_t idx = 0, stride = 1;
  for (int k = 0; k < nbhd_.dim; ++k) {
    const std::int64_t xk = ((x[k] % n_) + n_) % n_;
    idx += static_cast<std::size_t>(xk) * stride;
    stride *= static_cast<std::size_t>(n_);
  }
  return idx;
}

ivec TorusModel::site_coords(std::size_t site) const {
  ivec x(nbhd_.dim);
  for (int k = 0; k < nbhd_.dim; ++k) {
    x[k] = static_cast<std::int64_t>(site % static_cast<std::size_t>(n_));
    site /= static_cast<std::size_t>(n_);
  }
  return x;
}

double TorusModel::total_rate(std::size_t site) const {
  double r = 0.0;
  for (int zi = 0; zi < nbhd_.n_half(); ++zi)
    r += cond(site, zi) + cond(minus(site, zi), zi);
  return r;
}

double inner(const TorusModel& m, const RealField& f, const RealField& g) {
  const std::size_t n = m.n_sites();
  return pairwise_reduce(n, [&](std::size_t i) { return f[i] * g[i]; }) /
         static_cast<double>(n);
}

std::complex<double> inner(const TorusModel& m, const ComplexField& f,
                           const ComplexField& g) {
  const std::size_t n = m.n_sites();
  const double re = pairwise_reduce(
      n, [&](std::size_t i) { return f.re[i] * g.re[i] + f.im[i] * g.im[i]; });
  const double im = pairwise_reduce(
      n, [&](std::size_t i) { return f.re[i] * g.im[i] - f.im[i] * g.re[i]; });
  return std::complex<double>(re, im) / static_cast<double>(n);
}

std::complex<double> inner(const TorusModel& m, const RealField& f,
                           const ComplexField& g) {
  const std::size_t n = m.n_sites();
  const double re = pairwise_reduce(n, [&](std::size_t i) { return f[i] * g.re[i]; });
  const double im = pairwise_reduce(n, [&](std::size_t i) { return f[i] * g.im[i]; });
  return std::complex<double>(re, im) / static_cast<double>(n);
}

double norm2(const TorusModel& m, const ComplexField& f) {
  const std::size_t n = m.n_sites();
  return pairwise_reduce(n,
                         [&](std::size_t i) {
                           return f.re[i] * f.re[i] + f.im[i] * f.im[i];
                         }) /
         static_cast<double>(n);
}

double mean(const TorusModel& m, const RealField& f) {
  return pairwise_reduce(m.n_sites(), [&](std::size_t i) { return f[i]; }) /
         static_cast<double>(m.n_sites());
}

RealField local_drift(const TorusModel& m, int k) {
  if (k < 0 || k >= m.dim()) throw ValidationError("local_drift: bad direction index");
  const std::size_t n = m.n_sites();
  RealField g(n);
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
    const double zk = static_cast<double>(m.neighborhood().half_set[zi][k]);
    if (zk == 0.0) continue;
    for (std::size_t s = 0; s < n; ++s)
      g[s] += zk * (m.cond(s, zi) - m.cond(m.minus(s, zi), zi));
  }
  return g;
}

void apply_generator(const TorusModel& m, const double* f, double* out) {
  const std::size_t n = m.n_sites();
  for (std::size_t s = 0; s < n; ++s) out[s] = 0.0;
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi) {
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t sp = m.plus(s, zi);
      const std::size_t sm = m.minus(s, zi);
      out[s] += m.cond(s, zi) * (f[sp] - f[s]) + m.cond(sm, zi) * (f[sm] - f[s]);
    }
  }
}

RealField apply_generator(const TorusModel& m, const RealField& f) {
  RealField out(m.n_sites());
  apply_generator(m, f.v.data(), out.v.data());
  return out;
}

ComplexField apply_generator(const TorusModel& m, const ComplexField& f) {
  ComplexField out(m.n_sites());
  apply_generator(m, f.re.data(), out.re.data());
  apply_generator(m, f.im.data(), out.im.data());
  return out;
}

namespace {

// Edge sum N^{-d} sum_x sum_{z in half set} c_{x,x+z} * df(x,z) * dg(x,z);
// summing over the half set only already accounts for the 1/2 in front of
// the full-neighbourhood Dirichlet sum.
template <typename Term>
double edge_sum(const TorusModel& m, Term&& term) {
  const std::size_t n = m.n_sites();
  double total = 0.0;
  for (int zi = 0; zi < m.neighborhood().n_half(); ++zi)
    total += pairwise_reduce(n, [&](std::size_t s) { return term(s, zi); });
  return total / static_cast<double>(n);
}

}  // namespace

double dirichlet_form(const TorusModel& m, const RealField& f, const RealField& g) {
  return edge_sum(m, [&](std::size_t s, int zi) {
    const std::size_t sp = m.plus(s, zi);
    return m.cond(s, zi) * (f[sp] - f[s]) * (g[sp] - g[s]);
  });
}

std::complex<double> dirichlet_form(const TorusModel& m, const ComplexField& f,
                                    const ComplexField& g) {
  const double re = edge_sum(m, [&](std::size_t s, int zi) {
    const std::size_t sp = m.plus(s, zi);
    const double dfr = f.re[sp] - f.re[s], dfi = f.im[sp] - f.im[s];
    const double dgr = g.re[sp] - g.re[s], dgi = g.im[sp] - g.im[s];
    return m.cond(s, zi) * (dfr * dgr + dfi * dgi);
  });
  const double im = edge_sum(m, [&](std::size_t s, int zi) {
    const std::size_t sp = m.plus(s, zi);
    const double dfr = f.re[sp] - f.re[s], dfi = f.im[sp] - f.im[s];
    const double dgr = g.re[sp] - g.re[s], dgi = g.im[sp] - g.im[s];
    return m.cond(s, zi) * (dfr * dgi - dfi * dgr);
  });
  return {re, im};
}

}  // namespace rcm
