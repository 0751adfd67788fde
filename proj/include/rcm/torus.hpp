#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "rcm/neighborhood.hpp"

namespace rcm {

/// Real-valued function on the sites of the discrete torus, stored in
/// lexicographic site order (first coordinate fastest).
struct RealField {
  std::vector<double> v;

  RealField() = default;
  explicit RealField(std::size_t n, double fill = 0.0) : v(n, fill) {}
  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

/// Complex-valued function on torus sites, kept as separate real and
/// imaginary planes so the coupled real solver can use them directly.
struct ComplexField {
  std::vector<double> re, im;

  ComplexField() = default;
  explicit ComplexField(std::size_t n) : re(n, 0.0), im(n, 0.0) {}
  std::size_t size() const { return re.size(); }
  std::complex<double> at(std::size_t i) const { return {re[i], im[i]}; }
};

/// Conductances periodized onto the discrete torus of side n, together
/// with precomputed neighbour tables for stencil application.
///
/// Edge values are stored once per half-set direction: cond(x, zi) is the
/// rate on the edge (x, x + z_i) with z_i in the half set. The rate on
/// (x, x - z_i) is read through the symmetric partner edge.
class TorusModel {
 public:
  TorusModel(Neighborhood nbhd, std::int64_t n, std::vector<double> cond);

  int dim() const { return nbhd_.dim; }
  std::int64_t side() const { return n_; }
  std::size_t n_sites() const { return n_sites_; }
  const Neighborhood& neighborhood() const { return nbhd_; }

  /// Rate on the oriented edge (site, site + z_i), z_i in the half set.
  double cond(std::size_t site, int zi) const {
    return cond_[site * nbhd_.half_set.size() + zi];
  }
  /// Site index of x + z_i (wrapped).
  std::size_t plus(std::size_t site, int zi) const { return plus_[zi][site]; }
  /// Site index of x - z_i (wrapped).
  std::size_t minus(std::size_t site, int zi) const { return minus_[zi][site]; }

  /// Total exit rate sum_{z in N} c_{x,x+z}.
  double total_rate(std::size_t site) const;

  /// Flat index <-> coordinates in [0,n)^d, first coordinate fastest.
  std::size_t site_index(const ivec& x) const;
  ivec site_coords(std::size_t site) const;

  const std::vector<double>& raw_cond() const { return cond_; }

 private:
  Neighborhood nbhd_;
  std::int64_t n_;
  std::size_t n_sites_;
  std::vector<double> cond_;                     // n_sites x n_half
  std::vector<std::vector<std::uint32_t>> plus_;  // per half direction
  std::vector<std::vector<std::uint32_t>> minus_;
};

// --- inner products in L^2 of the uniform measure on the torus ---

double inner(const TorusModel& m, const RealField& f, const RealField& g);
std::complex<double> inner(const TorusModel& m, const ComplexField& f,
                           const ComplexField& g);
std::complex<double> inner(const TorusModel& m, const RealField& f,
                           const ComplexField& g);
double norm2(const TorusModel& m, const ComplexField& f);  // squared L^2 norm
double mean(const TorusModel& m, const RealField& f);

/// Local drift component gamma_k(x) = sum_{z in N} c_{x,x+z} z_k.
/// Sums to zero over the torus.
RealField local_drift(const TorusModel& m, int k);

/// Markov generator (L f)(x) = sum_{z in N} c_{x,x+z} (f(x+z) - f(x)).
void apply_generator(const TorusModel& m, const double* f, double* out);
RealField apply_generator(const TorusModel& m, const RealField& f);
ComplexField apply_generator(const TorusModel& m, const ComplexField& f);

/// Dirichlet form (1/2) N^{-d} sum_{x,z} c_{x,x+z} conj(f(x+z)-f(x)) (g(x+z)-g(x)).
/// Equals <f, -L g> in L^2 of the uniform measure.
double dirichlet_form(const TorusModel& m, const RealField& f, const RealField& g);
std::complex<double> dirichlet_form(const TorusModel& m, const ComplexField& f,
                                    const ComplexField& g);

}  // namespace rcm
