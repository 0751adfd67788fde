#pragma once

#include <complex>
#include <vector>

#include "rcm/solver.hpp"
#include "rcm/torus.hpp"

namespace rcm {

/// The d x d complex mobility matrix of one torus model at one frequency.
/// Entries are stored symmetrically: (j,k) and (k,j) share the value
/// assembled from the unordered pair, with a construction check (never
/// an average) guarding the transposed evaluation.
struct MobilityMatrix {
  int dim = 0;
  std::int64_t n = 0;
  double omega = 0.0;
  std::vector<std::complex<double>> entries;  // row-major d x d
  int solver_iterations = 0;                  // summed over the d corrector solves
  double solver_residual = 0.0;               // worst relative residual

  std::complex<double> at(int j, int k) const { return entries[j * dim + k]; }
};

/// Corrector solves plus everything the algebraic identities reuse.
struct MobilityAssembly {
  MobilityMatrix sigma;
  std::vector<RealField> gamma;     // local drifts, one per direction
  std::vector<ComplexField> theta;  // correctors, one per direction
  std::vector<double> edge_mean;    // per half direction, cell average of c
};

/// sigma[j][k] = sum_z m_N[c_z] z_j z_k - 2 <gamma_j, theta_k>, with
/// theta_k the corrector at frequency omega. Accepts any nonzero signed
/// omega (negative values serve the conjugation check).
MobilityAssembly assemble_mobility(const TorusModel& m, double omega,
                                   const SolveConfig& cfg);

/// Mobility matrix for omega > 0; omega = 0 is served by diffusion_matrix.
MobilityMatrix mobility_matrix(const TorusModel& m, double omega,
                               const SolveConfig& cfg);

/// Zero-frequency limit: same assembly with the deflated corrector.
/// Real symmetric positive semidefinite.
MobilityMatrix diffusion_matrix(const TorusModel& m, const SolveConfig& cfg);

/// Relative errors of the two corrector energy identities,
///   omega ||theta||^2 = -<theta_I, gamma>   and
///   D(theta_R,theta_R) + D(theta_I,theta_I) = <theta_R, gamma>.
struct EnergyIdentityErrors {
  double l2_identity = 0.0;
  double dirichlet_identity = 0.0;
};
EnergyIdentityErrors energy_identity_errors(const TorusModel& m, double omega,
                                            const RealField& gamma,
                                            const ComplexField& theta);

/// a . sigma a evaluated two ways: directly from the assembled matrix and
/// through the corrector energy identities. im_magnitude carries the
/// magnitude 2 omega ||theta||^2 only; the observed sign of the imaginary
/// part is reported separately and never folded into the identity.
struct QuadraticSplit {
  std::complex<double> direct;  // a . sigma(omega) a from the matrix route
  double re_energy = 0.0;       // sum_z m_N[c] (z.a)^2 - 2 D(theta,theta)
  double im_magnitude = 0.0;    // 2 omega ||theta||^2
  int im_sign_observed = 0;     // sign of Im(direct)
  double re_discrepancy = 0.0;
  double im_discrepancy = 0.0;  // | |Im direct| - im_magnitude |
};
QuadraticSplit quadratic_form_split(const TorusModel& m, double omega,
                                    const std::vector<double>& a,
                                    const SolveConfig& cfg);

/// Max entrywise deviation between the resolvent assembly and the
/// gradient form 2 sum_{z in half} m_N[ c_z z_j (z_k + grad theta_k(.,z)) ].
double gradient_formula_check(const TorusModel& m, double omega,
                              const SolveConfig& cfg);

/// Quadrature tail too large to certify the requested tolerance.
struct QuadratureError : std::runtime_error {
  double tail;
  QuadratureError(const std::string& msg, double t) : std::runtime_error(msg), tail(t) {}
};

/// Cross-check route: replaces the resolvent term by the quadrature of
/// e^{-i omega s} <gamma_j, e^{Ls} gamma_k> over [0, s_max], with
/// e^{Ls} gamma propagated by adaptive Runge-Kutta. Fails when the
/// estimated truncation tail exceeds tail_tol.
struct TimeIntegralMobility {
  MobilityMatrix sigma;
  double tail_estimate = 0.0;  // bound on the dropped |integral| over (s_max, inf)
  double gnorm_end = 0.0;      // ||e^{L s_max} gamma|| / ||gamma||, worst direction
  std::size_t ode_steps = 0;   // accepted steps, summed over directions
};
TimeIntegralMobility time_integral_mobility(const TorusModel& m, double omega,
                                            double s_max, std::size_t max_steps,
                                            const SolveConfig& cfg,
                                            double tail_tol = 1e-8);

}  // namespace rcm
