#pragma once

#include <string>
#include <utility>

#include "rcm/torus.hpp"

namespace rcm {

enum class SolveMethod { coupled_real_minres, cocg, dense };
enum class Precond { none, diagonal };

struct SolveConfig {
  double tol = 1e-10;     // relative residual target
  int max_iter = 50000;   // Krylov iteration cap
  SolveMethod method = SolveMethod::coupled_real_minres;
  Precond precond = Precond::diagonal;
  std::size_t dense_site_cap = 4096;

  void validate() const {
    if (!(tol > 0.0)) throw ValidationError("solver: tol must be positive");
    if (max_iter < 1) throw ValidationError("solver: max_iter must be >= 1");
  }
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;  // achieved relative residual, recomputed explicitly
  SolveMethod method = SolveMethod::coupled_real_minres;
};

/// Non-convergence within the iteration budget. Carries the best residual
/// reached so failures are never silent.
struct SolveError : std::runtime_error {
  double best_residual;
  int iterations;
  SolveError(const std::string& msg, double res, int iters)
      : std::runtime_error(msg), best_residual(res), iterations(iters) {}
};

/// Corrector solve (i*omega - L) theta = rhs for omega > 0.
/// The returned report's residual is ||(i*omega - L) theta - rhs|| / ||rhs||,
/// recomputed from the returned field.
std::pair<ComplexField, SolveReport> solve_corrector(const TorusModel& m, double omega,
                                                     const RealField& rhs,
                                                     const SolveConfig& cfg);

/// Same solve for any nonzero signed frequency; used by conjugation
/// checks. The public corrector path requires omega > 0.
std::pair<ComplexField, SolveReport> solve_corrector_signed(const TorusModel& m,
                                                            double omega,
                                                            const RealField& rhs,
                                                            const SolveConfig& cfg);

/// Zero-frequency solve -L theta0 = rhs on the mean-zero subspace,
/// conjugate gradients with re-projection of every iterate. The rhs must
/// have zero mean.
std::pair<RealField, SolveReport> solve_deflated(const TorusModel& m,
                                                 const RealField& rhs,
                                                 const SolveConfig& cfg);

/// Brute-force oracle: LU factorization of the 2 n^d x 2 n^d real block
/// form of (i*omega - L) theta = rhs. Accepts signed omega. Rejects
/// models above the configured site cap.
ComplexField dense_solve(const TorusModel& m, double omega, const RealField& rhs,
                         std::size_t site_cap = 4096);

/// Relative residual of a candidate corrector, ||(i*omega-L)x - rhs||/||rhs||
/// in the uniform-measure L^2 norm.
double corrector_residual(const TorusModel& m, double omega, const RealField& rhs,
                          const ComplexField& x);

}  // namespace rcm
