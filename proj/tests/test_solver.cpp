#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rcm/environment.hpp"
#include "rcm/numerics.hpp"
#include "rcm/solver.hpp"
#include "suite_models.hpp"

using namespace rcm;

namespace {

TorusModel periodic123(std::int64_t n) {
  Periodic pat;
  pat.periods = {3};
  pat.values = {{1.0}, {2.0}, {3.0}};
  EnvironmentSpec spec;
  spec.kind = pat;
  return make_torus(spec, Neighborhood::nearest(1), n);
}

double field_distance(const ComplexField& a, const ComplexField& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dr = a.re[i] - b.re[i], di = a.im[i] - b.im[i];
    num += dr * dr + di * di;
    den += b.re[i] * b.re[i] + b.im[i] * b.im[i];
  }
  return std::sqrt(num / den);
}

// independent residual computation, kept separate from the library helper
double residual_by_hand(const TorusModel& m, double omega, const RealField& rhs,
                        const ComplexField& x) {
  std::vector<double> lre(m.n_sites()), lim(m.n_sites());
  apply_generator(m, x.re.data(), lre.data());
  apply_generator(m, x.im.data(), lim.data());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m.n_sites(); ++i) {
    const double rr = rhs[i] - (-omega * x.im[i] - lre[i]);
    const double ri = -(omega * x.re[i] - lim[i]);
    num += rr * rr + ri * ri;
    den += rhs[i] * rhs[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("corrector solve basics") {
  const TorusModel m = periodic123(3);
  SolveConfig cfg;

  SUBCASE("zero rhs gives the zero corrector") {
    RealField zero(m.n_sites());
    for (auto method : {SolveMethod::coupled_real_minres, SolveMethod::cocg}) {
      cfg.method = method;
      const auto [theta, rep] = solve_corrector(m, 1.0, zero, cfg);
      for (std::size_t i = 0; i < m.n_sites(); ++i) {
        CHECK(theta.re[i] == 0.0);
        CHECK(theta.im[i] == 0.0);
      }
      CHECK(rep.iterations == 0);
    }
  }
  SUBCASE("omega must be positive") {
    const RealField g = local_drift(m, 0);
    CHECK_THROWS_AS(solve_corrector(m, 0.0, g, cfg), ValidationError);
    CHECK_THROWS_AS(solve_corrector(m, -1.0, g, cfg), ValidationError);
  }
  SUBCASE("matches the dense block-system solve") {
    const RealField g = local_drift(m, 0);
    const ComplexField dense = dense_solve(m, 1.0, g);
    for (auto method : {SolveMethod::coupled_real_minres, SolveMethod::cocg}) {
      cfg.method = method;
      const auto [theta, rep] = solve_corrector(m, 1.0, g, cfg);
      CHECK(field_distance(theta, dense) <= 1e-10);
      CHECK(rep.residual <= cfg.tol);
    }
  }
  SUBCASE("reported residual matches an independent recomputation") {
    const RealField g = local_drift(m, 0);
    const auto [theta, rep] = solve_corrector(m, 1.0, g, cfg);
    CHECK(std::abs(rep.residual - residual_by_hand(m, 1.0, g, theta)) <= 1e-13);
  }
  SUBCASE("signed solve returns the conjugate corrector") {
    const RealField g = local_drift(m, 0);
    const auto [fwd, r1] = solve_corrector(m, 1.0, g, cfg);
    const auto [bwd, r2] = solve_corrector_signed(m, -1.0, g, cfg);
    for (std::size_t i = 0; i < m.n_sites(); ++i) {
      CHECK(bwd.re[i] == doctest::Approx(fwd.re[i]).epsilon(1e-9));
      CHECK(bwd.im[i] == doctest::Approx(-fwd.im[i]).epsilon(1e-9));
    }
  }
  SUBCASE("non-convergence fails loudly with the best residual") {
    SolveConfig tight;
    tight.tol = 1e-14;
    tight.max_iter = 1;
    const RealField g = local_drift(m, 0);
    CHECK_THROWS_AS(solve_corrector(m, 1.0, g, tight), SolveError);
    try {
      solve_corrector(m, 1.0, g, tight);
    } catch (const SolveError& e) {
      CHECK(e.best_residual > 0.0);
      CHECK(e.iterations >= 1);
    }
  }
}

TEST_CASE("iterative solvers agree with the dense oracle across the suite") {
  for (const auto& entry : rcm_tests::suite_models()) {
    CAPTURE(entry.name);
    const TorusModel m = make_torus(entry.spec, entry.nbhd, entry.n);
    const RealField g = local_drift(m, 0);
    for (double omega : {0.1, 1.0, 10.0}) {
      const ComplexField dense = dense_solve(m, omega, g);
      SolveConfig cfg;
      cfg.method = SolveMethod::coupled_real_minres;
      const auto [a, ra] = solve_corrector(m, omega, g, cfg);
      CHECK(field_distance(a, dense) <= 1e-8);
      cfg.method = SolveMethod::cocg;
      const auto [b, rb] = solve_corrector(m, omega, g, cfg);
      CHECK(field_distance(b, dense) <= 1e-8);
      // method equivalence within 10x the target
      double dev = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < m.n_sites(); ++i) {
        dev = std::max({dev, std::abs(a.re[i] - b.re[i]), std::abs(a.im[i] - b.im[i])});
        scale = std::max({scale, std::abs(dense.re[i]), std::abs(dense.im[i])});
      }
      CHECK(dev <= 10.0 * cfg.tol * std::max(scale, 1.0));
    }
  }
}

TEST_CASE("no-preconditioner path converges too") {
  EnvironmentSpec spec;
  spec.kind = IID{UniformDist{1.0, 2.0}};
  spec.seed = 7;
  const TorusModel m = make_torus(spec, Neighborhood::nearest(2), 8);
  const RealField g = local_drift(m, 1);
  SolveConfig cfg;
  cfg.precond = Precond::none;
  for (auto method : {SolveMethod::coupled_real_minres, SolveMethod::cocg}) {
    cfg.method = method;
    const auto [theta, rep] = solve_corrector(m, 0.5, g, cfg);
    CHECK(rep.residual <= cfg.tol);
  }
}

TEST_CASE("dense solve") {
  const TorusModel m = periodic123(3);
  SUBCASE("zero rhs") {
    RealField zero(m.n_sites());
    const ComplexField x = dense_solve(m, 2.0, zero);
    for (std::size_t i = 0; i < m.n_sites(); ++i) {
      CHECK(x.re[i] == 0.0);
      CHECK(x.im[i] == 0.0);
    }
  }
  SUBCASE("applying the operator recovers the rhs") {
    const RealField g = local_drift(m, 0);
    const ComplexField x = dense_solve(m, 0.7, g);
    CHECK(residual_by_hand(m, 0.7, g, x) <= 1e-10);
  }
  SUBCASE("site cap is enforced") {
    const RealField g = local_drift(m, 0);
    CHECK_THROWS_AS(dense_solve(m, 1.0, g, 2), ValidationError);
  }
}

TEST_CASE("deflated zero-frequency solve") {
  SolveConfig cfg;
  SUBCASE("zero rhs gives zero") {
    const TorusModel m = periodic123(3);
    RealField zero(m.n_sites());
    const auto [x, rep] = solve_deflated(m, zero, cfg);
    for (std::size_t i = 0; i < m.n_sites(); ++i) CHECK(x[i] == 0.0);
    CHECK(rep.iterations == 0);
  }
  SUBCASE("constant conductances have zero drift and zero corrector") {
    EnvironmentSpec spec;
    spec.kind = Constant{2.0};
    const TorusModel m = make_torus(spec, Neighborhood::nearest(1), 8);
    const RealField g = local_drift(m, 0);
    const auto [x, rep] = solve_deflated(m, g, cfg);
    for (std::size_t i = 0; i < m.n_sites(); ++i) CHECK(x[i] == 0.0);
  }
  SUBCASE("matches the dense pseudoinverse oracle") {
    const TorusModel m = periodic123(3);
    const RealField g = local_drift(m, 0);
    const auto [x, rep] = solve_deflated(m, g, cfg);

    // oracle: eigendecompose -L assembled by probing the stencil
    const auto n = static_cast<Eigen::Index>(m.n_sites());
    Eigen::MatrixXd negL(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      std::vector<double> e(m.n_sites(), 0.0), col(m.n_sites());
      e[static_cast<std::size_t>(j)] = 1.0;
      apply_generator(m, e.data(), col.data());
      for (Eigen::Index i = 0; i < n; ++i) negL(i, j) = -col[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(negL);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) b(i) = g[static_cast<std::size_t>(i)];
    Eigen::VectorXd sol = Eigen::VectorXd::Zero(n);
    for (Eigen::Index q = 0; q < n; ++q) {
      if (es.eigenvalues()(q) < 1e-10) continue;
      sol += es.eigenvectors().col(q).dot(b) / es.eigenvalues()(q) *
             es.eigenvectors().col(q);
    }
    for (std::size_t i = 0; i < m.n_sites(); ++i)
      CHECK(x[i] == doctest::Approx(sol(static_cast<Eigen::Index>(i))).epsilon(1e-10));
  }
  SUBCASE("zero-mean solution with a certified residual") {
    EnvironmentSpec spec;
    spec.kind = IID{UniformDist{1.0, 2.0}};
    spec.seed = 51;
    const TorusModel m = make_torus(spec, Neighborhood::nearest(2), 8);
    const RealField g = local_drift(m, 0);
    const auto [x, rep] = solve_deflated(m, g, cfg);
    CHECK(std::abs(mean(m, x)) <= 1e-13);
    CHECK(rep.residual <= cfg.tol);
  }
  SUBCASE("nonzero-mean rhs is rejected") {
    const TorusModel m = periodic123(3);
    RealField bad(m.n_sites(), 1.0);
    CHECK_THROWS_AS(solve_deflated(m, bad, cfg), ValidationError);
  }
}
