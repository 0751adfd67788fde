#include <doctest.h>

#include <cmath>
#include <complex>

#include "rcm/environment.hpp"
#include "rcm/mobility.hpp"
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

TorusModel constant_model(int dim, std::int64_t n, double c0) {
  EnvironmentSpec spec;
  spec.kind = Constant{c0};
  return make_torus(spec, Neighborhood::nearest(dim), n);
}

TorusModel iid2d(std::int64_t n, std::uint64_t seed) {
  EnvironmentSpec spec;
  spec.kind = IID{UniformDist{1.0, 2.0}};
  spec.seed = seed;
  return make_torus(spec, Neighborhood::nearest(2), n);
}

double max_entry_dev(const MobilityMatrix& a, const MobilityMatrix& b) {
  double dev = 0.0;
  for (int j = 0; j < a.dim; ++j)
    for (int k = 0; k < a.dim; ++k) dev = std::max(dev, std::abs(a.at(j, k) - b.at(j, k)));
  return dev;
}

}  // namespace

TEST_CASE("constant environment gives 2 c0 I at every frequency") {
  const double c0 = 1.3;
  for (int d : {1, 2}) {
    for (std::int64_t n : {4, 8}) {
      const TorusModel m = constant_model(d, n, c0);
      SolveConfig cfg;
      for (double w : {0.1, 1.0, 10.0}) {
        const MobilityMatrix sig = mobility_matrix(m, w, cfg);
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k) {
            const double expected = j == k ? 2.0 * c0 : 0.0;
            CHECK(std::abs(sig.at(j, k) - std::complex<double>(expected)) <= 1e-12);
          }
      }
    }
  }
}

TEST_CASE("d=1 n=3 matrix matches a dense-oracle evaluation") {
  const TorusModel m = periodic123(3);
  const double omega = 1.0;
  SolveConfig cfg;
  const MobilityMatrix sig = mobility_matrix(m, omega, cfg);

  // oracle: dense corrector + direct sums, assembled independently
  const RealField g = local_drift(m, 0);
  const ComplexField theta = dense_solve(m, omega, g);
  double mbar = 0.0;
  for (std::size_t s = 0; s < m.n_sites(); ++s) mbar += m.cond(s, 0);
  mbar /= static_cast<double>(m.n_sites());
  std::complex<double> resolvent = 0.0;
  for (std::size_t s = 0; s < m.n_sites(); ++s)
    resolvent += g[s] * std::complex<double>(theta.re[s], theta.im[s]);
  resolvent /= static_cast<double>(m.n_sites());
  const std::complex<double> expected = 2.0 * mbar - 2.0 * resolvent;

  CHECK(std::abs(sig.at(0, 0) - expected) <= 1e-10);
}

TEST_CASE("frequency sign flip conjugates the matrix") {
  SolveConfig cfg;
  auto check_conjugation = [&](const TorusModel& m, double omega) {
    const MobilityMatrix fwd = assemble_mobility(m, omega, cfg).sigma;
    const MobilityMatrix bwd = assemble_mobility(m, -omega, cfg).sigma;
    for (int j = 0; j < m.dim(); ++j)
      for (int k = 0; k < m.dim(); ++k)
        CHECK(std::abs(bwd.at(j, k) - std::conj(fwd.at(j, k))) <= 1e-10);
  };
  check_conjugation(periodic123(6), 0.8);
  check_conjugation(iid2d(8, 1), 0.8);
}

TEST_CASE("matrix is stored symmetrically and rejects bad frequencies") {
  const TorusModel m = iid2d(6, 5);
  SolveConfig cfg;
  const MobilityMatrix sig = mobility_matrix(m, 1.0, cfg);
  CHECK(sig.at(0, 1) == sig.at(1, 0));  // bitwise
  CHECK_THROWS_AS(mobility_matrix(m, 0.0, cfg), ValidationError);
  CHECK_THROWS_AS(mobility_matrix(m, -1.0, cfg), ValidationError);
}

TEST_CASE("gradient-form assembly agrees with the resolvent form") {
  SolveConfig cfg;
  SUBCASE("constant environment is exact") {
    const TorusModel m = constant_model(2, 4, 1.0);
    CHECK(gradient_formula_check(m, 1.0, cfg) <= 1e-12);
  }
  SUBCASE("d=1 n=3") {
    const TorusModel m = periodic123(3);
    CHECK(gradient_formula_check(m, 1.0, cfg) <= 1e-9);
  }
  SUBCASE("d=2 n=8 iid across frequencies") {
    const TorusModel m = iid2d(8, 1);
    for (double w : {0.1, 1.0, 10.0}) CHECK(gradient_formula_check(m, w, cfg) <= 1e-8);
  }
}

TEST_CASE("quadratic form split") {
  SolveConfig cfg;
  SUBCASE("constant environment: (2 c0, 0)") {
    const TorusModel m = constant_model(2, 4, 1.0);
    const QuadraticSplit qs = quadratic_form_split(m, 1.0, {1.0, 0.0}, cfg);
    CHECK(qs.direct.real() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(qs.direct.imag()) <= 1e-12);
    CHECK(qs.re_energy == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(qs.im_magnitude <= 1e-12);
  }
  SUBCASE("d=1 n=3: both routes agree") {
    const TorusModel m = periodic123(3);
    const QuadraticSplit qs = quadratic_form_split(m, 1.0, {1.0}, cfg);
    CHECK(qs.re_discrepancy <= 1e-8 * std::abs(qs.direct.real()));
    CHECK(qs.im_discrepancy <= 1e-8 * std::abs(qs.direct.imag()));
  }
  SUBCASE("d=2 n=8 iid: |Im| equals 2 omega ||theta||^2") {
    const TorusModel m = iid2d(8, 1);
    for (const std::vector<double>& a : {std::vector<double>{1.0, 0.0},
                                         std::vector<double>{0.7, -0.3}}) {
      const QuadraticSplit qs = quadratic_form_split(m, 0.5, a, cfg);
      CHECK(qs.im_discrepancy <=
            1e-8 * std::max(std::abs(qs.direct.imag()), qs.im_magnitude));
      CHECK(qs.re_discrepancy <= 1e-8 * std::abs(qs.direct.real()));
      CHECK(qs.direct.real() >= 0.0);
    }
  }
  SUBCASE("zero direction is rejected") {
    const TorusModel m = periodic123(3);
    CHECK_THROWS_AS(quadratic_form_split(m, 1.0, {0.0}, cfg), ValidationError);
  }
}

TEST_CASE("diffusion matrix") {
  SolveConfig cfg;
  SUBCASE("constant environment") {
    const TorusModel m = constant_model(2, 4, 1.3);
    const MobilityMatrix sig = diffusion_matrix(m, cfg);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        CHECK(sig.at(j, k).imag() == 0.0);
        CHECK(std::abs(sig.at(j, k).real() - (j == k ? 2.6 : 0.0)) <= 1e-12);
      }
  }
  SUBCASE("d=1 periodic (1,2,3): effective conductance is the harmonic mean") {
    // series resistors: sigma(0) = 2 * 3 / (1/1 + 1/2 + 1/3) = 36/11
    const double expected = 2.0 * 3.0 / (1.0 / 1.0 + 1.0 / 2.0 + 1.0 / 3.0);
    for (std::int64_t n : {3, 6, 12}) {
      const TorusModel m = periodic123(n);
      const MobilityMatrix sig = diffusion_matrix(m, cfg);
      CHECK(std::abs(sig.at(0, 0).real() - expected) <= 1e-10);
      CHECK(std::abs(36.0 / 11.0 - expected) <= 1e-15);
    }
  }
  SUBCASE("positive semidefinite for a 2d model") {
    const TorusModel m = iid2d(6, 8);
    const MobilityMatrix sig = diffusion_matrix(m, cfg);
    const double a = sig.at(0, 0).real(), b = sig.at(0, 1).real(),
                 c = sig.at(1, 1).real();
    CHECK(a >= 0.0);
    CHECK(a * c - b * b >= -1e-12);
  }
  SUBCASE("omega to zero continuity") {
    const TorusModel m = periodic123(6);
    const MobilityMatrix sig0 = diffusion_matrix(m, cfg);
    std::vector<double> gaps;
    for (double w : {1e-1, 1e-2, 1e-3})
      gaps.push_back(max_entry_dev(mobility_matrix(m, w, cfg), sig0));
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[2] < gaps[1]);
  }
}

TEST_CASE("energy identities hold on solved correctors") {
  SolveConfig cfg;
  for (const auto& entry : rcm_tests::suite_models()) {
    CAPTURE(entry.name);
    const TorusModel m = make_torus(entry.spec, entry.nbhd, entry.n);
    for (double w : {0.1, 1.0, 10.0}) {
      const MobilityAssembly as = assemble_mobility(m, w, cfg);
      for (int k = 0; k < m.dim(); ++k) {
        if (std::sqrt(inner(m, as.gamma[k], as.gamma[k])) == 0.0) continue;
        const auto e = energy_identity_errors(m, w, as.gamma[k], as.theta[k]);
        CHECK(e.l2_identity <= 1e-8);
        CHECK(e.dirichlet_identity <= 1e-8);
      }
    }
  }
}

TEST_CASE("time-integral route") {
  SolveConfig cfg;
  SUBCASE("constant environment: integrand vanishes") {
    const TorusModel m = constant_model(1, 4, 1.5);
    const TimeIntegralMobility ti = time_integral_mobility(m, 1.0, 5.0, 100000, cfg);
    CHECK(std::abs(ti.sigma.at(0, 0) - std::complex<double>(3.0)) <= 1e-12);
    CHECK(ti.tail_estimate == 0.0);
  }
  SUBCASE("d=1 n=3 matches the resolvent route") {
    const TorusModel m = periodic123(3);
    const MobilityMatrix res = mobility_matrix(m, 1.0, cfg);
    const TimeIntegralMobility ti = time_integral_mobility(m, 1.0, 12.0, 100000, cfg, 1e-9);
    CHECK(ti.tail_estimate <= 1e-9);
    CHECK(max_entry_dev(ti.sigma, res) <= 1e-6);
  }
  SUBCASE("d=2 n=6 iid matches the resolvent route") {
    const TorusModel m = iid2d(6, 12);
    const MobilityMatrix res = mobility_matrix(m, 0.5, cfg);
    const TimeIntegralMobility ti = time_integral_mobility(m, 0.5, 40.0, 200000, cfg, 1e-9);
    CHECK(max_entry_dev(ti.sigma, res) <= 1e-6);
  }
  SUBCASE("cauchy in s_max") {
    const TorusModel m = periodic123(3);
    const MobilityMatrix res = mobility_matrix(m, 1.0, cfg);
    std::vector<double> devs;
    for (double s_max : {1.0, 2.0, 4.0, 8.0})
      devs.push_back(max_entry_dev(
          time_integral_mobility(m, 1.0, s_max, 100000, cfg, 1e6).sigma, res));
    CHECK(devs[1] < devs[0]);
    CHECK(devs[2] < devs[1]);
    CHECK(devs[3] < devs[2]);
  }
  SUBCASE("unresolved tail fails with diagnostics") {
    const TorusModel m = periodic123(3);
    CHECK_THROWS_AS(time_integral_mobility(m, 1.0, 0.5, 100000, cfg, 1e-12),
                    QuadratureError);
  }
}
