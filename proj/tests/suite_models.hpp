#pragma once

// Shared desk-scale model suite used by the solver/mobility tests and the
// acceptance runner. Every model stays small enough for the dense oracle.

#include <string>
#include <vector>

#include "rcm/environment.hpp"

namespace rcm_tests {

struct SuiteEntry {
  std::string name;
  rcm::Neighborhood nbhd;
  rcm::EnvironmentSpec spec;
  std::int64_t n;
};

inline std::vector<SuiteEntry> suite_models() {
  using namespace rcm;
  std::vector<SuiteEntry> suite;

  {
    Periodic pat;
    pat.periods = {3};
    pat.values = {{1.0}, {2.0}, {3.0}};
    EnvironmentSpec s;
    s.kind = pat;
    suite.push_back({"d1_n3_periodic123", Neighborhood::nearest(1), s, 3});
    suite.push_back({"d1_n15_periodic123", Neighborhood::nearest(1), s, 15});
  }
  {
    EnvironmentSpec s;
    s.kind = IID{UniformDist{1.0, 2.0}};
    s.seed = 7;
    suite.push_back({"d1_n5_uniform", Neighborhood::nearest(1), s, 5});
  }
  {
    EnvironmentSpec s;
    s.kind = IID{LogNormalDist{0.0, 0.5}};
    s.seed = 11;
    suite.push_back({"d1_n64_lognormal", Neighborhood::nearest(1), s, 64});
  }
  {
    // first- and second-neighbour jumps
    EnvironmentSpec s;
    s.kind = IID{UniformDist{1.0, 2.0}};
    s.seed = 5;
    suite.push_back({"d1_n8_longrange", make_neighborhood({{1}, {2}}), s, 8});
  }
  {
    EnvironmentSpec s;
    s.kind = Constant{1.3};
    suite.push_back({"d2_n4_constant", Neighborhood::nearest(2), s, 4});
  }
  {
    EnvironmentSpec s;
    s.kind = IID{UniformDist{1.0, 2.0}};
    s.seed = 2;
    suite.push_back({"d2_n6_uniform", Neighborhood::nearest(2), s, 6});
    s.seed = 1;
    suite.push_back({"d2_n8_uniform", Neighborhood::nearest(2), s, 8});
  }
  {
    EnvironmentSpec s;
    s.kind = IID{TwoPointDist{1.0, 4.0, 0.3}};
    s.seed = 9;
    suite.push_back({"d2_n12_twopoint", Neighborhood::nearest(2), s, 12});
  }
  {
    EnvironmentSpec s;
    s.kind = IID{UniformDist{1.0, 2.0}};
    s.seed = 4;
    suite.push_back(
        {"d2_n8_diagonal", make_neighborhood({{1, 0}, {0, 1}, {1, 1}}), s, 8});
  }
  return suite;
}

}  // namespace rcm_tests
