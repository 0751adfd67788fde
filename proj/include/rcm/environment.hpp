#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rcm/neighborhood.hpp"
#include "rcm/torus.hpp"

namespace rcm {

/// Integer box [lo, hi)^d.
struct Box {
  ivec lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  std::size_t volume() const;
  bool contains(const Box& inner) const;
  static Box cube(int dim, std::int64_t lo, std::int64_t hi);
};

// --- environment families ---

struct Constant {
  double c0 = 1.0;
};

struct UniformDist {
  double a = 1.0, b = 2.0;
};
struct LogNormalDist {
  double mu = 0.0, s = 0.25;
};
/// Two-valued conductance: value hi with probability p_hi, else lo.
struct TwoPointDist {
  double lo = 1.0, hi = 2.0, p_hi = 0.5;
};
using IidDistribution = std::variant<UniformDist, LogNormalDist, TwoPointDist>;

struct IID {
  IidDistribution dist;
};

/// Deterministic pattern tiled over Z^d. Values are stored per pattern
/// site (lexicographic, first coordinate fastest) and per half-set
/// direction.
struct Periodic {
  ivec periods;                             // one per dimension
  std::vector<std::vector<double>> values;  // [site][zi], site count = prod periods
};

struct EnvironmentSpec {
  std::variant<Constant, IID, Periodic> kind;
  std::uint64_t seed = 0;
};

/// Validates distribution support and pattern shape against a neighborhood.
void validate_spec(const EnvironmentSpec& spec, const Neighborhood& nbhd);

/// Conductances of one environment realization restricted to a box.
/// values(x, zi) is the rate on the edge (x, x + z_i), z_i in the half set.
class ConductanceField {
 public:
  ConductanceField(Neighborhood nbhd, Box box, std::vector<double> values);

  const Neighborhood& neighborhood() const { return nbhd_; }
  const Box& box() const { return box_; }
  double at(const ivec& x, int zi) const;
  const std::vector<double>& raw() const { return values_; }

 private:
  Neighborhood nbhd_;
  Box box_;
  std::vector<double> values_;  // box volume x n_half
};

/// Single-edge evaluation, a pure function of (spec, x, z). Values agree
/// bit-exactly between overlapping boxes, so one fixed realization can be
/// periodized at every torus size of a sweep.
double conductance_at(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                      const ivec& x, int zi);

ConductanceField sample_field(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                              const Box& box);

/// Periodized rates on the torus of side n: every fundamental-cell edge
/// keeps its sampled value, and the tiling wraps. Requires the field box
/// to contain [0,n)^d and n to exceed twice the neighbourhood radius.
TorusModel periodize(const ConductanceField& field, std::int64_t n);

/// Convenience: sample [0,n)^d and periodize.
TorusModel make_torus(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                      std::int64_t n);

/// Per-direction cell averages n^{-d} sum_{x in [0,n)^d} c_{x,x+z}^moment,
/// moment 1 or 2.
std::vector<double> ergodic_average(const ConductanceField& field, std::int64_t n,
                                    int moment);

// --- JSON dump/load of a sampled field (17 significant digits) ---

std::string field_to_json(const ConductanceField& field);
ConductanceField field_from_json(const std::string& text);

}  // namespace rcm
