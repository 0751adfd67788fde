#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcm {

using ivec = std::vector<std::int64_t>;

/// Raised when user-supplied data violates a documented precondition.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A finite symmetric jump set whose integer span is all of Z^d.
///
/// Only the half set is stored explicitly; the full set is the disjoint
/// union of the half set and its negation. Constructed through
/// make_neighborhood, which validates all invariants.
struct Neighborhood {
  int dim = 0;
  std::vector<ivec> half_set;   // one representative per +-z pair
  std::vector<ivec> full_set;   // half_set followed by its negation
  std::int64_t max_norm = 0;    // max sup-norm over the full set

  int n_half() const { return static_cast<int>(half_set.size()); }
  int n_full() const { return static_cast<int>(full_set.size()); }

  /// Canonical nearest-neighbour set {e_1, ..., e_d}.
  static Neighborhood nearest(int dim);
};

/// Validates a half set and builds the neighborhood.
///
/// Rejects zero vectors, dimension mismatches, duplicate directions,
/// pairs z and -z both given, and half sets whose integer span is a
/// proper sublattice of Z^d.
Neighborhood make_neighborhood(const std::vector<ivec>& half_set);

/// True iff the integer span of the given vectors is all of Z^d.
/// Checks that the gcd of all d x d minors of the generator matrix is 1,
/// i.e. that the Smith normal form has unit elementary divisors.
bool spans_integer_lattice(const std::vector<ivec>& vecs, int dim);

}  // namespace rcm
