#include "rcm/neighborhood.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>

namespace rcm {

namespace {

std::int64_t det_recursive(const std::vector<std::vector<std::int64_t>>& m) {
  const std::size_t n = m.size();
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  std::int64_t det = 0;
  std::int64_t sign = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<std::int64_t>> sub(n - 1, std::vector<std::int64_t>(n - 1));
    for (std::size_t i = 1; i < n; ++i) {
      std::size_t jj = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == c) continue;
        sub[i - 1][jj++] = m[i][j];
      }
    }
    det += sign * m[0][c] * det_recursive(sub);
    sign = -sign;
  }
  return det;
}

}  // namespace

bool spans_integer_lattice(const std::vector<ivec>& vecs, int dim) {
  const std::size_t m = vecs.size();
  if (m < static_cast<std::size_t>(dim)) return false;

  // gcd of the d x d minors equals the product of the elementary
  // divisors of the generator matrix; the span is Z^d iff it is 1.
  std::vector<std::size_t> idx(dim);
  std::int64_t g = 0;

  // enumerate all column subsets of size dim
  std::vector<std::size_t> comb(dim);
  std::iota(comb.begin(), comb.end(), 0);
  while (true) {
    std::vector<std::vector<std::int64_t>> minor(dim, std::vector<std::int64_t>(dim));
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) minor[r][c] = vecs[comb[c]][r];
    g = std::gcd(g, std::abs(det_recursive(minor)));
    if (g == 1) return true;

    // next combination
    int i = dim - 1;
    while (i >= 0 && comb[i] == m - static_cast<std::size_t>(dim - i)) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < dim; ++j) comb[j] = comb[j - 1] + 1;
  }
  return g == 1;
}

Neighborhood make_neighborhood(const std::vector<ivec>& half_set) {
  if (half_set.empty()) throw ValidationError("neighborhood: half set is empty");
  const int dim = static_cast<int>(half_set[0].size());
  if (dim < 1) throw ValidationError("neighborhood: dimension must be positive");

  std::set<ivec> seen;
  for (const auto& z : half_set) {
    if (static_cast<int>(z.size()) != dim)
      throw ValidationError("neighborhood: mixed vector dimensions");
    if (std::all_of(z.begin(), z.end(), [](std::int64_t c) { return c == 0; }))
      throw ValidationError("neighborhood: zero vector not allowed");
    if (!seen.insert(z).second)
      throw ValidationError("neighborhood: duplicate direction in half set");
  }
  for (const auto& z : half_set) {
    ivec neg(z.size());
    std::transform(z.begin(), z.end(), neg.begin(), [](std::int64_t c) { return -c; });
    if (seen.count(neg))
      throw ValidationError("neighborhood: half set contains both z and -z");
  }
  if (!spans_integer_lattice(half_set, dim))
    throw ValidationError("neighborhood: jump set does not span Z^d");

  Neighborhood nb;
  nb.dim = dim;
  nb.half_set = half_set;
  nb.full_set = half_set;
  for (const auto& z : half_set) {
    ivec neg(z.size());
    std::transform(z.begin(), z.end(), neg.begin(), [](std::int64_t c) { return -c; });
    nb.full_set.push_back(std::move(neg));
  }
  nb.max_norm = 0;
  for (const auto& z : nb.full_set)
    for (std::int64_t c : z) nb.max_norm = std::max(nb.max_norm, std::abs(c));
  return nb;
}

Neighborhood Neighborhood::nearest(int dim) {
  if (dim < 1) throw ValidationError("neighborhood: dimension must be positive");
  std::vector<ivec> half;
  for (int k = 0; k < dim; ++k) {
    ivec e(dim, 0);
    e[k] = 1;
    half.push_back(std::move(e));
  }
  return make_neighborhood(half);
}

}  // namespace rcm
