#pragma once

#include <cstddef>
#include <vector>

namespace rcm {

/// Pairwise (tree) summation of f(0..n-1). Deterministic association
/// order regardless of caller threading, and O(log n) error growth.
template <typename F>
double pairwise_reduce(std::size_t n, F&& f) {
  constexpr std::size_t kBlock = 64;
  if (n <= kBlock) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += f(i);
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_reduce(half, f) +
         pairwise_reduce(n - half, [&](std::size_t i) { return f(half + i); });
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_reduce(v.size(), [&](std::size_t i) { return v[i]; });
}

}  // namespace rcm
