// Shared generators and reference computations for the test programs.
#pragma once

#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "fractal_sl/renewal.hpp"

namespace fsl::fixtures {

struct RandomRenewal {
  std::vector<double> u, v;  // v empty: scalar
  std::vector<double> x1, x2;
};

// Random coefficients of order <= 6 that satisfy the hypotheses; drawn until
// the system is accepted.
inline RandomRenewal random_renewal(std::mt19937_64& rng, bool coupled) {
  std::uniform_int_distribution<int> order(1, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution keep(0.7);
  while (true) {
    RandomRenewal r;
    const int n = order(rng);
    r.u.assign(static_cast<std::size_t>(n), 0.0);
    if (coupled) r.v.assign(static_cast<std::size_t>(n), 0.0);
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      if (keep(rng)) total += r.u[static_cast<std::size_t>(k)] = unit(rng);
      if (coupled && keep(rng)) total += r.v[static_cast<std::size_t>(k)] = unit(rng);
    }
    if (!(total > 0.0)) continue;
    for (double& c : r.u) c /= total;
    for (double& c : r.v) c /= total;
    try {
      if (coupled) {
        (void)RenewalSystem::coupled(r.u, r.v);
      } else {
        (void)RenewalSystem::scalar(r.u);
      }
    } catch (const HypothesisError&) {
      continue;
    }
    std::uniform_int_distribution<int> len(1, 5);
    std::uniform_real_distribution<double> val(-1.0, 2.0);
    r.x1.resize(static_cast<std::size_t>(len(rng)));
    for (double& x : r.x1) x = val(rng);
    if (coupled) {
      r.x2.resize(static_cast<std::size_t>(len(rng)));
      for (double& x : r.x2) x = val(rng);
    }
    return r;
  }
}

// Plain long-double recursion, written without the library's helpers.
inline std::pair<std::vector<long double>, std::vector<long double>> brute_force(
    const RandomRenewal& r, std::size_t n_max) {
  const bool coupled = !r.v.empty();
  std::vector<long double> z1(n_max + 1, 0.0L), z2(n_max + 1, 0.0L);
  for (std::size_t n = 0; n <= n_max; ++n) {
    long double a = n < r.x1.size() ? r.x1[n] : 0.0L;
    long double b = n < r.x2.size() ? r.x2[n] : 0.0L;
    for (std::size_t k = 1; k <= r.u.size() && k <= n; ++k) {
      a += static_cast<long double>(r.u[k - 1]) * z1[n - k];
      if (coupled) {
        a += static_cast<long double>(r.v[k - 1]) * z2[n - k];
        b += static_cast<long double>(r.u[k - 1]) * z2[n - k] +
             static_cast<long double>(r.v[k - 1]) * z1[n - k];
      }
    }
    z1[n] = a;
    z2[n] = b;
  }
  return {z1, z2};
}

inline RenewalSolution solve(const RandomRenewal& r, std::size_t n_max) {
  WeightedSequence x1{r.x1, 1.0}, x2{r.x2, 1.0};
  if (r.v.empty()) return solve_scalar(RenewalSystem::scalar(r.u), x1, n_max);
  return solve_coupled(RenewalSystem::coupled(r.u, r.v), x1, x2, n_max);
}

}  // namespace fsl::fixtures
