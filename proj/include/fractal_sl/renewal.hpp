// Lattice renewal equations with finite support.
//
// Scalar:  z_n = x_n + sum_{k=1..N} u_k z_{n-k}
// Coupled: z_{j,n} = x_{j,n} + sum_k (u_k z_{j,n-k} + v_k z_{3-j,n-k}),  j = 1,2
//
// Solutions are obtained by forward recursion; the limit omega / J is
// reported next to the empirical tail behaviour.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fractal_sl/selfsim.hpp"

namespace fsl {

/// Finite sequence with the l_{1,r} norm sum r^k |theta_k|.
struct WeightedSequence {
  std::vector<double> entries;
  double weight = 1.0;

  double norm() const {
    double s = 0.0, w = 1.0;
    for (double v : entries) {
      s += w * std::abs(v);
      w *= weight;
    }
    return s;
  }
  double at(std::size_t n) const { return n < entries.size() ? entries[n] : 0.0; }
  double total() const { return detail::compensated_sum(entries); }
};

inline WeightedSequence unit_impulse() { return {{1.0}, 1.0}; }

/// Coefficients u_k, v_k for k = 1..N, stored 0-based (u[0] is u_1).
class RenewalSystem {
 public:
  static RenewalSystem scalar(std::vector<double> u) {
    RenewalSystem s;
    s.v_.assign(u.size(), 0.0);
    s.u_ = std::move(u);
    s.coupled_ = false;
    s.check();
    return s;
  }

  static RenewalSystem coupled(std::vector<double> u, std::vector<double> v) {
    const std::size_t n = std::max(u.size(), v.size());
    u.resize(n, 0.0);
    v.resize(n, 0.0);
    RenewalSystem s;
    s.u_ = std::move(u);
    s.v_ = std::move(v);
    s.coupled_ = true;
    s.check();
    return s;
  }

  std::size_t order() const noexcept { return u_.size(); }
  const std::vector<double>& u() const noexcept { return u_; }
  const std::vector<double>& v() const noexcept { return v_; }
  bool is_coupled() const noexcept { return coupled_; }

  /// J = sum k (u_k + v_k).
  double mean_lag() const {
    double j = 0.0;
    for (std::size_t i = 0; i < u_.size(); ++i) {
      j += static_cast<double>(i + 1) * (u_[i] + v_[i]);
    }
    return j;
  }

 private:
  RenewalSystem() = default;

  void check() const {
    if (u_.empty()) throw HypothesisError("renewal system needs at least one coefficient");
    double total = 0.0, v_total = 0.0;
    long long g = 0;
    for (std::size_t i = 0; i < u_.size(); ++i) {
      if (!(u_[i] >= 0.0) || !(v_[i] >= 0.0)) {
        throw HypothesisError("coefficients u_k, v_k must be non-negative");
      }
      total += u_[i] + v_[i];
      v_total += v_[i];
      if (u_[i] + v_[i] > 0.0) g = std::gcd(g, static_cast<long long>(i + 1));
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
      throw HypothesisError("sum of u_k + v_k must equal 1 (got " + std::to_string(total) + ")");
    }
    if (g != 1) {
      throw HypothesisError("gcd{k : u_k + v_k > 0} must equal 1 (got " + std::to_string(g) + ")");
    }
    if (!coupled_) return;
    if (!(v_total > 0.0)) throw HypothesisError("coupled system requires sum v_k > 0");
    bool parity = false;
    for (std::size_t i = 0; i < u_.size(); ++i) {
      const bool odd = ((i + 1) % 2) == 1;
      if ((odd && u_[i] > 0.0) || (!odd && v_[i] > 0.0)) parity = true;
    }
    if (!parity) {
      throw HypothesisError(
          "coupled system requires an odd k with u_k > 0 or an even k with v_k > 0");
    }
  }

  std::vector<double> u_, v_;
  bool coupled_ = false;
};

inline constexpr double kLimitDiagnostic = 1e-6;

struct RenewalSolution {
  /// One sequence (scalar) or two (coupled); grid samples in continuous mode.
  std::vector<std::vector<double>> z;
  double omega = 0.0;
  double J = 0.0;
  double limit = 0.0;  ///< omega / J
  /// max |z_n - limit| over the second half of the computed range.
  double gap = 0.0;
  /// Mean of z over the second half of the computed range.
  double tail_average = 0.0;
  /// max |z_n - x_n - sum(...)|, recomputed after the solve.
  double residual = 0.0;
  double input_norm = 0.0;
  bool diagnostic = false;
  std::string note;

  // Continuous mode only.
  double dt = 0.0;
  std::vector<double> profile;  ///< s(t) on one period, t = i * dt
  double profile_gap = 0.0;     ///< max |Z(t) - s(t)| over the last unit interval
};

namespace detail {

inline void finish_discrete(RenewalSolution& sol) {
  const std::size_t len = sol.z.front().size();
  const std::size_t half = len / 2;
  double gap = 0.0, acc = 0.0;
  std::size_t count = 0;
  for (const auto& seq : sol.z) {
    for (std::size_t n = half; n < len; ++n) {
      gap = std::max(gap, std::abs(seq[n] - sol.limit));
      acc += seq[n];
      ++count;
    }
  }
  sol.gap = gap;
  sol.tail_average = count ? acc / static_cast<double>(count) : 0.0;
  if (std::abs(sol.tail_average - sol.limit) > kLimitDiagnostic) {
    sol.diagnostic = true;
    sol.note = "tail average differs from omega/J by more than 1e-6";
  }
}

}  // namespace detail

inline RenewalSolution solve_scalar(const RenewalSystem& sys, const WeightedSequence& x,
                                    std::size_t n_max) {
  if (sys.is_coupled()) throw HypothesisError("solve_scalar needs a scalar system");
  const auto& u = sys.u();
  std::vector<double> z(n_max + 1, 0.0);
  for (std::size_t n = 0; n <= n_max; ++n) {
    double acc = x.at(n);
    for (std::size_t k = 1; k <= std::min(u.size(), n); ++k) acc += u[k - 1] * z[n - k];
    z[n] = acc;
  }
  RenewalSolution sol;
  for (std::size_t n = 0; n <= n_max; ++n) {
    double rhs = x.at(n);
    for (std::size_t k = 1; k <= std::min(u.size(), n); ++k) rhs += u[k - 1] * z[n - k];
    sol.residual = std::max(sol.residual, std::abs(z[n] - rhs));
  }
  sol.z.push_back(std::move(z));
  sol.omega = x.total();
  sol.J = sys.mean_lag();
  sol.limit = sol.omega / sol.J;
  sol.input_norm = x.norm();
  detail::finish_discrete(sol);
  return sol;
}

inline RenewalSolution solve_coupled(const RenewalSystem& sys, const WeightedSequence& x1,
                                     const WeightedSequence& x2, std::size_t n_max) {
  if (!sys.is_coupled()) throw HypothesisError("solve_coupled needs a coupled system");
  const auto& u = sys.u();
  const auto& v = sys.v();
  std::vector<double> z1(n_max + 1, 0.0), z2(n_max + 1, 0.0);
  auto step = [&](std::size_t n, double& r1, double& r2) {
    r1 = x1.at(n);
    r2 = x2.at(n);
    for (std::size_t k = 1; k <= std::min(u.size(), n); ++k) {
      r1 += u[k - 1] * z1[n - k] + v[k - 1] * z2[n - k];
      r2 += u[k - 1] * z2[n - k] + v[k - 1] * z1[n - k];
    }
  };
  for (std::size_t n = 0; n <= n_max; ++n) step(n, z1[n], z2[n]);
  RenewalSolution sol;
  for (std::size_t n = 0; n <= n_max; ++n) {
    double r1, r2;
    step(n, r1, r2);
    sol.residual = std::max({sol.residual, std::abs(z1[n] - r1), std::abs(z2[n] - r2)});
  }
  sol.z.push_back(std::move(z1));
  sol.z.push_back(std::move(z2));
  sol.omega = 0.5 * (x1.total() + x2.total());
  sol.J = sys.mean_lag();
  sol.limit = sol.omega / sol.J;
  sol.input_norm = x1.norm() + x2.norm();
  detail::finish_discrete(sol);
  return sol;
}

/// Grid step 1/Q for a positive integer Q, or throws.
inline std::size_t steps_per_unit(double dt) {
  if (!(dt > 0.0 && dt <= 1.0)) throw ParamError("dt must lie in (0, 1]");
  const double q = std::round(1.0 / dt);
  if (std::abs(q * dt - 1.0) > 1e-12) {
    throw ParamError("dt must equal 1/Q for an integer Q so that integer lags stay on the grid");
  }
  return static_cast<std::size_t>(q);
}

/// Continuous renewal equation on the grid t_i = i dt, i = 0..T/dt.
///
/// `forcing` holds one sampled X (scalar) or two (coupled), each of length
/// T/dt + 1, with X = 0 understood for t < 0.  The periodic profile
/// s(t) = (1/J) sum_k X(t - k) (or (1/2J) sum_k (X_1 + X_2)(t - k)) is
/// evaluated from the available samples.
inline RenewalSolution solve_continuous(const RenewalSystem& sys,
                                        const std::vector<std::vector<double>>& forcing,
                                        double T, double dt) {
  const std::size_t q = steps_per_unit(dt);
  const std::size_t components = sys.is_coupled() ? 2 : 1;
  if (forcing.size() != components) {
    throw ParamError("expected " + std::to_string(components) + " forcing function(s)");
  }
  const auto steps = static_cast<std::size_t>(std::llround(T * static_cast<double>(q)));
  const std::size_t len = steps + 1;
  for (const auto& f : forcing) {
    if (f.size() != len) throw ParamError("forcing samples must cover [0, T] on the grid");
  }
  const auto& u = sys.u();
  const auto& v = sys.v();
  std::vector<std::vector<double>> z(components, std::vector<double>(len, 0.0));
  auto rhs = [&](std::size_t j, std::size_t i) {
    double acc = forcing[j][i];
    for (std::size_t k = 1; k <= u.size() && k * q <= i; ++k) {
      acc += u[k - 1] * z[j][i - k * q];
      if (components == 2) acc += v[k - 1] * z[1 - j][i - k * q];
    }
    return acc;
  };
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < components; ++j) z[j][i] = rhs(j, i);
  }

  RenewalSolution sol;
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < components; ++j) {
      sol.residual = std::max(sol.residual, std::abs(z[j][i] - rhs(j, i)));
    }
  }
  sol.J = sys.mean_lag();
  sol.dt = 1.0 / static_cast<double>(q);
  sol.profile.assign(q, 0.0);
  const double scale = 1.0 / (static_cast<double>(components) * sol.J);
  for (std::size_t i = 0; i < q; ++i) {
    double acc = 0.0;
    for (std::size_t m = i; m < len; m += q) {
      for (std::size_t j = 0; j < components; ++j) acc += forcing[j][m];
    }
    sol.profile[i] = scale * acc;
  }
  const std::size_t first = len > q + 1 ? len - q - 1 : 0;
  for (std::size_t i = first; i < len; ++i) {
    for (std::size_t j = 0; j < components; ++j) {
      sol.profile_gap = std::max(sol.profile_gap, std::abs(z[j][i] - sol.profile[i % q]));
    }
  }
  sol.z = std::move(z);
  return sol;
}

/// Samples X on [0, T] and solves.
inline RenewalSolution solve_continuous(const RenewalSystem& sys,
                                        const std::vector<std::function<double(double)>>& forcing,
                                        double T, double dt) {
  const std::size_t q = steps_per_unit(dt);
  const auto steps = static_cast<std::size_t>(std::llround(T * static_cast<double>(q)));
  std::vector<std::vector<double>> samples;
  for (const auto& f : forcing) {
    std::vector<double> s(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      s[i] = f(static_cast<double>(i) / static_cast<double>(q));
    }
    samples.push_back(std::move(s));
  }
  return solve_continuous(sys, samples, T, dt);
}

}  // namespace fsl
