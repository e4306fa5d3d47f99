// Self-similar functions on [0,1] defined through a similarity operator
//
//   G(f) = sum_k { beta_k * chi_(alpha_k, alpha_k+1) + d_k * G_k(f) },
//   G_k(chi_(z,x)) = chi_(alpha_k + a_k z, alpha_k + a_k x).
//
// The fixed point P of G is never sampled directly.  All quantities the
// pencil needs (cell integrals of P and x*P) follow from the affine
// self-similarity P(x) = B + Delta * P((x - left) / length) on every cell.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fsl {

class ParamError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The input breaks a hypothesis the asymptotic results need.
class HypothesisError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kSumTolerance = 1e-12;

namespace detail {

// Neumaier compensated sum.
inline double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

}  // namespace detail

class SimilarityParams;
SimilarityParams validate_params(std::vector<double> a, std::vector<double> d,
                                 std::vector<double> beta,
                                 bool normalize = false);

/// Validated IFS data (n, a_k, d_k, beta_k) with cumulative breakpoints.
///
/// Only `validate_params` constructs instances, so every object satisfies
/// sum(a) = 1, a_k > 0 and sum(a_k d_k^2) < 1.  The global moments of the
/// fixed point are computed once at validation.
class SimilarityParams {
 public:
  std::size_t size() const noexcept { return a_.size(); }
  std::span<const double> a() const noexcept { return a_; }
  std::span<const double> d() const noexcept { return d_; }
  std::span<const double> beta() const noexcept { return beta_; }
  /// n + 1 breakpoints, alpha[0] = 0, alpha[n] = 1.
  std::span<const double> alpha() const noexcept { return alpha_; }

  /// sum(a_k d_k^2); the squared L2 Lipschitz constant of G.
  double contraction_factor() const noexcept { return contraction_; }
  double contraction_margin() const noexcept { return 1.0 - contraction_; }

  double mean() const noexcept { return m0_; }
  double first_moment() const noexcept { return m1_; }

  bool has_negative_scale() const noexcept {
    return std::any_of(d_.begin(), d_.end(), [](double v) { return v < 0.0; });
  }

 private:
  friend SimilarityParams validate_params(std::vector<double>,
                                          std::vector<double>,
                                          std::vector<double>, bool);
  SimilarityParams() = default;

  std::vector<double> a_, d_, beta_, alpha_;
  double contraction_ = 0.0;
  double m0_ = 0.0;
  double m1_ = 0.0;
};

/// Checks the raw lists and builds validated parameters.  With `normalize`
/// the lengths are rescaled to sum to one; otherwise a sum off by more than
/// 1e-12 is rejected.
inline SimilarityParams validate_params(std::vector<double> a,
                                        std::vector<double> d,
                                        std::vector<double> beta,
                                        bool normalize) {
  const std::size_t n = a.size();
  if (n < 2) throw ParamError("need n > 1 pieces, got " + std::to_string(n));
  if (d.size() != n || beta.size() != n) {
    throw ParamError("lists a, d, beta must have equal length");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(a[k]) || !std::isfinite(d[k]) || !std::isfinite(beta[k])) {
      throw ParamError("non-finite parameter at piece " + std::to_string(k + 1));
    }
    if (a[k] <= 0.0) {
      throw ParamError("a[" + std::to_string(k + 1) + "] must be positive");
    }
  }
  double total = detail::compensated_sum(a);
  if (normalize) {
    for (double& v : a) v /= total;
    total = detail::compensated_sum(a);
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw ParamError("sum of a must equal 1 (got " + std::to_string(total) + ")");
  }

  double contraction = 0.0;
  for (std::size_t k = 0; k < n; ++k) contraction += a[k] * d[k] * d[k];
  if (!(contraction < 1.0)) {
    throw ParamError("similarity operator is not contractive: sum a_k d_k^2 = " +
                     std::to_string(contraction) + " >= 1");
  }

  SimilarityParams p;
  p.alpha_.assign(n + 1, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    p.alpha_[k] = detail::compensated_sum(std::span<const double>(a).first(k));
  }
  p.alpha_[n] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(p.alpha_[k] < p.alpha_[k + 1])) {
      throw ParamError("breakpoints are not strictly increasing");
    }
  }

  // Integrating G(P) = P against 1 and x gives two linear equations.  Both
  // denominators are positive because sum a|d| <= sqrt(sum a d^2) < 1.
  double beta_mass = 0.0, scale_mass = 0.0;
  double beta_x = 0.0, scale_x = 0.0, scale_x2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double lo = p.alpha_[k], hi = p.alpha_[k + 1];
    beta_mass += a[k] * beta[k];
    scale_mass += a[k] * d[k];
    beta_x += beta[k] * (hi - lo) * (hi + lo) / 2.0;
    scale_x += d[k] * a[k] * lo;
    scale_x2 += d[k] * a[k] * a[k];
  }
  p.m0_ = beta_mass / (1.0 - scale_mass);
  p.m1_ = (beta_x + p.m0_ * scale_x) / (1.0 - scale_x2);

  p.contraction_ = contraction;
  p.a_ = std::move(a);
  p.d_ = std::move(d);
  p.beta_ = std::move(beta);
  return p;
}

struct GlobalMoments {
  double m0;  ///< integral of P over [0,1]
  double m1;  ///< integral of x P(x) over [0,1]
};

inline GlobalMoments global_moments(const SimilarityParams& p) {
  return {p.mean(), p.first_moment()};
}

/// Address of the cell G_{k1} o ... o G_{km}([0,1]).  Digits are 0-based.
struct CellWord {
  std::vector<std::size_t> digits;
  std::size_t depth() const noexcept { return digits.size(); }
};

/// Exact integrals of P over one cell, plus the affine data
/// P(x) = offset + scale * P((x - left) / length) valid on the cell.
struct CellMoments {
  double left = 0.0;
  double length = 1.0;
  double m0 = 0.0;
  double m1 = 0.0;
  double offset = 0.0;  ///< accumulated beta shift B
  double scale = 1.0;   ///< accumulated d product Delta
};

namespace detail {

// Affine cell data from innermost digit outwards.  Evaluating in this order
// makes the left endpoint of word w bit-identical to that of (w, 0), so
// grids of consecutive depths are exactly nested.
struct CellAffine {
  double left = 0.0, length = 1.0, offset = 0.0, scale = 1.0;
};

inline CellAffine cell_affine(const SimilarityParams& p,
                              std::span<const std::size_t> digits) {
  CellAffine c;
  const auto a = p.a();
  const auto d = p.d();
  const auto beta = p.beta();
  const auto alpha = p.alpha();
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    const std::size_t k = *it;
    c.left = alpha[k] + a[k] * c.left;
    c.length = a[k] * c.length;
    c.offset = beta[k] + d[k] * c.offset;
    c.scale = d[k] * c.scale;
  }
  return c;
}

inline CellMoments moments_from_affine(const SimilarityParams& p,
                                       const CellAffine& c) {
  const double level = c.offset + c.scale * p.mean();
  CellMoments m;
  m.left = c.left;
  m.length = c.length;
  m.offset = c.offset;
  m.scale = c.scale;
  m.m0 = c.length * level;
  m.m1 = c.length * c.left * level +
         c.length * c.length * (c.offset / 2.0 + c.scale * p.first_moment());
  return m;
}

}  // namespace detail

inline CellMoments cell_moments(const SimilarityParams& p, const CellWord& w) {
  for (std::size_t k : w.digits) {
    if (k >= p.size()) throw ParamError("cell word digit out of range");
  }
  return detail::moments_from_affine(p, detail::cell_affine(p, w.digits));
}

/// Smallest interval [lo, hi] invariant under v -> beta_k + d_k v, which
/// contains the essential range of P.  Unbounded when max|d_k| >= 1.
inline std::pair<double, double> value_range(const SimilarityParams& p) {
  const auto d = p.d();
  const auto beta = p.beta();
  double max_d = 0.0, max_beta = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    max_d = std::max(max_d, std::abs(d[k]));
    max_beta = std::max(max_beta, std::abs(beta[k]));
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (max_d >= 1.0) return {-inf, inf};
  const double r = max_beta / (1.0 - max_d);
  double lo = -r, hi = r;
  // Each step maps an enclosing interval to an enclosing interval.
  for (int iter = 0; iter < 100000; ++iter) {
    double nlo = inf, nhi = -inf;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double u = beta[k] + d[k] * lo;
      const double v = beta[k] + d[k] * hi;
      nlo = std::min({nlo, u, v});
      nhi = std::max({nhi, u, v});
    }
    nlo = std::max(nlo, lo);
    nhi = std::min(nhi, hi);
    const bool done = (nlo - lo) <= 1e-16 * (1.0 + r) && (hi - nhi) <= 1e-16 * (1.0 + r);
    lo = nlo;
    hi = nhi;
    if (done) break;
  }
  return {lo, hi};
}

struct PointValue {
  double value;
  double radius;  ///< |P(x) - value| <= radius wherever P is bounded
};

/// Descends `depth` levels of the cell containing x.  A breakpoint belongs
/// to the cell on its left (x = 0 belongs to the first cell).
inline PointValue evaluate_at(const SimilarityParams& p, double x, int depth) {
  if (depth < 0) throw ParamError("depth must be non-negative");
  if (!(x >= 0.0 && x <= 1.0)) throw ParamError("x must lie in [0,1]");
  const auto a = p.a();
  const auto d = p.d();
  const auto beta = p.beta();
  const auto alpha = p.alpha();
  double offset = 0.0, scale = 1.0;
  for (int level = 0; level < depth && scale != 0.0; ++level) {
    std::size_t k = 0;
    while (k + 1 < p.size() && x > alpha[k + 1]) ++k;
    offset += scale * beta[k];
    scale *= d[k];
    x = std::clamp((x - alpha[k]) / a[k], 0.0, 1.0);
  }
  if (scale == 0.0) return {offset, 0.0};
  const auto [lo, hi] = value_range(p);
  const double spread = std::max(hi - p.mean(), p.mean() - lo);
  return {offset + scale * p.mean(), std::abs(scale) * spread};
}

/// Positive spectral order requires two nonzero d_k and a nonzero beta_k.
inline bool has_positive_order(const SimilarityParams& p) {
  const auto d = p.d();
  const auto beta = p.beta();
  const auto nonzero = std::count_if(d.begin(), d.end(), [](double v) { return v != 0.0; });
  const bool any_beta = std::any_of(beta.begin(), beta.end(), [](double v) { return v != 0.0; });
  return nonzero >= 2 && any_beta;
}

/// Root D in (0,2) of sum (a_k |d_k|)^(D/2) = 1, or 0 when P does not have
/// positive spectral order.
inline double spectral_order(const SimilarityParams& p) {
  if (!has_positive_order(p)) return 0.0;
  std::vector<double> c;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double v = p.a()[k] * std::abs(p.d()[k]);
    if (v > 0.0) c.push_back(v);
  }
  auto upsilon = [&](double x) {
    double s = 0.0;
    for (double v : c) s += std::pow(v, x);
    return s - 1.0;
  };
  // upsilon is strictly decreasing, positive near 0 and negative at 1.
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 0.0; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double f = upsilon(mid);
    if (f == 0.0) return 2.0 * mid;
    (f > 0.0 ? lo : hi) = mid;
  }
  return std::abs(upsilon(lo)) <= std::abs(upsilon(hi)) ? 2.0 * lo : 2.0 * hi;
}

struct Rational {
  std::int64_t num;
  std::int64_t den;
};

/// First continued-fraction convergent p/q of x > 0 with
/// |x - p/q| <= tol * x and q <= max_den.
inline std::optional<Rational> rational_approximation(double x, double tol,
                                                      std::int64_t max_den) {
  if (!(x > 0.0) || !std::isfinite(x)) return std::nullopt;
  std::int64_t p0 = 1, q0 = 0;
  std::int64_t p1 = static_cast<std::int64_t>(std::floor(x)), q1 = 1;
  double rem = x - std::floor(x);
  for (int iter = 0; iter < 64; ++iter) {
    if (q1 > max_den) return std::nullopt;
    if (std::abs(x - static_cast<double>(p1) / static_cast<double>(q1)) <= tol * x) {
      if (p1 == 0) return std::nullopt;
      return Rational{p1, q1};
    }
    if (rem <= 0.0) return std::nullopt;
    const double inv = 1.0 / rem;
    if (inv > 1e15) return std::nullopt;
    const auto digit = static_cast<std::int64_t>(std::floor(inv));
    rem = inv - std::floor(inv);
    const std::int64_t p2 = digit * p1 + p0;
    const std::int64_t q2 = digit * q1 + q0;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
  }
  return std::nullopt;
}

inline constexpr double kDefaultArithmeticTolerance = 1e-13;
inline constexpr std::int64_t kMaxDenominator = 1'000'000;

/// Arithmetic step nu, lags l_k with a_k|d_k| = exp(-l_k nu), spectral
/// order D and the renewal mass J = sum l_k (a_k|d_k|)^(D/2).
struct ArithmeticStructure {
  std::optional<double> nu;
  std::vector<std::optional<std::int64_t>> lags;  ///< empty where a_k d_k = 0
  double D = 0.0;
  double J = 0.0;
  bool arithmetic = false;
  /// Some d_k > 0 with odd lag, or some d_k < 0 with even lag.
  bool parity_condition = false;
};

namespace detail {

inline void finish_structure(const SimilarityParams& p, ArithmeticStructure& s) {
  s.J = 0.0;
  s.parity_condition = false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!s.lags[k]) continue;
    const double c = p.a()[k] * std::abs(p.d()[k]);
    const std::int64_t l = *s.lags[k];
    s.J += static_cast<double>(l) * std::pow(c, s.D / 2.0);
    const bool odd = (l % 2) != 0;
    if ((p.d()[k] > 0.0 && odd) || (p.d()[k] < 0.0 && !odd)) s.parity_condition = true;
  }
}

inline bool lags_consistent(const SimilarityParams& p, const ArithmeticStructure& s,
                            double tol) {
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!s.lags[k]) continue;
    const double c = p.a()[k] * std::abs(p.d()[k]);
    const double model = std::exp(-static_cast<double>(*s.lags[k]) * *s.nu);
    if (std::abs(c - model) > tol * c) return false;
  }
  return true;
}

}  // namespace detail

/// Detects the maximal step nu for this parametrisation.  Ratios of the
/// logarithms -ln(a_k|d_k|) are reconstructed as rationals with
/// denominators up to 1e6; failure means non-arithmetic at tolerance `tol`.
inline ArithmeticStructure arithmetic_structure(
    const SimilarityParams& p, double tol = kDefaultArithmeticTolerance) {
  if (!(tol > 0.0 && tol <= 1e-3)) throw ParamError("tol must lie in (0, 1e-3]");
  ArithmeticStructure s;
  s.lags.assign(p.size(), std::nullopt);
  s.D = spectral_order(p);

  std::vector<std::size_t> active;
  std::vector<double> logs(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double c = p.a()[k] * std::abs(p.d()[k]);
    if (c > 0.0) {
      active.push_back(k);
      logs[k] = -std::log(c);
    }
  }
  if (active.empty()) return s;

  const double ref = logs[active.front()];
  std::vector<Rational> ratios;
  std::int64_t common = 1;
  for (std::size_t k : active) {
    auto r = rational_approximation(logs[k] / ref, tol, kMaxDenominator);
    if (!r) return s;
    ratios.push_back(*r);
    common = std::lcm(common, r->den);
    if (common > kMaxDenominator) return s;
  }
  std::vector<std::int64_t> units;
  std::int64_t g = 0;
  for (const Rational& r : ratios) {
    units.push_back(r.num * (common / r.den));
    g = std::gcd(g, units.back());
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const std::int64_t l = units[i] / g;
    s.lags[active[i]] = l;
    num += logs[active[i]] * static_cast<double>(l);
    den += static_cast<double>(l) * static_cast<double>(l);
  }
  s.nu = num / den;
  if (!detail::lags_consistent(p, s, tol)) {
    s.nu.reset();
    s.lags.assign(p.size(), std::nullopt);
    return s;
  }
  s.arithmetic = true;
  detail::finish_structure(p, s);
  return s;
}

/// Exact mode: the caller supplies the step (e.g. ln 6) and only the lags
/// are recovered.  Reports non-arithmetic when some a_k|d_k| is not a
/// positive integer power of exp(-nu) within `tol`.
inline ArithmeticStructure arithmetic_structure_with_step(
    const SimilarityParams& p, double nu, double tol = kDefaultArithmeticTolerance) {
  if (!(nu > 0.0)) throw ParamError("step must be positive");
  ArithmeticStructure s;
  s.lags.assign(p.size(), std::nullopt);
  s.D = spectral_order(p);
  s.nu = nu;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double c = p.a()[k] * std::abs(p.d()[k]);
    if (c <= 0.0) continue;
    const double ratio = -std::log(c) / nu;
    const auto l = static_cast<std::int64_t>(std::llround(ratio));
    s.lags[k] = l;
    if (l < 1) break;
  }
  const bool positive = std::all_of(s.lags.begin(), s.lags.end(),
                                    [](const auto& l) { return !l || *l >= 1; });
  if (!positive || !detail::lags_consistent(p, s, tol)) {
    s.nu.reset();
    s.lags.assign(p.size(), std::nullopt);
    return s;
  }
  s.arithmetic = true;
  detail::finish_structure(p, s);
  return s;
}

// ---------------------------------------------------------------------------
// Catalogue of named weights.

/// P_{a,delta}: n = 3, a = [a, 1-2a, a], d = [1/2+delta, -2 delta, 1/2+delta],
/// beta = [0, 1/2+delta, 1/2-delta].
inline SimilarityParams p_a_delta(double a, double delta) {
  if (!(a > 0.0 && a < 0.5)) throw ParamError("P_a_delta requires a in (0, 1/2)");
  if (!(delta >= 0.0 && delta < 1.0 / 3.0)) {
    throw ParamError("P_a_delta requires delta in [0, 1/3)");
  }
  return validate_params({a, 1.0 - 2.0 * a, a}, {0.5 + delta, -2.0 * delta, 0.5 + delta},
                         {0.0, 0.5 + delta, 0.5 - delta});
}

/// P_{a,delta} with (2 - 5a) delta = a / 2.  For a > 4/13 this delta
/// exceeds 1/3, so the family is built without the P_a_delta range check.
inline SimilarityParams tilde_p(double a) {
  if (!(a > 0.0 && a < 1.0 / 3.0)) throw ParamError("tilde_P requires a in (0, 1/3)");
  const double delta = a / (2.0 * (2.0 - 5.0 * a));
  return validate_params({a, 1.0 - 2.0 * a, a}, {0.5 + delta, -2.0 * delta, 0.5 + delta},
                         {0.0, 0.5 + delta, 0.5 - delta});
}

inline SimilarityParams cantor() { return p_a_delta(1.0 / 3.0, 0.0); }

/// Cantor ladder with the middle plateau lowered to 2/5.
inline SimilarityParams hat_p() {
  const double third = 1.0 / 3.0;
  return validate_params({third, third, third}, {0.5, 0.0, 0.5}, {0.0, 0.4, 0.5});
}

/// Three parametrisations of f(x) = x (k = 1, 2, 3).
inline SimilarityParams linear(int k) {
  switch (k) {
    case 1:
      return validate_params({0.5, 0.5}, {0.5, 0.5}, {0.0, 0.5});
    case 2: {
      const double s = std::sqrt(5.0);
      const double x = (3.0 - s) / 2.0;
      const double y = (s - 1.0) / 2.0;
      return validate_params({x, y}, {x, y}, {0.0, x});
    }
    case 3:
      return validate_params({1.0 / 3.0, 2.0 / 3.0}, {1.0 / 3.0, 2.0 / 3.0},
                             {0.0, 1.0 / 3.0});
    default:
      throw ParamError("linear_k requires k in {1,2,3}");
  }
}

inline std::vector<std::string_view> builtin_names() {
  return {"P_a_delta", "tilde_P", "cantor", "hat_P", "linear_1", "linear_2", "linear_3"};
}

inline SimilarityParams builtin(std::string_view name, std::span<const double> args = {}) {
  auto expect = [&](std::size_t count) {
    if (args.size() != count) {
      throw ParamError(std::string(name) + " expects " + std::to_string(count) +
                       " parameter(s), got " + std::to_string(args.size()));
    }
  };
  if (name == "P_a_delta") {
    expect(2);
    return p_a_delta(args[0], args[1]);
  }
  if (name == "tilde_P") {
    expect(1);
    return tilde_p(args[0]);
  }
  if (name == "cantor") {
    expect(0);
    return cantor();
  }
  if (name == "hat_P") {
    expect(0);
    return hat_p();
  }
  if (name == "linear_1" || name == "linear_2" || name == "linear_3") {
    expect(0);
    return linear(name.back() - '0');
  }
  throw ParamError("unknown builtin weight '" + std::string(name) + "'");
}

}  // namespace fsl
