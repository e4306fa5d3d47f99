// Periodic amplitude functions of the inertia-index asymptotics
//
//   ind T(lambda) = |lambda|^{D/2} (s_{+-}(ln|lambda| / nu) + o(1)).
//
// Three estimators are provided:
//  * s_bounds: pointwise two-sided bounds from a single index value,
//    |lambda|^{-D/2} (ind -+ (n-1));
//  * s_estimate: the smoothed index Lambda_eps(t) fed through the
//    continuous renewal solver;
//  * exponent_fit: the growth exponent of lambda_n against n.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fractal_sl/pencil.hpp"
#include "fractal_sl/renewal.hpp"
#include "fractal_sl/selfsim.hpp"

namespace fsl {

/// Eigenvalue magnitudes on one side; ind(mu) = #{n : |lambda_n| < mu},
/// valid for mu up to `coverage`.
class IndexCurve {
 public:
  IndexCurve() = default;
  IndexCurve(Side side, std::vector<double> magnitudes, double coverage, int depth = 0)
      : side_(side), mags_(std::move(magnitudes)), coverage_(coverage), depth_(depth) {
    for (std::size_t i = 0; i < mags_.size(); ++i) {
      if (!(mags_[i] > 0.0)) throw ParamError("eigenvalue magnitudes must be positive");
      if (i > 0 && mags_[i] < mags_[i - 1]) {
        throw ParamError("eigenvalue magnitudes must be sorted ascending");
      }
    }
    if (!mags_.empty() && coverage_ < mags_.back()) coverage_ = mags_.back();
  }

  static IndexCurve from_report(const SpectrumReport& rep) {
    std::vector<double> mags;
    for (const auto& e : rep.eigenvalues) mags.push_back(std::abs(e.lambda));
    std::sort(mags.begin(), mags.end());
    return IndexCurve(rep.side, std::move(mags), rep.coverage, rep.depth);
  }

  /// The same spectrum one depth coarser, rebuilt from depth_shift_rel.
  /// Coarse Galerkin values sit above the fine ones, so counting below the
  /// fine coverage stays exact.
  static IndexCurve coarse_from_report(const SpectrumReport& rep) {
    std::vector<double> mags;
    for (const auto& e : rep.eigenvalues) mags.push_back(std::abs(e.lambda) * (1.0 + e.depth_shift_rel));
    std::sort(mags.begin(), mags.end());
    IndexCurve c(rep.side, std::move(mags), rep.coverage, rep.depth - 1);
    c.coverage_ = rep.coverage;
    return c;
  }

  Side side() const noexcept { return side_; }
  const std::vector<double>& magnitudes() const noexcept { return mags_; }
  double coverage() const noexcept { return coverage_; }
  int depth() const noexcept { return depth_; }
  bool empty() const noexcept { return mags_.empty(); }

  bool covers(double mu) const noexcept { return mu <= coverage_ * (1.0 + 1e-9); }

  int index_at(double mu) const {
    if (!covers(mu)) throw ParamError("index curve does not cover |lambda| = " + std::to_string(mu));
    return static_cast<int>(std::lower_bound(mags_.begin(), mags_.end(), mu) - mags_.begin());
  }

 private:
  Side side_ = Side::plus;
  std::vector<double> mags_;
  double coverage_ = 0.0;
  int depth_ = 0;
};

inline double require_step(const ArithmeticStructure& arith) {
  if (!arith.nu) throw HypothesisError("weight has no arithmetic step");
  return *arith.nu;
}

/// Lambda_eps(t) = exp(-D nu t / 2) eps^-1 int_t^{t+eps} ind(e^{nu z}) dz,
/// integrated exactly over the step function ind.
inline std::vector<double> lambda_profile(const IndexCurve& curve, const ArithmeticStructure& arith,
                                          double eps, std::span<const double> t) {
  if (!(eps > 0.0)) throw ParamError("smoothing width must be positive");
  const double nu = require_step(arith);
  std::vector<double> jumps;
  jumps.reserve(curve.magnitudes().size());
  for (double m : curve.magnitudes()) jumps.push_back(std::log(m) / nu);
  const double top = std::log(curve.coverage()) / nu;
  std::vector<double> out;
  out.reserve(t.size());
  for (double ti : t) {
    if (ti + eps > top + 1e-12) {
      throw ParamError("index curve too short for t + eps = " + std::to_string(ti + eps));
    }
    double integral = 0.0;
    const auto end = std::lower_bound(jumps.begin(), jumps.end(), ti + eps);
    for (auto it = jumps.begin(); it != end; ++it) {
      integral += std::min(eps, ti + eps - std::max(ti, *it));
    }
    out.push_back(std::exp(-arith.D * nu * ti / 2.0) * integral / eps);
  }
  return out;
}

/// Bounds on s at ln|lambda| / nu from one index value.
struct BoundSample {
  double magnitude = 0.0;
  int index = 0;
  double t = 0.0;    ///< ln|lambda| / nu
  double tau = 0.0;  ///< t folded into [0,1)
  double lower = 0.0;
  double upper = 0.0;
};

inline BoundSample bound_at(const ArithmeticStructure& arith, double magnitude, int index,
                            int slack) {
  const double nu = require_step(arith);
  BoundSample b;
  b.magnitude = magnitude;
  b.index = index;
  b.t = std::log(magnitude) / nu;
  b.tau = b.t - std::floor(b.t);
  const double w = std::pow(magnitude, -arith.D / 2.0);
  b.lower = std::max(0.0, w * (index - slack));
  b.upper = w * (index + slack);
  return b;
}

struct ProfilePoint {
  double lower = 0.0;
  double estimate = 0.0;
  double upper = 0.0;
};

struct SideProfile {
  bool present = false;
  std::vector<ProfilePoint> points;
  std::vector<double> direct;        ///< Lambda_eps over the last full period
  std::vector<double> band;          ///< spread + slack + discretisation
  std::vector<double> extrapolated;  ///< Richardson in eps over (2eps, eps, eps/2)
  std::vector<BoundSample> samples;  ///< bounds just above/below each eigenvalue
};

struct ProfileEstimate {
  std::vector<double> t_grid;  ///< one period, step 1/Q
  SideProfile plus;
  SideProfile minus;
  double epsilon = 0.0;
  double D = 0.0;
  double nu = 0.0;
  double J = 0.0;
  bool coupled = false;  ///< s_+ = s_- holds by the coupled renewal identity
  std::string note;

  SideProfile& side(Side s) { return s == Side::plus ? plus : minus; }
  const SideProfile& side(Side s) const { return s == Side::plus ? plus : minus; }
};

inline std::vector<double> period_grid(std::size_t q) {
  std::vector<double> t(q);
  for (std::size_t i = 0; i < q; ++i) t[i] = static_cast<double>(i) / static_cast<double>(q);
  return t;
}

/// Pointwise envelope of the index bounds, folded into one period: at each
/// grid point tau the maximum lower bound and minimum upper bound over all
/// covered periods.  `slack` is n - 1.
inline ProfileEstimate s_bounds(const IndexCurve& curve, const ArithmeticStructure& arith,
                                int slack, std::size_t q = 100) {
  const double nu = require_step(arith);
  ProfileEstimate est;
  est.t_grid = period_grid(q);
  est.D = arith.D;
  est.nu = nu;
  est.J = arith.J;
  SideProfile& side = est.side(curve.side());
  if (!(curve.coverage() > 0.0)) return est;
  side.present = true;

  const auto& mags = curve.magnitudes();
  const double top = std::log(curve.coverage()) / nu;
  const double first = mags.empty() ? top : std::log(mags.front()) / nu;
  const auto p_lo = static_cast<long>(std::floor(first)) - 1;
  const auto p_hi = static_cast<long>(std::floor(top));

  auto near_eigenvalue = [&](double mu) {
    auto it = std::lower_bound(mags.begin(), mags.end(), mu);
    const bool above = it != mags.end() && std::abs(*it - mu) <= 1e-12 * mu;
    const bool below = it != mags.begin() && std::abs(*(it - 1) - mu) <= 1e-12 * mu;
    return above || below;
  };

  constexpr double inf = std::numeric_limits<double>::infinity();
  side.points.assign(q, ProfilePoint{0.0, 0.0, inf});
  for (std::size_t i = 0; i < q; ++i) {
    for (long period = p_lo; period <= p_hi; ++period) {
      const double t = static_cast<double>(period) + est.t_grid[i];
      const double mu = std::exp(nu * t);
      if (!curve.covers(mu) || near_eigenvalue(mu)) continue;
      const auto b = bound_at(arith, mu, curve.index_at(mu), slack);
      side.points[i].lower = std::max(side.points[i].lower, b.lower);
      side.points[i].upper = std::min(side.points[i].upper, b.upper);
    }
    auto& pt = side.points[i];
    pt.estimate = std::isfinite(pt.upper) ? 0.5 * (pt.lower + pt.upper) : pt.lower;
  }
  constexpr double nudge = 1e-9;
  for (double m : mags) {
    for (double mu : {m * (1.0 + nudge), m * (1.0 - nudge)}) {
      if (curve.covers(mu)) side.samples.push_back(bound_at(arith, mu, curve.index_at(mu), slack));
    }
  }
  return est;
}

struct EstimateOptions {
  double eps = 0.05;
  std::size_t q = 100;
  int slack = -1;  ///< n - 1 when negative
  /// Same spectra at the coarser depth; enables the discretisation band.
  const IndexCurve* coarse_plus = nullptr;
  const IndexCurve* coarse_minus = nullptr;
};

namespace detail {

struct RenewalCoefficients {
  std::vector<double> u, v;
};

inline RenewalCoefficients renewal_coefficients(const SimilarityParams& p,
                                                const ArithmeticStructure& arith) {
  std::int64_t max_lag = 0;
  for (const auto& l : arith.lags) {
    if (l) max_lag = std::max(max_lag, *l);
  }
  RenewalCoefficients c;
  c.u.assign(static_cast<std::size_t>(max_lag), 0.0);
  c.v.assign(static_cast<std::size_t>(max_lag), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!arith.lags[k]) continue;
    const double w = std::pow(p.a()[k] * std::abs(p.d()[k]), arith.D / 2.0);
    auto& target = p.d()[k] > 0.0 ? c.u : c.v;
    target[static_cast<std::size_t>(*arith.lags[k] - 1)] += w;
  }
  return c;
}

// Forcing X(t) = Lambda_own(t) - sum u_l Lambda_own(t - l) - sum v_l Lambda_other(t - l).
inline std::vector<double> forcing(const RenewalCoefficients& c, const std::vector<double>& own,
                                   const std::vector<double>& other, std::size_t q) {
  std::vector<double> x(own.size());
  for (std::size_t j = 0; j < own.size(); ++j) {
    double acc = own[j];
    for (std::size_t l = 1; l <= c.u.size() && l * q <= j; ++l) {
      acc -= c.u[l - 1] * own[j - l * q];
      if (!other.empty()) acc -= c.v[l - 1] * other[j - l * q];
    }
    x[j] = acc;
  }
  return x;
}

}  // namespace detail

/// Renewal estimate of s_+- from the smoothed index.  Requires an
/// arithmetic weight of positive order satisfying the parity condition.
/// With some d_k < 0 both sides are solved as one coupled system and
/// share the profile; otherwise each side is a scalar renewal equation.
inline ProfileEstimate s_estimate(const SimilarityParams& p, const ArithmeticStructure& arith,
                                  const IndexCurve& plus, const IndexCurve& minus,
                                  const EstimateOptions& opt = {}) {
  if (!arith.arithmetic || !arith.nu) {
    throw HypothesisError("weight is not arithmetically self-similar");
  }
  if (!(arith.D > 0.0)) throw HypothesisError("weight does not have positive spectral order");
  if (!arith.parity_condition) {
    throw HypothesisError(
        "parity condition fails: need d_k > 0 with odd lag or d_k < 0 with even lag");
  }
  if (plus.side() != Side::plus || minus.side() != Side::minus) {
    throw ParamError("curves must be given as (plus, minus)");
  }
  if (!(opt.eps > 0.0 && opt.eps < 0.25)) throw ParamError("eps must lie in (0, 0.25)");
  const double nu = *arith.nu;
  const std::size_t q = opt.q;
  const int slack = opt.slack >= 0 ? opt.slack : static_cast<int>(p.size()) - 1;

  ProfileEstimate est;
  est.t_grid = period_grid(q);
  est.epsilon = opt.eps;
  est.D = arith.D;
  est.nu = nu;
  est.J = arith.J;
  est.coupled = p.has_negative_scale();
  const auto coef = detail::renewal_coefficients(p, arith);

  auto run = [&](std::vector<const IndexCurve*> curves,
                 std::vector<const IndexCurve*> coarse) {
    double first = std::numeric_limits<double>::infinity();
    double top = std::numeric_limits<double>::infinity();
    for (const IndexCurve* c : curves) {
      if (!c->empty()) first = std::min(first, std::log(c->magnitudes().front()) / nu);
      top = std::min(top, std::log(c->coverage()) / nu);
    }
    if (!std::isfinite(top)) return;
    if (!std::isfinite(first)) {
      // no spectrum at all: s vanishes identically
      for (const IndexCurve* c : curves) {
        SideProfile& side = est.side(c->side());
        side.present = true;
        side.points.assign(q, ProfilePoint{});
        side.direct.assign(q, 0.0);
        side.band.assign(q, 0.0);
        side.extrapolated.assign(q, 0.0);
      }
      est.note += "no eigenvalues below coverage; profile is identically zero. ";
      return;
    }
    const double start = std::floor(first) - 1.0;
    const double span = top - 2.0 * opt.eps - start;
    const auto periods = static_cast<std::size_t>(std::floor(span));
    if (periods < 2) throw ParamError("index curve covers fewer than two periods");
    const std::size_t len = periods * q + 1;
    std::vector<double> t(len);
    for (std::size_t j = 0; j < len; ++j) {
      t[j] = start + static_cast<double>(j) / static_cast<double>(q);
    }

    auto profile_for = [&](double eps, std::vector<std::vector<double>>* lambdas) {
      std::vector<std::vector<double>> lam;
      for (const IndexCurve* c : curves) lam.push_back(lambda_profile(*c, arith, eps, t));
      std::vector<std::vector<double>> x;
      if (curves.size() == 2) {
        x.push_back(detail::forcing(coef, lam[0], lam[1], q));
        x.push_back(detail::forcing(coef, lam[1], lam[0], q));
      } else {
        x.push_back(detail::forcing(coef, lam[0], {}, q));
      }
      const auto sys = curves.size() == 2 ? RenewalSystem::coupled(coef.u, coef.v)
                                          : RenewalSystem::scalar(coef.u);
      auto sol = solve_continuous(sys, x, static_cast<double>(periods), 1.0 / static_cast<double>(q));
      if (lambdas) *lambdas = std::move(lam);
      return sol.profile;
    };

    std::vector<std::vector<double>> lam;
    const auto s_mid = profile_for(opt.eps, &lam);
    const auto s_wide = profile_for(2.0 * opt.eps, nullptr);
    const auto s_narrow = profile_for(0.5 * opt.eps, nullptr);

    for (std::size_t c = 0; c < curves.size(); ++c) {
      SideProfile& side = est.side(curves[c]->side());
      side.present = true;
      side.points.resize(q);
      side.direct.resize(q);
      side.band.resize(q);
      side.extrapolated.resize(q);
      std::vector<double> coarse_lam;
      if (coarse[c]) {
        std::vector<double> last(t.end() - static_cast<std::ptrdiff_t>(q + 1), t.end() - 1);
        coarse_lam = lambda_profile(*coarse[c], arith, opt.eps, last);
      }
      for (std::size_t i = 0; i < q; ++i) {
        const std::size_t last = (periods - 1) * q + i;
        const double direct = lam[c][last];
        const double spread = std::abs(direct - lam[c][last - q]);
        const double slack_term = slack * std::exp(-arith.D * nu * t[last] / 2.0);
        const double disc = coarse_lam.empty() ? 0.0 : std::abs(direct - coarse_lam[i]);
        const double band = spread + slack_term + disc;
        const double s = s_mid[i];
        const double reach = band + std::abs(direct - s);
        side.direct[i] = direct;
        side.band[i] = band;
        side.points[i] = {std::max(0.0, s - reach), s, s + reach};
        side.extrapolated[i] = (8.0 * s_narrow[i] - 6.0 * s_mid[i] + s_wide[i]) / 3.0;
      }
    }
  };

  if (est.coupled) {
    run({&plus, &minus}, {opt.coarse_plus, opt.coarse_minus});
    est.note += "coupled renewal: s_+ and s_- share one profile. ";
  } else {
    if (plus.coverage() > 0.0) run({&plus}, {opt.coarse_plus});
    if (minus.coverage() > 0.0) run({&minus}, {opt.coarse_minus});
  }
  est.note += "eps extrapolation uses Richardson weights over (2eps, eps, eps/2).";
  return est;
}

struct ExponentFit {
  double slope = 0.0;
  double r2 = 0.0;
};

/// Least-squares slope of ln lambda_n against ln n.
inline ExponentFit exponent_fit(std::span<const double> magnitudes) {
  if (magnitudes.size() < 10) throw ParamError("exponent fit needs at least 10 eigenvalues");
  const auto n = static_cast<double>(magnitudes.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    const double x = std::log(static_cast<double>(i + 1));
    const double y = std::log(magnitudes[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double cxx = sxx - sx * sx / n;
  const double cxy = sxy - sx * sy / n;
  const double cyy = syy - sy * sy / n;
  ExponentFit fit;
  fit.slope = cxy / cxx;
  fit.r2 = cyy > 0.0 ? (cxy * cxy) / (cxx * cyy) : 1.0;
  return fit;
}

inline ExponentFit exponent_fit(const IndexCurve& curve) {
  return exponent_fit(std::span<const double>(curve.magnitudes()));
}

struct SplittingSample {
  double lambda = 0.0;
  int index = 0;       ///< ind(lambda) at the fine depth
  int scaled_sum = 0;  ///< sum_k ind(a_k d_k lambda) at the fine depth
  bool converged = false;
  bool holds = false;  ///< 0 <= index - scaled_sum <= n - 1
  /// ind_{m+1}(lambda) - sum_k ind_m(a_k d_k lambda); the nested Galerkin
  /// spaces make 0 <= . <= n - 1 exact at every depth.
  int nested_difference = 0;
  bool nested_holds = false;
};

struct SplittingReport {
  std::vector<SplittingSample> samples;
  int violations = 0;         ///< converged samples breaking the inequality
  int nested_violations = 0;  ///< samples breaking the cross-depth form
  int converged = 0;
};

/// Checks 0 <= ind(lambda) - sum_k ind(a_k d_k lambda) <= n - 1 at depths
/// (depth, depth + 1).  Only samples whose indices agree at both depths
/// count as converged.
inline SplittingReport check_splitting_inequality(const SimilarityParams& p, int depth,
                                                  std::span<const double> lambdas) {
  const auto coarse = assemble(p, build_grid(p, depth));
  const auto fine = assemble(p, build_grid(p, depth + 1));
  const int n = static_cast<int>(p.size());
  SplittingReport rep;
  for (double lambda : lambdas) {
    SplittingSample s;
    s.lambda = lambda;
    const int ind_c = inertia_index(coarse, lambda).index;
    s.index = inertia_index(fine, lambda).index;
    s.converged = ind_c == s.index;
    int coarse_sum = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double scaled = p.a()[k] * p.d()[k] * lambda;
      const int ic = inertia_index(coarse, scaled).index;
      const int jf = inertia_index(fine, scaled).index;
      coarse_sum += ic;
      s.scaled_sum += jf;
      s.converged = s.converged && ic == jf;
    }
    const int diff = s.index - s.scaled_sum;
    s.holds = diff >= 0 && diff <= n - 1;
    s.nested_difference = s.index - coarse_sum;
    s.nested_holds = s.nested_difference >= 0 && s.nested_difference <= n - 1;
    if (s.converged) ++rep.converged;
    if (s.converged && !s.holds) ++rep.violations;
    if (!s.nested_holds) ++rep.nested_violations;
    rep.samples.push_back(s);
  }
  return rep;
}

}  // namespace fsl
