// Galerkin images of the pencil
//
//   J[T(lambda) y, z] = int y' z' + lambda * int P (y' z + y z')
//
// on piecewise-linear hat functions over IFS-aligned grids, with Dirichlet
// ends.  Both forms are symmetric tridiagonal, so the inertia index of
// K + lambda M is a Sturm pivot count.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "fractal_sl/selfsim.hpp"

namespace fsl {

enum class Side { plus, minus };

inline double sign_of(Side s) noexcept { return s == Side::plus ? 1.0 : -1.0; }
inline const char* to_string(Side s) noexcept { return s == Side::plus ? "+" : "-"; }

inline constexpr std::size_t kMaxGridNodes = 10'000'000;
inline constexpr double kLambdaGuard = 1e8;

/// All depth-m cells of the IFS in left-to-right order.  Cell i has the
/// word given by the base-n digits of i, so words are not stored.
struct AlignedGrid {
  int depth = 0;
  std::size_t pieces = 0;
  std::vector<double> nodes;        ///< cells.size() + 1 endpoints, 0 .. 1
  std::vector<CellMoments> cells;

  std::size_t interior_size() const noexcept { return nodes.size() - 2; }

  CellWord word(std::size_t cell) const {
    CellWord w;
    w.digits.assign(static_cast<std::size_t>(depth), 0);
    for (int level = depth - 1; level >= 0; --level) {
      w.digits[static_cast<std::size_t>(level)] = cell % pieces;
      cell /= pieces;
    }
    return w;
  }
};

inline AlignedGrid build_grid(const SimilarityParams& p, int depth,
                              std::size_t max_nodes = kMaxGridNodes) {
  if (depth < 1) throw ParamError("grid depth must be at least 1");
  const std::size_t n = p.size();
  std::size_t cells = 1;
  for (int i = 0; i < depth; ++i) {
    if (cells > max_nodes / n) {
      throw ParamError("grid of depth " + std::to_string(depth) + " exceeds the node guard");
    }
    cells *= n;
  }
  if (cells + 1 > max_nodes) {
    throw ParamError("grid of depth " + std::to_string(depth) + " exceeds the node guard");
  }
  AlignedGrid g;
  g.depth = depth;
  g.pieces = n;
  g.cells.reserve(cells);
  g.nodes.reserve(cells + 1);
  std::vector<std::size_t> digits(static_cast<std::size_t>(depth), 0);
  for (std::size_t c = 0; c < cells; ++c) {
    const auto affine = detail::cell_affine(p, digits);
    g.cells.push_back(detail::moments_from_affine(p, affine));
    g.nodes.push_back(affine.left);
    // odometer increment of the base-n word
    for (std::size_t level = digits.size(); level-- > 0;) {
      if (++digits[level] < n) break;
      digits[level] = 0;
    }
  }
  g.nodes.push_back(1.0);
  for (std::size_t i = 0; i + 1 < g.nodes.size(); ++i) {
    if (!(g.nodes[i] < g.nodes[i + 1])) {
      throw ParamError("grid nodes collapsed at depth " + std::to_string(depth));
    }
  }
  return g;
}

/// Symmetric tridiagonal matrix; off[i] couples rows i and i+1.
struct TridiagonalForm {
  std::vector<double> diag;
  std::vector<double> off;
  std::size_t size() const noexcept { return diag.size(); }
};

struct PencilForms {
  TridiagonalForm stiffness;  ///< K: int y' z'
  TridiagonalForm weight;     ///< M: int P (y z)'
};

/// Exact Galerkin forms.  On a cell with offset B and scale Delta,
/// (phi_i phi_j)' is linear, and its integral against P reduces to
/// B, Delta and the global moments; the cell length cancels.
inline PencilForms assemble(const SimilarityParams& p, const AlignedGrid& g) {
  const std::size_t cells = g.cells.size();
  const std::size_t size = cells - 1;
  PencilForms f;
  f.stiffness.diag.assign(size, 0.0);
  f.stiffness.off.assign(size > 0 ? size - 1 : 0, 0.0);
  f.weight.diag.assign(size, 0.0);
  f.weight.off.assign(size > 0 ? size - 1 : 0, 0.0);
  const double m0 = p.mean();
  const double m1 = p.first_moment();
  for (std::size_t c = 0; c < cells; ++c) {
    const CellMoments& cell = g.cells[c];
    const double h = g.nodes[c + 1] - g.nodes[c];
    const double b = cell.offset;
    const double s = cell.scale;
    // node c is the cell's left end, node c+1 its right end; unknown i is node i+1
    if (c >= 1) {
      f.stiffness.diag[c - 1] += 1.0 / h;
      f.weight.diag[c - 1] += -b + 2.0 * s * (m1 - m0);
    }
    if (c + 1 <= size) {
      f.stiffness.diag[c] += 1.0 / h;
      f.weight.diag[c] += b + 2.0 * s * m1;
    }
    if (c >= 1 && c + 1 <= size) {
      f.stiffness.off[c - 1] = -1.0 / h;
      f.weight.off[c - 1] = s * (m0 - 2.0 * m1);
    }
  }
  return f;
}

struct InertiaResult {
  double lambda = 0.0;
  int index = 0;          ///< negative eigenvalues of K + lambda M
  double pivot_min = 0.0; ///< smallest |pivot| met in the final pass
  bool perturbed = false; ///< lambda was nudged off a near-singular point
};

namespace detail {

struct PivotCount {
  int negatives = 0;
  double pivot_min = std::numeric_limits<double>::infinity();
  bool breakdown = false;
};

inline PivotCount count_pivots(const TridiagonalForm& k, const TridiagonalForm& m,
                               double lambda, bool force) {
  const std::size_t size = k.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    double row = std::abs(k.diag[i] + lambda * m.diag[i]);
    if (i > 0) row += std::abs(k.off[i - 1] + lambda * m.off[i - 1]);
    if (i + 1 < size) row += std::abs(k.off[i] + lambda * m.off[i]);
    scale = std::max(scale, row);
  }
  const double tiny = std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);
  PivotCount r;
  double pivot = 1.0;
  for (std::size_t i = 0; i < size; ++i) {
    double t = k.diag[i] + lambda * m.diag[i];
    if (i > 0) {
      const double o = k.off[i - 1] + lambda * m.off[i - 1];
      t -= o * o / pivot;
    }
    if (std::abs(t) < tiny) {
      if (!force) {
        r.breakdown = true;
        return r;
      }
      t = -tiny;
    }
    pivot = t;
    r.pivot_min = std::min(r.pivot_min, std::abs(t));
    if (t < 0.0) ++r.negatives;
  }
  return r;
}

}  // namespace detail

/// ind T(lambda) of the discretisation: the number of negative Sturm
/// pivots of K + lambda M.  Near-zero pivots trigger a retry at
/// lambda (1 + 1e-12), growing tenfold, before pivots are clamped.
inline InertiaResult inertia_index(const TridiagonalForm& k, const TridiagonalForm& m,
                                   double lambda) {
  if (k.size() != m.size()) throw ParamError("forms must have equal size");
  InertiaResult res;
  res.lambda = lambda;
  if (k.size() == 0) return res;
  double trial = lambda;
  double rel = 1e-12;
  for (int attempt = 0; attempt < 4; ++attempt) {
    const auto count = detail::count_pivots(k, m, trial, false);
    if (!count.breakdown) {
      res.index = count.negatives;
      res.pivot_min = count.pivot_min;
      res.lambda = trial;
      return res;
    }
    res.perturbed = true;
    trial = lambda == 0.0 ? rel : lambda * (1.0 + rel);
    rel *= 10.0;
  }
  const auto count = detail::count_pivots(k, m, trial, true);
  res.index = count.negatives;
  res.pivot_min = count.pivot_min;
  res.lambda = trial;
  return res;
}

inline InertiaResult inertia_index(const PencilForms& f, double lambda) {
  return inertia_index(f.stiffness, f.weight, lambda);
}

// ---------------------------------------------------------------------------
// Eigenvalue localisation

struct EigenEntry {
  int n = 0;                  ///< 1-based position on its side
  double lambda = 0.0;        ///< signed eigenvalue
  Side side = Side::plus;
  double bracket_rel_width = 0.0;
  double depth_shift_rel = 0.0;  ///< (coarse - fine) / fine across the depth pair
  int multiplicity = 1;          ///< ind jump across the final bracket
};

struct SpectrumReport {
  Side side = Side::plus;
  int depth = 0;  ///< coarse depth; eigenvalues are reported at depth + 1
  std::vector<EigenEntry> eigenvalues;
  std::vector<InertiaResult> ind_samples;
  /// Counts are complete for |lambda| below this magnitude.
  double coverage = 0.0;
  bool partial = false;
  std::string warning;
};

struct EigenOptions {
  Side side = Side::plus;
  int count = 1;
  int depth = 8;
  double rel_tol = 1e-10;
  double lambda_guard = kLambdaGuard;
  unsigned threads = 1;
  bool refine = true;  ///< repeat at depth + 1 for the shift estimate
};

struct Bracket {
  double lo = 0.0;  ///< magnitudes; ind(lo) < n <= ind(hi)
  double hi = 0.0;
  int multiplicity = 1;
};

struct LocateResult {
  std::vector<Bracket> brackets;
  std::vector<InertiaResult> samples;  ///< guard and initial bracket probes
  bool partial = false;
};

/// Brackets the first `count` eigenvalues on one side by bisection in
/// log(|lambda|), using that ind is nondecreasing in |lambda|.
inline LocateResult locate_eigenvalues(const PencilForms& f, Side side, int count,
                                       double rel_tol, double guard, unsigned threads = 1) {
  if (count < 1) throw ParamError("eigenvalue count must be at least 1");
  if (!(rel_tol > 0.0)) throw ParamError("relative tolerance must be positive");
  const double sgn = sign_of(side);
  LocateResult out;
  auto probe = [&](double mag) { return inertia_index(f, sgn * mag); };

  const auto at_guard = probe(guard);
  out.samples.push_back(at_guard);
  const int available = std::min(count, at_guard.index);
  out.partial = available < count;
  if (available == 0) return out;

  double hi = 1.0;
  for (;;) {
    const auto r = probe(hi);
    out.samples.push_back(r);
    if (r.index >= available || hi >= guard) break;
    hi = std::min(hi * 4.0, guard);
  }
  double lo = std::min(1.0, hi);
  for (int i = 0; i < 2000; ++i) {
    const auto r = probe(lo);
    out.samples.push_back(r);
    if (r.index == 0) break;
    lo /= 4.0;
  }

  out.brackets.assign(static_cast<std::size_t>(available), Bracket{});
  auto solve_one = [&](int n) {
    double a = lo, b = hi;
    int ind_a = 0;
    int ind_b = probe(b).index;
    while ((b - a) > rel_tol * b) {
      const double mid = a > 0.0 ? std::sqrt(a * b) : 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      const int ind = probe(mid).index;
      if (ind >= n) {
        b = mid;
        ind_b = ind;
      } else {
        a = mid;
        ind_a = ind;
      }
    }
    out.brackets[static_cast<std::size_t>(n - 1)] = {a, b, ind_b - ind_a};
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(available)));
  if (workers == 1) {
    for (int n = 1; n <= available; ++n) solve_one(n);
  } else {
    std::atomic<int> next{1};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int n = next++; n <= available; n = next++) solve_one(n);
      });
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

inline double bracket_value(const Bracket& b) { return 0.5 * (b.lo + b.hi); }

/// First `count` eigenvalues on one side, computed at `depth` and
/// `depth + 1`.  The finer values are reported; the relative shift between
/// the two depths serves as the discretisation-error estimate.
inline SpectrumReport eigenvalues(const SimilarityParams& p, const EigenOptions& opt) {
  if (opt.count < 1) throw ParamError("eigenvalue count must be at least 1");
  const double sgn = sign_of(opt.side);
  SpectrumReport rep;
  rep.side = opt.side;
  rep.depth = opt.depth;

  const auto coarse_forms = assemble(p, build_grid(p, opt.depth));
  auto coarse = locate_eigenvalues(coarse_forms, opt.side, opt.count, opt.rel_tol,
                                   opt.lambda_guard, opt.threads);
  LocateResult fine;
  if (opt.refine) {
    const auto fine_forms = assemble(p, build_grid(p, opt.depth + 1));
    fine = locate_eigenvalues(fine_forms, opt.side, opt.count, opt.rel_tol,
                              opt.lambda_guard, opt.threads);
  }
  const LocateResult& primary = opt.refine ? fine : coarse;
  rep.ind_samples = primary.samples;
  rep.partial = coarse.partial || primary.partial;

  for (std::size_t i = 0; i < primary.brackets.size(); ++i) {
    const Bracket& b = primary.brackets[i];
    EigenEntry e;
    e.n = static_cast<int>(i + 1);
    e.side = opt.side;
    const double mag = bracket_value(b);
    e.lambda = sgn * mag;
    e.bracket_rel_width = (b.hi - b.lo) / b.hi;
    e.multiplicity = b.multiplicity;
    if (opt.refine && i < coarse.brackets.size()) {
      e.depth_shift_rel = (bracket_value(coarse.brackets[i]) - mag) / mag;
    }
    rep.eigenvalues.push_back(e);
  }
  if (rep.partial) {
    rep.coverage = opt.lambda_guard;
    rep.warning = "only " + std::to_string(rep.eigenvalues.size()) + " of " +
                  std::to_string(opt.count) + " eigenvalues on side " + to_string(opt.side) +
                  " found below |lambda| = " + std::to_string(opt.lambda_guard);
    if (rep.eigenvalues.empty()) {
      rep.warning = std::string("no ") + (opt.side == Side::plus ? "positive" : "negative") +
                    " spectrum found up to the lambda guard";
    }
  } else {
    rep.coverage = std::abs(rep.eigenvalues.back().lambda);
  }
  return rep;
}

}  // namespace fsl
