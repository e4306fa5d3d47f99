// Dense reference solver for the discretised pencil.  Independent of the
// pivot counting in pencil.hpp: K = L L^T, C = L^-1 M L^-T, and the pencil
// eigenvalues are lambda = -1/nu for the eigenvalues nu != 0 of C.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fractal_sl/pencil.hpp"

namespace fsl {

inline constexpr std::size_t kOracleMaxSize = 2000;

struct OracleSpectrum {
  std::vector<double> nu;        ///< eigenvalues of L^-1 M L^-T, ascending
  std::vector<double> positive;  ///< pencil eigenvalues > 0, ascending
  std::vector<double> negative;  ///< pencil eigenvalues < 0, by increasing |lambda|

  /// Number of eigenvalues of I + lambda C below zero (= ind T(lambda)).
  int count(double lambda) const {
    if (lambda == 0.0) return 0;
    const double cut = -1.0 / lambda;
    if (lambda > 0.0) {
      return static_cast<int>(std::count_if(nu.begin(), nu.end(), [&](double v) { return v < cut; }));
    }
    return static_cast<int>(std::count_if(nu.begin(), nu.end(), [&](double v) { return v > cut; }));
  }
};

inline OracleSpectrum dense_oracle(const TridiagonalForm& k, const TridiagonalForm& m,
                                   double lambda_max = kLambdaGuard) {
  const auto n = static_cast<Eigen::Index>(k.size());
  if (k.size() > kOracleMaxSize) throw ParamError("dense oracle limited to 2000 unknowns");
  if (k.size() != m.size()) throw ParamError("forms must have equal size");
  OracleSpectrum out;
  if (n == 0) return out;
  Eigen::MatrixXd kd = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd md = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kd(i, i) = k.diag[static_cast<std::size_t>(i)];
    md(i, i) = m.diag[static_cast<std::size_t>(i)];
    if (i + 1 < n) {
      kd(i, i + 1) = kd(i + 1, i) = k.off[static_cast<std::size_t>(i)];
      md(i, i + 1) = md(i + 1, i) = m.off[static_cast<std::size_t>(i)];
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(kd);
  if (llt.info() != Eigen::Success) throw ParamError("stiffness form is not positive definite");
  const auto l = llt.matrixL();
  Eigen::MatrixXd c = l.solve(md);
  c = l.solve(c.transpose()).eval();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c, Eigen::EigenvaluesOnly);
  const auto& values = eig.eigenvalues();
  out.nu.assign(values.data(), values.data() + values.size());
  std::sort(out.nu.begin(), out.nu.end());
  for (double v : out.nu) {
    if (v == 0.0) continue;
    const double lambda = -1.0 / v;
    if (std::abs(lambda) > lambda_max) continue;
    (lambda > 0.0 ? out.positive : out.negative).push_back(lambda);
  }
  std::sort(out.positive.begin(), out.positive.end());
  std::sort(out.negative.begin(), out.negative.end(),
            [](double x, double y) { return std::abs(x) < std::abs(y); });
  return out;
}

inline OracleSpectrum dense_oracle(const PencilForms& f, double lambda_max = kLambdaGuard) {
  return dense_oracle(f.stiffness, f.weight, lambda_max);
}

}  // namespace fsl
