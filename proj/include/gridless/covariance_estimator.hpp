#pragma once

#include <span>
#include <vector>

#include "gridless/atomic_solver.hpp"
#include "gridless/common.hpp"
#include "gridless/spectral_core.hpp"

namespace gridless {

/// (1/L) X_Omega X_Omega^* together with its index set Omega.
struct CovarianceSample {
  CMatrix sigma;
  /// Row set Omega inside {0..n-1}, sorted.
  std::vector<Eigen::Index> omega;
  Eigen::Index n = 0;
  Eigen::Index L = 0;

  Eigen::Index m() const { return static_cast<Eigen::Index>(omega.size()); }
  /// Throws ValidationError unless sigma is m x m, Hermitian within herm_tol
  /// and PSD within psd_tol (relative to its spectral norm), with omega a
  /// valid index set.
  void validate(double herm_tol = 1e-12, double psd_tol = 1e-10) const;
};

/// Streaming (1/L) sum x x^* accumulated one observed vector at a time.
class CovarianceAccumulator {
 public:
  CovarianceAccumulator(Eigen::Index n, std::vector<Eigen::Index> omega);

  /// x holds the m observed entries of one measurement vector.
  void add(const CVector& x);
  Eigen::Index count() const { return count_; }
  /// Throws DomainError if nothing was added.
  CovarianceSample finish() const;

 private:
  Eigen::Index n_;
  std::vector<Eigen::Index> omega_;
  CMatrix sum_;
  Eigen::Index count_ = 0;
};

/// Batch (1/L) X_Omega X_Omega^* for an m x L block of observed rows.
CovarianceSample sample_covariance(const CMatrix& x_omega, std::span<const Eigen::Index> omega, Eigen::Index n);

/// lambda = 2.5e-3 / ((ln L)^2 ln m). Needs L, m >= 2.
double lambda_heuristic(Eigen::Index L, Eigen::Index m);

/// Tr(S) / ||S||_2.
double effective_rank(const CMatrix& s);

/// C max{sqrt(r_eff log(Ln) / L), r_eff log(Ln) / L} ||Sigma*_Omega||.
/// Test-harness use only: it needs the true covariance, and C is unspecified.
double lambda_theorem4(const CMatrix& sigma_omega_star, Eigen::Index L, Eigen::Index n, double c = 1.0);

struct CovarianceEstimate {
  ToeplitzSpec u_hat;
  double lambda_used = 0.0;
  /// ||P_Omega(T(u_hat)) - Sigma_{Omega,L}||_F.
  double fit_residual = 0.0;
  /// Tr T(u_hat) = n Re u_hat[0].
  double trace = 0.0;
  /// Diagonal lift applied after the solve so T(u_hat) is PSD.
  double psd_repair = 0.0;
  SolveReport report;
};

AdmmOptions covariance_defaults();

/// min_u 1/2 ||P_Omega(T(u)) - S||_F^2 + lambda Tr T(u)  s.t.  T(u) >= 0,
/// by ADMM on the split Y = T(u) with a PSD projection for Y and a per-lag
/// closed form for u. Only the m x m sample covariance is consumed.
CovarianceEstimate estimate_toeplitz(const CovarianceSample& s, double lambda,
                                     const AdmmOptions& opts = covariance_defaults());

/// First row u* of Sigma* = sum_k sigma_k^2 a(f_k) a(f_k)^*, so T(u*) == Sigma*.
ToeplitzSpec covariance_exact(const FrequencySet& freqs, std::span<const double> variances, Eigen::Index n);

/// Sigma* itself.
CMatrix covariance_matrix_exact(const FrequencySet& freqs, std::span<const double> variances, Eigen::Index n);

}  // namespace gridless
