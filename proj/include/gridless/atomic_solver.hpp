#pragma once

#include <vector>

#include "gridless/common.hpp"
#include "gridless/spectral_core.hpp"

namespace gridless {

struct AdmmOptions {
  double rho = 1.0;
  int max_iters = 100000;
  double tol_primal = 1e-5;
  double tol_dual = 1e-5;
  /// Double/halve rho when one relative residual exceeds the other tenfold.
  bool adaptive_rho = true;
  /// Iterations between adaptive rho checks.
  int rho_update_interval = 10;
  /// Record (primal, dual) residuals every iteration.
  bool keep_history = true;

  static AdmmOptions completion_defaults();
  static AdmmOptions denoising_defaults();
  /// Throws DomainError on non-positive tolerances, rho or iteration cap.
  void validate() const;
};

struct ResidualSample {
  double primal;
  double dual;
};

/// Block variables of the lifted problem
///   min data(X) + tau/2 (Tr T(u) + Tr W)  s.t.  Y = [T(u) X; X^* W], Y >= 0.
/// Stored in the caller's units (the solver works on a rescaled copy).
struct AdmmState {
  CMatrix X;
  CVector u;
  CMatrix W;
  CMatrix Lambda;
  CMatrix Y;
  double rho = 1.0;
  std::vector<ResidualSample> residual_history;
  /// Smallest eigenvalue of Y after the final projection (relative to scale).
  double y_min_eigenvalue = 0.0;
};

struct SolveReport {
  double objective = 0.0;
  double atomic_norm_estimate = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct AtomicSolution {
  CMatrix X;
  ToeplitzSpec u;
  CMatrix W;
  AdmmState state;
  SolveReport report;
};

/// Regularization weight giving E||N||_A^* <= tau for CN(0, sigma^2) noise.
/// Natural logarithms; needs n >= 2.
double tau_theorem3(double sigma, Eigen::Index n, Eigen::Index L);

/// argmin_X 1/2 ||X - Z||_F^2 + tau ||X||_A.
/// report.objective is the lifted objective 1/2||X-Z||^2 + tau/2 (Tr T(u) + Tr W);
/// report.duality_gap is |primal - dual| / primal with the dual value taken at
/// the scaled residual (Z - X)/tau. Non-convergence is reported, not thrown;
/// NaN in the iterates throws SolverFailure.
AtomicSolution admm_denoise(const SignalEnsemble& z, double tau, const AdmmOptions& opts = AdmmOptions::denoising_defaults());

/// Denoising with the data term restricted to observed entries. No accuracy
/// guarantee is attached to this mode.
AtomicSolution admm_denoise_masked(const SignalEnsemble& z, const ObservationMask& mask, double tau,
                                   const AdmmOptions& opts = AdmmOptions::denoising_defaults());

/// argmin ||X||_A s.t. X agrees with Z on the mask. Observed entries are
/// re-imposed after every X-update, so X is exactly feasible.
/// report.objective = 1/2 (Tr T(u) + Tr W), which tends to ||X||_A;
/// report.duality_gap compares it with the dual value <Y, Z>_R of the
/// normalized multiplier Y = -2 Lambda_{nL}.
AtomicSolution admm_complete(const SignalEnsemble& z_obs, const ObservationMask& mask,
                             const AdmmOptions& opts = AdmmOptions::completion_defaults());

/// Certified evaluation of ||X||_A.
struct AtomicNormBound {
  /// Midpoint estimate, reported by callers as ||X||_A.
  double value = 0.0;
  /// <Y, X>_R for a dual-feasible Y (normalized so ||Y||_A^* = 1).
  double lower = 0.0;
  /// Objective of an explicitly feasible (T(u'), W') pair.
  double upper = 0.0;
  /// (upper - lower) / upper.
  double relative_gap = 0.0;
  SolveReport report;
};
AtomicNormBound atomic_norm(const CMatrix& x, const AdmmOptions& opts = AdmmOptions::completion_defaults());

/// Upper bound on ||X||_A from any Toeplitz u: the best feasible point of the
/// form (t (T(u) + dI), X^* (T(u) + dI)^-1 X / t) over shifts d and scales t.
double atomic_norm_upper_bound(const CMatrix& x, const CVector& u);

/// ||Y||_A^* = sup_f ||Y^* a(f)||_2: uniform grid maximum refined by local
/// golden-section search around each grid peak. Never below the grid maximum.
double dual_norm(const CMatrix& y, Eigen::Index grid_size = 0);

/// Default dual-norm grid: 16 n points.
inline Eigen::Index default_dual_grid(Eigen::Index n) { return 16 * n; }

/// Dual matrix of the denoising program, (Z - X)/tau. Throws
/// CertificateFailure if its dual norm exceeds 1 + tol.
CMatrix extract_dual(const SignalEnsemble& z, const CMatrix& x_hat, double tau, double tol = 1e-3);

/// Dual matrix of the completion program, -2 Lambda_{nL} from the converged
/// multiplier. Throws CertificateFailure if it exceeds 1 + tol in dual norm
/// or carries mass above off_mask_tol outside the mask.
CMatrix extract_dual(const AtomicSolution& sol, const ObservationMask& mask, double tol = 1e-3,
                     double off_mask_tol = 1e-6);

/// Primal value at X (with ||X||_A bounded above through u) and dual value
/// at Y, rescaled into the dual ball if needed.
struct DenoiseGap {
  double primal;
  double dual;
  double relative_gap;
};
DenoiseGap denoise_duality_gap(const SignalEnsemble& z, const CMatrix& x_hat, const CVector& u_hat,
                               const CMatrix& y, double tau);

}  // namespace gridless
