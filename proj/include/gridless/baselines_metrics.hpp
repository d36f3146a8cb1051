#pragma once

#include <vector>

#include "gridless/common.hpp"
#include "gridless/spectral_core.hpp"

namespace gridless {

/// Two-frequency model with known coefficients and CN(0, sigma^2) noise.
struct CrbInput {
  std::vector<double> freqs;
  /// 2 x L.
  CMatrix coeffs;
  double sigma = 1.0;
  Eigen::Index n = 0;

  /// Throws DomainError unless r = 2, sigma > 0, n >= 1 and shapes agree.
  void validate() const;
};

/// J(f) = 8 pi^2 / (n sigma^2) sum_l Re [ |c_1l|^2 S0          c_1l c_2l^* S(f1-f2) ]
///                                      [ c_1l^* c_2l S(f2-f1)  |c_2l|^2 S0         ]
/// with S(g) = sum_{i<n} i^2 exp(j 2 pi g i) and S0 = S(0).
RMatrix fisher_information(const CrbInput& inp);

/// J^{-1}. Throws SingularityError when J is not safely invertible.
RMatrix fisher_crb(const CrbInput& inp);

struct GroupLassoOptions {
  int max_iters = 20000;
  /// Stop once the relative objective change falls to this level.
  double rel_tol = 1e-8;
  bool keep_history = true;
};

struct GroupLassoResult {
  /// (oversampling n) x L grid coefficients; row k sits at f = k / (oversampling n).
  CMatrix G;
  std::vector<double> objective_history;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::Index grid_size = 0;
};

/// min_G 1/2 ||P_Omega(Phi G) - Z||_F^2 + mu sum_k ||G_k,:||_2 with Phi the
/// n x K frame of atoms a(k/K), K = oversampling n. Monotone FISTA with step
/// 1/||Phi_Omega||^2 = n / K; Phi and Phi^* are applied with FFTs.
GroupLassoResult group_lasso_dft(const SignalEnsemble& z_obs, const ObservationMask& mask, int oversampling, double mu,
                                 const GroupLassoOptions& opts = {});

/// Smallest mu for which G = 0 is optimal: max_k ||(Phi^* P_Omega Z)_k,:||_2.
double group_lasso_mu_max(const SignalEnsemble& z_obs, const ObservationMask& mask, int oversampling);

/// Row norms of G.
RVector group_row_norms(const CMatrix& g);

/// Grid frequencies of the r largest circular local maxima of the row norms.
FrequencySet grid_peak_frequencies(const CMatrix& g, Eigen::Index r);

/// ||X_hat - X*||_F / ||X*||_F.
double normalized_error(const CMatrix& x_hat, const CMatrix& x_star);

/// ||X_hat - X*||_F^2 / L.
double per_vector_mse(const CMatrix& x_hat, const CMatrix& x_star);

/// Minimum-cost assignment of rows to columns (rows <= cols). Returns the
/// column chosen for each row.
std::vector<std::size_t> hungarian(const RMatrix& cost);

struct FrequencyScore {
  /// sum_k (f_hat_k - f_k)^2 / r after optimal wrap-around matching;
  /// +inf when the cardinalities differ.
  double mse = 0.0;
  /// Largest matched wrap-around distance.
  double max_error = 0.0;
  bool cardinality_match = true;
  bool success = false;
  /// est[matching[k]] is paired with truth[k].
  std::vector<std::size_t> matching;
};

inline constexpr double kSuccessThreshold = 1e-5;

FrequencyScore freq_mse(const FrequencySet& est, const FrequencySet& truth);

/// Signal recovery succeeds when the normalized error is below 1e-5.
inline bool recovery_success(double normalized_err) { return normalized_err < kSuccessThreshold; }

}  // namespace gridless
