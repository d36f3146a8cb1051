#pragma once

#include <iosfwd>
#include <vector>

#include "gridless/common.hpp"
#include "gridless/dual_localizer.hpp"
#include "gridless/spectral_core.hpp"

namespace gridless {

/// Eigendecomposition of T(u) after projection onto the PSD cone.
struct SubspaceSplit {
  /// n x r, eigenvectors of the r largest eigenvalues.
  CMatrix signal_basis;
  /// n x (n - r), the remaining eigenvectors.
  CMatrix noise_basis;
  /// Ascending, after clipping negatives to zero.
  RVector eigenvalues;
  /// Frobenius distance from T(u) to its PSD projection.
  double projection_distance = 0.0;
  /// lambda_{n-r} - lambda_{n-r-1} (largest noise to smallest signal gap).
  double eigen_gap = 0.0;
};

/// Throws DomainError unless 1 <= r < n or on eigensolver failure.
SubspaceSplit subspace_split(const ToeplitzSpec& u, Eigen::Index r);

/// root-MUSIC with known order r: roots of z^{n-1} sum_d c_d z^d with c_d the
/// lag sums of the noise projector, one root per conjugate-reciprocal pair,
/// the r nearest the unit circle, then Newton-polished on the circle.
FrequencySet root_music(const ToeplitzSpec& u, Eigen::Index r);

/// Same, also returning the subspace used.
FrequencySet root_music(const ToeplitzSpec& u, Eigen::Index r, SubspaceSplit* split);

/// 1 / ||E_noise^* a(f)||^2 on f = k / grid_size.
DualCurve music_pseudospectrum(const ToeplitzSpec& u, Eigen::Index r, Eigen::Index grid_size);

/// Optional order selection: number of eigenvalues above 1e-3 lambda_max.
Eigen::Index estimate_model_order(const ToeplitzSpec& u, double gap_ratio = 1e-3);

struct SpectralComponent {
  double freq;
  double power;
};

/// Caratheodory-Vandermonde decomposition T(u) = sum_k p_k a(f_k) a(f_k)^*.
/// Rank is counted as eigenvalues above tol * lambda_max; frequencies come
/// from root-MUSIC on that rank, powers from nonnegative least squares.
/// Throws FullRankError at numerical rank n, DomainError if T(u) is not PSD
/// within tol * lambda_max. Output is sorted by frequency.
std::vector<SpectralComponent> vandermonde_decompose(const ToeplitzSpec& u, double tol = 1e-8);

/// Nonnegative powers p minimizing ||sum_k p_k v(f_k) - u||_2, where v(f) is
/// the first row of a(f) a(f)^*.
RVector fit_powers(const ToeplitzSpec& u, const FrequencySet& freqs);

/// min ||A x - b||_2 s.t. x >= 0 (Lawson-Hanson active set).
RVector nnls(const RMatrix& a, const RVector& b, int max_iters = 0);

void write_pseudospectrum_csv(std::ostream& os, const DualCurve& curve);

}  // namespace gridless
