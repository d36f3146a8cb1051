#pragma once

#include <ostream>
#include <vector>

#include "gridless/common.hpp"
#include "gridless/spectral_core.hpp"

namespace gridless {

/// Sampled ||Q(f)||_2 on f_k = k / grid_size.
struct DualCurve {
  std::vector<double> freqs;
  std::vector<double> norms;
};

/// Q(f) = Y^* a(f) for an n x L dual matrix Y.
class DualPolynomial {
 public:
  /// Samples the curve on grid_size points at construction (0 selects 16 n).
  explicit DualPolynomial(CMatrix y, Eigen::Index grid_size = 0);

  Eigen::Index n() const { return y_.rows(); }
  const CMatrix& matrix() const { return y_; }

  /// Q(f), length L.
  CVector eval(double f) const;
  /// ||Q(f)||_2^2 evaluated directly.
  double norm_sq(double f) const;
  /// d/df ||Q(f)||_2^2.
  double norm_sq_derivative(double f) const;

  /// Cached ||Q||_2 samples on the construction grid.
  const DualCurve& curve() const { return curve_; }
  double grid_max() const;

  /// Maximizes ||Q||^2 on [lo, hi] by golden-section search. Returns f.
  double refine_peak(double lo, double hi, int iterations) const;

 private:
  CMatrix y_;
  DualCurve curve_;
};

struct LocalizationResult {
  FrequencySet freqs;
  std::vector<double> peak_norms;
  CoefficientMatrix amplitudes;
};

/// ||Q(f)||_2 on a grid of grid_size points (grid_size >= 8n), computed with
/// zero-padded FFTs of the columns of Y.
DualCurve eval_dual_poly(const CMatrix& y, Eigen::Index grid_size);

/// Local maxima of ||Q(f)||_2 with value >= 1 - eps, each refined by 40
/// golden-section steps over its bracketing grid cells; peaks closer than
/// 1/(4n) are merged keeping the larger. grid_size 0 selects 16 n.
FrequencySet locate_frequencies(const CMatrix& y, double eps = 1e-3, Eigen::Index grid_size = 0,
                                std::vector<double>* peak_norms = nullptr);

/// Column-wise least squares of Z on the steering matrix of freqs, using only
/// observed entries. Throws IllPosedError if a column's restricted steering
/// matrix is rank deficient.
CoefficientMatrix recover_amplitudes(const FrequencySet& freqs, const SignalEnsemble& z, const ObservationMask& mask);

/// Frequencies, peak norms and amplitudes in one call.
LocalizationResult localize_from_dual(const CMatrix& y, const SignalEnsemble& z, const ObservationMask& mask,
                                      double eps = 1e-3, Eigen::Index grid_size = 0);

/// Writes "f,norm" rows.
void write_curve_csv(std::ostream& os, const DualCurve& curve, const char* value_name = "norm");

}  // namespace gridless
