#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridless/common.hpp"
#include "gridless/rng.hpp"

namespace gridless {

/// Sorted set of distinct frequencies on the unit circle [0,1).
class FrequencySet {
 public:
  /// Duplicates closer than this (wrap-around) are rejected.
  static constexpr double kDuplicateTol = 1e-12;

  FrequencySet() = default;
  explicit FrequencySet(std::vector<double> freqs);

  std::size_t size() const { return freqs_.size(); }
  bool empty() const { return freqs_.empty(); }
  double operator[](std::size_t k) const { return freqs_[k]; }
  const std::vector<double>& values() const { return freqs_; }
  auto begin() const { return freqs_.begin(); }
  auto end() const { return freqs_.end(); }

 private:
  std::vector<double> freqs_;
};

/// Which entries of an n x L ensemble are observed.
class ObservationMask {
 public:
  enum class Kind { Full, Entrywise, CommonRows };

  static ObservationMask full(Eigen::Index n, Eigen::Index L);
  /// Same row set for every column.
  static ObservationMask common_rows(Eigen::Index n, Eigen::Index L, std::vector<Eigen::Index> rows);
  /// Arbitrary (row, column) pairs.
  static ObservationMask entrywise(Eigen::Index n, Eigen::Index L,
                                   std::span<const std::pair<Eigen::Index, Eigen::Index>> entries);

  /// m rows drawn uniformly without replacement, shared across columns.
  static ObservationMask random_common_rows(Eigen::Index n, Eigen::Index L, Eigen::Index m, CounterRng& rng);
  /// m rows per column drawn independently for each column.
  static ObservationMask random_per_column(Eigen::Index n, Eigen::Index L, Eigen::Index m, CounterRng& rng);

  Kind kind() const { return kind_; }
  Eigen::Index rows() const { return observed_.rows(); }
  Eigen::Index cols() const { return observed_.cols(); }
  bool observed(Eigen::Index i, Eigen::Index l) const { return observed_(i, l); }
  Eigen::Index count() const { return observed_.count(); }
  bool empty() const { return count() == 0; }
  /// Row indices for CommonRows (and all rows for Full); empty for Entrywise.
  const std::vector<Eigen::Index>& row_set() const { return row_set_; }
  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& pattern() const { return observed_; }

 private:
  ObservationMask(Kind kind, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed,
                  std::vector<Eigen::Index> row_set)
      : kind_(kind), observed_(std::move(observed)), row_set_(std::move(row_set)) {}

  Kind kind_ = Kind::Full;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed_;
  std::vector<Eigen::Index> row_set_;
};

const char* to_string(ObservationMask::Kind kind);

/// First row u of a Hermitian Toeplitz matrix, T(u)(p,q) = u[q-p] for q >= p.
class ToeplitzSpec {
 public:
  ToeplitzSpec() = default;
  /// Throws DomainError if Im(u[0]) is not numerically zero; the residual
  /// imaginary part is then cleared so the diagonal is exactly real.
  explicit ToeplitzSpec(CVector u, double psd_tol = 1e-10);

  Eigen::Index size() const { return u_.size(); }
  Eigen::Index n() const { return u_.size(); }
  cplx operator[](Eigen::Index d) const { return u_(d); }
  const CVector& u() const { return u_; }
  double psd_tol() const { return psd_tol_; }

  /// Smallest eigenvalue of T(u).
  double min_eigenvalue() const;
  bool is_psd() const { return min_eigenvalue() >= -psd_tol_; }
  /// Tr T(u) = n * u[0].
  double trace() const { return static_cast<double>(u_.size()) * u_(0).real(); }

 private:
  CVector u_;
  double psd_tol_ = 1e-10;
};

/// a(f) = exp(j 2 pi f i) / sqrt(n), i = 0..n-1.
CVector atom(double f, Eigen::Index n);

/// Steering matrix V = [a(f_1), ..., a(f_r)].
CMatrix steering_matrix(const FrequencySet& freqs, Eigen::Index n);

/// X = V C.
SignalEnsemble synthesize(const FrequencySet& freqs, const CoefficientMatrix& coeffs, Eigen::Index n);

CMatrix toeplitz_embed(const ToeplitzSpec& u);
CMatrix toeplitz_embed(const CVector& u);

/// Entry i (0-based, lag d = i) sums A(p, p+d): super-diagonal sums.
CVector diag_sum(const CMatrix& a);

/// 1/(n-d) for lag d = 0..n-1.
RVector upsilon_weights(Eigen::Index n);

/// Adjoint of u -> T(u) under the real inner product Re<A,B> = Re tr(B^* A),
/// so that Re<A, T(u)> == Re<toeplitz_adjoint(A), u> for all admissible u
/// (u[0] real). For Hermitian A this is (G_0(A), 2 G_1(A), ..., 2 G_{n-1}(A)).
CVector toeplitz_adjoint(const CMatrix& a);

/// Diagonal of the normal operator T^* T: (n, 2(n-1), 2(n-2), ..., 2).
RVector toeplitz_gram_weights(Eigen::Index n);

/// Minimum wrap-around distance over all pairs; needs at least two entries.
double min_separation(const FrequencySet& freqs);

/// True iff every lag 0..n-1 is a difference q - p of members of omega.
bool is_complete_sparse_ruler(std::span<const Eigen::Index> omega, Eigen::Index n);

/// Row k ~ CN(0, variances[k]) i.i.d. across columns.
CoefficientMatrix sample_coefficients(Eigen::Index r, Eigen::Index L, std::span<const double> variances,
                                      std::uint64_t seed);
CoefficientMatrix sample_coefficients(Eigen::Index r, Eigen::Index L, std::span<const double> variances,
                                      CounterRng& rng);

/// r frequencies in [0,1) with pairwise wrap-around distance >= min_sep,
/// by sequential rejection. Throws DomainError when r * min_sep >= 1.
FrequencySet random_frequencies(Eigen::Index r, double min_sep, CounterRng& rng);

/// Zeroes unobserved entries.
SignalEnsemble mask_project(const SignalEnsemble& x, const ObservationMask& mask);

/// Rows of x at a common row set (m x L).
CMatrix mask_rows(const CMatrix& x, const ObservationMask& mask);

/// Principal submatrix of a at rows/cols of a common row set (m x m).
CMatrix mask_principal(const CMatrix& a, const ObservationMask& mask);
CMatrix principal_submatrix(const CMatrix& a, std::span<const Eigen::Index> rows);

/// Real inner product Re tr(B^* A).
inline double real_inner(const CMatrix& a, const CMatrix& b) {
  return (a.array() * b.array().conjugate()).sum().real();
}

}  // namespace gridless
