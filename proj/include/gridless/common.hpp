#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gridless {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// n x L ensemble of signals, one measurement vector per column.
using SignalEnsemble = CMatrix;
/// r x L coefficient matrix; row k holds the amplitudes of frequency k.
using CoefficientMatrix = CMatrix;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Error hierarchy. Callers that only care about "bad input" catch
// DomainError; numerical breakdowns derive from SolverError.

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf appeared in solver iterates.
class SolverFailure : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Extracted dual matrix violates dual feasibility beyond tolerance.
class CertificateFailure : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Least-squares system is rank deficient.
class IllPosedError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Fisher information matrix cannot be inverted.
class SingularityError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Toeplitz matrix has full numerical rank, so no decomposition with r < n.
class FullRankError : public SolverError {
 public:
  using SolverError::SolverError;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Input parsed but fails a semantic check (e.g. non-PSD covariance).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wrap-around distance on the unit circle [0,1).
inline double wrap_distance(double a, double b) {
  double d = std::abs(a - b);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

/// Reduces f into [0,1).
inline double wrap_unit(double f) {
  double w = f - std::floor(f);
  return w >= 1.0 ? 0.0 : w;
}

inline CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace gridless
