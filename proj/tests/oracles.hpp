#pragma once

// Brute-force reference implementations used only by tests. Each one
// evaluates a definition directly, with no shared code paths with src/.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gridless/common.hpp"
#include "gridless/rng.hpp"

namespace oracle {

using gridless::cplx;
using gridless::CMatrix;
using gridless::CVector;

inline cplx cis(long double theta) {
  return {static_cast<double>(std::cos(theta)), static_cast<double>(std::sin(theta))};
}

inline long double two_pi() { return 2.0L * 3.14159265358979323846264338327950288L; }

/// exp(j 2 pi f i) / sqrt(n), entry by entry in long double.
inline CVector atom(double f, Eigen::Index n) {
  CVector a(n);
  const long double s = 1.0L / std::sqrt(static_cast<long double>(n));
  for (Eigen::Index i = 0; i < n; ++i) a(i) = cis(two_pi() * f * i) * static_cast<double>(s);
  return a;
}

/// T(u)(p,q) = u[q-p] for q >= p, conj(u[p-q]) below.
inline CMatrix toeplitz(const CVector& u) {
  const Eigen::Index n = u.size();
  CMatrix t(n, n);
  for (Eigen::Index p = 0; p < n; ++p)
    for (Eigen::Index q = 0; q < n; ++q) t(p, q) = q >= p ? u(q - p) : std::conj(u(p - q));
  return t;
}

inline CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, gridless::CounterRng& rng) {
  CMatrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.complex_normal();
  return a;
}

inline CMatrix random_hermitian(Eigen::Index n, gridless::CounterRng& rng) {
  const CMatrix a = random_matrix(n, n, rng);
  return 0.5 * (a + a.adjoint());
}

/// Random first row with a real zero lag.
inline CVector random_toeplitz_row(Eigen::Index n, gridless::CounterRng& rng) {
  CVector u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = rng.complex_normal();
  u(0) = u(0).real();
  return u;
}

/// sum_k p_k a(f_k) a(f_k)^* as an explicit sum of outer products.
inline CMatrix outer_sum(const std::vector<double>& f, const std::vector<double>& p, Eigen::Index n) {
  CMatrix s = CMatrix::Zero(n, n);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const CVector a = atom(f[k], n);
    s += p[k] * a * a.adjoint();
  }
  return s;
}

/// ||Y^* a(f)||_2 evaluated term by term.
inline double dual_poly_norm(const CMatrix& y, double f) {
  const CVector a = atom(f, y.rows());
  long double acc = 0.0L;
  for (Eigen::Index l = 0; l < y.cols(); ++l) {
    cplx s = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) s += std::conj(y(i, l)) * a(i);
    acc += std::norm(s);
  }
  return static_cast<double>(std::sqrt(acc));
}

inline double wrap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 1.0);
  return d > 0.5 ? 1.0 - d : d;
}

}  // namespace oracle
