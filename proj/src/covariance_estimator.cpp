#include "gridless/covariance_estimator.hpp"

#include <algorithm>
#include <cmath>

namespace gridless {

void CovarianceSample::validate(double herm_tol, double psd_tol) const {
  const Eigen::Index mm = m();
  if (n < 1) throw ValidationError("covariance: n must be positive");
  if (L < 1) throw ValidationError("covariance: L must be positive");
  if (mm < 1 || mm > n) throw ValidationError("covariance: omega must have between 1 and n entries");
  for (std::size_t k = 0; k < omega.size(); ++k) {
    if (omega[k] < 0 || omega[k] >= n) throw ValidationError("covariance: omega index out of range");
    if (k > 0 && omega[k] <= omega[k - 1]) throw ValidationError("covariance: omega must be strictly increasing");
  }
  if (sigma.rows() != mm || sigma.cols() != mm) throw ValidationError("covariance: matrix is not m x m");
  if (!sigma.allFinite()) throw ValidationError("covariance: non-finite entry");
  const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1e-300);
  if ((sigma - sigma.adjoint()).cwiseAbs().maxCoeff() > herm_tol * scale)
    throw ValidationError("covariance: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(sigma), Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues()(mm - 1), 0.0);
  if (es.eigenvalues()(0) < -psd_tol * std::max(top, 1e-300))
    throw ValidationError("covariance: matrix is not positive semidefinite");
}

CovarianceAccumulator::CovarianceAccumulator(Eigen::Index n, std::vector<Eigen::Index> omega)
    : n_(n), omega_(std::move(omega)) {
  if (n_ < 1) throw DomainError("CovarianceAccumulator: n must be positive");
  const auto m = static_cast<Eigen::Index>(omega_.size());
  sum_ = CMatrix::Zero(m, m);
}

void CovarianceAccumulator::add(const CVector& x) {
  if (x.size() != sum_.rows()) throw DomainError("CovarianceAccumulator: vector length must equal m");
  sum_.selfadjointView<Eigen::Lower>().rankUpdate(x);
  ++count_;
}

CovarianceSample CovarianceAccumulator::finish() const {
  if (count_ == 0) throw DomainError("CovarianceAccumulator: no vectors added");
  CovarianceSample out;
  CMatrix full = sum_.selfadjointView<Eigen::Lower>();
  out.sigma = full / static_cast<double>(count_);
  out.omega = omega_;
  out.n = n_;
  out.L = count_;
  return out;
}

CovarianceSample sample_covariance(const CMatrix& x_omega, std::span<const Eigen::Index> omega, Eigen::Index n) {
  if (x_omega.cols() < 1) throw DomainError("sample_covariance: L must be at least 1");
  if (x_omega.rows() != static_cast<Eigen::Index>(omega.size()))
    throw DomainError("sample_covariance: row count must equal |omega|");
  CovarianceSample out;
  out.sigma = hermitian_part(x_omega * x_omega.adjoint()) / static_cast<double>(x_omega.cols());
  out.omega.assign(omega.begin(), omega.end());
  out.n = n;
  out.L = x_omega.cols();
  return out;
}

double lambda_heuristic(Eigen::Index L, Eigen::Index m) {
  if (L < 2 || m < 2) throw DomainError("lambda_heuristic: L and m must be at least 2");
  const double log_l = std::log(static_cast<double>(L));
  return 2.5e-3 / (log_l * log_l * std::log(static_cast<double>(m)));
}

double effective_rank(const CMatrix& s) {
  if (s.rows() != s.cols()) throw DomainError("effective_rank: matrix must be square");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(s), Eigen::EigenvaluesOnly);
  const RVector& ev = es.eigenvalues();
  const double spec = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  if (spec == 0.0) throw DomainError("effective_rank: zero matrix");
  return s.trace().real() / spec;
}

double lambda_theorem4(const CMatrix& sigma_omega_star, Eigen::Index L, Eigen::Index n, double c) {
  if (L < 1 || n < 1) throw DomainError("lambda_theorem4: L and n must be positive");
  const double reff = effective_rank(sigma_omega_star);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(sigma_omega_star), Eigen::EigenvaluesOnly);
  const double spec = es.eigenvalues().cwiseAbs().maxCoeff();
  const double t = reff * std::log(static_cast<double>(L) * static_cast<double>(n)) / static_cast<double>(L);
  return c * std::max(std::sqrt(t), t) * spec;
}

AdmmOptions covariance_defaults() {
  AdmmOptions o;
  o.tol_primal = 1e-8;
  o.tol_dual = 1e-8;
  o.max_iters = 20000;
  return o;
}

namespace {

RVector psd_project(const CMatrix& v, CMatrix& out, Eigen::SelfAdjointEigenSolver<CMatrix>& es) {
  es.compute(v);
  if (es.info() != Eigen::Success) throw SolverFailure("estimate_toeplitz: eigendecomposition failed");
  const RVector& ev = es.eigenvalues();
  const Eigen::Index n = v.rows();
  Eigen::Index first = 0;
  while (first < n && ev(first) <= 0.0) ++first;
  if (first == n) {
    out.setZero(n, n);
  } else {
    const Eigen::Index k = n - first;
    const CMatrix up = es.eigenvectors().rightCols(k);
    out = hermitian_part(up * ev.tail(k).asDiagonal() * up.adjoint());
  }
  return ev;
}

}  // namespace

CovarianceEstimate estimate_toeplitz(const CovarianceSample& s, double lambda, const AdmmOptions& opts) {
  if (!(lambda >= 0.0)) throw DomainError("estimate_toeplitz: lambda must be nonnegative");
  opts.validate();
  s.validate(1e-10, 1e-8);
  const Eigen::Index n = s.n;
  const Eigen::Index m = s.m();

  // Embed the observed block and count mask entries per lag.
  CMatrix s_full = CMatrix::Zero(n, n);
  CMatrix mask = CMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      s_full(s.omega[static_cast<std::size_t>(i)], s.omega[static_cast<std::size_t>(j)]) = s.sigma(i, j);
      mask(s.omega[static_cast<std::size_t>(i)], s.omega[static_cast<std::size_t>(j)]) = 1.0;
    }
  }
  const double scale = s_full.norm();

  CovarianceEstimate est;
  est.lambda_used = lambda;
  if (scale == 0.0) {
    est.u_hat = ToeplitzSpec(CVector::Zero(n));
    est.report.converged = true;
    return est;
  }

  // Work on S / scale with lambda / scale; the minimizer scales back linearly.
  const CVector data_adj = toeplitz_adjoint(s_full / scale);
  const RVector counts = toeplitz_adjoint(mask).real();
  const RVector gram = toeplitz_gram_weights(n);
  const double lam = lambda / scale;

  double rho = opts.rho;
  CVector u = CVector::Zero(n);
  CMatrix y = CMatrix::Zero(n, n);
  CMatrix lag = CMatrix::Zero(n, n);
  CMatrix y_new(n, n);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(n);

  int it = 0;
  bool converged = false;
  while (it < opts.max_iters) {
    ++it;
    CVector g = data_adj + toeplitz_adjoint(lag) + rho * toeplitz_adjoint(y);
    g(0) -= lam * static_cast<double>(n);
    for (Eigen::Index d = 0; d < n; ++d) u(d) = g(d) / (counts(d) + rho * gram(d));
    u(0) = u(0).real();

    const CMatrix t = toeplitz_embed(u);
    psd_project(hermitian_part(t - lag / rho), y_new, es);
    const CMatrix prim = y_new - t;
    lag = hermitian_part(lag + rho * prim);
    const double r_prim = prim.norm();
    const double r_dual = rho * (y_new - y).norm();
    y.swap(y_new);
    if (!std::isfinite(r_prim) || !std::isfinite(r_dual)) throw SolverFailure("estimate_toeplitz: non-finite iterate");

    const double rel_prim = r_prim / std::max({y.norm(), t.norm(), 1e-300});
    // The multiplier can legitimately vanish (interior solutions); fall back
    // to the data scale, which is 1 after normalization.
    const double rel_dual = r_dual / std::max(lag.norm(), 1.0);
    if (rel_prim <= opts.tol_primal && rel_dual <= opts.tol_dual) {
      converged = true;
      break;
    }
    if (opts.adaptive_rho && it % opts.rho_update_interval == 0) {
      if (rel_prim > 10.0 * rel_dual) {
        rho *= 2.0;
      } else if (rel_dual > 10.0 * rel_prim) {
        rho /= 2.0;
      }
    }
  }

  u *= scale;
  // Tiny negative eigenvalues left by finite tolerance: lift the diagonal.
  {
    Eigen::SelfAdjointEigenSolver<CMatrix> check(toeplitz_embed(u), Eigen::EigenvaluesOnly);
    const double lo = check.eigenvalues()(0);
    if (lo < 0.0) {
      u(0) += -lo;
      est.psd_repair = -lo;
    }
  }
  est.u_hat = ToeplitzSpec(u);
  const CMatrix fit = principal_submatrix(toeplitz_embed(u), s.omega) - s.sigma;
  est.fit_residual = fit.norm();
  est.trace = est.u_hat.trace();
  est.report.iterations = it;
  est.report.converged = converged;
  est.report.objective = 0.5 * fit.squaredNorm() + lambda * est.trace;
  est.report.atomic_norm_estimate = est.trace;
  return est;
}

CMatrix covariance_matrix_exact(const FrequencySet& freqs, std::span<const double> variances, Eigen::Index n) {
  if (variances.size() != freqs.size()) throw DomainError("covariance_exact: variance count must equal |F|");
  if (n < 1) throw DomainError("covariance_exact: n must be positive");
  CMatrix sigma = CMatrix::Zero(n, n);
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (!(variances[k] >= 0.0)) throw DomainError("covariance_exact: negative variance");
    const CVector a = atom(freqs[k], n);
    sigma.noalias() += variances[k] * a * a.adjoint();
  }
  return sigma;
}

ToeplitzSpec covariance_exact(const FrequencySet& freqs, std::span<const double> variances, Eigen::Index n) {
  if (variances.size() != freqs.size()) throw DomainError("covariance_exact: variance count must equal |F|");
  if (n < 1) throw DomainError("covariance_exact: n must be positive");
  // (a a^*)(0, d) = exp(-j 2 pi f d) / n.
  CVector u = CVector::Zero(n);
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (!(variances[k] >= 0.0)) throw DomainError("covariance_exact: negative variance");
    for (Eigen::Index d = 0; d < n; ++d)
      u(d) += std::polar(variances[k] / static_cast<double>(n), -kTwoPi * freqs[k] * static_cast<double>(d));
  }
  u(0) = u(0).real();
  return ToeplitzSpec(u);
}

}  // namespace gridless
