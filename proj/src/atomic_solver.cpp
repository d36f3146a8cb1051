#include "gridless/atomic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "gridless/dual_localizer.hpp"

namespace gridless {

AdmmOptions AdmmOptions::completion_defaults() {
  AdmmOptions o;
  o.tol_primal = 1e-8;
  o.tol_dual = 1e-8;
  return o;
}

AdmmOptions AdmmOptions::denoising_defaults() {
  AdmmOptions o;
  o.tol_primal = 1e-5;
  o.tol_dual = 1e-5;
  return o;
}

void AdmmOptions::validate() const {
  if (!(rho > 0.0)) throw DomainError("AdmmOptions: rho must be positive");
  if (max_iters < 1) throw DomainError("AdmmOptions: max_iters must be at least 1");
  if (!(tol_primal > 0.0) || !(tol_dual > 0.0)) throw DomainError("AdmmOptions: tolerances must be positive");
  if (rho_update_interval < 1) throw DomainError("AdmmOptions: rho_update_interval must be at least 1");
}

double tau_theorem3(double sigma, Eigen::Index n, Eigen::Index L) {
  if (!(sigma > 0.0)) throw DomainError("tau_theorem3: sigma must be positive");
  if (n < 2) throw DomainError("tau_theorem3: n must be at least 2");
  if (L < 1) throw DomainError("tau_theorem3: L must be positive");
  const double nd = static_cast<double>(n);
  const double Ld = static_cast<double>(L);
  const double log_n = std::log(nd);
  const double alpha = 8.0 * std::numbers::pi * nd * log_n;
  const double log_aL = std::log(alpha * Ld);
  const double inner =
      Ld + log_aL + std::sqrt(2.0 * Ld * log_aL) + std::sqrt(std::numbers::pi * Ld / 2.0) + 1.0;
  return sigma * std::sqrt(1.0 + 1.0 / log_n) * std::sqrt(inner);
}

namespace {

enum class DataTerm { Full, Masked, Equality };

/// Core ADMM on the lifted problem. z is already scaled; weight marks observed
/// entries (used by Masked and Equality).
AtomicSolution run_admm(const CMatrix& z, const Eigen::ArrayXXd& weight, DataTerm term, double tau,
                        const AdmmOptions& opts) {
  const Eigen::Index n = z.rows();
  const Eigen::Index L = z.cols();
  const Eigen::Index big = n + L;

  double rho = opts.rho;
  CMatrix x = (term == DataTerm::Full) ? z : CMatrix((weight > 0.0).select(z, CMatrix::Zero(n, L)));
  CVector u = CVector::Zero(n);
  CMatrix w = CMatrix::Zero(L, L);
  CMatrix lambda = CMatrix::Zero(big, big);
  CMatrix y = CMatrix::Zero(big, big);
  CMatrix xi(big, big);

  const RVector gram = toeplitz_gram_weights(n);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(big);

  AtomicSolution sol;
  double min_eig = 0.0;
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iters;) {
    ++it;
    // (W, X, u) given (Lambda, Y).
    const CMatrix y_ll = hermitian_part(y.bottomRightCorner(L, L));
    w = y_ll + (lambda.bottomRightCorner(L, L) - (tau / 2.0) * CMatrix::Identity(L, L)) / rho;
    w = hermitian_part(w);

    const CMatrix y_nl = 0.5 * (y.topRightCorner(n, L) + y.bottomLeftCorner(L, n).adjoint());
    const CMatrix l_nl = 0.5 * (lambda.topRightCorner(n, L) + lambda.bottomLeftCorner(L, n).adjoint());
    switch (term) {
      case DataTerm::Full:
        x = (z + 2.0 * l_nl + 2.0 * rho * y_nl) / (1.0 + 2.0 * rho);
        break;
      case DataTerm::Masked:
        x = ((weight * z.array() + 2.0 * l_nl.array() + 2.0 * rho * y_nl.array()) / (weight + 2.0 * rho)).matrix();
        break;
      case DataTerm::Equality:
        x = y_nl + l_nl / rho;
        x = (weight > 0.0).select(z, x);
        break;
    }

    CVector g = toeplitz_adjoint(lambda.topLeftCorner(n, n)) + rho * toeplitz_adjoint(y.topLeftCorner(n, n));
    g(0) -= tau * static_cast<double>(n) / 2.0;
    for (Eigen::Index d = 0; d < n; ++d) u(d) = g(d) / (rho * gram(d));
    u(0) = u(0).real();

    xi.topLeftCorner(n, n) = toeplitz_embed(u);
    xi.topRightCorner(n, L) = x;
    xi.bottomLeftCorner(L, n) = x.adjoint();
    xi.bottomRightCorner(L, L) = w;

    // Y: projection of Xi - Lambda/rho onto the PSD cone.
    const CMatrix v = hermitian_part(xi - lambda / rho);
    es.compute(v);
    if (es.info() != Eigen::Success) throw SolverFailure("admm: eigendecomposition failed");
    const RVector& ev = es.eigenvalues();
    Eigen::Index first_pos = 0;
    while (first_pos < big && ev(first_pos) <= 0.0) ++first_pos;
    CMatrix y_new;
    if (first_pos == big) {
      y_new = CMatrix::Zero(big, big);
    } else {
      const Eigen::Index k = big - first_pos;
      const CMatrix up = es.eigenvectors().rightCols(k);
      y_new = up * ev.tail(k).asDiagonal() * up.adjoint();
      y_new = hermitian_part(y_new);
    }

    const CMatrix prim = y_new - xi;
    lambda += rho * prim;
    lambda = hermitian_part(lambda);

    const double r_prim = prim.norm();
    const double r_dual = rho * (y_new - y).norm();
    y.swap(y_new);

    if (!std::isfinite(r_prim) || !std::isfinite(r_dual) || !x.allFinite())
      throw SolverFailure("admm: non-finite iterate");

    const double rel_prim = r_prim / std::max({y.norm(), xi.norm(), 1e-300});
    const double rel_dual = r_dual / std::max(lambda.norm(), 1e-300);
    if (opts.keep_history) sol.state.residual_history.push_back({rel_prim, rel_dual});
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

  // Final Y is PSD by construction; record its smallest eigenvalue.
  {
    Eigen::SelfAdjointEigenSolver<CMatrix> check(y, Eigen::EigenvaluesOnly);
    min_eig = check.eigenvalues()(0);
  }

  sol.X = x;
  sol.u = ToeplitzSpec(u);
  sol.W = w;
  sol.state.X = x;
  sol.state.u = u;
  sol.state.W = w;
  sol.state.Lambda = lambda;
  sol.state.Y = y;
  sol.state.rho = rho;
  sol.state.y_min_eigenvalue = min_eig;
  sol.report.iterations = it;
  sol.report.converged = converged;
  return sol;
}

/// Same observation pattern in every column (full or common rows).
bool column_invariant(const Eigen::ArrayXXd& weight) {
  for (Eigen::Index l = 1; l < weight.cols(); ++l)
    if ((weight.col(l) != weight.col(0)).any()) return false;
  return true;
}

/// With a column-invariant pattern the program only sees the row space of the
/// observed rows Z_Omega: replacing X by X Q Q^* keeps the data term or the
/// constraint and cannot increase ||X||_A, since a(f) (Q Q^* b)^* is again an
/// atom of norm at most ||b||. When L exceeds the number k of observed rows,
/// the solve therefore runs on Z Q (n x k), with Q an orthonormal basis of
/// that row space, and the iterates are mapped back through Q.
AtomicSolution run_admm_reduced(const CMatrix& z, const Eigen::ArrayXXd& weight, DataTerm term, double tau,
                                const AdmmOptions& opts) {
  const Eigen::Index n = z.rows();
  const Eigen::Index L = z.cols();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; ++i)
    if (weight(i, 0) > 0.0) rows.push_back(i);
  const auto k = static_cast<Eigen::Index>(rows.size());
  if (L <= k || k == 0 || !column_invariant(weight)) return run_admm(z, weight, term, tau, opts);

  CMatrix zo_adj(L, k);
  for (Eigen::Index j = 0; j < k; ++j) zo_adj.col(j) = z.row(rows[static_cast<std::size_t>(j)]).adjoint();
  Eigen::HouseholderQR<CMatrix> qr(zo_adj);
  const CMatrix q = qr.householderQ() * CMatrix::Identity(L, k);

  AtomicSolution red = run_admm(z * q, weight.leftCols(k), term, tau, opts);

  CMatrix e = CMatrix::Zero(n + L, n + k);
  e.topLeftCorner(n, n).setIdentity();
  e.bottomRightCorner(L, k) = q;
  AtomicSolution sol;
  sol.X = red.X * q.adjoint();
  sol.u = red.u;
  sol.W = q * red.W * q.adjoint();
  sol.state.X = sol.X;
  sol.state.u = red.state.u;
  sol.state.W = sol.W;
  sol.state.Lambda = e * red.state.Lambda * e.adjoint();
  sol.state.Y = e * red.state.Y * e.adjoint();
  sol.state.rho = red.state.rho;
  sol.state.residual_history = std::move(red.state.residual_history);
  // The lifted Y has the same nonzero spectrum plus zeros.
  sol.state.y_min_eigenvalue = std::min(0.0, red.state.y_min_eigenvalue);
  sol.report = red.report;
  return sol;
}

/// Maps a solution computed on z/s back to the caller's units. Lambda scales
/// with s for the denoising objective; callers solving the homogeneous
/// completion program undo that.
void rescale(AtomicSolution& sol, double s) {
  sol.X *= s;
  sol.W *= s;
  sol.u = ToeplitzSpec(sol.u.u() * s);
  sol.state.X *= s;
  sol.state.u *= s;
  sol.state.W *= s;
  sol.state.Y *= s;
  sol.state.Lambda *= s;
}

double lifted_trace(const AtomicSolution& sol) { return 0.5 * (sol.u.trace() + sol.W.trace().real()); }

AtomicSolution denoise_impl(const SignalEnsemble& z, const std::optional<ObservationMask>& mask, double tau,
                            const AdmmOptions& opts) {
  opts.validate();
  if (!(tau > 0.0)) throw DomainError("admm_denoise: tau must be positive");
  if (z.size() == 0) throw DomainError("admm_denoise: empty input");
  if (!z.allFinite()) throw DomainError("admm_denoise: non-finite input");
  Eigen::ArrayXXd weight = Eigen::ArrayXXd::Ones(z.rows(), z.cols());
  if (mask) {
    if (mask->rows() != z.rows() || mask->cols() != z.cols()) throw DomainError("admm_denoise: mask shape mismatch");
    weight = mask->pattern().cast<double>();
  }
  const CMatrix z_obs = (weight > 0.0).select(z, CMatrix::Zero(z.rows(), z.cols()));
  const double s = z_obs.norm();
  AtomicSolution sol;
  if (s == 0.0) {
    // Zero data: X = 0 is optimal.
    sol.X = CMatrix::Zero(z.rows(), z.cols());
    sol.u = ToeplitzSpec(CVector::Zero(z.rows()));
    sol.W = CMatrix::Zero(z.cols(), z.cols());
    sol.state.X = sol.X;
    sol.state.u = sol.u.u();
    sol.state.W = sol.W;
    sol.state.Lambda = CMatrix::Zero(z.rows() + z.cols(), z.rows() + z.cols());
    sol.state.Y = sol.state.Lambda;
    sol.report.converged = true;
    return sol;
  }
  sol = run_admm_reduced(z_obs / s, weight, mask ? DataTerm::Masked : DataTerm::Full, tau / s, opts);
  rescale(sol, s);

  const CMatrix resid = (weight > 0.0).select(sol.X - z, CMatrix::Zero(z.rows(), z.cols()));
  sol.report.atomic_norm_estimate = std::max(0.0, lifted_trace(sol));
  sol.report.objective = 0.5 * resid.squaredNorm() + tau * lifted_trace(sol);
  if (!mask) {
    const CMatrix ydual = (z - sol.X) / tau;
    sol.report.duality_gap = denoise_duality_gap(z, sol.X, sol.u.u(), ydual, tau).relative_gap;
  } else {
    sol.report.duality_gap = std::numeric_limits<double>::quiet_NaN();
  }
  return sol;
}

}  // namespace

AtomicSolution admm_denoise(const SignalEnsemble& z, double tau, const AdmmOptions& opts) {
  return denoise_impl(z, std::nullopt, tau, opts);
}

AtomicSolution admm_denoise_masked(const SignalEnsemble& z, const ObservationMask& mask, double tau,
                                   const AdmmOptions& opts) {
  return denoise_impl(z, mask, tau, opts);
}

AtomicSolution admm_complete(const SignalEnsemble& z_obs, const ObservationMask& mask, const AdmmOptions& opts) {
  opts.validate();
  if (mask.rows() != z_obs.rows() || mask.cols() != z_obs.cols()) throw DomainError("admm_complete: mask shape mismatch");
  if (mask.empty()) throw DomainError("admm_complete: empty observation set");
  const Eigen::ArrayXXd weight = mask.pattern().cast<double>();
  const CMatrix z = mask_project(z_obs, mask);
  if (!z.allFinite()) throw DomainError("admm_complete: non-finite observed entry");
  const double s = z.norm();
  AtomicSolution sol;
  if (s == 0.0) {
    sol.X = CMatrix::Zero(z.rows(), z.cols());
    sol.u = ToeplitzSpec(CVector::Zero(z.rows()));
    sol.W = CMatrix::Zero(z.cols(), z.cols());
    sol.state.X = sol.X;
    sol.state.u = sol.u.u();
    sol.state.W = sol.W;
    sol.state.Lambda = CMatrix::Zero(z.rows() + z.cols(), z.rows() + z.cols());
    sol.state.Y = sol.state.Lambda;
    sol.report.converged = true;
    return sol;
  }
  sol = run_admm_reduced(z / s, weight, DataTerm::Equality, 1.0, opts);
  rescale(sol, s);
  // Lambda of the homogeneous program does not scale with the data.
  sol.state.Lambda /= s;
  // Undo rounding from the rescale and the row-space reduction.
  sol.X = (weight > 0.0).select(z, sol.X);
  sol.state.X = sol.X;

  sol.report.objective = lifted_trace(sol);
  sol.report.atomic_norm_estimate = std::max(0.0, sol.report.objective);
  const Eigen::Index n = z.rows();
  const Eigen::Index L = z.cols();
  CMatrix ydual = -2.0 * sol.state.Lambda.topRightCorner(n, L);
  ydual = mask_project(ydual, mask);
  const double dn = dual_norm(ydual);
  const double dual_value = dn > 0.0 ? real_inner(ydual, z) / std::max(1.0, dn) : 0.0;
  const double primal = sol.report.objective;
  sol.report.duality_gap = primal > 0.0 ? std::abs(primal - dual_value) / primal : 0.0;
  return sol;
}

double atomic_norm_upper_bound(const CMatrix& x, const CVector& u) {
  const Eigen::Index n = x.rows();
  if (u.size() != n) throw DomainError("atomic_norm_upper_bound: size mismatch");
  if (x.squaredNorm() == 0.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(toeplitz_embed(u));
  const RVector ev = es.eigenvalues();
  const RVector p2 = (es.eigenvectors().adjoint() * x).rowwise().squaredNorm();
  // For any shift d making T + dI positive definite, W = X^* (T + dI)^-1 X
  // gives a PSD block matrix (Schur complement), and rescaling (tT, W/t)
  // balances the two traces: the objective is sqrt(Tr T * Tr W).
  const auto bound = [&](double d) {
    double tr_w = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) tr_w += p2(i) / (ev(i) + d);
    return std::sqrt((ev.sum() + static_cast<double>(n) * d) * tr_w);
  };
  const double top = std::max({std::abs(ev(n - 1)), std::abs(ev(0)), x.norm()});
  const double d_min = std::max(0.0, -ev(0)) + 1e-14 * top;
  // Log-spaced scan, then golden-section refinement in log d.
  const double lo = std::log(d_min);
  const double hi = std::log(d_min + 10.0 * top);
  constexpr int kScan = 80;
  int best = 0;
  double best_val = bound(d_min);
  for (int k = 1; k <= kScan; ++k) {
    const double val = bound(std::exp(lo + (hi - lo) * k / kScan));
    if (val < best_val) {
      best_val = val;
      best = k;
    }
  }
  double a = lo + (hi - lo) * std::max(best - 1, 0) / kScan;
  double b = lo + (hi - lo) * std::min(best + 1, kScan) / kScan;
  constexpr double kInvGolden = 0.6180339887498949;
  for (int it = 0; it < 60; ++it) {
    const double c = b - kInvGolden * (b - a);
    const double d = a + kInvGolden * (b - a);
    if (bound(std::exp(c)) <= bound(std::exp(d))) {
      b = d;
    } else {
      a = c;
    }
  }
  return std::min(best_val, bound(std::exp(0.5 * (a + b))));
}

AtomicNormBound atomic_norm(const CMatrix& x, const AdmmOptions& opts) {
  if (x.size() == 0) throw DomainError("atomic_norm: empty matrix");
  AtomicNormBound out;
  if (x.squaredNorm() == 0.0) {
    out.report.converged = true;
    return out;
  }
  const ObservationMask full = ObservationMask::full(x.rows(), x.cols());
  const AtomicSolution sol = admm_complete(x, full, opts);
  out.report = sol.report;
  const CMatrix ydual = -2.0 * sol.state.Lambda.topRightCorner(x.rows(), x.cols());
  const double dn = dual_norm(ydual);
  out.lower = dn > 0.0 ? std::max(0.0, real_inner(ydual, x) / dn) : 0.0;
  out.upper = atomic_norm_upper_bound(x, sol.u.u());
  out.value = 0.5 * (out.lower + out.upper);
  out.relative_gap = out.upper > 0.0 ? (out.upper - out.lower) / out.upper : 0.0;
  return out;
}

double dual_norm(const CMatrix& y, Eigen::Index grid_size) {
  const Eigen::Index n = y.rows();
  if (n < 1) throw DomainError("dual_norm: empty matrix");
  if (grid_size == 0) grid_size = default_dual_grid(n);
  if (grid_size < 4 * n) throw DomainError("dual_norm: grid_size must be at least 4n");
  if (y.squaredNorm() == 0.0) return 0.0;
  // The FFT path needs >= 8n samples; oversample small requests.
  const Eigen::Index g = std::max(grid_size, 8 * n);
  const DualPolynomial q(y, g);
  const auto& norms = q.curve().norms;
  const auto gs = static_cast<std::ptrdiff_t>(norms.size());
  const double step = 1.0 / static_cast<double>(gs);
  double best_sq = 0.0;
  for (double v : norms) best_sq = std::max(best_sq, v * v);
  for (std::ptrdiff_t k = 0; k < gs; ++k) {
    const double v = norms[static_cast<std::size_t>(k)];
    if (v < norms[static_cast<std::size_t>((k - 1 + gs) % gs)] || v < norms[static_cast<std::size_t>((k + 1) % gs)])
      continue;
    const double fk = static_cast<double>(k) * step;
    const double f = q.refine_peak(fk - step, fk + step, 20);
    best_sq = std::max(best_sq, q.norm_sq(f));
  }
  return std::sqrt(best_sq);
}

CMatrix extract_dual(const SignalEnsemble& z, const CMatrix& x_hat, double tau, double tol) {
  if (!(tau > 0.0)) throw DomainError("extract_dual: tau must be positive");
  if (z.rows() != x_hat.rows() || z.cols() != x_hat.cols()) throw DomainError("extract_dual: shape mismatch");
  CMatrix y = (z - x_hat) / tau;
  if (y.squaredNorm() == 0.0) return y;
  const double dn = dual_norm(y);
  if (dn > 1.0 + tol) throw CertificateFailure("extract_dual: dual norm " + std::to_string(dn) + " exceeds 1");
  return y;
}

CMatrix extract_dual(const AtomicSolution& sol, const ObservationMask& mask, double tol, double off_mask_tol) {
  const Eigen::Index n = sol.X.rows();
  const Eigen::Index L = sol.X.cols();
  if (mask.rows() != n || mask.cols() != L) throw DomainError("extract_dual: mask shape mismatch");
  const CMatrix raw = -2.0 * sol.state.Lambda.topRightCorner(n, L);
  double off = 0.0;
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!mask.observed(i, l)) off = std::max(off, std::abs(raw(i, l)));
  if (off > off_mask_tol) throw CertificateFailure("extract_dual: multiplier does not vanish off the mask");
  CMatrix y = mask_project(raw, mask);
  const double dn = dual_norm(y);
  if (dn > 1.0 + tol) throw CertificateFailure("extract_dual: dual norm " + std::to_string(dn) + " exceeds 1");
  return y;
}

DenoiseGap denoise_duality_gap(const SignalEnsemble& z, const CMatrix& x_hat, const CVector& u_hat,
                               const CMatrix& y, double tau) {
  DenoiseGap out{};
  // Primal value at X with a certified upper bound on ||X||_A.
  const double norm_ub = atomic_norm_upper_bound(x_hat, u_hat);
  out.primal = 0.5 * (x_hat - z).squaredNorm() + tau * norm_ub;
  const double dn = dual_norm(y);
  const CMatrix yf = dn > 1.0 ? CMatrix(y / dn) : y;
  out.dual = 0.5 * z.squaredNorm() - 0.5 * (z - tau * yf).squaredNorm();
  out.relative_gap = out.primal > 0.0 ? std::abs(out.primal - out.dual) / out.primal : 0.0;
  return out;
}

}  // namespace gridless
