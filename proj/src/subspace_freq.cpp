#include "gridless/subspace_freq.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include <unsupported/Eigen/FFT>

namespace gridless {

namespace {

void check_order(const ToeplitzSpec& u, Eigen::Index r) {
  if (r < 1 || r >= u.n()) throw DomainError("subspace: model order must satisfy 1 <= r < n");
}

/// Lag sums c_d = sum_{q-p=d} M(p,q) for d = 0..n-1 of M = E E^*.
CVector noise_lag_sums(const CMatrix& noise) {
  const CMatrix proj = noise * noise.adjoint();
  return diag_sum(proj);
}

/// g(f) = a(f)^* M a(f) and its first two derivatives.
struct NoiseForm {
  double g, dg, d2g;
};

NoiseForm noise_form(const CVector& c, double f) {
  const auto n = static_cast<double>(c.size());
  double g = c(0).real();
  double dg = 0.0;
  double d2g = 0.0;
  for (Eigen::Index d = 1; d < c.size(); ++d) {
    const double w = kTwoPi * static_cast<double>(d);
    const cplx t = c(d) * std::polar(1.0, w * f);
    g += 2.0 * t.real();
    dg += 2.0 * (t * cplx(0.0, w)).real();
    d2g -= 2.0 * w * w * t.real();
  }
  return {g / n, dg / n, d2g / n};
}

double polish(const CVector& c, double f, double max_step) {
  NoiseForm cur = noise_form(c, f);
  const double start = f;
  for (int it = 0; it < 30; ++it) {
    if (!(cur.d2g > 0.0)) break;
    const double step = -cur.dg / cur.d2g;
    const double cand = f + step;
    if (std::abs(cand - start) > max_step) break;
    const NoiseForm next = noise_form(c, cand);
    // g lies in [0,1]; near the minimum it only changes at rounding level.
    if (next.g > cur.g + 1e-13) break;
    f = cand;
    cur = next;
    if (std::abs(step) < 1e-15) break;
  }
  return wrap_unit(f);
}

CVector polynomial_roots(const CVector& c) {
  // Coefficient of z^k is c_{k-(n-1)}, with c_{-d} = conj(c_d).
  const Eigen::Index n = c.size();
  const Eigen::Index deg = 2 * (n - 1);
  CVector coef(deg + 1);
  for (Eigen::Index k = 0; k <= deg; ++k) {
    const Eigen::Index d = k - (n - 1);
    coef(k) = d >= 0 ? c(d) : std::conj(c(-d));
  }
  const double big = coef.cwiseAbs().maxCoeff();
  const double cut = 1e-14 * big;
  Eigen::Index hi = deg;
  while (hi > 0 && std::abs(coef(hi)) <= cut) --hi;
  Eigen::Index lo = 0;
  while (lo < hi && std::abs(coef(lo)) <= cut) ++lo;
  const Eigen::Index m = hi - lo;
  if (m < 1) return CVector(0);
  CMatrix comp = CMatrix::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k) comp(0, k) = -coef(hi - 1 - k) / coef(hi);
  for (Eigen::Index k = 1; k < m; ++k) comp(k, k - 1) = 1.0;
  Eigen::ComplexEigenSolver<CMatrix> es(comp, false);
  if (es.info() != Eigen::Success) throw DomainError("root_music: polynomial rooting failed");
  return es.eigenvalues();
}

}  // namespace

SubspaceSplit subspace_split(const ToeplitzSpec& u, Eigen::Index r) {
  check_order(u, r);
  const Eigen::Index n = u.n();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(toeplitz_embed(u));
  if (es.info() != Eigen::Success) throw DomainError("subspace_split: eigensolver failed");
  SubspaceSplit out;
  out.eigenvalues = es.eigenvalues();
  double neg = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (out.eigenvalues(k) < 0.0) {
      neg += out.eigenvalues(k) * out.eigenvalues(k);
      out.eigenvalues(k) = 0.0;
    }
  }
  out.projection_distance = std::sqrt(neg);
  out.signal_basis = es.eigenvectors().rightCols(r);
  out.noise_basis = es.eigenvectors().leftCols(n - r);
  out.eigen_gap = out.eigenvalues(n - r) - out.eigenvalues(n - r - 1);
  return out;
}

FrequencySet root_music(const ToeplitzSpec& u, Eigen::Index r) { return root_music(u, r, nullptr); }

FrequencySet root_music(const ToeplitzSpec& u, Eigen::Index r, SubspaceSplit* split_out) {
  SubspaceSplit split = subspace_split(u, r);
  const Eigen::Index n = u.n();
  const CVector c = noise_lag_sums(split.noise_basis);
  const CVector roots = polynomial_roots(c);

  struct Candidate {
    double inside_modulus;
    double modulus;
    double freq;
  };
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(roots.size()));
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    const double rho = std::abs(roots(k));
    if (rho == 0.0 || !std::isfinite(rho)) continue;
    cands.push_back({std::min(rho, 1.0 / rho), rho, wrap_unit(std::arg(roots(k)) / kTwoPi)});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.inside_modulus != b.inside_modulus) return a.inside_modulus > b.inside_modulus;
    return a.modulus > b.modulus;
  });

  // z and 1/conj(z) share an angle; keep one member of each pair.
  const double same_angle = 1e-4 / static_cast<double>(n);
  std::vector<double> picked;
  for (const Candidate& cnd : cands) {
    if (static_cast<Eigen::Index>(picked.size()) == r) break;
    bool dup = false;
    for (double f : picked) dup = dup || wrap_distance(f, cnd.freq) < same_angle;
    if (!dup) picked.push_back(cnd.freq);
  }
  if (static_cast<Eigen::Index>(picked.size()) < r) throw DomainError("root_music: too few distinct roots");

  const double max_step = 0.25 / static_cast<double>(n);
  // Two estimates may polish onto the same minimum; the later one then keeps
  // its unpolished angle.
  std::vector<double> out;
  for (double f : picked) {
    const double pf = polish(c, f, max_step);
    bool clash = false;
    for (double g : out) clash = clash || wrap_distance(g, pf) < same_angle;
    out.push_back(clash ? f : pf);
  }
  if (split_out) *split_out = std::move(split);
  return FrequencySet(out);
}

DualCurve music_pseudospectrum(const ToeplitzSpec& u, Eigen::Index r, Eigen::Index grid_size) {
  const SubspaceSplit split = subspace_split(u, r);
  const Eigen::Index n = u.n();
  if (grid_size < n) throw DomainError("music_pseudospectrum: grid must have at least n points");
  const CVector c = noise_lag_sums(split.noise_basis);
  std::vector<cplx> h(static_cast<std::size_t>(grid_size), cplx(0.0, 0.0));
  // g(f) = (1/n) (c_0 + 2 Re sum_{d>0} c_d e^{j 2 pi f d}); lags beyond the
  // grid length fold onto it, which matches sampling the trigonometric sum.
  for (Eigen::Index d = 0; d < n; ++d)
    h[static_cast<std::size_t>(d % grid_size)] += d == 0 ? c(0) : 2.0 * c(d);
  Eigen::FFT<double> fft;
  std::vector<cplx> g;
  fft.inv(g, h);
  DualCurve out;
  out.freqs.resize(static_cast<std::size_t>(grid_size));
  out.norms.resize(static_cast<std::size_t>(grid_size));
  const double scale = static_cast<double>(grid_size) / static_cast<double>(n);
  const double floor = std::numeric_limits<double>::min();
  for (Eigen::Index k = 0; k < grid_size; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out.freqs[i] = static_cast<double>(k) / static_cast<double>(grid_size);
    out.norms[i] = 1.0 / std::max(g[i].real() * scale, floor);
  }
  return out;
}

Eigen::Index estimate_model_order(const ToeplitzSpec& u, double gap_ratio) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(toeplitz_embed(u), Eigen::EigenvaluesOnly);
  const RVector& ev = es.eigenvalues();
  const double top = ev(ev.size() - 1);
  if (top <= 0.0) return 0;
  return static_cast<Eigen::Index>((ev.array() > gap_ratio * top).count());
}

RVector nnls(const RMatrix& a, const RVector& b, int max_iters) {
  const Eigen::Index p = a.cols();
  if (a.rows() != b.size()) throw DomainError("nnls: dimension mismatch");
  if (max_iters <= 0) max_iters = static_cast<int>(30 * p + 30);
  RVector x = RVector::Zero(p);
  std::vector<bool> passive(static_cast<std::size_t>(p), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.norm() * std::max<double>(a.rows(), a.cols());

  auto solve_passive = [&](RVector& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < p; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    z = RVector::Zero(p);
    if (idx.empty()) return;
    RMatrix sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const RVector zs = sub.colPivHouseholderQr().solve(b);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zs(static_cast<Eigen::Index>(k));
  };

  int it = 0;
  for (;;) {
    const RVector w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0 || it >= max_iters) break;
    passive[static_cast<std::size_t>(best)] = true;
    RVector z;
    for (;;) {
      ++it;
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < p; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      if (feasible) break;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < p; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < p; ++j) {
        if (passive[static_cast<std::size_t>(j)] && std::abs(x(j)) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
      if (it >= max_iters) break;
    }
    x = z;
    for (Eigen::Index j = 0; j < p; ++j)
      if (!passive[static_cast<std::size_t>(j)]) x(j) = 0.0;
  }
  return x;
}

RVector fit_powers(const ToeplitzSpec& u, const FrequencySet& freqs) {
  const Eigen::Index n = u.n();
  const auto r = static_cast<Eigen::Index>(freqs.size());
  RMatrix a(2 * n, r);
  RVector b(2 * n);
  for (Eigen::Index d = 0; d < n; ++d) {
    b(2 * d) = u[d].real();
    b(2 * d + 1) = u[d].imag();
    for (Eigen::Index k = 0; k < r; ++k) {
      const double f = freqs[static_cast<std::size_t>(k)];
      const cplx v = std::polar(1.0 / static_cast<double>(n), -kTwoPi * f * static_cast<double>(d));
      a(2 * d, k) = v.real();
      a(2 * d + 1, k) = v.imag();
    }
  }
  return nnls(a, b);
}

std::vector<SpectralComponent> vandermonde_decompose(const ToeplitzSpec& u, double tol) {
  if (!(tol > 0.0)) throw DomainError("vandermonde_decompose: tol must be positive");
  const Eigen::Index n = u.n();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(toeplitz_embed(u), Eigen::EigenvaluesOnly);
  const RVector& ev = es.eigenvalues();
  const double top = ev(n - 1);
  if (top <= 0.0) {
    if (ev(0) < -tol * std::abs(ev(0))) throw DomainError("vandermonde_decompose: T(u) is not PSD");
    return {};
  }
  if (ev(0) < -tol * top) throw DomainError("vandermonde_decompose: T(u) is not PSD");
  const auto rank = static_cast<Eigen::Index>((ev.array() > tol * top).count());
  if (rank >= n) throw FullRankError("vandermonde_decompose: numerical rank equals n");

  const FrequencySet freqs = root_music(u, rank);
  const auto r = static_cast<Eigen::Index>(freqs.size());
  const RVector p = fit_powers(u, freqs);
  std::vector<SpectralComponent> out;
  for (Eigen::Index k = 0; k < r; ++k)
    if (p(k) > 0.0) out.push_back({freqs[static_cast<std::size_t>(k)], p(k)});
  return out;
}

void write_pseudospectrum_csv(std::ostream& os, const DualCurve& curve) { write_curve_csv(os, curve, "pseudospectrum"); }

}  // namespace gridless
