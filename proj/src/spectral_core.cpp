#include "gridless/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridless {

FrequencySet::FrequencySet(std::vector<double> freqs) : freqs_(std::move(freqs)) {
  for (double f : freqs_) {
    if (!(f >= 0.0 && f < 1.0)) throw DomainError("FrequencySet: frequency outside [0,1)");
  }
  std::sort(freqs_.begin(), freqs_.end());
  for (std::size_t k = 0; k < freqs_.size(); ++k) {
    const std::size_t next = (k + 1) % freqs_.size();
    if (next == k) break;
    if (wrap_distance(freqs_[k], freqs_[next]) <= kDuplicateTol)
      throw DomainError("FrequencySet: duplicate frequency");
  }
}

// ---------------------------------------------------------------------------

ObservationMask ObservationMask::full(Eigen::Index n, Eigen::Index L) {
  if (n < 1 || L < 1) throw DomainError("ObservationMask: empty shape");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return {Kind::Full, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, L, true), std::move(rows)};
}

ObservationMask ObservationMask::common_rows(Eigen::Index n, Eigen::Index L, std::vector<Eigen::Index> rows) {
  if (n < 1 || L < 1) throw DomainError("ObservationMask: empty shape");
  if (static_cast<Eigen::Index>(rows.size()) > n) throw DomainError("ObservationMask: more rows than n");
  std::sort(rows.begin(), rows.end());
  if (std::adjacent_find(rows.begin(), rows.end()) != rows.end())
    throw DomainError("ObservationMask: duplicate row index");
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> obs = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, L, false);
  for (Eigen::Index i : rows) {
    if (i < 0 || i >= n) throw DomainError("ObservationMask: row index out of range");
    obs.row(i).setConstant(true);
  }
  return {Kind::CommonRows, std::move(obs), std::move(rows)};
}

ObservationMask ObservationMask::entrywise(Eigen::Index n, Eigen::Index L,
                                           std::span<const std::pair<Eigen::Index, Eigen::Index>> entries) {
  if (n < 1 || L < 1) throw DomainError("ObservationMask: empty shape");
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> obs = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, L, false);
  for (auto [i, l] : entries) {
    if (i < 0 || i >= n || l < 0 || l >= L) throw DomainError("ObservationMask: entry out of range");
    if (obs(i, l)) throw DomainError("ObservationMask: duplicate entry");
    obs(i, l) = true;
  }
  return {Kind::Entrywise, std::move(obs), {}};
}

namespace {

std::vector<Eigen::Index> draw_rows(Eigen::Index n, Eigen::Index m, CounterRng& rng) {
  // Partial Fisher-Yates.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto j = k + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(perm[k], perm[j]);
  }
  perm.resize(static_cast<std::size_t>(m));
  std::sort(perm.begin(), perm.end());
  return perm;
}

}  // namespace

ObservationMask ObservationMask::random_common_rows(Eigen::Index n, Eigen::Index L, Eigen::Index m,
                                                    CounterRng& rng) {
  if (m < 0 || m > n) throw DomainError("ObservationMask: m must lie in [0, n]");
  return common_rows(n, L, draw_rows(n, m, rng));
}

ObservationMask ObservationMask::random_per_column(Eigen::Index n, Eigen::Index L, Eigen::Index m,
                                                   CounterRng& rng) {
  if (m < 0 || m > n) throw DomainError("ObservationMask: m must lie in [0, n]");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;
  entries.reserve(static_cast<std::size_t>(m * L));
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index i : draw_rows(n, m, rng)) entries.emplace_back(i, l);
  return entrywise(n, L, entries);
}

const char* to_string(ObservationMask::Kind kind) {
  switch (kind) {
    case ObservationMask::Kind::Full: return "full";
    case ObservationMask::Kind::Entrywise: return "entrywise";
    case ObservationMask::Kind::CommonRows: return "common-rows";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

ToeplitzSpec::ToeplitzSpec(CVector u, double psd_tol) : u_(std::move(u)), psd_tol_(psd_tol) {
  if (u_.size() < 1) throw DomainError("ToeplitzSpec: empty vector");
  if (psd_tol_ < 0.0) throw DomainError("ToeplitzSpec: negative psd_tol");
  if (!u_.allFinite()) throw DomainError("ToeplitzSpec: non-finite entry");
  const double scale = std::max(1.0, u_.cwiseAbs().maxCoeff());
  if (std::abs(u_(0).imag()) > 1e-12 * scale) throw DomainError("ToeplitzSpec: u[0] must be real");
  u_(0) = u_(0).real();
}

double ToeplitzSpec::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(toeplitz_embed(u_), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

CVector atom(double f, Eigen::Index n) {
  if (!(f >= 0.0 && f < 1.0)) throw DomainError("atom: frequency outside [0,1)");
  if (n < 1) throw DomainError("atom: n must be positive");
  CVector a(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) a(i) = std::polar(scale, kTwoPi * f * static_cast<double>(i));
  return a;
}

CMatrix steering_matrix(const FrequencySet& freqs, Eigen::Index n) {
  CMatrix v(n, static_cast<Eigen::Index>(freqs.size()));
  for (std::size_t k = 0; k < freqs.size(); ++k) v.col(static_cast<Eigen::Index>(k)) = atom(freqs[k], n);
  return v;
}

SignalEnsemble synthesize(const FrequencySet& freqs, const CoefficientMatrix& coeffs, Eigen::Index n) {
  if (n < 1) throw DomainError("synthesize: n must be positive");
  if (coeffs.rows() != static_cast<Eigen::Index>(freqs.size()))
    throw DomainError("synthesize: coefficient rows do not match frequency count");
  if (coeffs.cols() < 1) throw DomainError("synthesize: need at least one measurement vector");
  if (freqs.empty()) return CMatrix::Zero(n, coeffs.cols());
  return steering_matrix(freqs, n) * coeffs;
}

CMatrix toeplitz_embed(const CVector& u) {
  const Eigen::Index n = u.size();
  CMatrix t(n, n);
  for (Eigen::Index q = 0; q < n; ++q) {
    for (Eigen::Index p = 0; p <= q; ++p) t(p, q) = u(q - p);
    for (Eigen::Index p = q + 1; p < n; ++p) t(p, q) = std::conj(u(p - q));
  }
  // Hermitian diagonal regardless of stray imaginary parts in raw vectors.
  for (Eigen::Index i = 0; i < n; ++i) t(i, i) = u(0).real();
  return t;
}

CMatrix toeplitz_embed(const ToeplitzSpec& u) { return toeplitz_embed(u.u()); }

CVector diag_sum(const CMatrix& a) {
  if (a.rows() != a.cols()) throw DomainError("diag_sum: matrix must be square");
  const Eigen::Index n = a.rows();
  CVector g = CVector::Zero(n);
  for (Eigen::Index q = 0; q < n; ++q)
    for (Eigen::Index p = 0; p <= q; ++p) g(q - p) += a(p, q);
  return g;
}

RVector upsilon_weights(Eigen::Index n) {
  if (n < 1) throw DomainError("upsilon_weights: n must be positive");
  RVector w(n);
  for (Eigen::Index d = 0; d < n; ++d) w(d) = 1.0 / static_cast<double>(n - d);
  return w;
}

CVector toeplitz_adjoint(const CMatrix& a) {
  if (a.rows() != a.cols()) throw DomainError("toeplitz_adjoint: matrix must be square");
  // Upper diagonals pair with conj(u_d); lower diagonals hold conj(u_d) and
  // pair with u_d, which contributes conj(sub-diagonal sum).
  CVector g = diag_sum(a) + diag_sum(a.adjoint());
  g(0) = a.diagonal().sum().real();
  return g;
}

RVector toeplitz_gram_weights(Eigen::Index n) {
  RVector w(n);
  w(0) = static_cast<double>(n);
  for (Eigen::Index d = 1; d < n; ++d) w(d) = 2.0 * static_cast<double>(n - d);
  return w;
}

double min_separation(const FrequencySet& freqs) {
  if (freqs.size() < 2) throw DomainError("min_separation: need at least two frequencies");
  // Sorted order: neighbours (including the wrap from last to first) suffice.
  double best = 1.0;
  for (std::size_t k = 0; k < freqs.size(); ++k)
    best = std::min(best, wrap_distance(freqs[k], freqs[(k + 1) % freqs.size()]));
  return best;
}

bool is_complete_sparse_ruler(std::span<const Eigen::Index> omega, Eigen::Index n) {
  if (n < 1) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Eigen::Index p : omega) {
    if (p < 0 || p >= n) throw DomainError("is_complete_sparse_ruler: index out of range");
    for (Eigen::Index q : omega)
      if (q >= p) seen[static_cast<std::size_t>(q - p)] = true;
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

CoefficientMatrix sample_coefficients(Eigen::Index r, Eigen::Index L, std::span<const double> variances,
                                      CounterRng& rng) {
  if (static_cast<Eigen::Index>(variances.size()) != r)
    throw DomainError("sample_coefficients: variance count must equal r");
  if (L < 1) throw DomainError("sample_coefficients: L must be positive");
  for (double v : variances)
    if (!(v >= 0.0)) throw DomainError("sample_coefficients: negative variance");
  CoefficientMatrix c(r, L);
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index k = 0; k < r; ++k) c(k, l) = rng.complex_normal(variances[static_cast<std::size_t>(k)]);
  return c;
}

CoefficientMatrix sample_coefficients(Eigen::Index r, Eigen::Index L, std::span<const double> variances,
                                      std::uint64_t seed) {
  CounterRng rng(seed);
  return sample_coefficients(r, L, variances, rng);
}

FrequencySet random_frequencies(Eigen::Index r, double min_sep, CounterRng& rng) {
  if (r < 0) throw DomainError("random_frequencies: negative count");
  if (min_sep < 0.0 || static_cast<double>(r) * min_sep >= 1.0)
    throw DomainError("random_frequencies: separation infeasible for this many frequencies");
  constexpr int kMaxRestarts = 10000;
  for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
    std::vector<double> fs;
    int misses = 0;
    while (static_cast<Eigen::Index>(fs.size()) < r && misses < 1000) {
      const double cand = rng.uniform();
      const bool ok = std::all_of(fs.begin(), fs.end(), [&](double f) {
        const double d = wrap_distance(f, cand);
        return d >= min_sep && d > FrequencySet::kDuplicateTol;
      });
      if (ok) {
        fs.push_back(cand);
        misses = 0;
      } else {
        ++misses;
      }
    }
    if (static_cast<Eigen::Index>(fs.size()) == r) return FrequencySet(std::move(fs));
  }
  throw DomainError("random_frequencies: could not place frequencies with requested separation");
}

SignalEnsemble mask_project(const SignalEnsemble& x, const ObservationMask& mask) {
  if (x.rows() != mask.rows() || x.cols() != mask.cols()) throw DomainError("mask_project: shape mismatch");
  return mask.pattern().select(x, CMatrix::Zero(x.rows(), x.cols()));
}

CMatrix mask_rows(const CMatrix& x, const ObservationMask& mask) {
  if (x.rows() != mask.rows()) throw DomainError("mask_rows: shape mismatch");
  if (mask.kind() == ObservationMask::Kind::Entrywise) throw DomainError("mask_rows: needs a common row set");
  const auto& rows = mask.row_set();
  CMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  return out;
}

CMatrix principal_submatrix(const CMatrix& a, std::span<const Eigen::Index> rows) {
  if (a.rows() != a.cols()) throw DomainError("principal_submatrix: matrix must be square");
  const auto m = static_cast<Eigen::Index>(rows.size());
  CMatrix out(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index p = rows[static_cast<std::size_t>(i)];
      const Eigen::Index q = rows[static_cast<std::size_t>(j)];
      if (p < 0 || p >= a.rows() || q < 0 || q >= a.rows())
        throw DomainError("principal_submatrix: index out of range");
      out(i, j) = a(p, q);
    }
  }
  return out;
}

CMatrix mask_principal(const CMatrix& a, const ObservationMask& mask) {
  if (a.rows() != mask.rows()) throw DomainError("mask_principal: shape mismatch");
  if (mask.kind() == ObservationMask::Kind::Entrywise) throw DomainError("mask_principal: needs a common row set");
  return principal_submatrix(a, mask.row_set());
}

}  // namespace gridless
