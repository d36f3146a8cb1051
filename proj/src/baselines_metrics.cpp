#include "gridless/baselines_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace gridless {

void CrbInput::validate() const {
  if (freqs.size() != 2) throw DomainError("CrbInput: exactly two frequencies are required");
  if (!(sigma > 0.0)) throw DomainError("CrbInput: sigma must be positive");
  if (n < 1) throw DomainError("CrbInput: n must be positive");
  if (coeffs.rows() != 2 || coeffs.cols() < 1) throw DomainError("CrbInput: coefficients must be 2 x L");
}

RMatrix fisher_information(const CrbInput& inp) {
  inp.validate();
  double s0 = 0.0;
  cplx s12(0.0, 0.0);
  const double df = inp.freqs[0] - inp.freqs[1];
  for (Eigen::Index i = 0; i < inp.n; ++i) {
    const double i2 = static_cast<double>(i) * static_cast<double>(i);
    s0 += i2;
    s12 += i2 * std::polar(1.0, kTwoPi * df * static_cast<double>(i));
  }
  RMatrix j = RMatrix::Zero(2, 2);
  for (Eigen::Index l = 0; l < inp.coeffs.cols(); ++l) {
    const cplx c1 = inp.coeffs(0, l);
    const cplx c2 = inp.coeffs(1, l);
    j(0, 0) += std::norm(c1) * s0;
    j(1, 1) += std::norm(c2) * s0;
    const double off = (c1 * std::conj(c2) * s12).real();
    j(0, 1) += off;
    j(1, 0) += off;
  }
  const double pi = std::numbers::pi;
  return j * (8.0 * pi * pi / (static_cast<double>(inp.n) * inp.sigma * inp.sigma));
}

RMatrix fisher_crb(const CrbInput& inp) {
  const RMatrix j = fisher_information(inp);
  const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
  const double scale = std::abs(j(0, 0) * j(1, 1));
  if (!(det > 1e-12 * scale) || scale == 0.0) throw SingularityError("fisher_crb: Fisher information is singular");
  RMatrix inv(2, 2);
  inv << j(1, 1), -j(0, 1), -j(1, 0), j(0, 0);
  return inv / det;
}

namespace {

class DftFrame {
 public:
  DftFrame(Eigen::Index n, Eigen::Index k) : n_(n), k_(k), buf_(static_cast<std::size_t>(k)) {}

  /// (Phi G)(i, l) = n^{-1/2} sum_k G(k, l) exp(j 2 pi k i / K).
  CMatrix apply(const CMatrix& g) {
    CMatrix out(n_, g.cols());
    const double s = static_cast<double>(k_) / std::sqrt(static_cast<double>(n_));
    for (Eigen::Index l = 0; l < g.cols(); ++l) {
      for (Eigen::Index k = 0; k < k_; ++k) buf_[static_cast<std::size_t>(k)] = g(k, l);
      fft_.inv(tmp_, buf_);
      for (Eigen::Index i = 0; i < n_; ++i) out(i, l) = s * tmp_[static_cast<std::size_t>(i)];
    }
    return out;
  }

  /// (Phi^* R)(k, l) = n^{-1/2} sum_i R(i, l) exp(-j 2 pi k i / K).
  CMatrix adjoint(const CMatrix& r) {
    CMatrix out(k_, r.cols());
    const double s = 1.0 / std::sqrt(static_cast<double>(n_));
    for (Eigen::Index l = 0; l < r.cols(); ++l) {
      std::fill(buf_.begin(), buf_.end(), cplx(0.0, 0.0));
      for (Eigen::Index i = 0; i < n_; ++i) buf_[static_cast<std::size_t>(i)] = r(i, l);
      fft_.fwd(tmp_, buf_);
      for (Eigen::Index k = 0; k < k_; ++k) out(k, l) = s * tmp_[static_cast<std::size_t>(k)];
    }
    return out;
  }

 private:
  Eigen::Index n_;
  Eigen::Index k_;
  std::vector<cplx> buf_;
  std::vector<cplx> tmp_;
  Eigen::FFT<double> fft_;
};

CMatrix group_shrink(const CMatrix& v, double thresh) {
  CMatrix out = v;
  for (Eigen::Index k = 0; k < v.rows(); ++k) {
    const double nr = v.row(k).norm();
    if (nr <= thresh) {
      out.row(k).setZero();
    } else {
      out.row(k) *= (1.0 - thresh / nr);
    }
  }
  return out;
}

}  // namespace

RVector group_row_norms(const CMatrix& g) { return g.rowwise().norm(); }

GroupLassoResult group_lasso_dft(const SignalEnsemble& z_obs, const ObservationMask& mask, int oversampling, double mu,
                                 const GroupLassoOptions& opts) {
  if (oversampling < 1) throw DomainError("group_lasso_dft: oversampling must be at least 1");
  if (!(mu > 0.0)) throw DomainError("group_lasso_dft: mu must be positive");
  if (z_obs.rows() != mask.rows() || z_obs.cols() != mask.cols())
    throw DomainError("group_lasso_dft: data and mask shapes differ");
  const Eigen::Index n = z_obs.rows();
  const Eigen::Index L = z_obs.cols();
  const Eigen::Index kk = static_cast<Eigen::Index>(oversampling) * n;
  DftFrame frame(n, kk);
  const CMatrix z = mask_project(z_obs, mask);
  const double lip = static_cast<double>(kk) / static_cast<double>(n);
  const double step = 1.0 / lip;

  auto objective = [&](const CMatrix& g, const CMatrix& resid) {
    return 0.5 * resid.squaredNorm() + mu * group_row_norms(g).sum();
  };

  GroupLassoResult res;
  res.grid_size = kk;
  CMatrix x = CMatrix::Zero(kk, L);
  CMatrix y = x;
  double fx = objective(x, z);
  double t = 1.0;
  if (opts.keep_history) res.objective_history.push_back(fx);
  int it = 0;
  while (it < opts.max_iters) {
    ++it;
    const CMatrix ry = mask_project(frame.apply(y), mask) - z;
    const CMatrix zk = group_shrink(y - step * frame.adjoint(ry), mu * step);
    const CMatrix rz = mask_project(frame.apply(zk), mask) - z;
    const double fz = objective(zk, rz);
    const CMatrix x_prev = x;
    const double f_prev = fx;
    if (fz <= fx) {
      x = zk;
      fx = fz;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x + (t / t_next) * (zk - x) + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
    if (opts.keep_history) res.objective_history.push_back(fx);
    if (fz <= f_prev && std::abs(f_prev - fx) <= opts.rel_tol * std::max(fx, 1e-300)) {
      res.converged = true;
      break;
    }
  }
  res.G = std::move(x);
  res.objective = fx;
  res.iterations = it;
  return res;
}

double group_lasso_mu_max(const SignalEnsemble& z_obs, const ObservationMask& mask, int oversampling) {
  if (oversampling < 1) throw DomainError("group_lasso_mu_max: oversampling must be at least 1");
  const Eigen::Index n = z_obs.rows();
  DftFrame frame(n, static_cast<Eigen::Index>(oversampling) * n);
  return group_row_norms(frame.adjoint(mask_project(z_obs, mask))).maxCoeff();
}

FrequencySet grid_peak_frequencies(const CMatrix& g, Eigen::Index r) {
  const RVector norms = group_row_norms(g);
  const Eigen::Index k = norms.size();
  std::vector<Eigen::Index> peaks;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double prev = norms((i + k - 1) % k);
    const double next = norms((i + 1) % k);
    if (norms(i) > 0.0 && norms(i) >= prev && norms(i) > next) peaks.push_back(i);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b); });
  if (static_cast<Eigen::Index>(peaks.size()) > r) peaks.resize(static_cast<std::size_t>(r));
  std::vector<double> f;
  for (Eigen::Index i : peaks) f.push_back(static_cast<double>(i) / static_cast<double>(k));
  return FrequencySet(f);
}

double normalized_error(const CMatrix& x_hat, const CMatrix& x_star) {
  if (x_hat.rows() != x_star.rows() || x_hat.cols() != x_star.cols())
    throw DomainError("normalized_error: shape mismatch");
  const double ref = x_star.norm();
  if (ref == 0.0) throw DomainError("normalized_error: reference is zero");
  return (x_hat - x_star).norm() / ref;
}

double per_vector_mse(const CMatrix& x_hat, const CMatrix& x_star) {
  if (x_hat.rows() != x_star.rows() || x_hat.cols() != x_star.cols())
    throw DomainError("per_vector_mse: shape mismatch");
  if (x_star.cols() == 0) throw DomainError("per_vector_mse: no columns");
  return (x_hat - x_star).squaredNorm() / static_cast<double>(x_star.cols());
}

std::vector<std::size_t> hungarian(const RMatrix& cost) {
  // Shortest augmenting path with potentials, 1-based internally.
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  if (n > m) throw DomainError("hungarian: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) assign[p[j] - 1] = j - 1;
  return assign;
}

FrequencyScore freq_mse(const FrequencySet& est, const FrequencySet& truth) {
  FrequencyScore s;
  if (est.size() != truth.size()) {
    s.cardinality_match = false;
    s.mse = std::numeric_limits<double>::infinity();
    s.max_error = std::numeric_limits<double>::infinity();
    s.success = false;
    return s;
  }
  const std::size_t r = truth.size();
  if (r == 0) {
    s.success = true;
    return s;
  }
  RMatrix cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
  for (std::size_t a = 0; a < r; ++a) {
    for (std::size_t b = 0; b < r; ++b) {
      const double d = wrap_distance(truth[a], est[b]);
      cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d * d;
    }
  }
  s.matching = hungarian(cost);
  double sum = 0.0;
  for (std::size_t a = 0; a < r; ++a) {
    const double d = wrap_distance(truth[a], est[s.matching[a]]);
    sum += d * d;
    s.max_error = std::max(s.max_error, d);
  }
  s.mse = sum / static_cast<double>(r);
  s.success = s.mse <= kSuccessThreshold;
  return s;
}

}  // namespace gridless
