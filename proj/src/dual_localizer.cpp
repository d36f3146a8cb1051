#include "gridless/dual_localizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include <unsupported/Eigen/FFT>

namespace gridless {

namespace {

constexpr double kInvGolden = 0.6180339887498949;

}  // namespace

DualCurve eval_dual_poly(const CMatrix& y, Eigen::Index grid_size) {
  const Eigen::Index n = y.rows();
  if (n < 1) throw DomainError("eval_dual_poly: empty dual matrix");
  if (grid_size < 8 * n) throw DomainError("eval_dual_poly: grid_size must be at least 8n");

  DualCurve curve;
  curve.freqs.resize(static_cast<std::size_t>(grid_size));
  curve.norms.assign(static_cast<std::size_t>(grid_size), 0.0);
  for (Eigen::Index k = 0; k < grid_size; ++k)
    curve.freqs[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(grid_size);

  // |Q_l(k/G)| = |FFT(y_l)_k| / sqrt(n): the forward transform carries
  // exp(-j2pi ik/G) and Q_l uses conj(y_il) exp(+j2pi ik/G).
  Eigen::FFT<double> fft;
  std::vector<cplx> padded(static_cast<std::size_t>(grid_size));
  std::vector<cplx> spectrum;
  std::vector<double> acc(static_cast<std::size_t>(grid_size), 0.0);
  for (Eigen::Index l = 0; l < y.cols(); ++l) {
    std::fill(padded.begin(), padded.end(), cplx{});
    for (Eigen::Index i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = y(i, l);
    fft.fwd(spectrum, padded);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += std::norm(spectrum[k]);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < acc.size(); ++k) curve.norms[k] = std::sqrt(acc[k] * inv_n);
  return curve;
}

DualPolynomial::DualPolynomial(CMatrix y, Eigen::Index grid_size) : y_(std::move(y)) {
  if (grid_size == 0) grid_size = 16 * y_.rows();
  curve_ = eval_dual_poly(y_, grid_size);
}

double DualPolynomial::grid_max() const {
  return curve_.norms.empty() ? 0.0 : *std::max_element(curve_.norms.begin(), curve_.norms.end());
}

CVector DualPolynomial::eval(double f) const {
  const Eigen::Index n = y_.rows();
  CVector a(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) a(i) = std::polar(scale, kTwoPi * f * static_cast<double>(i));
  return y_.adjoint() * a;
}

double DualPolynomial::norm_sq(double f) const { return eval(f).squaredNorm(); }

double DualPolynomial::norm_sq_derivative(double f) const {
  const Eigen::Index n = y_.rows();
  CVector a(n);
  CVector da(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i) = std::polar(scale, kTwoPi * f * static_cast<double>(i));
    da(i) = cplx(0.0, kTwoPi * static_cast<double>(i)) * a(i);
  }
  const CVector q = y_.adjoint() * a;
  const CVector dq = y_.adjoint() * da;
  return 2.0 * q.dot(dq).real();
}

double DualPolynomial::refine_peak(double lo, double hi, int iterations) const {
  double a = lo;
  double b = hi;
  double c = b - kInvGolden * (b - a);
  double d = a + kInvGolden * (b - a);
  double fc = norm_sq(c);
  double fd = norm_sq(d);
  for (int it = 0; it < iterations; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvGolden * (b - a);
      fc = norm_sq(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvGolden * (b - a);
      fd = norm_sq(d);
    }
  }
  return fc >= fd ? c : d;
}

FrequencySet locate_frequencies(const CMatrix& y, double eps, Eigen::Index grid_size,
                                std::vector<double>* peak_norms) {
  if (!(eps > 0.0 && eps < 0.5)) throw DomainError("locate_frequencies: eps must lie in (0, 0.5)");
  const Eigen::Index n = y.rows();
  if (grid_size == 0) grid_size = 16 * n;
  const DualPolynomial q(y, grid_size);
  const auto& norms = q.curve().norms;
  const auto g = static_cast<std::ptrdiff_t>(norms.size());
  const double step = 1.0 / static_cast<double>(g);

  struct Peak {
    double f;
    double norm;
  };
  std::vector<Peak> peaks;
  // The grid can undershoot a true peak; refine anything reasonably close.
  const double prefilter = 0.8 * (1.0 - eps);
  for (std::ptrdiff_t k = 0; k < g; ++k) {
    const double v = norms[static_cast<std::size_t>(k)];
    const double left = norms[static_cast<std::size_t>((k - 1 + g) % g)];
    const double right = norms[static_cast<std::size_t>((k + 1) % g)];
    if (v < prefilter || v < left || v < right) continue;
    // Plateaus: only the first sample of a run of equal values.
    if (v == left) continue;
    const double fk = static_cast<double>(k) * step;
    const double f = q.refine_peak(fk - step, fk + step, 40);
    const double val = std::sqrt(q.norm_sq(f));
    if (val >= 1.0 - eps) peaks.push_back({wrap_unit(f), val});
  }

  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.f < b.f; });
  // Merge near-duplicates, including across the 0/1 seam.
  const double merge_dist = 1.0 / (4.0 * static_cast<double>(n));
  std::vector<Peak> merged;
  for (const Peak& p : peaks) {
    if (!merged.empty() && wrap_distance(merged.back().f, p.f) < merge_dist) {
      if (p.norm > merged.back().norm) merged.back() = p;
    } else {
      merged.push_back(p);
    }
  }
  if (merged.size() > 1 && wrap_distance(merged.front().f, merged.back().f) < merge_dist) {
    if (merged.back().norm > merged.front().norm) merged.front() = merged.back();
    merged.pop_back();
  }
  std::sort(merged.begin(), merged.end(), [](const Peak& a, const Peak& b) { return a.f < b.f; });

  std::vector<double> fs;
  if (peak_norms) peak_norms->clear();
  for (const Peak& p : merged) {
    fs.push_back(p.f);
    if (peak_norms) peak_norms->push_back(p.norm);
  }
  return FrequencySet(std::move(fs));
}

CoefficientMatrix recover_amplitudes(const FrequencySet& freqs, const SignalEnsemble& z, const ObservationMask& mask) {
  if (z.rows() != mask.rows() || z.cols() != mask.cols()) throw DomainError("recover_amplitudes: shape mismatch");
  const auto r = static_cast<Eigen::Index>(freqs.size());
  CoefficientMatrix c = CoefficientMatrix::Zero(r, z.cols());
  if (r == 0) return c;
  const CMatrix v = steering_matrix(freqs, z.rows());
  for (Eigen::Index l = 0; l < z.cols(); ++l) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      if (mask.observed(i, l)) rows.push_back(i);
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (m < r) throw IllPosedError("recover_amplitudes: fewer observations than frequencies");
    CMatrix vo(m, r);
    CVector zo(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      vo.row(k) = v.row(rows[static_cast<std::size_t>(k)]);
      zo(k) = z(rows[static_cast<std::size_t>(k)], l);
    }
    Eigen::ColPivHouseholderQR<CMatrix> qr(vo);
    qr.setThreshold(1e-10);
    if (qr.rank() < r) throw IllPosedError("recover_amplitudes: steering matrix is rank deficient");
    c.col(l) = qr.solve(zo);
  }
  return c;
}

LocalizationResult localize_from_dual(const CMatrix& y, const SignalEnsemble& z, const ObservationMask& mask,
                                      double eps, Eigen::Index grid_size) {
  LocalizationResult out;
  out.freqs = locate_frequencies(y, eps, grid_size, &out.peak_norms);
  out.amplitudes = recover_amplitudes(out.freqs, z, mask);
  return out;
}

void write_curve_csv(std::ostream& os, const DualCurve& curve, const char* value_name) {
  os << "f," << value_name << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < curve.freqs.size(); ++k) os << curve.freqs[k] << ',' << curve.norms[k] << '\n';
}

}  // namespace gridless
