#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "gridless/covariance_estimator.hpp"
#include "gridless/subspace_freq.hpp"
#include "oracles.hpp"

using namespace gridless;
using Catch::Approx;

namespace {

ToeplitzSpec spectrum(const std::vector<double>& f, const std::vector<double>& p, Eigen::Index n) {
  return covariance_exact(FrequencySet(f), p, n);
}

}  // namespace

TEST_CASE("root-MUSIC on exact covariances", "[subspace_freq]") {
  const FrequencySet two = root_music(spectrum({0.2, 0.7}, {1.0, 2.0}, 16), 2);
  REQUIRE(two.size() == 2);
  CHECK(oracle::wrap(two[0], 0.2) <= 1e-6);
  CHECK(oracle::wrap(two[1], 0.7) <= 1e-6);

  const FrequencySet one = root_music(spectrum({0.61803}, {3.0}, 10), 1);
  REQUIRE(one.size() == 1);
  CHECK(oracle::wrap(one[0], 0.61803) <= 1e-8);

  CHECK_THROWS_AS(root_music(spectrum({0.2}, {1.0}, 8), 8), DomainError);
  CHECK_THROWS_AS(root_music(spectrum({0.2}, {1.0}, 8), 0), DomainError);
}

TEST_CASE("root-MUSIC near the wrap point and with close pairs", "[subspace_freq]") {
  const FrequencySet w = root_music(spectrum({0.001, 0.9985, 0.5}, {1.0, 1.0, 1.0}, 64), 3);
  REQUIRE(w.size() == 3);
  CHECK(oracle::wrap(w[0], 0.001) <= 1e-6);
  CHECK(oracle::wrap(w[1], 0.5) <= 1e-6);
  CHECK(oracle::wrap(w[2], 0.9985) <= 1e-6);
}

TEST_CASE("root-MUSIC is invariant to positive scaling", "[subspace_freq]") {
  const ToeplitzSpec u = spectrum({0.1, 0.37, 0.52, 0.9}, {1.0, 0.5, 2.0, 0.7}, 20);
  CVector noisy = u.u();
  noisy(0) += 0.05;
  CounterRng rng(4);
  for (Eigen::Index d = 1; d < noisy.size(); ++d) noisy(d) += 1e-3 * rng.complex_normal();
  const ToeplitzSpec a(noisy);
  const ToeplitzSpec b(7.3 * noisy);
  const FrequencySet fa = root_music(a, 4);
  const FrequencySet fb = root_music(b, 4);
  REQUIRE(fa.size() == fb.size());
  for (std::size_t k = 0; k < fa.size(); ++k) CHECK(std::abs(fa[k] - fb[k]) <= 1e-10);
}

TEST_CASE("subspace split bases are orthonormal and complementary", "[subspace_freq]") {
  const ToeplitzSpec u = spectrum({0.05, 0.3, 0.77}, {1.0, 1.0, 1.0}, 12);
  const SubspaceSplit s = subspace_split(u, 3);
  const Eigen::Index n = 12;
  CHECK(s.signal_basis.cols() == 3);
  CHECK(s.noise_basis.cols() == n - 3);
  CHECK((s.signal_basis.adjoint() * s.signal_basis - CMatrix::Identity(3, 3)).norm() <= 1e-10);
  CHECK((s.noise_basis.adjoint() * s.noise_basis - CMatrix::Identity(n - 3, n - 3)).norm() <= 1e-10);
  CHECK((s.signal_basis.adjoint() * s.noise_basis).norm() <= 1e-10);
  for (Eigen::Index k = 1; k < s.eigenvalues.size(); ++k) CHECK(s.eigenvalues(k) >= s.eigenvalues(k - 1));
  CHECK(s.eigenvalues.minCoeff() >= 0.0);
  CHECK(s.eigen_gap > 0.0);
}

TEST_CASE("projection distance reports an indefinite input", "[subspace_freq]") {
  CVector u = spectrum({0.25, 0.6}, {1.0, 1.0}, 6).u();
  u(0) -= 0.1;
  const SubspaceSplit s = subspace_split(ToeplitzSpec(u, 1.0), 2);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(oracle::toeplitz(u));
  double neg = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) neg += std::pow(std::min(0.0, es.eigenvalues()(k)), 2);
  CHECK(s.projection_distance == Approx(std::sqrt(neg)).epsilon(1e-10));
}

TEST_CASE("MUSIC pseudospectrum diverges at the true frequencies", "[subspace_freq]") {
  // Frequencies on the 2^16 grid so the samples land exactly on them.
  const double g = 65536.0;
  const std::vector<double> f{8192.0 / g, 30000.0 / g, 50001.0 / g};
  const ToeplitzSpec u = spectrum(f, {1.0, 2.0, 0.5}, 16);
  const DualCurve c = music_pseudospectrum(u, 3, 65536);
  for (double v : f) CHECK(c.norms[static_cast<std::size_t>(std::lround(v * g))] >= 1e8);
  for (double v : c.norms) REQUIRE(v > 0.0);
}

TEST_CASE("MUSIC pseudospectrum of a white covariance is flat", "[subspace_freq]") {
  CVector e1 = CVector::Zero(8);
  e1(0) = 1.0;
  const DualCurve c = music_pseudospectrum(ToeplitzSpec(e1), 1, 512);
  const auto [lo, hi] = std::minmax_element(c.norms.begin(), c.norms.end());
  CHECK(*hi / *lo <= 1.0 + 1e-6);
}

TEST_CASE("MUSIC pseudospectrum matches the direct formula", "[subspace_freq]") {
  CVector u = spectrum({0.12, 0.4, 0.66}, {1.0, 0.8, 1.3}, 10).u();
  u(0) += 0.05;
  const ToeplitzSpec t(u);
  const SubspaceSplit s = subspace_split(t, 3);
  const DualCurve c = music_pseudospectrum(t, 3, 200);
  for (std::size_t k = 0; k < c.freqs.size(); ++k) {
    const CVector a = oracle::atom(c.freqs[k], 10);
    // Compare 1/value: the curve is unbounded at grid points on a true frequency.
    const double want = (s.noise_basis.adjoint() * a).squaredNorm();
    REQUIRE(std::abs(1.0 / c.norms[k] - want) <= 1e-10 * std::max(want, 1e-6));
  }
  std::ostringstream os;
  write_pseudospectrum_csv(os, c);
  CHECK(os.str().rfind("f,pseudospectrum\n", 0) == 0);
}

TEST_CASE("pseudospectrum peaks align with root-MUSIC", "[subspace_freq]") {
  CVector u = spectrum({0.15, 0.55}, {1.0, 1.0}, 16).u();
  u(0) += 0.1;
  const ToeplitzSpec t(u);
  const FrequencySet f = root_music(t, 2);
  const DualCurve c = music_pseudospectrum(t, 2, 16 * 1024);
  for (double v : f) {
    const auto k = static_cast<std::size_t>(std::lround(v * 16 * 1024)) % c.norms.size();
    const std::size_t kl = (k + c.norms.size() - 1) % c.norms.size();
    const std::size_t kr = (k + 1) % c.norms.size();
    CHECK(c.norms[k] >= std::min(c.norms[kl], c.norms[kr]));
  }
}

TEST_CASE("vandermonde decomposition round trip", "[subspace_freq]") {
  const std::vector<double> f{0.1, 0.4, 0.8};
  const std::vector<double> p{1.0, 2.0, 0.5};
  const std::vector<SpectralComponent> d = vandermonde_decompose(spectrum(f, p, 12));
  REQUIRE(d.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(oracle::wrap(d[k].freq, f[k]) <= 1e-6);
    CHECK(d[k].power == Approx(p[k]).margin(1e-6));
  }
}

TEST_CASE("vandermonde decomposition of random spectra", "[subspace_freq][oracle]") {
  CounterRng rng(99);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index n = 8 + static_cast<Eigen::Index>(rng.below(17));
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n / 2)));
    const FrequencySet f = random_frequencies(r, 1.5 / static_cast<double>(n), rng);
    std::vector<double> p;
    for (Eigen::Index k = 0; k < r; ++k) p.push_back(0.5 + rng.uniform());
    const ToeplitzSpec u = covariance_exact(f, p, n);
    const std::vector<SpectralComponent> d = vandermonde_decompose(u);
    REQUIRE(static_cast<Eigen::Index>(d.size()) == r);
    double total = 0.0;
    std::vector<double> fe;
    std::vector<double> pe;
    for (std::size_t k = 0; k < d.size(); ++k) {
      REQUIRE(oracle::wrap(d[k].freq, f[k]) <= 1e-6);
      REQUIRE(std::abs(d[k].power - p[k]) <= 1e-6);
      total += d[k].power;
      fe.push_back(d[k].freq);
      pe.push_back(d[k].power);
    }
    REQUIRE(std::abs(total - u.trace()) <= 1e-8 * std::max(1.0, u.trace()));
    const ToeplitzSpec back = covariance_exact(FrequencySet(fe), pe, n);
    REQUIRE((back.u() - u.u()).norm() <= 1e-6 * u.u().norm());
  }
}

TEST_CASE("vandermonde decomposition edge cases", "[subspace_freq]") {
  CVector e1 = CVector::Zero(6);
  e1(0) = 2.0;
  CHECK_THROWS_AS(vandermonde_decompose(ToeplitzSpec(e1)), FullRankError);

  const ToeplitzSpec rank1 = spectrum({0.3}, {2.5}, 9);
  const std::vector<SpectralComponent> d = vandermonde_decompose(rank1);
  REQUIRE(d.size() == 1);
  CHECK(d[0].power == Approx(rank1.trace()).epsilon(1e-10));

  CVector bad = spectrum({0.2, 0.6}, {1.0, 1.0}, 6).u();
  bad(0) -= 0.2;
  CHECK_THROWS_AS(vandermonde_decompose(ToeplitzSpec(bad, 1.0)), DomainError);

  CHECK(vandermonde_decompose(ToeplitzSpec(CVector::Zero(5))).empty());
}

TEST_CASE("nonnegative least squares", "[subspace_freq]") {
  RMatrix a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  RVector b(3);
  b << 2, -1, 1;
  const RVector x = nnls(a, b);
  // The unconstrained solution has x2 < 0; the constrained one is x = (1.5, 0).
  CHECK(x(0) == Approx(1.5).margin(1e-12));
  CHECK(x(1) == Approx(0.0).margin(1e-12));
  // KKT: gradient nonnegative where x = 0 and zero where x > 0.
  const RVector g = a.transpose() * (a * x - b);
  CHECK(std::abs(g(0)) <= 1e-12);
  CHECK(g(1) >= -1e-12);
}

TEST_CASE("model order from the eigenvalue threshold", "[subspace_freq]") {
  CHECK(estimate_model_order(spectrum({0.1, 0.3, 0.6, 0.85}, {1.0, 1.0, 1.0, 1.0}, 16)) == 4);
  CHECK(estimate_model_order(ToeplitzSpec(CVector::Zero(4))) == 0);
}

TEST_CASE("power fit on exact data", "[subspace_freq]") {
  const ToeplitzSpec u = spectrum({0.2, 0.45}, {1.5, 0.25}, 10);
  const RVector p = fit_powers(u, FrequencySet({0.2, 0.45}));
  CHECK(p(0) == Approx(1.5).margin(1e-10));
  CHECK(p(1) == Approx(0.25).margin(1e-10));
}
