#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "gridless/covariance_estimator.hpp"
#include "oracles.hpp"

using namespace gridless;
using Catch::Approx;

namespace {

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> r(static_cast<std::size_t>(n));
  std::iota(r.begin(), r.end(), 0);
  return r;
}

CovarianceSample exact_sample(const CMatrix& sigma_full, std::vector<Eigen::Index> omega, Eigen::Index L) {
  CovarianceSample s;
  s.sigma = principal_submatrix(sigma_full, omega);
  s.omega = std::move(omega);
  s.n = sigma_full.rows();
  s.L = L;
  return s;
}

double rel_err(const CVector& a, const CVector& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("sample covariance examples", "[covariance]") {
  CounterRng rng(1);
  const CMatrix x = oracle::random_matrix(3, 1, rng);
  const std::vector<Eigen::Index> omega{0, 2, 4};
  const CovarianceSample one = sample_covariance(x, omega, 5);
  CHECK((one.sigma - x * x.adjoint()).norm() <= 1e-15);
  CHECK(one.L == 1);
  CHECK(one.m() == 3);

  CHECK(sample_covariance(CMatrix::Zero(3, 4), omega, 5).sigma.norm() == 0.0);

  const CMatrix big = oracle::random_matrix(3, 100, rng);
  CovarianceAccumulator acc(5, omega);
  for (Eigen::Index l = 0; l < 100; ++l) acc.add(big.col(l));
  const CovarianceSample streamed = acc.finish();
  const CovarianceSample batch = sample_covariance(big, omega, 5);
  CHECK((streamed.sigma - batch.sigma).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(streamed.L == 100);
  CHECK_THROWS_AS(CovarianceAccumulator(5, omega).finish(), DomainError);
}

TEST_CASE("sample validation", "[covariance]") {
  CovarianceSample s;
  s.n = 4;
  s.L = 10;
  s.omega = {0, 3};
  s.sigma = CMatrix::Identity(2, 2);
  CHECK_NOTHROW(s.validate());
  s.sigma(0, 0) = -1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.sigma = CMatrix::Identity(2, 2);
  s.sigma(0, 1) = cplx(0.0, 0.5);
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.sigma = CMatrix::Identity(2, 2);
  s.omega = {3, 0};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.omega = {0, 4};
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("lambda heuristic", "[covariance]") {
  for (Eigen::Index L = 2; L < 60; ++L) REQUIRE(lambda_heuristic(L + 1, 8) < lambda_heuristic(L, 8));
  for (Eigen::Index m = 2; m < 60; ++m) REQUIRE(lambda_heuristic(400, m + 1) < lambda_heuristic(400, m));
  // Formula identity lambda (ln L)^2 ln m = 2.5e-3 at integer arguments.
  CHECK(lambda_heuristic(7, 3) * std::pow(std::log(7.0), 2) * std::log(3.0) == Approx(2.5e-3).epsilon(1e-14));
  // 30-digit evaluation at L=400, m=8.
  CHECK(lambda_heuristic(400, 8) == Approx(3.34909375359987186624199941416e-5).epsilon(1e-13));
  CHECK_THROWS_AS(lambda_heuristic(1, 8), DomainError);
  CHECK_THROWS_AS(lambda_heuristic(10, 1), DomainError);
}

TEST_CASE("effective rank", "[covariance]") {
  CHECK(effective_rank(CMatrix::Identity(5, 5)) == Approx(5.0));
  const CVector v = atom(0.3, 6);
  CHECK(effective_rank(3.0 * v * v.adjoint()) == Approx(1.0));
  CounterRng rng(5);
  const CMatrix g = oracle::random_matrix(6, 3, rng);
  const CMatrix s = g * g.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(s);
  const double want = es.eigenvalues().sum() / es.eigenvalues().maxCoeff();
  CHECK(effective_rank(s) == Approx(want).epsilon(1e-12));
  CHECK(effective_rank(s) >= 1.0);
  CHECK(effective_rank(s) <= 3.0 + 1e-12);
  CHECK_THROWS_AS(effective_rank(CMatrix::Zero(3, 3)), DomainError);
}

TEST_CASE("lambda from the concentration bound", "[covariance]") {
  const std::vector<double> f{0.1, 0.4};
  const std::vector<double> p{1.0, 2.0};
  const Eigen::Index n = 32;
  const CMatrix full = oracle::outer_sum(f, p, n);
  const std::vector<Eigen::Index> omega{0, 1, 3, 7, 12, 20, 31};
  const CMatrix so = principal_submatrix(full, omega);

  CHECK(lambda_theorem4(3.0 * so, 1000, n) == Approx(3.0 * lambda_theorem4(so, 1000, n)).epsilon(1e-12));

  Eigen::SelfAdjointEigenSolver<CMatrix> es(so);
  const double spec = es.eigenvalues().maxCoeff();
  const double reff = so.trace().real() / spec;
  const double t = reff * std::log(1000.0 * n) / 1000.0;
  CHECK(lambda_theorem4(so, 1000, n) == Approx(std::max(std::sqrt(t), t) * spec).epsilon(1e-12));
  CHECK(lambda_theorem4(so, 1000, n, 2.5) == Approx(2.5 * lambda_theorem4(so, 1000, n)).epsilon(1e-12));

  // Small L: the linear branch dominates; large L: the square-root branch.
  const double t1 = reff * std::log(1.0 * n);
  CHECK(t1 > 1.0);
  CHECK(lambda_theorem4(so, 1, n) == Approx(t1 * spec).epsilon(1e-12));
  CHECK(t < 1.0);
}

TEST_CASE("exact covariance of a line spectrum", "[covariance]") {
  const Eigen::Index n = 7;
  const std::vector<double> p{static_cast<double>(n)};
  const ToeplitzSpec u = covariance_exact(FrequencySet({0.0}), p, n);
  CHECK((u.u() - CVector::Ones(n)).norm() < 1e-14);
  CHECK(covariance_exact(FrequencySet{}, std::vector<double>{}, n).u().norm() == 0.0);

  const std::vector<double> f{0.13, 0.5, 0.81};
  const std::vector<double> v{1.0, 0.3, 2.2};
  const CMatrix want = oracle::outer_sum(f, v, 9);
  const ToeplitzSpec u3 = covariance_exact(FrequencySet(f), v, 9);
  CHECK((oracle::toeplitz(u3.u()) - want).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((covariance_matrix_exact(FrequencySet(f), v, 9) - want).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(u3.min_eigenvalue() >= -1e-12);
}

TEST_CASE("full observation, zero weight, toeplitz input returns it", "[covariance]") {
  const std::vector<double> f{0.2, 0.33, 0.7};
  const std::vector<double> v{1.0, 0.5, 1.5};
  const Eigen::Index n = 8;
  const ToeplitzSpec ustar = covariance_exact(FrequencySet(f), v, n);
  // Add white noise so the input is Toeplitz and strictly PD.
  CVector u = ustar.u();
  u(0) += 0.2;
  const CovarianceSample s = exact_sample(oracle::toeplitz(u), all_rows(n), 100);
  const CovarianceEstimate est = estimate_toeplitz(s, 0.0);
  CHECK((est.u_hat.u() - u).norm() <= 1e-8 * u.norm());
  CHECK(est.fit_residual <= 1e-8 * s.sigma.norm());
  CHECK(est.report.converged);
}

TEST_CASE("huge weight drives the estimate to zero", "[covariance]") {
  const std::vector<double> v{1.0, 1.0};
  const ToeplitzSpec ustar = covariance_exact(FrequencySet({0.1, 0.6}), v, 8);
  const CovarianceSample s = exact_sample(oracle::toeplitz(ustar.u()), {0, 1, 3, 7}, 50);
  const CovarianceEstimate est = estimate_toeplitz(s, 1e6);
  CHECK(est.u_hat.u().norm() <= 1e-6);
  CHECK_THROWS_AS(estimate_toeplitz(s, -1.0), DomainError);
}

TEST_CASE("complete sparse ruler recovers the full covariance", "[covariance]") {
  const std::vector<Eigen::Index> omega{0, 1, 2, 5};
  REQUIRE(is_complete_sparse_ruler(omega, 6));
  const std::vector<double> f{0.15, 0.62};
  const std::vector<double> v{1.0, 2.0};
  const ToeplitzSpec ustar = covariance_exact(FrequencySet(f), v, 6);
  const CovarianceSample s = exact_sample(oracle::outer_sum(f, v, 6), omega, 1000);
  const CovarianceEstimate est = estimate_toeplitz(s, 1e-8);
  CHECK(rel_err(est.u_hat.u(), ustar.u()) <= 1e-3);
  CHECK(est.u_hat.min_eigenvalue() >= -1e-8);
}

TEST_CASE("fit grows and trace shrinks with the weight", "[covariance]") {
  CounterRng rng(2718);
  const Eigen::Index n = 16;
  const std::vector<double> f{0.1, 0.45, 0.8};
  const CMatrix x =
      synthesize(FrequencySet(f), oracle::random_matrix(3, 40, rng), n) + 0.1 * oracle::random_matrix(n, 40, rng);
  const std::vector<Eigen::Index> omega{0, 1, 2, 4, 7, 11, 15};
  CMatrix xo(static_cast<Eigen::Index>(omega.size()), 40);
  for (std::size_t k = 0; k < omega.size(); ++k) xo.row(static_cast<Eigen::Index>(k)) = x.row(omega[k]);
  const CovarianceSample s = sample_covariance(xo, omega, n);

  double prev_fit = -1.0;
  double prev_trace = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0}) {
    const CovarianceEstimate est = estimate_toeplitz(s, lambda);
    REQUIRE(est.lambda_used == lambda);
    REQUIRE(est.fit_residual >= prev_fit - 1e-6 * s.sigma.norm());
    REQUIRE(est.trace <= prev_trace + 1e-6 * s.sigma.trace().real());
    REQUIRE(est.u_hat.min_eigenvalue() >= -1e-8 * std::max(1.0, est.trace));
    REQUIRE(est.trace >= 0.0);
    prev_fit = est.fit_residual;
    prev_trace = est.trace;
  }
}
