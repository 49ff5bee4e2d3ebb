#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vimlab/random.hpp"
#include "vimlab/samplers.hpp"

using namespace vimlab;

namespace {

double correlation(const VectorXd& a, const VectorXd& b) {
  const VectorXd ac = a.array() - a.mean();
  const VectorXd bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

}  // namespace

TEST_CASE("marginal permutation") {
  MatrixXd x(3, 2);
  x << 1, 10, 2, 20, 3, 30;
  const auto s = ConditionalSampler::fit(PerturbationKind::marginal_permutation, x);
  CHECK_FALSE(s.is_conditional());
  const MatrixXd d = s.draw(x, 0, 4, 9);
  REQUIRE(d.rows() == 3);
  REQUIRE(d.cols() == 4);
  for (Index k = 0; k < 4; ++k) {
    std::vector<double> v(d.col(k).data(), d.col(k).data() + 3);
    std::sort(v.begin(), v.end());
    CHECK(v == std::vector<double>{1, 2, 3});
  }
  CHECK(s.draw(x, 0, 4, 9) == d);
  CHECK_THROWS_AS(s.draw(x, 0, 0, 9), Error);
  CHECK_THROWS_AS(s.draw(x, 2, 1, 9), Error);
}

TEST_CASE("gaussian conditional fit and draws") {
  const MatrixXd x = gen_toeplitz_gaussian(50000, 2, 0.6, 1);
  const auto s = ConditionalSampler::fit(PerturbationKind::gaussian_conditional, x);
  const MatrixXd& c = s.covariance();
  CHECK(std::abs(c(0, 1) / std::sqrt(c(0, 0) * c(1, 1)) - 0.6) < 0.02);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-10);

  // X1 | X0 = 1 has mean rho
  const MatrixXd at_one = MatrixXd::Ones(10000, 2);
  const auto known = ConditionalSampler::gaussian(VectorXd::Zero(2), toeplitz_covariance<double>(2, 0.6));
  const MatrixXd draws = known.draw(at_one, 1, 1, 3);
  CHECK(std::abs(draws.mean() - 0.6) < 0.05);
  const double var = (draws.array() - draws.mean()).square().sum() / 9999.0;
  CHECK(std::abs(var - 0.64) < 0.03);

  // identity covariance: draws independent of the other column
  const MatrixXd z = gen_toeplitz_gaussian(10000, 3, 0.0, 4);
  const auto ind = ConditionalSampler::gaussian(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
  const MatrixXd dz = ind.draw(z, 2, 1, 5);
  CHECK(std::abs(correlation(dz.col(0), z.col(0))) < 0.05);
}

TEST_CASE("gaussian block law") {
  const double rho = 0.6;
  const auto s = ConditionalSampler::gaussian(VectorXd::Zero(3), toeplitz_covariance<double>(3, rho));
  const GaussianBlockLaw law = s.block_law({0});
  CHECK(law.drawn == std::vector<Index>{1, 2});
  CHECK(law.coef(0, 0) == doctest::Approx(rho));
  CHECK(law.coef(1, 0) == doctest::Approx(rho * rho));
  const MatrixXd cov = law.chol * law.chol.transpose();
  CHECK(cov(0, 0) == doctest::Approx(1 - rho * rho));
  CHECK(cov(0, 1) == doctest::Approx(rho - rho * rho * rho));
  CHECK(cov(1, 1) == doctest::Approx(1 - std::pow(rho, 4)));
  const auto marginal = ConditionalSampler::fit(PerturbationKind::marginal_permutation, MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(marginal.block_law({0}), Error);
}

TEST_CASE("degenerate conditional variance is rejected") {
  MatrixXd x = gen_toeplitz_gaussian(100, 3, 0.0, 6);
  x.col(2) = x.col(0) + x.col(1);
  CHECK_THROWS_AS(ConditionalSampler::fit(PerturbationKind::gaussian_conditional, x), Error);
}

TEST_CASE("residual permutation") {
  const Index n = 200;
  const MatrixXd base = gen_toeplitz_gaussian(n, 2, 0.0, 7);
  // e orthogonal to [1, x0] so the OLS fit of x1 on x0 recovers it exactly
  MatrixXd design(n, 2);
  design.col(0).setOnes();
  design.col(1) = base.col(0);
  const VectorXd raw = base.col(1);
  const VectorXd e = raw - design * (design.transpose() * design).ldlt().solve(design.transpose() * raw);
  MatrixXd x(n, 2);
  x.col(0) = base.col(0);
  x.col(1) = 2.0 * base.col(0) + e;
  const auto s = ConditionalSampler::fit(PerturbationKind::residual_permutation, x);
  CHECK((s.residuals().col(1) - e).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(s.column_coefficients()[1](1) == doctest::Approx(2.0).epsilon(1e-10));

  const MatrixXd d = s.draw(x, 1, 5, 8);
  for (Index k = 0; k < 5; ++k) CHECK(std::abs(d.col(k).mean() - x.col(1).mean()) < 1e-9);
  CHECK(s.draw(x, 1, 5, 8) == d);
  // fitted part is unchanged: the draw minus 2*x0 is a permutation of e
  std::vector<double> got(n), want(e.data(), e.data() + n);
  for (Index i = 0; i < n; ++i) got[i] = d(i, 0) - (s.column_coefficients()[1](0) + 2.0 * x(i, 0));
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  for (Index i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-8);
}

TEST_CASE("kind parsing") {
  CHECK(parse_perturbation_kind("residual_permutation") == PerturbationKind::residual_permutation);
  CHECK(to_string(PerturbationKind::gaussian_conditional) == "gaussian_conditional");
  CHECK_THROWS_AS(parse_perturbation_kind("knockoff"), Error);
}
