#include <doctest.h>

#include <cmath>

#include "vimlab/predictors.hpp"
#include "vimlab/random.hpp"

using namespace vimlab;

namespace {

double r_squared(const VectorXd& y, const VectorXd& pred) {
  return 1.0 - (y - pred).squaredNorm() / (y.array() - y.mean()).square().sum();
}

Dataset poly_design(Index n, std::uint64_t seed) {
  MatrixXd x = gen_toeplitz_gaussian(n, 10, 0.6, seed);
  VectorXd y = gen_poly_response(x, 0.1, seed + 1);
  return Dataset(std::move(x), std::move(y));
}

// Least squares through the normal equations with a full-pivot LU, independent of the QR path.
VectorXd normal_equations(const MatrixXd& x, const VectorXd& y) {
  MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  return (design.transpose() * design).fullPivLu().solve(design.transpose() * y);
}

}  // namespace

TEST_CASE("mean predictor") {
  MatrixXd x(3, 1);
  x << 0.1, 0.7, 0.3;
  const Dataset d(x, (VectorXd(3) << 1, 2, 3).finished());
  const auto f = fit({PredictorKind::mean}, d, {});
  CHECK(f.predict(MatrixXd(4, 0)) == VectorXd::Constant(4, 2.0));
  CHECK(f.predict_full(x) == VectorXd::Constant(3, 2.0));
  // quadratic loss of the mean predictor is the biased sample variance
  const VectorXd loss = per_sample_loss(f, d, Loss{LossKind::quadratic});
  CHECK(loss.mean() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ols") {
  const MatrixXd x = gen_toeplitz_gaussian(100, 1, 0.0, 3);
  const Dataset d(x, 3.0 * x.col(0));
  const auto f = fit({PredictorKind::ols}, d, {0});
  REQUIRE(f.linear() != nullptr);
  CHECK(f.linear()->coefficients(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(f.predict((MatrixXd(1, 1) << 2.0).finished())(0) == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(per_sample_loss(f, d, Loss{LossKind::quadratic}).cwiseAbs().maxCoeff() < 1e-20);
  CHECK_THROWS_AS(f.predict(MatrixXd::Zero(2, 2)), Error);

  const MatrixXd z = gen_toeplitz_gaussian(200, 4, 0.5, 4);
  const VectorXd y = z * Eigen::Vector4d(1, -2, 0.5, 0) + gen_toeplitz_gaussian(200, 1, 0.0, 5);
  const Dataset dz(z, y);
  const auto g = fit({PredictorKind::ols}, dz, all_features(4));
  const VectorXd ref = normal_equations(z, y);
  CHECK(std::abs(g.linear()->intercept - ref(0)) < 1e-8);
  CHECK((g.linear()->coefficients - ref.tail(4)).cwiseAbs().maxCoeff() < 1e-8);
  const VectorXd resid = y - g.predict(z);
  CHECK(std::abs(resid.sum()) < 1e-8);
  CHECK((z.transpose() * resid).cwiseAbs().maxCoeff() < 1e-8);

  // subset ordering follows the subset list
  const auto h = fit({PredictorKind::ols}, dz, {2, 0});
  const VectorXd ref_sub = normal_equations(z(Eigen::all, std::vector<Index>{2, 0}), y);
  CHECK(std::abs(h.linear()->coefficients(0) - ref_sub(1)) < 1e-8);
  CHECK((h.predict_full(z) - h.predict(z(Eigen::all, std::vector<Index>{2, 0}))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit preconditions") {
  const MatrixXd x = gen_toeplitz_gaussian(50, 2, 0.0, 6);
  MatrixXd collinear(50, 2);
  collinear.col(0) = x.col(0);
  collinear.col(1) = 2.0 * x.col(0);
  const Dataset c(collinear, x.col(1));
  try {
    fit({PredictorKind::ols}, c, {0, 1});
    FAIL("expected rank deficiency");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::rank_deficient);
  }
  const Dataset d(x, x.col(0));
  CHECK_THROWS_AS(fit({PredictorKind::ols}, d, {}), Error);
  CHECK_THROWS_AS(fit({PredictorKind::ols}, d, {0, 0}), Error);
  CHECK_THROWS_AS(fit({PredictorKind::ols}, d, {2}), Error);
  PredictorSpec bad{PredictorKind::ridge, -1.0};
  CHECK_THROWS_AS(fit(bad, d, {0}), Error);
}

TEST_CASE("ridge shrinks monotonically") {
  const MatrixXd x = gen_toeplitz_gaussian(120, 5, 0.7, 7);
  const VectorXd y = x * (VectorXd(5) << 1, 2, -1, 0.5, 0).finished() + gen_toeplitz_gaussian(120, 1, 0, 8);
  const Dataset d(x, y);
  double prev = INFINITY;
  for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const auto f = fit({PredictorKind::ridge, lambda}, d, all_features(5));
    const double norm = f.linear()->coefficients.norm();
    CHECK(norm < prev);
    prev = norm;
  }
}

TEST_CASE("random forest on the polynomial design") {
  const Dataset train = poly_design(3500, 21);
  const Dataset test = poly_design(1500, 22);
  PredictorSpec spec{PredictorKind::random_forest};
  spec.forest.n_trees = 60;
  const auto f = fit(spec, train, all_features(10), 5);
  const VectorXd pred = f.predict(test.x());
  CHECK(r_squared(test.y(), pred) >= 0.85);
  CHECK(fit(spec, train, all_features(10), 5).predict(test.x()) == pred);

  // row-wise purity
  std::vector<Index> rev(static_cast<std::size_t>(test.n()));
  for (Index i = 0; i < test.n(); ++i) rev[i] = test.n() - 1 - i;
  const VectorXd rev_pred = f.predict(test.x()(rev, Eigen::all));
  for (Index i = 0; i < test.n(); ++i) CHECK(rev_pred(i) == pred(rev[i]));
}

TEST_CASE("boosted trees") {
  const Dataset train = poly_design(3000, 31);
  const Dataset test = poly_design(1000, 32);
  PredictorSpec spec{PredictorKind::boosted_trees};
  spec.boost = {200, 0.1, 4, 5};
  const auto f = fit(spec, train, all_features(10));
  CHECK(r_squared(test.y(), f.predict(test.x())) >= 0.9);
  CHECK(f.training_loss() < (train.y().array() - train.y().mean()).square().mean());

  // a single stump on a step function finds the exact threshold
  MatrixXd x(8, 1);
  x << 0, 1, 2, 3, 4, 5, 6, 7;
  const VectorXd y = (x.col(0).array() > 3.5).cast<double>();
  PredictorSpec stump{PredictorKind::boosted_trees};
  stump.boost = {1, 1.0, 1, 1};
  const auto s = fit(stump, Dataset(x, y), {0});
  CHECK((s.predict(x) - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("glm index") {
  LinearFit lf{0.0, (VectorXd(3) << 1, 2, 0).finished(), true};
  CHECK(glm_index(lf) == (VectorXd(3) << 1, 4, 0).finished());
  lf.standardized_inputs = false;
  CHECK_THROWS_AS(glm_index(lf), Error);

  const MatrixXd x = gen_toeplitz_gaussian(5000, 2, 0.0, 41);
  const Dataset s = standardize(Dataset(x, x.col(0) + 2.0 * x.col(1)));
  const VectorXd psi = glm_index(*fit({PredictorKind::ols}, s, {0, 1}).linear());
  // standardized coefficients equal beta_j times the sample sd of column j
  const auto sd = [&](Index j) { return std::sqrt((x.col(j).array() - x.col(j).mean()).square().sum() / 4999.0); };
  CHECK(std::abs(psi(0) - sd(0) * sd(0)) < 1e-8);
  CHECK(std::abs(psi(1) - 4.0 * sd(1) * sd(1)) < 1e-8);
  CHECK(std::abs(psi(0) - 1.0) < 0.05);
  CHECK(std::abs(psi(1) - 4.0) < 0.2);

  const MatrixXd z = gen_toeplitz_gaussian(20000, 3, 0.5, 42);
  const VectorXd yz = z.col(0) + gen_toeplitz_gaussian(20000, 1, 0.0, 43);
  const VectorXd pz = glm_index(*fit({PredictorKind::ols}, standardize(Dataset(z, yz)), all_features(3)).linear());
  CHECK(pz(2) < 0.01);
}

TEST_CASE("cross entropy losses") {
  MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  const Dataset d(x, (VectorXd(4) << 0, 1, 1, 0).finished());
  const auto half = FittedPredictor::constant(0.5);
  const VectorXd l = per_sample_loss(half, d, Loss{LossKind::cross_entropy});
  for (Index i = 0; i < 4; ++i) CHECK(l(i) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(per_sample_loss(FittedPredictor::constant(1.5), d, Loss{LossKind::cross_entropy}), Error);
}
