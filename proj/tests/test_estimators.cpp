#include <doctest.h>

#include <cmath>

#include "vimlab/estimators.hpp"
#include "vimlab/oracle.hpp"
#include "vimlab/random.hpp"

using namespace vimlab;

namespace {

const Loss kQuad{LossKind::quadratic};

// Closed-form truths for y = X0 with corr(X0, X1) = 0.6.
GaussianLinearSpec<double> pair_spec() {
  return {VectorXd::Zero(2), toeplitz_covariance<double>(2, 0.6), VectorXd::Unit(2, 0), 0.0};
}

FittedPredictor population_model() { return FittedPredictor::from_linear(0.0, VectorXd::Unit(2, 0), {0, 1}); }

ConditionalSampler population_sampler() {
  return ConditionalSampler::gaussian(VectorXd::Zero(2), toeplitz_covariance<double>(2, 0.6));
}

void check_report_invariants(const ImportanceReport& r) {
  REQUIRE(r.has_deltas());
  for (Index j = 0; j < r.p(); ++j) {
    const VectorXd c = r.deltas.col(j);
    CHECK(std::abs(c.mean() - r.score(j)) < 1e-9);
    const double sd = std::sqrt((c.array() - c.mean()).square().sum() / double(c.size() - 1));
    CHECK(std::abs(r.std_error(j) - sd / std::sqrt(double(c.size()))) < 1e-12);
  }
}

}  // namespace

TEST_CASE("method catalog") {
  CHECK(target_index(MethodId::SobolCPI) == IndexTag::TSI);
  CHECK(target_index(MethodId::scSAGE) == IndexTag::TSI);
  CHECK(target_index(MethodId::LOCO_W) == IndexTag::TSI);
  CHECK(target_index(MethodId::cSAGE) == IndexTag::SAGE);
  CHECK(target_index(MethodId::cSAGEvf) == IndexTag::LOCI);
  CHECK(target_index(MethodId::mSAGEvf) == IndexTag::mSAGEvf);
  CHECK(target_index(MethodId::LOCI) == IndexTag::LOCI);
  CHECK(estimation_style(MethodId::LOCO) == EstimationStyle::refitting);
  CHECK(estimation_style(MethodId::CFI) == EstimationStyle::perturbation);
  CHECK(estimation_style(MethodId::mSAGE) == EstimationStyle::marginalization);
  for (auto id : {MethodId::PFI, MethodId::CFI, MethodId::SobolCPI, MethodId::LOCO, MethodId::LOCO_W,
                  MethodId::scSAGE, MethodId::mSAGE, MethodId::mSAGEvf, MethodId::dTSI, MethodId::GLM})
    CHECK(satisfies_minimal_axiom(id));
  for (auto id : {MethodId::cSAGE, MethodId::cSAGEvf, MethodId::LOCI}) CHECK_FALSE(satisfies_minimal_axiom(id));
  CHECK(parse_method_id("mSAGEvf") == MethodId::mSAGEvf);
  CHECK_THROWS_AS(parse_method_id("SHAP"), Error);
}

TEST_CASE("normalization") {
  CHECK(normalize_max_abs((VectorXd(3) << 1, -4, 2).finished()) == (VectorXd(3) << 0.25, -1, 0.5).finished());
  CHECK(normalize_max_abs(VectorXd::Zero(2)) == VectorXd::Zero(2));
}

TEST_CASE("perturbation estimators on the correlated pair") {
  const Dataset test = gen_linear_pair(20000, 0.6, 1.0, 101);
  const auto m = population_model();
  const auto s = population_sampler();
  const auto spec = pair_spec();

  const auto pfi = estimate_pfi(m, test, kQuad, 10, 1);
  check_report_invariants(pfi);
  CHECK(std::abs(pfi.score(0) - gaussian_linear_index(spec, 0, GaussianIndex::PFI)) < 0.1);
  CHECK(std::abs(pfi.score(1)) < 0.1);

  const auto cfi = estimate_cfi(m, test, kQuad, s, 1, 2);
  check_report_invariants(cfi);
  CHECK(std::abs(cfi.score(0) - 2.0 * gaussian_linear_index(spec, 0, GaussianIndex::TSI)) < 0.1);
  CHECK(std::abs(cfi.score(1)) < 0.1);

  const auto cpi = estimate_sobol_cpi(m, test, kQuad, s, 100, 3);
  check_report_invariants(cpi);
  CHECK(std::abs(cpi.score(0) - 0.64) < 0.05);
  CHECK(cpi.score(1) == 0.0);

  const auto marginal = ConditionalSampler::fit(PerturbationKind::marginal_permutation, test.x());
  try {
    estimate_cfi(m, test, kQuad, marginal, 1, 2);
    FAIL("expected sampler kind error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::sampler_kind);
  }
}

TEST_CASE("Sobol-CPI(1) is half of CFI on shared draws") {
  const MatrixXd x = gen_toeplitz_gaussian(500, 4, 0.5, 9);
  const VectorXd y = gen_poly_response(MatrixXd::NullaryExpr(500, 10, [&](Index i, Index j) { return x(i, j % 4); }),
                                       0.3, 10);
  const Dataset d(x, y);
  PredictorSpec spec{PredictorKind::boosted_trees};
  spec.boost = {30, 0.2, 3, 5};
  const auto m = fit(spec, d, all_features(4));
  for (auto kind : {PerturbationKind::gaussian_conditional, PerturbationKind::residual_permutation}) {
    const auto s = ConditionalSampler::fit(kind, x);
    const auto cfi = estimate_cfi(m, d, kQuad, s, 1, 77);
    const auto cpi = estimate_sobol_cpi(m, d, kQuad, s, 1, 77);
    CHECK((cpi.deltas - 0.5 * cfi.deltas).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("constant model scores are exactly zero") {
  const Dataset test = gen_linear_pair(300, 0.6, 1.0, 5);
  const auto c = FittedPredictor::constant(0.3);
  const auto s = population_sampler();
  CHECK(estimate_pfi(c, test, kQuad, 3, 1).score.cwiseAbs().maxCoeff() < 1e-15);
  CHECK(estimate_sage_vf(c, test, kQuad, SageMode::conditional, &s, 5, 1).score.cwiseAbs().maxCoeff() == 0.0);
  CHECK(estimate_sage_vf(c, test, kQuad, SageMode::marginal, nullptr, 5, 1).score.cwiseAbs().maxCoeff() == 0.0);
  CHECK(estimate_sc_sage(c, test, kQuad, s, 5, 1).score.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("refitting estimators with OLS") {
  const Dataset d = gen_linear_pair(20000, 0.6, 1.0, 202);
  const std::array<double, 2> f{0.7, 0.3};
  const auto parts = split(d, f, 4);
  const PredictorSpec ols{PredictorKind::ols};

  const auto loco = estimate_loco(ols, parts[0], parts[1], kQuad, 1);
  check_report_invariants(loco);
  CHECK(std::abs(loco.score(0) - 0.64) < 0.05);
  CHECK(std::abs(loco.score(1)) < 0.05);

  const auto loci = estimate_loci(ols, parts[0], parts[1], kQuad, 1);
  check_report_invariants(loci);
  CHECK(std::abs(loci.score(0) - 1.0) < 0.05);
  CHECK(std::abs(loci.score(1) - 0.36) < 0.05);

  const auto dtsi = estimate_dtsi(ols, parts[0], parts[1], 1);
  CHECK(std::abs(dtsi.score(0) - 1.0) < 0.1);
  CHECK(std::abs(dtsi.score(1)) < 0.1);

  const auto w = estimate_loco_w(ols, d, kQuad, 3);
  CHECK(std::abs(w.score(0) - 0.64) < 0.1);
  CHECK(std::abs(w.score(1)) < 0.1);
  CHECK(w.has_deltas());

  // single-feature design: reduced model is the mean predictor
  MatrixXd x1 = d.x().col(0);
  const Dataset one(x1, d.y());
  const auto sp = split(one, f, 4);
  const auto l1 = estimate_loco(ols, sp[0], sp[1], kQuad, 1);
  const double var = (sp[1].y().array() - sp[0].y().mean()).square().mean();
  CHECK(std::abs(l1.score(0) - var) < 1e-8);
}

TEST_CASE("LOCO-W needs enough rows") {
  const Dataset d = gen_linear_pair(20, 0.6, 1.0, 1);
  try {
    estimate_loco_w({PredictorKind::ols}, d, kQuad, 1);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_data);
  }
}

TEST_CASE("dTSI with independent covariates") {
  MatrixXd x = gen_toeplitz_gaussian(20000, 2, 0.0, 303);
  x.col(1) *= 2.0;
  const Dataset d(x, x.col(0) + 0.5 * x.col(1));
  const std::array<double, 2> f{0.7, 0.3};
  const auto parts = split(d, f, 5);
  const PredictorSpec ols{PredictorKind::ols};
  const auto dtsi = estimate_dtsi(ols, parts[0], parts[1], 1);
  const auto loco = estimate_loco(ols, parts[0], parts[1], kQuad, 1);
  for (Index j = 0; j < 2; ++j) {
    const VectorXd c = parts[1].x().col(j);
    const double var = (c.array() - c.mean()).square().mean();
    CHECK(std::abs(dtsi.score(j) - loco.score(j) / var) < 0.05 * dtsi.score(j));
  }
  CHECK(std::abs(dtsi.score(1) - 0.25) < 0.025);
}

TEST_CASE("SAGE family on the correlated pair") {
  const Dataset test = gen_linear_pair(10000, 0.6, 1.0, 404);
  const auto m = population_model();
  const auto s = population_sampler();
  const auto spec = pair_spec();

  const auto sage = estimate_sage(m, test, kQuad, SageMode::conditional, &s, 512, 10, 1);
  CHECK(std::abs(sage.score(0) - gaussian_linear_index(spec, 0, GaussianIndex::SAGE)) < 0.05);
  CHECK(std::abs(sage.score(1) - gaussian_linear_index(spec, 1, GaussianIndex::SAGE)) < 0.05);
  // efficiency: every ordering telescopes to v([p])
  const double v_full = std::stod(sage.metadata.at("v_full"));
  const VectorXd per_order = sage.deltas.rowwise().sum();
  CHECK((per_order.array() - v_full).abs().maxCoeff() < 1e-10);
  const double se = std::sqrt(sage.std_error.squaredNorm());
  CHECK(std::abs(sage.score.sum() - v_full) <= 3.0 * se + 1e-12);

  const auto msage = estimate_sage(m, test, kQuad, SageMode::marginal, nullptr, 64, 10, 2);
  CHECK(std::abs(msage.score(1)) < 0.05);

  const auto vf = estimate_sage_vf(m, test, kQuad, SageMode::conditional, &s, 20, 3);
  check_report_invariants(vf);
  CHECK(std::abs(vf.score(1) - gaussian_linear_index(spec, 1, GaussianIndex::SAGEvf)) < 0.05);
  CHECK(std::abs(vf.score(0) - 1.0) < 0.05);
  const auto mvf = estimate_sage_vf(m, test, kQuad, SageMode::marginal, nullptr, 20, 3);
  CHECK(std::abs(mvf.score(1)) < 0.05);

  const auto sc = estimate_sc_sage(m, test, kQuad, s, 20, 4);
  check_report_invariants(sc);
  CHECK(std::abs(sc.score(0) - 0.64) < 0.05);
  CHECK(std::abs(sc.score(1)) < 0.05);

  CHECK_THROWS_AS(estimate_sage(m, test, kQuad, SageMode::conditional, nullptr, 4, 2, 1), Error);
  CHECK_THROWS_AS(estimate_sage(m, test, kQuad, SageMode::conditional, &s, 0, 2, 1), Error);
}

TEST_CASE("conditional SAGE rejects residual permutation beyond two features") {
  const MatrixXd x = gen_toeplitz_gaussian(100, 3, 0.5, 1);
  const Dataset d(x, x.col(0));
  const auto m = FittedPredictor::from_linear(0.0, VectorXd::Unit(3, 0), all_features(3));
  const auto s = ConditionalSampler::fit(PerturbationKind::residual_permutation, x);
  try {
    estimate_sage(m, d, kQuad, SageMode::conditional, &s, 4, 2, 1);
    FAIL("expected sampler kind error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::sampler_kind);
  }
}

TEST_CASE("GLM index estimator") {
  const MatrixXd x = gen_toeplitz_gaussian(5000, 2, 0.0, 505);
  const auto r = estimate_glm(Dataset(x, x.col(0) + 2.0 * x.col(1)));
  CHECK_FALSE(r.has_deltas());
  CHECK(std::abs(r.score(0) - 1.0) < 0.05);
  CHECK(std::abs(r.score(1) - 4.0) < 0.2);
}

TEST_CASE("estimators are deterministic") {
  const Dataset test = gen_linear_pair(400, 0.6, 1.0, 6);
  const auto m = population_model();
  const auto s = ConditionalSampler::fit(PerturbationKind::gaussian_conditional, test.x());
  CHECK(estimate_sobol_cpi(m, test, kQuad, s, 10, 9).deltas == estimate_sobol_cpi(m, test, kQuad, s, 10, 9).deltas);
  CHECK(estimate_sage(m, test, kQuad, SageMode::marginal, nullptr, 8, 3, 9).deltas ==
        estimate_sage(m, test, kQuad, SageMode::marginal, nullptr, 8, 3, 9).deltas);
}
