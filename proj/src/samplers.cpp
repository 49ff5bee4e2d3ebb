#include "vimlab/samplers.hpp"

#include <cmath>
#include <string>

#include "vimlab/predictors.hpp"
#include "vimlab/random.hpp"

namespace vimlab {

std::string_view to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::marginal_permutation: return "marginal_permutation";
    case PerturbationKind::gaussian_conditional: return "gaussian_conditional";
    case PerturbationKind::residual_permutation: return "residual_permutation";
  }
  return "unknown";
}

PerturbationKind parse_perturbation_kind(std::string_view name) {
  for (auto k : {PerturbationKind::marginal_permutation, PerturbationKind::gaussian_conditional,
                 PerturbationKind::residual_permutation})
    if (to_string(k) == name) return k;
  fail(ErrorCode::validation, "unknown sampler kind '" + std::string(name) + "'");
}

namespace {

// Least squares of y on [1, x]; returns intercept followed by slopes.
VectorXd regress(const MatrixXd& x, const VectorXd& y) {
  MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    fail(ErrorCode::numerical_rank, "residual_permutation: regressors are rank deficient");
  return qr.solve(y);
}

double apply_fit(const VectorXd& coef, const MatrixXd& x, Index row, Index skip) {
  double v = coef(0);
  Index k = 1;
  for (Index c = 0; c < x.cols(); ++c) {
    if (c == skip) continue;
    v += coef(k++) * x(row, c);
  }
  return v;
}

MatrixXd invert_spd(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    MatrixXd jittered = m;
    jittered.diagonal().array() += 1e-10;
    llt.compute(jittered);
    if (llt.info() != Eigen::Success)
      fail(ErrorCode::numerical_rank, "gaussian_conditional: conditioning block is singular after jitter");
  }
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

ConditionalSampler ConditionalSampler::fit(PerturbationKind kind, const MatrixXd& x) {
  if (x.rows() < 2) fail(ErrorCode::insufficient_data, "fit_sampler: need at least 2 rows");
  ConditionalSampler s(kind, x.cols());
  switch (kind) {
    case PerturbationKind::marginal_permutation:
      break;
    case PerturbationKind::gaussian_conditional: {
      s.mean_ = x.colwise().mean();
      const MatrixXd centered = x.rowwise() - s.mean_.transpose();
      s.cov_ = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
      s.cov_ = 0.5 * (s.cov_ + s.cov_.transpose());
      s.prepare_gaussian();
      break;
    }
    case PerturbationKind::residual_permutation: {
      s.residuals_.resize(x.rows(), x.cols());
      for (Index j = 0; j < x.cols(); ++j) {
        const auto others = all_but(x.cols(), j);
        VectorXd coef = regress(x(Eigen::all, others), x.col(j));
        for (Index i = 0; i < x.rows(); ++i) s.residuals_(i, j) = x(i, j) - apply_fit(coef, x, i, j);
        s.column_coef_.push_back(std::move(coef));
      }
      break;
    }
  }
  return s;
}

ConditionalSampler ConditionalSampler::gaussian(VectorXd mean, MatrixXd covariance) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    fail(ErrorCode::dimension_mismatch, "gaussian sampler: mean/covariance shape mismatch");
  ConditionalSampler s(PerturbationKind::gaussian_conditional, mean.size());
  s.mean_ = std::move(mean);
  s.cov_ = std::move(covariance);
  if ((s.cov_ - s.cov_.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    fail(ErrorCode::invalid_parameter, "gaussian sampler: covariance is not symmetric");
  s.prepare_gaussian();
  return s;
}

void ConditionalSampler::prepare_gaussian() {
  cond_sd_.resize(p_);
  column_coef_.clear();
  for (Index j = 0; j < p_; ++j) {
    const auto others = all_but(p_, j);
    VectorXd coef(p_);  // intercept, then slopes on the others
    double var = cov_(j, j);
    if (p_ > 1) {
      const MatrixXd inv = invert_spd(cov_(others, others));
      const VectorXd cross = cov_(others, Eigen::all).col(j);
      const VectorXd b = inv * cross;
      var -= cross.dot(b);
      coef(0) = mean_(j) - b.dot(mean_(others));
      coef.tail(p_ - 1) = b;
    } else {
      coef(0) = mean_(j);
    }
    if (!(var > 1e-12 * std::max(1.0, cov_(j, j))))
      fail(ErrorCode::numerical_rank,
           "gaussian_conditional: feature " + std::to_string(j) + " has zero conditional variance");
    cond_sd_(j) = std::sqrt(var);
    column_coef_.push_back(std::move(coef));
  }
}

MatrixXd ConditionalSampler::draw(const MatrixXd& x, Index j, Index n_draws, std::uint64_t seed) const {
  if (n_draws < 1) fail(ErrorCode::invalid_parameter, "draw: n_draws must be >= 1");
  if (j < 0 || j >= x.cols()) fail(ErrorCode::invalid_parameter, "draw: feature index out of range");
  if (kind_ != PerturbationKind::marginal_permutation && x.cols() != p_)
    fail(ErrorCode::dimension_mismatch, "draw: sampler was fit on a different number of columns");
  const Index k = x.rows();
  MatrixXd out(k, n_draws);

  switch (kind_) {
    case PerturbationKind::marginal_permutation:
      for (Index d = 0; d < n_draws; ++d) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
        const auto perm = random_permutation(k, rng);
        for (Index i = 0; i < k; ++i) out(i, d) = x(perm[i], j);
      }
      break;
    case PerturbationKind::gaussian_conditional: {
      const VectorXd& coef = column_coef_[j];
      VectorXd centre(k);
      for (Index i = 0; i < k; ++i) centre(i) = apply_fit(coef, x, i, j);
      for (Index d = 0; d < n_draws; ++d) {
        NormalSource normal(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
        for (Index i = 0; i < k; ++i) out(i, d) = centre(i) + cond_sd_(j) * normal();
      }
      break;
    }
    case PerturbationKind::residual_permutation: {
      const VectorXd& coef = column_coef_[j];
      VectorXd fitted(k), resid(k);
      for (Index i = 0; i < k; ++i) {
        fitted(i) = apply_fit(coef, x, i, j);
        resid(i) = x(i, j) - fitted(i);
      }
      for (Index d = 0; d < n_draws; ++d) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
        const auto perm = random_permutation(k, rng);
        for (Index i = 0; i < k; ++i) out(i, d) = fitted(i) + resid(perm[i]);
      }
      break;
    }
  }
  return out;
}

GaussianBlockLaw ConditionalSampler::block_law(const std::vector<Index>& given) const {
  if (kind_ != PerturbationKind::gaussian_conditional)
    fail(ErrorCode::sampler_kind, "block_law: requires a gaussian_conditional sampler");
  GaussianBlockLaw law;
  law.given = given;
  std::vector<char> in(static_cast<std::size_t>(p_), 0);
  for (Index g : given) {
    if (g < 0 || g >= p_) fail(ErrorCode::invalid_parameter, "block_law: index out of range");
    in[g] = 1;
  }
  for (Index c = 0; c < p_; ++c)
    if (!in[c]) law.drawn.push_back(c);
  const auto& d = law.drawn;
  const auto& s = law.given;
  if (d.empty()) return law;
  if (s.empty()) {
    law.intercept = mean_(d);
    law.coef = MatrixXd(static_cast<Index>(d.size()), 0);
    law.chol = cholesky_factor(cov_(d, d));
    return law;
  }
  const MatrixXd inv = invert_spd(cov_(s, s));
  law.coef = cov_(d, s) * inv;
  law.intercept = mean_(d) - law.coef * mean_(s);
  MatrixXd cond = cov_(d, d) - law.coef * cov_(s, d);
  cond = 0.5 * (cond + cond.transpose());
  law.chol = cholesky_factor(cond);
  return law;
}

}  // namespace vimlab
