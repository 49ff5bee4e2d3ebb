#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vimlab/core_data.hpp"
#include "vimlab/random.hpp"

namespace vimlab {

/// Exact finite joint law of (X^0, ..., X^{p-1}, y).
///
/// Probabilities are stored per atom with the target varying fastest and
/// covariate 0 slowest. Total mass must be within 1e-12 of 1.
class DiscreteJoint {
 public:
  static constexpr Index kMaxAtoms = 1'000'000;

  DiscreteJoint(std::vector<std::vector<double>> x_supports, std::vector<double> y_support,
                std::vector<double> probs);

  Index p() const { return static_cast<Index>(x_supports_.size()); }
  const std::vector<double>& x_support(Index j) const { return x_supports_[j]; }
  const std::vector<double>& y_support() const { return y_support_; }
  Index n_configs() const { return n_configs_; }
  Index n_atoms() const { return n_configs_ * static_cast<Index>(y_support_.size()); }

  double prob(Index config, Index y_index) const {
    return probs_[static_cast<std::size_t>(config * static_cast<Index>(y_support_.size()) + y_index)];
  }
  const std::vector<double>& probs() const { return probs_; }

  /// Support index of feature j in covariate configuration `config`.
  Index digit(Index config, Index j) const { return (config / stride_[j]) % static_cast<Index>(x_supports_[j].size()); }
  double x_value(Index config, Index j) const { return x_supports_[j][digit(config, j)]; }
  Index stride(Index j) const { return stride_[j]; }

  /// Plain-text table: `x <support...>` per covariate, `y <support...>`, then
  /// one `x_0 ... x_{p-1} y prob` row per atom with positive mass.
  static DiscreteJoint read(std::istream& in);
  void write(std::ostream& out) const;

 private:
  std::vector<std::vector<double>> x_supports_;
  std::vector<double> y_support_;
  std::vector<double> probs_;
  std::vector<Index> stride_;
  Index n_configs_ = 1;
};

/// E[y | X^S] per configuration of X^S with positive mass, keyed by the
/// covariate values in subset order.
struct CondMeanTable {
  std::vector<Index> subset;
  std::map<std::vector<double>, double> values;

  double at(const std::vector<double>& x_subset) const;
};

enum class ValueMode { conditional, marginal };

/// Equivalent formulations of the total Sobol index. Formulation 1 is taken as
/// E[Var(y|X^{-j})] - E[Var(y|X)] so that it matches 2-5 for noisy joints.
enum class TsiForm {
  conditional_variance = 1,
  squared_difference = 2,
  risk_difference = 3,
  marginalization = 4,
  perturbation = 5,
  mutual_information = 7,
};

CondMeanTable exact_cond_mean(const DiscreteJoint& d, const std::vector<Index>& subset);

double exact_value_function(const DiscreteJoint& d, const std::vector<Index>& subset, const Loss& loss,
                            ValueMode mode);

double exact_tsi(const DiscreteJoint& d, Index j, const Loss& loss, TsiForm form);

/// Variance decomposition behind the R^2 display of the index:
/// psi_TSI = variance * (r2_full - r2_reduced) under quadratic loss.
struct R2Decomposition {
  double variance = 0.0;
  double r2_full = 0.0;
  double r2_reduced = 0.0;

  double tsi() const { return variance * (r2_full - r2_reduced); }
};

R2Decomposition exact_r2(const DiscreteJoint& d, Index j);

double exact_shapley(const DiscreteJoint& d, Index j, const Loss& loss, ValueMode mode);

double exact_pfi(const DiscreteJoint& d, Index j, const Loss& loss);

/// v([p]) - v(-j).
double exact_sc_sage(const DiscreteJoint& d, Index j, const Loss& loss);

/// Largest |p(x^j, y | x^{-j}) - p(x^j | x^{-j}) p(y | x^{-j})| over atoms.
double factorization_deviation(const DiscreteJoint& d, Index j);

/// Largest |p(x^j, x^{-j}) - p(x^j) p(x^{-j})| over covariate configurations.
double marginal_independence_deviation(const DiscreteJoint& d, Index j);

/// Largest |p(x^j, x^{-j} | y) - p(x^j | y) p(x^{-j} | y)| over atoms.
double conditional_independence_given_y_deviation(const DiscreteJoint& d, Index j);

enum class GaussianIndex { TSI, SAGE, SAGEvf, PFI, dTSI };

/// v(S) = beta' Sigma_{.S} Sigma_SS^{-1} Sigma_{S.} beta for the linear-Gaussian model.
template <typename Scalar>
Scalar gaussian_value_function(const GaussianLinearSpec<Scalar>& spec, const std::vector<Index>& subset) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (subset.empty()) return Scalar(0);
  const Vec cross = spec.sigma(subset, Eigen::all) * spec.beta;
  const Mat block = spec.sigma(subset, subset);
  Eigen::LDLT<Mat> ldlt(block);
  if (ldlt.info() != Eigen::Success) fail(ErrorCode::numerical_rank, "gaussian_value_function: singular block");
  return cross.dot(ldlt.solve(cross));
}

template <typename Scalar>
Scalar gaussian_linear_index(const GaussianLinearSpec<Scalar>& spec, Index j, GaussianIndex index) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  spec.validate();
  const Index p = spec.p();
  if (j < 0 || j >= p) fail(ErrorCode::invalid_parameter, "gaussian_linear_index: feature out of range");
  const Scalar bj = spec.beta(j);
  switch (index) {
    case GaussianIndex::dTSI:
    case GaussianIndex::TSI: {
      Eigen::FullPivLU<Mat> lu(spec.sigma);
      if (!lu.isInvertible()) fail(ErrorCode::numerical_rank, "gaussian_linear_index: singular covariance");
      const Mat precision = lu.inverse();
      const Scalar tsi = bj * bj / precision(j, j);
      return index == GaussianIndex::TSI ? tsi : bj * bj;
    }
    case GaussianIndex::PFI:
      return Scalar(2) * bj * bj * spec.sigma(j, j);
    case GaussianIndex::SAGEvf:
      return gaussian_value_function(spec, {j});
    case GaussianIndex::SAGE: {
      if (p > 20) fail(ErrorCode::size_limit, "gaussian_linear_index: SAGE enumeration limited to p <= 20");
      std::vector<Index> others;
      for (Index k = 0; k < p; ++k)
        if (k != j) others.push_back(k);
      const Index m = static_cast<Index>(others.size());
      // weights (1/p) / C(p-1, |S|)
      std::vector<Scalar> weight(static_cast<std::size_t>(m + 1));
      for (Index s = 0; s <= m; ++s) {
        Scalar binom = 1;
        for (Index t = 0; t < s; ++t) binom = binom * Scalar(m - t) / Scalar(t + 1);
        weight[s] = Scalar(1) / (Scalar(p) * binom);
      }
      Scalar total = 0;
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        std::vector<Index> s;
        for (Index t = 0; t < m; ++t)
          if ((mask >> t) & 1) s.push_back(others[t]);
        std::vector<Index> sj = s;
        sj.push_back(j);
        total += weight[s.size()] * (gaussian_value_function(spec, sj) - gaussian_value_function(spec, s));
      }
      return total;
    }
  }
  return Scalar(0);
}

/// Reference joints used by tests and the oracle-check command.
namespace fixtures {

/// Fair binary X1 independent of fair binary X2, y = X2.
DiscreteJoint fair_coins();

/// Fair binary X1, X2 with P(X1 = X2) = agreement, y = X2.
DiscreteJoint correlated_coins(double agreement = 0.8);

/// Random joint with p covariates, supports of size 2..max_support and random
/// target support (or {0,1} when binary_target).
DiscreteJoint random_joint(Rng& rng, Index p, Index max_support, bool binary_target = false);

/// Random joint factored as p(x^{-j}) p(x^j | x^{-j}) p(y | x^{-j}).
DiscreteJoint factored_null_joint(Rng& rng, Index p, Index j, Index max_support, bool binary_target = false);

/// Random joint factored as p(x^j) p(x^{-j}, y).
DiscreteJoint independent_feature_joint(Rng& rng, Index p, Index j, Index max_support);

}  // namespace fixtures

}  // namespace vimlab
