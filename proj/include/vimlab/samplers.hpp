#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vimlab/core_data.hpp"

namespace vimlab {

enum class PerturbationKind { marginal_permutation, gaussian_conditional, residual_permutation };

std::string_view to_string(PerturbationKind kind);
PerturbationKind parse_perturbation_kind(std::string_view name);

/// Law of the complement block D = -S given X^S = s under a Gaussian model:
/// X^D | s ~ N(intercept + coef * s, chol * chol').
struct GaussianBlockLaw {
  std::vector<Index> given;
  std::vector<Index> drawn;
  VectorXd intercept;
  MatrixXd coef;
  MatrixXd chol;
};

/// Produces replacement values for one coordinate. Columns other than the
/// perturbed one are never modified.
class ConditionalSampler {
 public:
  static ConditionalSampler fit(PerturbationKind kind, const MatrixXd& x);

  /// Gaussian conditional sampler with known mean and covariance.
  static ConditionalSampler gaussian(VectorXd mean, MatrixXd covariance);

  PerturbationKind kind() const { return kind_; }
  bool is_conditional() const { return kind_ != PerturbationKind::marginal_permutation; }
  Index p() const { return p_; }

  const VectorXd& mean() const { return mean_; }
  const MatrixXd& covariance() const { return cov_; }

  /// Per-column regression of x_j on x_{-j}: intercept followed by slopes.
  const std::vector<VectorXd>& column_coefficients() const { return column_coef_; }
  /// Fitting residuals of the per-column regressions (residual_permutation).
  const MatrixXd& residuals() const { return residuals_; }

  /// n_draws replacement columns for feature j, one per output column.
  MatrixXd draw(const MatrixXd& x, Index j, Index n_draws, std::uint64_t seed) const;

  /// Gaussian law of the complement of `given`; gaussian_conditional only.
  GaussianBlockLaw block_law(const std::vector<Index>& given) const;

 private:
  ConditionalSampler(PerturbationKind kind, Index p) : kind_(kind), p_(p) {}
  void prepare_gaussian();

  PerturbationKind kind_;
  Index p_;
  VectorXd mean_;
  MatrixXd cov_;
  std::vector<VectorXd> column_coef_;
  VectorXd cond_sd_;
  MatrixXd residuals_;
};

}  // namespace vimlab
