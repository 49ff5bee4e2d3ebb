#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vimlab/error.hpp"

namespace vimlab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// n x p design matrix with a length-n target.
///
/// Invariants checked at construction: n >= 2, p >= 1, all entries finite,
/// no two columns exactly identical, and, when `standardized` is set, every
/// column has sample mean 0 and unbiased sample sd 1 (within 1e-9).
class Dataset {
 public:
  Dataset(MatrixXd x, VectorXd y, std::vector<std::string> names = {},
          bool standardized = false);

  const MatrixXd& x() const { return x_; }
  const VectorXd& y() const { return y_; }
  const std::vector<std::string>& names() const { return names_; }
  bool standardized() const { return standardized_; }
  Index n() const { return x_.rows(); }
  Index p() const { return x_.cols(); }

  Dataset select_rows(std::span<const Index> rows) const;
  Dataset with_target(VectorXd y) const;

 private:
  MatrixXd x_;
  VectorXd y_;
  std::vector<std::string> names_;
  bool standardized_;
};

std::vector<std::string> default_feature_names(Index p);

enum class LossKind { quadratic, cross_entropy };

struct Loss {
  LossKind kind = LossKind::quadratic;

  static Loss quadratic() { return {LossKind::quadratic}; }
  static Loss cross_entropy() { return {LossKind::cross_entropy}; }

  /// Pointwise loss l(y, yhat). Cross-entropy requires y in {0,1} and
  /// yhat in (0,1); violations raise ErrorCode::domain_error.
  double operator()(double y, double yhat) const;

  VectorXd pointwise(const VectorXd& y, const VectorXd& yhat) const;
};

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// Linear-Gaussian population model y = beta' X + eps, X ~ N(mean, sigma).
template <typename Scalar = double>
struct GaussianLinearSpec {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sigma;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> beta;
  Scalar noise_var = 0;

  Index p() const { return beta.size(); }

  void validate() const {
    const Index p = beta.size();
    if (p < 1 || mean.size() != p || sigma.rows() != p || sigma.cols() != p)
      fail(ErrorCode::dimension_mismatch, "GaussianLinearSpec: inconsistent dimensions");
    if (!(noise_var >= 0)) fail(ErrorCode::invalid_parameter, "GaussianLinearSpec: noise_var < 0");
    if (((sigma - sigma.transpose()).cwiseAbs().maxCoeff()) > Scalar(1e-12))
      fail(ErrorCode::invalid_parameter, "GaussianLinearSpec: sigma is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> eig(
        sigma, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < Scalar(-1e-10))
      fail(ErrorCode::invalid_parameter, "GaussianLinearSpec: sigma is not positive semidefinite");
  }
};

/// Toeplitz covariance with entries rho^|i-j|.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> toeplitz_covariance(Index p, Scalar rho) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> s(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, static_cast<Scalar>(std::abs(i - j)));
  return s;
}

/// Lower Cholesky factor; retries once with 1e-10 diagonal jitter.
MatrixXd cholesky_factor(const MatrixXd& sigma);

/// n i.i.d. rows from N(mean, sigma), deterministic given seed.
MatrixXd sample_gaussian(Index n, const VectorXd& mean, const MatrixXd& sigma, std::uint64_t seed);

Dataset standardize(const Dataset& d);

MatrixXd gen_toeplitz_gaussian(Index n, Index p, double rho, std::uint64_t seed);

/// y = x0 + 2 x1 - x4^2 + x7 x8 + N(0, noise_sd^2).
VectorXd gen_poly_response(const MatrixXd& x, double noise_sd, std::uint64_t seed);

/// The features the polynomial response never reads.
inline constexpr std::array<Index, 5> kPolyNullFeatures{2, 3, 5, 6, 9};

/// Two unit-variance Gaussians with correlation rho and y = beta * x0.
Dataset gen_linear_pair(Index n, double rho, double beta, std::uint64_t seed);

Dataset load_csv(const std::filesystem::path& path, const std::string& target);
void write_csv(const std::filesystem::path& path, const Dataset& d, const std::string& target = "y");

std::vector<Dataset> split(const Dataset& d, std::span<const double> fractions, std::uint64_t seed);

}  // namespace vimlab
