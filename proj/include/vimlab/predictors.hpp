#pragma once

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "vimlab/core_data.hpp"

namespace vimlab {

enum class PredictorKind { mean, ols, ridge, random_forest, boosted_trees };

std::string_view to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(std::string_view name);

struct ForestParams {
  int n_trees = 100;
  int max_depth = 10;
  int min_leaf = 5;
  int mtry = 0;  // 0 selects ceil(p/3)
};

struct BoostParams {
  int n_rounds = 200;
  double learning_rate = 0.1;
  int max_depth = 6;
  int min_leaf = 5;
};

struct PredictorSpec {
  PredictorKind kind = PredictorKind::ols;
  double lambda = 0.0;
  ForestParams forest;
  BoostParams boost;

  void validate() const;
};

struct LinearFit {
  double intercept = 0.0;
  VectorXd coefficients;
  bool standardized_inputs = false;
};

/// Axis-aligned regression tree stored as a flat node array. A node with
/// feature < 0 is a leaf.
struct RegressionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict_row(const MatrixXd& x, Index row) const {
    int k = 0;
    while (nodes[k].feature >= 0)
      k = x(row, nodes[k].feature) <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
    return nodes[k].value;
  }
};

struct TreeEnsemble {
  double base = 0.0;
  double scale = 1.0;  // learning rate for boosting, 1/n_trees for forests
  std::vector<RegressionTree> trees;
};

/// Trained model m_S restricted to an ordered subset S of the original columns.
class FittedPredictor {
 public:
  using Model = std::variant<double, LinearFit, TreeEnsemble>;

  FittedPredictor(PredictorKind kind, std::vector<Index> subset, Model model, double training_loss);

  /// Known linear function over the given columns, e.g. a population model.
  static FittedPredictor from_linear(double intercept, VectorXd coefficients, std::vector<Index> subset);
  static FittedPredictor constant(double value);

  PredictorKind kind() const { return kind_; }
  const std::vector<Index>& subset() const { return subset_; }
  double training_loss() const { return training_loss_; }
  const Model& model() const { return model_; }
  const LinearFit* linear() const { return std::get_if<LinearFit>(&model_); }

  /// x has exactly |subset| columns in subset order.
  VectorXd predict(const MatrixXd& x) const;

  /// x holds all original columns; the subset is selected internally.
  VectorXd predict_full(const MatrixXd& x) const;

 private:
  bool identity_subset() const;

  PredictorKind kind_;
  std::vector<Index> subset_;
  Model model_;
  double training_loss_;
};

std::vector<Index> all_features(Index p);
std::vector<Index> all_but(Index p, Index j);

FittedPredictor fit(const PredictorSpec& spec, const Dataset& d, const std::vector<Index>& subset,
                    std::uint64_t seed = 0);

VectorXd predict(const FittedPredictor& f, const MatrixXd& x);

VectorXd per_sample_loss(const FittedPredictor& f, const Dataset& d, const Loss& loss);

/// Squared coefficients of a fit on standardized covariates.
VectorXd glm_index(const LinearFit& fit);

}  // namespace vimlab
