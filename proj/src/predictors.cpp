#include "vimlab/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vimlab/random.hpp"

namespace vimlab {

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::mean: return "mean";
    case PredictorKind::ols: return "ols";
    case PredictorKind::ridge: return "ridge";
    case PredictorKind::random_forest: return "random_forest";
    case PredictorKind::boosted_trees: return "boosted_trees";
  }
  return "unknown";
}

PredictorKind parse_predictor_kind(std::string_view name) {
  for (auto k : {PredictorKind::mean, PredictorKind::ols, PredictorKind::ridge,
                 PredictorKind::random_forest, PredictorKind::boosted_trees})
    if (to_string(k) == name) return k;
  fail(ErrorCode::validation, "unknown predictor kind '" + std::string(name) + "'");
}

void PredictorSpec::validate() const {
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_parameter, "PredictorSpec: lambda must be >= 0");
  if (forest.n_trees < 1 || forest.max_depth < 1 || forest.min_leaf < 1 || forest.mtry < 0)
    fail(ErrorCode::invalid_parameter, "PredictorSpec: forest counts must be >= 1");
  if (boost.n_rounds < 1 || boost.max_depth < 1 || boost.min_leaf < 1)
    fail(ErrorCode::invalid_parameter, "PredictorSpec: boosting counts must be >= 1");
  if (!(boost.learning_rate > 0.0 && boost.learning_rate <= 1.0))
    fail(ErrorCode::invalid_parameter, "PredictorSpec: learning_rate must be in (0, 1]");
}

std::vector<Index> all_features(Index p) {
  std::vector<Index> s(static_cast<std::size_t>(p));
  std::iota(s.begin(), s.end(), Index{0});
  return s;
}

std::vector<Index> all_but(Index p, Index j) {
  std::vector<Index> s;
  for (Index k = 0; k < p; ++k)
    if (k != j) s.push_back(k);
  return s;
}

FittedPredictor::FittedPredictor(PredictorKind kind, std::vector<Index> subset, Model model,
                                 double training_loss)
    : kind_(kind), subset_(std::move(subset)), model_(std::move(model)), training_loss_(training_loss) {}

FittedPredictor FittedPredictor::from_linear(double intercept, VectorXd coefficients, std::vector<Index> subset) {
  if (coefficients.size() != static_cast<Index>(subset.size()))
    fail(ErrorCode::dimension_mismatch, "from_linear: coefficient count does not match subset");
  return FittedPredictor(PredictorKind::ols, std::move(subset), LinearFit{intercept, std::move(coefficients), false},
                         0.0);
}

FittedPredictor FittedPredictor::constant(double value) {
  return FittedPredictor(PredictorKind::mean, {}, value, 0.0);
}

bool FittedPredictor::identity_subset() const {
  for (std::size_t k = 0; k < subset_.size(); ++k)
    if (subset_[k] != static_cast<Index>(k)) return false;
  return true;
}

VectorXd FittedPredictor::predict(const MatrixXd& x) const {
  if (x.cols() != static_cast<Index>(subset_.size()))
    fail(ErrorCode::dimension_mismatch, "predict: expected " + std::to_string(subset_.size()) +
                                            " columns, got " + std::to_string(x.cols()));
  const Index k = x.rows();
  return std::visit(
      [&](const auto& m) -> VectorXd {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, double>) {
          return VectorXd::Constant(k, m);
        } else if constexpr (std::is_same_v<M, LinearFit>) {
          return (x * m.coefficients).array() + m.intercept;
        } else {
          VectorXd out = VectorXd::Zero(k);
          for (const auto& tree : m.trees)
            for (Index i = 0; i < k; ++i) out(i) += tree.predict_row(x, i);
          return (out * m.scale).array() + m.base;
        }
      },
      model_);
}

VectorXd FittedPredictor::predict_full(const MatrixXd& x) const {
  if (!subset_.empty() && x.cols() <= *std::max_element(subset_.begin(), subset_.end()))
    fail(ErrorCode::dimension_mismatch, "predict_full: input has too few columns for the model subset");
  if (subset_.empty()) return predict(MatrixXd(x.rows(), 0));
  if (identity_subset() && x.cols() == static_cast<Index>(subset_.size())) return predict(x);
  return predict(x(Eigen::all, subset_));
}

namespace {

double mse(const VectorXd& y, const VectorXd& yhat) { return (y - yhat).squaredNorm() / static_cast<double>(y.size()); }

LinearFit fit_ols(const MatrixXd& x, const VectorXd& y) {
  const Index n = x.rows();
  const Index q = x.cols();
  if (n <= q) fail(ErrorCode::rank_deficient, "ols: need more rows than columns");
  MatrixXd design(n, q + 1);
  design.col(0).setOnes();
  design.rightCols(q) = x;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() < q + 1) fail(ErrorCode::rank_deficient, "ols: design matrix is rank deficient");
  const VectorXd coef = qr.solve(y);
  return LinearFit{coef(0), coef.tail(q), false};
}

LinearFit fit_ridge(const MatrixXd& x, const VectorXd& y, double lambda) {
  if (lambda == 0.0) return fit_ols(x, y);
  const VectorXd xm = x.colwise().mean();
  const double ym = y.mean();
  const MatrixXd xc = x.rowwise() - xm.transpose();
  MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  const VectorXd beta = gram.ldlt().solve(xc.transpose() * (y.array() - ym).matrix());
  return LinearFit{ym - xm.dot(beta), beta, false};
}

// Level-wise exact CART on presorted columns: every level costs one pass over
// each feature's sort order, independent of the number of open nodes.
class TreeBuilder {
 public:
  explicit TreeBuilder(const MatrixXd& x) : x_(x), order_(static_cast<std::size_t>(x.cols())) {
    const Index n = x.rows();
    for (Index f = 0; f < x.cols(); ++f) {
      auto& ord = order_[f];
      ord.resize(static_cast<std::size_t>(n));
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    }
  }

  RegressionTree build(const VectorXd& target, const std::vector<double>& weight, int max_depth, int min_leaf,
                       int mtry, Rng* rng) const {
    const Index n = x_.rows();
    const int q = static_cast<int>(x_.cols());
    RegressionTree tree;
    std::vector<int> node_of(static_cast<std::size_t>(n), 0);
    std::vector<double> sum{0.0}, cnt{0.0};
    for (Index i = 0; i < n; ++i) {
      if (weight[i] <= 0.0) {
        node_of[i] = -1;
        continue;
      }
      sum[0] += weight[i] * target(i);
      cnt[0] += weight[i];
    }
    tree.nodes.push_back({-1, 0.0, -1, -1, cnt[0] > 0 ? sum[0] / cnt[0] : 0.0});

    std::vector<int> active;
    if (max_depth > 0 && cnt[0] >= 2.0 * min_leaf) active.push_back(0);
    std::vector<int> slot;

    struct Best {
      double gain = 0.0;
      int feature = -1;
      double threshold = 0.0;
    };

    for (int depth = 0; depth < max_depth && !active.empty(); ++depth) {
      slot.assign(tree.nodes.size(), -1);
      for (std::size_t a = 0; a < active.size(); ++a) slot[active[a]] = static_cast<int>(a);
      const std::size_t na = active.size();

      std::vector<char> allowed(na * static_cast<std::size_t>(q), 1);
      if (mtry > 0 && mtry < q) {
        std::vector<int> feats(static_cast<std::size_t>(q));
        for (std::size_t a = 0; a < na; ++a) {
          std::iota(feats.begin(), feats.end(), 0);
          std::fill_n(allowed.begin() + static_cast<std::ptrdiff_t>(a * q), q, 0);
          for (int k = 0; k < mtry; ++k) {
            const auto r = k + static_cast<int>(uniform_index(*rng, static_cast<std::uint64_t>(q - k)));
            std::swap(feats[k], feats[r]);
            allowed[a * q + feats[k]] = 1;
          }
        }
      }

      std::vector<Best> best(na);
      std::vector<double> lsum(na), lcnt(na), last(na);
      std::vector<char> seen(na);
      for (int f = 0; f < q; ++f) {
        std::fill(lsum.begin(), lsum.end(), 0.0);
        std::fill(lcnt.begin(), lcnt.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        for (int i : order_[f]) {
          const int node = node_of[i];
          if (node < 0) continue;
          const int a = slot[node];
          if (a < 0 || !allowed[a * q + f]) continue;
          const double v = x_(i, f);
          if (seen[a] && v > last[a]) {
            const double nl = lcnt[a];
            const double nr = cnt[node] - nl;
            if (nl >= min_leaf && nr >= min_leaf) {
              const double sr = sum[node] - lsum[a];
              const double gain = lsum[a] * lsum[a] / nl + sr * sr / nr - sum[node] * sum[node] / cnt[node];
              if (gain > best[a].gain) {
                double thr = last[a] + 0.5 * (v - last[a]);
                if (!(thr < v)) thr = last[a];
                best[a] = {gain, f, thr};
              }
            }
          }
          lsum[a] += weight[i] * target(i);
          lcnt[a] += weight[i];
          last[a] = v;
          seen[a] = 1;
        }
      }

      // Grow children for nodes with a positive-gain split.
      std::vector<int> split_slot(tree.nodes.size(), -1);
      for (std::size_t a = 0; a < na; ++a) {
        if (best[a].feature < 0 || !(best[a].gain > 1e-12)) continue;
        const int node = active[a];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        sum.push_back(0.0);
        sum.push_back(0.0);
        cnt.push_back(0.0);
        cnt.push_back(0.0);
        auto& nd = tree.nodes[node];
        nd.feature = best[a].feature;
        nd.threshold = best[a].threshold;
        nd.left = left;
        nd.right = left + 1;
        split_slot[node] = 1;
      }
      for (Index i = 0; i < n; ++i) {
        const int node = node_of[i];
        if (node < 0 || split_slot[node] < 0) continue;
        const auto& nd = tree.nodes[node];
        const int child = x_(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
        node_of[i] = child;
        sum[child] += weight[i] * target(i);
        cnt[child] += weight[i];
      }
      std::vector<int> next;
      for (std::size_t a = 0; a < na; ++a) {
        const auto& nd = tree.nodes[active[a]];
        if (nd.feature < 0) continue;
        for (int child : {nd.left, nd.right}) {
          tree.nodes[child].value = sum[child] / cnt[child];
          if (depth + 1 < max_depth && cnt[child] >= 2.0 * min_leaf) next.push_back(child);
        }
      }
      active = std::move(next);
    }
    return tree;
  }

 private:
  const MatrixXd& x_;
  std::vector<std::vector<int>> order_;
};

TreeEnsemble fit_boosting(const MatrixXd& x, const VectorXd& y, const BoostParams& bp) {
  TreeBuilder builder(x);
  TreeEnsemble ens;
  ens.base = y.mean();
  ens.scale = bp.learning_rate;
  VectorXd f = VectorXd::Constant(y.size(), ens.base);
  const std::vector<double> weight(static_cast<std::size_t>(y.size()), 1.0);
  for (int r = 0; r < bp.n_rounds; ++r) {
    const VectorXd resid = y - f;
    auto tree = builder.build(resid, weight, bp.max_depth, bp.min_leaf, 0, nullptr);
    for (Index i = 0; i < y.size(); ++i) f(i) += bp.learning_rate * tree.predict_row(x, i);
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

TreeEnsemble fit_forest(const MatrixXd& x, const VectorXd& y, const ForestParams& fp, std::uint64_t seed) {
  TreeBuilder builder(x);
  TreeEnsemble ens;
  ens.scale = 1.0 / fp.n_trees;
  const Index n = y.size();
  const int q = static_cast<int>(x.cols());
  const int mtry = fp.mtry > 0 ? std::min(fp.mtry, q) : std::max(1, (q + 2) / 3);
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (int t = 0; t < fp.n_trees; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    std::fill(weight.begin(), weight.end(), 0.0);
    for (Index i = 0; i < n; ++i) weight[uniform_index(rng, static_cast<std::uint64_t>(n))] += 1.0;
    ens.trees.push_back(builder.build(y, weight, fp.max_depth, fp.min_leaf, mtry, &rng));
  }
  return ens;
}

}  // namespace

FittedPredictor fit(const PredictorSpec& spec, const Dataset& d, const std::vector<Index>& subset,
                    std::uint64_t seed) {
  spec.validate();
  if (subset.empty() && spec.kind != PredictorKind::mean)
    fail(ErrorCode::invalid_parameter, "fit: empty feature subset for a non-mean predictor");
  std::vector<Index> seen(subset);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    fail(ErrorCode::invalid_parameter, "fit: duplicate feature index in subset");
  for (Index j : subset)
    if (j < 0 || j >= d.p()) fail(ErrorCode::invalid_parameter, "fit: feature index out of range");

  const MatrixXd x = d.x()(Eigen::all, subset);
  const VectorXd& y = d.y();
  switch (spec.kind) {
    case PredictorKind::mean: {
      const double m = y.mean();
      return FittedPredictor(spec.kind, subset, m, (y.array() - m).square().mean());
    }
    case PredictorKind::ols:
    case PredictorKind::ridge: {
      LinearFit lf = spec.kind == PredictorKind::ols ? fit_ols(x, y) : fit_ridge(x, y, spec.lambda);
      lf.standardized_inputs = d.standardized();
      const double loss = mse(y, (x * lf.coefficients).array() + lf.intercept);
      return FittedPredictor(spec.kind, subset, std::move(lf), loss);
    }
    case PredictorKind::random_forest: {
      FittedPredictor f(spec.kind, subset, fit_forest(x, y, spec.forest, seed), 0.0);
      const double loss = mse(y, f.predict(x));
      return FittedPredictor(spec.kind, subset, f.model(), loss);
    }
    case PredictorKind::boosted_trees: {
      FittedPredictor f(spec.kind, subset, fit_boosting(x, y, spec.boost), 0.0);
      const double loss = mse(y, f.predict(x));
      return FittedPredictor(spec.kind, subset, f.model(), loss);
    }
  }
  fail(ErrorCode::invalid_parameter, "fit: unknown predictor kind");
}

VectorXd predict(const FittedPredictor& f, const MatrixXd& x) { return f.predict(x); }

VectorXd per_sample_loss(const FittedPredictor& f, const Dataset& d, const Loss& loss) {
  return loss.pointwise(d.y(), f.predict_full(d.x()));
}

VectorXd glm_index(const LinearFit& fit) {
  if (!fit.standardized_inputs)
    fail(ErrorCode::invalid_parameter,
         "glm_index: coefficients were fit on unstandardized covariates; squared coefficients are only "
         "comparable across features after standardization");
  return fit.coefficients.array().square();
}

}  // namespace vimlab
