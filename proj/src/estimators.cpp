#include "vimlab/estimators.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <string>

#include "vimlab/random.hpp"

namespace vimlab {

std::string_view to_string(MethodId id) {
  switch (id) {
    case MethodId::PFI: return "PFI";
    case MethodId::CFI: return "CFI";
    case MethodId::SobolCPI: return "SobolCPI";
    case MethodId::LOCO: return "LOCO";
    case MethodId::LOCO_W: return "LOCO_W";
    case MethodId::LOCI: return "LOCI";
    case MethodId::cSAGE: return "cSAGE";
    case MethodId::cSAGEvf: return "cSAGEvf";
    case MethodId::mSAGE: return "mSAGE";
    case MethodId::mSAGEvf: return "mSAGEvf";
    case MethodId::scSAGE: return "scSAGE";
    case MethodId::dTSI: return "dTSI";
    case MethodId::GLM: return "GLM";
  }
  return "unknown";
}

std::string_view to_string(IndexTag tag) {
  switch (tag) {
    case IndexTag::TSI: return "psi_TSI";
    case IndexTag::PFI: return "psi_PFI";
    case IndexTag::SAGE: return "psi_SAGE";
    case IndexTag::mSAGE: return "psi_mSAGE";
    case IndexTag::LOCI: return "psi_LOCI";
    case IndexTag::mSAGEvf: return "psi_mSAGEvf";
    case IndexTag::dTSI: return "psi_dTSI";
    case IndexTag::GLM: return "psi_GLM";
  }
  return "unknown";
}

std::string_view to_string(EstimationStyle style) {
  switch (style) {
    case EstimationStyle::perturbation: return "perturbation";
    case EstimationStyle::marginalization: return "marginalization";
    case EstimationStyle::refitting: return "refitting";
  }
  return "unknown";
}

std::string_view to_string(SageMode mode) { return mode == SageMode::conditional ? "conditional" : "marginal"; }

MethodId parse_method_id(std::string_view name) {
  for (auto id : {MethodId::PFI, MethodId::CFI, MethodId::SobolCPI, MethodId::LOCO, MethodId::LOCO_W, MethodId::LOCI,
                  MethodId::cSAGE, MethodId::cSAGEvf, MethodId::mSAGE, MethodId::mSAGEvf, MethodId::scSAGE,
                  MethodId::dTSI, MethodId::GLM})
    if (to_string(id) == name) return id;
  fail(ErrorCode::validation, "unknown method '" + std::string(name) + "'");
}

IndexTag target_index(MethodId id) {
  switch (id) {
    case MethodId::PFI: return IndexTag::PFI;
    case MethodId::CFI:
    case MethodId::SobolCPI:
    case MethodId::LOCO:
    case MethodId::LOCO_W:
    case MethodId::scSAGE: return IndexTag::TSI;
    case MethodId::LOCI:
    case MethodId::cSAGEvf: return IndexTag::LOCI;
    case MethodId::cSAGE: return IndexTag::SAGE;
    case MethodId::mSAGE: return IndexTag::mSAGE;
    case MethodId::mSAGEvf: return IndexTag::mSAGEvf;
    case MethodId::dTSI: return IndexTag::dTSI;
    case MethodId::GLM: return IndexTag::GLM;
  }
  return IndexTag::TSI;
}

EstimationStyle estimation_style(MethodId id) {
  switch (id) {
    case MethodId::PFI:
    case MethodId::CFI:
    case MethodId::SobolCPI: return EstimationStyle::perturbation;
    case MethodId::cSAGE:
    case MethodId::cSAGEvf:
    case MethodId::mSAGE:
    case MethodId::mSAGEvf:
    case MethodId::scSAGE: return EstimationStyle::marginalization;
    case MethodId::LOCO:
    case MethodId::LOCO_W:
    case MethodId::LOCI:
    case MethodId::dTSI:
    case MethodId::GLM: return EstimationStyle::refitting;
  }
  return EstimationStyle::perturbation;
}

bool satisfies_minimal_axiom(MethodId id) {
  const auto tag = target_index(id);
  return tag != IndexTag::SAGE && tag != IndexTag::LOCI;
}

VectorXd normalize_max_abs(const VectorXd& scores) {
  const double m = scores.size() ? scores.cwiseAbs().maxCoeff() : 0.0;
  return m > 0.0 ? VectorXd(scores / m) : scores;
}

namespace {

ImportanceReport from_deltas(MethodId id, MatrixXd deltas) {
  ImportanceReport r;
  r.method = id;
  const auto rows = static_cast<double>(deltas.rows());
  r.score = deltas.colwise().mean();
  r.std_error.resize(deltas.cols());
  for (Index j = 0; j < deltas.cols(); ++j) {
    const double var = deltas.rows() > 1
                           ? (deltas.col(j).array() - r.score(j)).square().sum() / (rows - 1.0)
                           : 0.0;
    r.std_error(j) = std::sqrt(var / rows);
  }
  r.deltas = std::move(deltas);
  return r;
}

void check_model(const FittedPredictor& m, const Dataset& test) {
  for (Index c : m.subset())
    if (c >= test.p())
      fail(ErrorCode::dimension_mismatch, "model uses feature " + std::to_string(c) + " but data has " +
                                              std::to_string(test.p()) + " columns");
}

void check_sampler(const ConditionalSampler& s, const Dataset& test) {
  if (!s.is_conditional())
    fail(ErrorCode::sampler_kind, "a conditional sampler is required, got marginal_permutation");
  if (s.p() != test.p()) fail(ErrorCode::dimension_mismatch, "sampler was fit on a different feature count");
}

// Predictions of m on `n` copies of x where column j is replaced by the
// columns of `replacement`; result is k x n.
MatrixXd predict_replaced(const FittedPredictor& m, const MatrixXd& x, Index j, const MatrixXd& replacement) {
  const Index k = x.rows();
  const Index n = replacement.cols();
  MatrixXd big(k * n, x.cols());
  for (Index d = 0; d < n; ++d) {
    big.middleRows(d * k, k) = x;
    big.block(d * k, j, k, 1) = replacement.col(d);
  }
  const VectorXd pred = m.predict_full(big);
  return Eigen::Map<const MatrixXd>(pred.data(), k, n);
}

std::string exact_string(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void add_common_metadata(ImportanceReport& r, const Dataset& test, const Loss& loss, std::uint64_t seed) {
  r.metadata["n_test"] = std::to_string(test.n());
  r.metadata["loss"] = std::string(to_string(loss.kind));
  r.metadata["seed"] = std::to_string(seed);
  r.metadata["target_index"] = std::string(to_string(target_index(r.method)));
  r.metadata["style"] = std::string(to_string(estimation_style(r.method)));
}

using Mask = std::uint64_t;

// Approximates E[m(X) | X^S = x^S] row-wise by averaging m over draws of the
// complement block. Draws derive from a caller seed, so coalitions evaluated
// with one seed share random numbers.
class Marginalizer {
 public:
  Marginalizer(const FittedPredictor& m, const Dataset& test, SageMode mode, const ConditionalSampler* s,
               Index n_draws)
      : m_(m), x_(test.x()), mode_(mode), s_(s), n_draws_(n_draws), full_pred_(m.predict_full(test.x())) {
    if (n_draws < 1) fail(ErrorCode::invalid_parameter, "n_draws must be >= 1");
    if (x_.cols() > 62) fail(ErrorCode::size_limit, "coalition evaluation supports at most 62 features");
    if (mode == SageMode::conditional) {
      if (s == nullptr) fail(ErrorCode::sampler_kind, "conditional mode requires a conditional sampler");
      check_sampler(*s, test);
    }
  }

  const VectorXd& full_prediction() const { return full_pred_; }
  double mean_prediction() const { return full_pred_.mean(); }

  /// Pointwise loss of the marginalized prediction. Under quadratic loss the
  /// finite-draw variance term s_i^2 / n_draws is removed, which makes the
  /// row loss unbiased for the loss of the exact conditional expectation.
  /// With `draw_empty` the empty coalition is also approximated from draws,
  /// sharing random numbers with other coalitions evaluated under `seed`.
  VectorXd pointwise_loss(const Loss& loss, const VectorXd& y, Mask mask, std::uint64_t seed,
                          bool draw_empty = false) {
    const Index p = x_.cols();
    const Index k = x_.rows();
    const Mask all = (Mask{1} << p) - 1;
    mask &= all;
    if (mask == all) return loss.pointwise(y, full_pred_);
    if (mask == 0 && !draw_empty) return loss.pointwise(y, VectorXd::Constant(k, mean_prediction()));
    const MatrixXd pred = draws(mask, seed);
    const VectorXd mean = pred.rowwise().mean();
    VectorXd out = loss.pointwise(y, mean);
    if (loss.kind == LossKind::quadratic && n_draws_ > 1) {
      const double scale = 1.0 / (static_cast<double>(n_draws_) * static_cast<double>(n_draws_ - 1));
      out -= scale * (pred.colwise() - mean).rowwise().squaredNorm();
    }
    return out;
  }

 private:
  // k x n_draws predictions with the complement of `mask` redrawn.
  MatrixXd draws(Mask mask, std::uint64_t seed) {
    const Index p = x_.cols();
    const Index k = x_.rows();

    std::vector<Index> given, drawn;
    for (Index c = 0; c < p; ++c) ((mask >> c) & 1 ? given : drawn).push_back(c);

    MatrixXd big(k * n_draws_, p);
    for (Index d = 0; d < n_draws_; ++d) big.middleRows(d * k, k) = x_;

    if (mode_ == SageMode::marginal) {
      for (Index d = 0; d < n_draws_; ++d) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
        const auto perm = random_permutation(k, rng);
        for (Index i = 0; i < k; ++i)
          for (Index c : drawn) big(d * k + i, c) = x_(perm[i], c);
      }
    } else if (s_->kind() == PerturbationKind::gaussian_conditional) {
      auto it = laws_.find(mask);
      if (it == laws_.end()) it = laws_.emplace(mask, s_->block_law(given)).first;
      const auto& law = it->second;
      const MatrixXd centre = (x_(Eigen::all, given) * law.coef.transpose()).rowwise() + law.intercept.transpose();
      for (Index d = 0; d < n_draws_; ++d) {
        NormalSource normal(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
        const MatrixXd z = normal.matrix(k, p);
        const MatrixXd values = centre + z(Eigen::all, drawn) * law.chol.transpose();
        for (std::size_t c = 0; c < drawn.size(); ++c)
          big.block(d * k, drawn[c], k, 1) = values.col(static_cast<Index>(c));
      }
    } else {
      if (drawn.size() != 1)
        fail(ErrorCode::sampler_kind, std::string(to_string(s_->kind())) +
                                          " can only draw a single coordinate; use gaussian_conditional");
      const MatrixXd rep = s_->draw(x_, drawn[0], n_draws_, seed);
      for (Index d = 0; d < n_draws_; ++d) big.block(d * k, drawn[0], k, 1) = rep.col(d);
    }

    const VectorXd pred = m_.predict_full(big);
    return Eigen::Map<const MatrixXd>(pred.data(), k, n_draws_);
  }

  const FittedPredictor& m_;
  const MatrixXd& x_;
  SageMode mode_;
  const ConditionalSampler* s_;
  Index n_draws_;
  VectorXd full_pred_;
  std::map<Mask, GaussianBlockLaw> laws_;
};

double mean_loss(const Loss& loss, const VectorXd& y, const VectorXd& pred) {
  return loss.pointwise(y, pred).mean();
}

constexpr std::uint64_t kFullModelStream = 0xF0110000ULL;

}  // namespace

ImportanceReport estimate_pfi(const FittedPredictor& m, const Dataset& test, const Loss& loss, Index n_perm,
                              std::uint64_t seed) {
  if (n_perm < 1) fail(ErrorCode::invalid_parameter, "PFI: n_perm must be >= 1");
  check_model(m, test);
  const auto sampler = ConditionalSampler::fit(PerturbationKind::marginal_permutation, test.x());
  const VectorXd base = loss.pointwise(test.y(), m.predict_full(test.x()));
  MatrixXd deltas(test.n(), test.p());
  for (Index j = 0; j < test.p(); ++j) {
    const MatrixXd rep = sampler.draw(test.x(), j, n_perm, derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    const MatrixXd pred = predict_replaced(m, test.x(), j, rep);
    for (Index i = 0; i < test.n(); ++i) {
      double acc = 0.0;
      for (Index d = 0; d < n_perm; ++d) acc += loss(test.y()(i), pred(i, d));
      deltas(i, j) = acc / static_cast<double>(n_perm) - base(i);
    }
  }
  auto r = from_deltas(MethodId::PFI, std::move(deltas));
  add_common_metadata(r, test, loss, seed);
  r.metadata["n_perm"] = std::to_string(n_perm);
  return r;
}

ImportanceReport estimate_cfi(const FittedPredictor& m, const Dataset& test, const Loss& loss,
                              const ConditionalSampler& s, Index n_draws, std::uint64_t seed) {
  if (n_draws < 1) fail(ErrorCode::invalid_parameter, "CFI: n_draws must be >= 1");
  check_model(m, test);
  check_sampler(s, test);
  const VectorXd base = loss.pointwise(test.y(), m.predict_full(test.x()));
  MatrixXd deltas(test.n(), test.p());
  for (Index j = 0; j < test.p(); ++j) {
    const MatrixXd rep = s.draw(test.x(), j, n_draws, derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    const MatrixXd pred = predict_replaced(m, test.x(), j, rep);
    for (Index i = 0; i < test.n(); ++i) {
      double acc = 0.0;
      for (Index d = 0; d < n_draws; ++d) acc += loss(test.y()(i), pred(i, d));
      deltas(i, j) = acc / static_cast<double>(n_draws) - base(i);
    }
  }
  auto r = from_deltas(MethodId::CFI, std::move(deltas));
  add_common_metadata(r, test, loss, seed);
  r.metadata["sampler"] = std::string(to_string(s.kind()));
  r.metadata["n_draws"] = std::to_string(n_draws);
  return r;
}

ImportanceReport estimate_sobol_cpi(const FittedPredictor& m, const Dataset& test, const Loss& loss,
                                    const ConditionalSampler& s, Index n_cal, std::uint64_t seed) {
  if (n_cal < 1) fail(ErrorCode::invalid_parameter, "SobolCPI: n_cal must be >= 1");
  check_model(m, test);
  check_sampler(s, test);
  const VectorXd fitted = m.predict_full(test.x());
  const VectorXd base = loss.pointwise(test.y(), fitted);
  const double factor = static_cast<double>(n_cal) / static_cast<double>(n_cal + 1);
  MatrixXd deltas(test.n(), test.p());
  for (Index j = 0; j < test.p(); ++j) {
    const MatrixXd rep = s.draw(test.x(), j, n_cal, derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    const MatrixXd pred = predict_replaced(m, test.x(), j, rep);
    for (Index i = 0; i < test.n(); ++i) {
      // Averaging offsets keeps an unchanged prediction exactly unchanged.
      const double averaged = fitted(i) + (pred.row(i).array() - fitted(i)).sum() / static_cast<double>(n_cal);
      deltas(i, j) = factor * (loss(test.y()(i), averaged) - base(i));
    }
  }
  auto r = from_deltas(MethodId::SobolCPI, std::move(deltas));
  add_common_metadata(r, test, loss, seed);
  r.metadata["sampler"] = std::string(to_string(s.kind()));
  r.metadata["n_cal"] = std::to_string(n_cal);
  return r;
}

ImportanceReport estimate_loco(const PredictorSpec& spec, const Dataset& train, const Dataset& test,
                               const Loss& loss, std::uint64_t seed) {
  if (train.p() != test.p()) fail(ErrorCode::dimension_mismatch, "LOCO: train/test feature counts differ");
  const Index p = train.p();
  const auto full = fit(spec, train, all_features(p), derive_seed(seed, {kFullModelStream}));
  const VectorXd base = per_sample_loss(full, test, loss);
  MatrixXd deltas(test.n(), p);
  for (Index j = 0; j < p; ++j) {
    PredictorSpec reduced_spec = spec;
    if (p == 1) reduced_spec.kind = PredictorKind::mean;
    const auto reduced = fit(reduced_spec, train, all_but(p, j), derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    deltas.col(j) = per_sample_loss(reduced, test, loss) - base;
  }
  auto r = from_deltas(MethodId::LOCO, std::move(deltas));
  add_common_metadata(r, test, loss, seed);
  r.metadata["model"] = std::string(to_string(spec.kind));
  r.metadata["n_train"] = std::to_string(train.n());
  return r;
}

ImportanceReport estimate_loco_w(const PredictorSpec& spec, const Dataset& d, const Loss& loss, std::uint64_t seed) {
  constexpr Index kMinRows = 20;
  const Index half = d.n() / 2;
  if (std::llround(0.3 * static_cast<double>(half)) < kMinRows)
    fail(ErrorCode::insufficient_data, "LOCO_W: " + std::to_string(d.n()) +
                                           " rows are too few; each fold needs at least " +
                                           std::to_string(kMinRows) + " train and test rows");
  const std::array<double, 2> halves{0.5, 0.5};
  const std::array<double, 2> tt{0.7, 0.3};
  const auto folds = split(d, halves, derive_seed(seed, {1}));
  const auto a = split(folds[0], tt, derive_seed(seed, {2}));
  const auto b = split(folds[1], tt, derive_seed(seed, {3}));
  const Index p = d.p();

  const auto full = fit(spec, a[0], all_features(p), derive_seed(seed, {kFullModelStream}));
  const VectorXd full_losses = per_sample_loss(full, a[1], loss);
  const double full_risk = full_losses.mean();
  const double full_var = a[1].n() > 1 ? (full_losses.array() - full_risk).square().sum() / (a[1].n() - 1.0) : 0.0;

  MatrixXd deltas(b[1].n(), p);
  for (Index j = 0; j < p; ++j) {
    PredictorSpec reduced_spec = spec;
    if (p == 1) reduced_spec.kind = PredictorKind::mean;
    const auto reduced = fit(reduced_spec, b[0], all_but(p, j), derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    deltas.col(j) = per_sample_loss(reduced, b[1], loss).array() - full_risk;
  }
  auto r = from_deltas(MethodId::LOCO_W, std::move(deltas));
  // Both folds are independent, so their variances add.
  for (Index j = 0; j < p; ++j)
    r.std_error(j) = std::sqrt(r.std_error(j) * r.std_error(j) + full_var / static_cast<double>(a[1].n()));
  add_common_metadata(r, b[1], loss, seed);
  r.metadata["model"] = std::string(to_string(spec.kind));
  r.metadata["full_risk"] = exact_string(full_risk);
  return r;
}

ImportanceReport estimate_loci(const PredictorSpec& spec, const Dataset& train, const Dataset& test,
                               const Loss& loss, std::uint64_t seed) {
  if (train.p() != test.p()) fail(ErrorCode::dimension_mismatch, "LOCI: train/test feature counts differ");
  const Index p = train.p();
  PredictorSpec mean_spec = spec;
  mean_spec.kind = PredictorKind::mean;
  const auto baseline = fit(mean_spec, train, {}, 0);
  const VectorXd base = per_sample_loss(baseline, test, loss);
  MatrixXd deltas(test.n(), p);
  for (Index j = 0; j < p; ++j) {
    const auto single = fit(spec, train, {j}, derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    deltas.col(j) = base - per_sample_loss(single, test, loss);
  }
  auto r = from_deltas(MethodId::LOCI, std::move(deltas));
  add_common_metadata(r, test, loss, seed);
  r.metadata["model"] = std::string(to_string(spec.kind));
  return r;
}

ImportanceReport estimate_sage(const FittedPredictor& m, const Dataset& test, const Loss& loss, SageMode mode,
                               const ConditionalSampler* s, Index n_permutations, Index n_draws, std::uint64_t seed) {
  if (n_permutations < 1) fail(ErrorCode::invalid_parameter, "SAGE: n_permutations must be >= 1");
  check_model(m, test);
  const Index p = test.p();
  if (mode == SageMode::conditional && s != nullptr && s->kind() == PerturbationKind::residual_permutation && p > 2)
    fail(ErrorCode::sampler_kind, "conditional SAGE with residual_permutation supports at most 2 features");
  Marginalizer marg(m, test, mode, s, n_draws);
  const VectorXd& y = test.y();
  const double baseline = marg.mean_prediction();
  const double empty_loss = mean_loss(loss, y, VectorXd::Constant(test.n(), baseline));
  const double full_loss = mean_loss(loss, y, marg.full_prediction());

  MatrixXd contrib(n_permutations, p);
  for (Index t = 0; t < n_permutations; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t), 0}));
    const auto order = random_permutation(p, rng);
    const std::uint64_t noise_seed = derive_seed(seed, {static_cast<std::uint64_t>(t), 1});
    Mask mask = 0;
    double prev = empty_loss;
    for (Index pos = 0; pos < p; ++pos) {
      const Index j = order[pos];
      mask |= Mask{1} << j;
      const double cur = pos + 1 == p ? full_loss : marg.pointwise_loss(loss, y, mask, noise_seed).mean();
      contrib(t, j) = prev - cur;
      prev = cur;
    }
  }
  auto r = from_deltas(mode == SageMode::conditional ? MethodId::cSAGE : MethodId::mSAGE, std::move(contrib));
  add_common_metadata(r, test, loss, seed);
  r.metadata["v_full"] = exact_string(empty_loss - full_loss);
  r.metadata["n_permutations"] = std::to_string(n_permutations);
  r.metadata["n_draws"] = std::to_string(n_draws);
  if (s) r.metadata["sampler"] = std::string(to_string(s->kind()));
  return r;
}

ImportanceReport estimate_sage_vf(const FittedPredictor& m, const Dataset& test, const Loss& loss, SageMode mode,
                                  const ConditionalSampler* s, Index n_draws, std::uint64_t seed) {
  check_model(m, test);
  Marginalizer marg(m, test, mode, s, n_draws);
  const VectorXd& y = test.y();
  // The empty coalition can share draws whenever the sampler draws whole blocks.
  const bool shared = mode == SageMode::marginal || s->kind() == PerturbationKind::gaussian_conditional;
  const VectorXd exact_base = loss.pointwise(y, VectorXd::Constant(test.n(), marg.mean_prediction()));
  MatrixXd deltas(test.n(), test.p());
  for (Index j = 0; j < test.p(); ++j) {
    const std::uint64_t sj = derive_seed(seed, {static_cast<std::uint64_t>(j)});
    const VectorXd base = shared ? marg.pointwise_loss(loss, y, 0, sj, true) : exact_base;
    deltas.col(j) = base - marg.pointwise_loss(loss, y, Mask{1} << j, sj);
  }
  auto r = from_deltas(mode == SageMode::conditional ? MethodId::cSAGEvf : MethodId::mSAGEvf, std::move(deltas));
  add_common_metadata(r, test, loss, seed);
  r.metadata["n_draws"] = std::to_string(n_draws);
  if (s) r.metadata["sampler"] = std::string(to_string(s->kind()));
  return r;
}

ImportanceReport estimate_sc_sage(const FittedPredictor& m, const Dataset& test, const Loss& loss,
                                  const ConditionalSampler& s, Index n_draws, std::uint64_t seed) {
  check_model(m, test);
  check_sampler(s, test);
  Marginalizer marg(m, test, SageMode::conditional, &s, n_draws);
  const VectorXd& y = test.y();
  const Index p = test.p();
  const VectorXd base = loss.pointwise(y, marg.full_prediction());
  const Mask all = (Mask{1} << p) - 1;
  MatrixXd deltas(test.n(), p);
  for (Index j = 0; j < p; ++j) {
    deltas.col(j) =
        marg.pointwise_loss(loss, y, all & ~(Mask{1} << j), derive_seed(seed, {static_cast<std::uint64_t>(j)})) - base;
  }
  auto r = from_deltas(MethodId::scSAGE, std::move(deltas));
  add_common_metadata(r, test, loss, seed);
  r.metadata["sampler"] = std::string(to_string(s.kind()));
  r.metadata["n_draws"] = std::to_string(n_draws);
  return r;
}

ImportanceReport estimate_dtsi(const PredictorSpec& spec, const Dataset& train, const Dataset& test,
                               std::uint64_t seed) {
  if (train.p() != test.p()) fail(ErrorCode::dimension_mismatch, "dTSI: train/test feature counts differ");
  const Index p = train.p();
  const auto full = fit(spec, train, all_features(p), derive_seed(seed, {kFullModelStream}));
  const VectorXd full_pred = full.predict_full(test.x());
  const auto resid_model = ConditionalSampler::fit(PerturbationKind::residual_permutation, train.x());
  MatrixXd deltas(test.n(), p);
  VectorXd denominators(p);
  for (Index j = 0; j < p; ++j) {
    PredictorSpec reduced_spec = spec;
    if (p == 1) reduced_spec.kind = PredictorKind::mean;
    const auto reduced = fit(reduced_spec, train, all_but(p, j), derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    const VectorXd diff = full_pred - reduced.predict_full(test.x());

    // Conditional-mean regression of x_j on x_{-j}, fit on train, evaluated on test.
    const VectorXd& coef = resid_model.column_coefficients()[j];
    double denom = 0.0;
    for (Index i = 0; i < test.n(); ++i) {
      double nu = coef(0);
      Index k = 1;
      for (Index c = 0; c < p; ++c)
        if (c != j) nu += coef(k++) * test.x()(i, c);
      const double e = test.x()(i, j) - nu;
      denom += e * e;
    }
    denom /= static_cast<double>(test.n());
    if (!(denom > 1e-8))
      fail(ErrorCode::numerical_rank, "dTSI: feature " + std::to_string(j) +
                                          " has near-zero conditional variance given the others");
    denominators(j) = denom;
    deltas.col(j) = diff.array().square() / denom;
  }
  auto r = from_deltas(MethodId::dTSI, std::move(deltas));
  add_common_metadata(r, test, Loss::quadratic(), seed);
  r.metadata["model"] = std::string(to_string(spec.kind));
  return r;
}

ImportanceReport estimate_glm(const Dataset& train) {
  const Dataset z = standardize(train);
  PredictorSpec spec;
  spec.kind = PredictorKind::ols;
  const auto f = fit(spec, z, all_features(z.p()));
  const LinearFit& lf = *f.linear();
  ImportanceReport r;
  r.method = MethodId::GLM;
  r.score = glm_index(lf);

  // Delta-method standard error of beta_j^2 from the OLS covariance.
  const Index n = z.n();
  const Index p = z.p();
  MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = z.x();
  VectorXd coef(p + 1);
  coef << lf.intercept, lf.coefficients;
  const VectorXd resid = z.y() - design * coef;
  const double sigma2 = n > p + 1 ? resid.squaredNorm() / static_cast<double>(n - p - 1) : 0.0;
  const MatrixXd cov = sigma2 * (design.transpose() * design).inverse();
  r.std_error.resize(p);
  for (Index j = 0; j < p; ++j) r.std_error(j) = 2.0 * std::abs(lf.coefficients(j)) * std::sqrt(cov(j + 1, j + 1));
  r.metadata["n_train"] = std::to_string(n);
  r.metadata["target_index"] = "psi_GLM";
  return r;
}

}  // namespace vimlab
