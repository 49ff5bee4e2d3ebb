#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "vimlab/core_data.hpp"
#include "vimlab/predictors.hpp"
#include "vimlab/samplers.hpp"

namespace vimlab {

enum class MethodId { PFI, CFI, SobolCPI, LOCO, LOCO_W, LOCI, cSAGE, cSAGEvf, mSAGE, mSAGEvf, scSAGE, dTSI, GLM };

/// Population quantity a method estimates.
enum class IndexTag { TSI, PFI, SAGE, mSAGE, LOCI, mSAGEvf, dTSI, GLM };

enum class EstimationStyle { perturbation, marginalization, refitting };

std::string_view to_string(MethodId id);
std::string_view to_string(IndexTag tag);
std::string_view to_string(EstimationStyle style);
MethodId parse_method_id(std::string_view name);

IndexTag target_index(MethodId id);
EstimationStyle estimation_style(MethodId id);

/// True for methods whose target index is zero exactly on conditionally null
/// features.
bool satisfies_minimal_axiom(MethodId id);

/// Per-feature importance estimates.
///
/// `deltas` has one column per feature. For most methods a row is a test
/// sample and the column mean is the score. SAGE methods store one row per
/// sampled ordering; LOCO_W stores reduced-model losses on its second fold
/// centred by the full-model risk of the first fold.
struct ImportanceReport {
  MethodId method = MethodId::PFI;
  VectorXd score;
  MatrixXd deltas;
  VectorXd std_error;
  std::optional<VectorXd> p_value;
  std::map<std::string, std::string> metadata;

  Index p() const { return score.size(); }
  bool has_deltas() const { return deltas.rows() > 0; }
};

enum class SageMode { conditional, marginal };

std::string_view to_string(SageMode mode);

ImportanceReport estimate_pfi(const FittedPredictor& m, const Dataset& test, const Loss& loss, Index n_perm,
                              std::uint64_t seed);

ImportanceReport estimate_cfi(const FittedPredictor& m, const Dataset& test, const Loss& loss,
                              const ConditionalSampler& s, Index n_draws, std::uint64_t seed);

ImportanceReport estimate_sobol_cpi(const FittedPredictor& m, const Dataset& test, const Loss& loss,
                                    const ConditionalSampler& s, Index n_cal, std::uint64_t seed);

ImportanceReport estimate_loco(const PredictorSpec& spec, const Dataset& train, const Dataset& test,
                               const Loss& loss, std::uint64_t seed);

ImportanceReport estimate_loco_w(const PredictorSpec& spec, const Dataset& d, const Loss& loss, std::uint64_t seed);

ImportanceReport estimate_loci(const PredictorSpec& spec, const Dataset& train, const Dataset& test,
                               const Loss& loss, std::uint64_t seed);

/// Monte Carlo SAGE over random feature orderings. In conditional mode the
/// out-of-coalition block is drawn from `s` given the coalition; in marginal
/// mode it is taken jointly from a random permutation of the test rows.
ImportanceReport estimate_sage(const FittedPredictor& m, const Dataset& test, const Loss& loss, SageMode mode,
                               const ConditionalSampler* s, Index n_permutations, Index n_draws, std::uint64_t seed);

ImportanceReport estimate_sage_vf(const FittedPredictor& m, const Dataset& test, const Loss& loss, SageMode mode,
                                  const ConditionalSampler* s, Index n_draws, std::uint64_t seed);

ImportanceReport estimate_sc_sage(const FittedPredictor& m, const Dataset& test, const Loss& loss,
                                  const ConditionalSampler& s, Index n_draws, std::uint64_t seed);

/// Decorrelated total Sobol index under quadratic loss.
ImportanceReport estimate_dtsi(const PredictorSpec& spec, const Dataset& train, const Dataset& test,
                               std::uint64_t seed);

/// Squared OLS coefficients on standardized covariates. No per-sample deltas.
ImportanceReport estimate_glm(const Dataset& train);

/// Divides by the largest absolute entry; an all-zero vector is returned unchanged.
VectorXd normalize_max_abs(const VectorXd& scores);

}  // namespace vimlab
