#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vimlab/core_data.hpp"
#include "vimlab/estimators.hpp"
#include "vimlab/inference.hpp"
#include "vimlab/predictors.hpp"
#include "vimlab/samplers.hpp"

namespace vimlab {

enum class ExperimentKind { figure1, poly_sim, csv_analysis, convergence, oracle_check };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

/// A configured method with an optional Monte Carlo size: n_cal for SobolCPI,
/// n_perm for PFI, n_draws for CFI and the SAGE family.
struct MethodSpec {
  MethodId id = MethodId::PFI;
  std::optional<Index> arg;

  std::string label() const;
};

MethodSpec parse_method_spec(std::string_view token);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::figure1;
  std::optional<std::uint64_t> seed;
  Index repetitions = 1;
  std::string output;

  // data
  Index n = 2000;
  Index p = 10;
  double rho = 0.6;
  double beta = 1.0;
  std::optional<double> noise_sd;
  ExperimentKind design = ExperimentKind::figure1;
  std::string csv;
  std::string target = "y";
  double train_fraction = 0.7;
  std::vector<Index> n_grid;

  // model
  PredictorSpec model{PredictorKind::boosted_trees, 0.0, {}, {}};
  bool population = false;

  // methods
  std::vector<MethodSpec> methods;
  std::optional<PerturbationKind> sampler;
  Index n_perm = 10;
  Index n_draws = 1;
  Index n_permutations = 64;
  Index n_marginal_draws = 50;
  Index n_cal = 100;

  // inference
  std::optional<TestKind> test;
  double alpha = 0.05;
  bool bonferroni = false;
  LossKind loss = LossKind::quadratic;

  // oracle_check
  Index n_joints = 100;
  std::string joint;

  /// Throws ErrorCode::validation naming the offending field.
  void validate() const;

  /// Data-generating kind of each repetition.
  ExperimentKind data_kind() const { return kind == ExperimentKind::convergence ? design : kind; }
  double resolved_noise_sd() const;
  PerturbationKind resolved_sampler() const;
};

/// INI-style config; unknown sections or keys are rejected.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolved config, defaults included, as pretty-printed JSON.
std::string config_json(const ExperimentConfig& cfg);

struct ResultRow {
  Index repetition = 0;
  std::string method;
  Index feature = 0;
  double raw_score = 0.0;
  double normalized_score = 0.0;
  double std_error = 0.0;
  double p_value = 0.0;  // NaN when no test was run
};

struct ConvergenceRow {
  Index n = 0;
  std::string method;
  Index feature = 0;
  double mean_score = 0.0;
  double sd_score = 0.0;
};

struct OracleLine {
  std::string name;
  double deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

/// Seed of repetition r, shared by simulate and analyze.
std::uint64_t repetition_seed(std::uint64_t root, Index repetition);

/// The full dataset a simulated repetition draws before splitting.
Dataset simulate_dataset(const ExperimentConfig& cfg, Index n, std::uint64_t rep_seed);

std::vector<ResultRow> run_simulate(const ExperimentConfig& cfg, int jobs = 1);
std::vector<ResultRow> run_analyze(const ExperimentConfig& cfg, int jobs = 1);
std::vector<OracleLine> run_oracle_check(const ExperimentConfig& cfg);
std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& cfg, int jobs = 1);

void write_results(std::ostream& out, const std::vector<ResultRow>& rows);
void write_convergence(std::ostream& out, const std::vector<ConvergenceRow>& rows);
void write_oracle_report(std::ostream& out, const std::vector<OracleLine>& lines);

/// Shortest round-trip decimal, "NA" for NaN.
std::string format_number(double v);

}  // namespace vimlab
