#pragma once

#include <string_view>
#include <vector>

#include "vimlab/estimators.hpp"

namespace vimlab {

enum class TestKind { sign, wilcoxon, z };

std::string_view to_string(TestKind kind);
TestKind parse_test_kind(std::string_view name);

/// One-sided test of a positive shift in a delta vector.
struct TestResult {
  TestKind kind = TestKind::sign;
  double statistic = 0.0;
  double p_value = 1.0;
  Index n_effective = 0;
};

struct SelectionResult {
  MethodId method = MethodId::PFI;
  TestKind test = TestKind::sign;
  double alpha = 0.05;
  bool bonferroni = false;
  std::vector<Index> selected;
  /// Bonferroni-adjusted when requested, so that selected = {j : p_j <= alpha}.
  VectorXd p_values;
};

/// Exact binomial tail P(Bin(n, 1/2) >= #positive) over nonzero deltas.
TestResult sign_test(const VectorXd& deltas);

/// Signed-rank test on nonzero deltas with average ranks for ties. Exact null
/// distribution up to 50 nonzero deltas, normal approximation with tie and
/// continuity correction beyond.
TestResult wilcoxon_signed_rank(const VectorXd& deltas);

/// Normal approximation to the mean of the deltas; needs at least 30 values.
TestResult z_test(const VectorXd& deltas);

TestResult run_test(TestKind kind, const VectorXd& deltas);

SelectionResult classify_features(const ImportanceReport& r, TestKind kind, double alpha, bool bonferroni = false);

}  // namespace vimlab
