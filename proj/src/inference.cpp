#include "vimlab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vimlab {

namespace {

constexpr Index kExactWilcoxonLimit = 50;

double upper_normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::vector<double> nonzero(const VectorXd& deltas) {
  std::vector<double> out;
  for (Index i = 0; i < deltas.size(); ++i) {
    if (!std::isfinite(deltas(i))) fail(ErrorCode::non_finite, "test input contains a non-finite delta");
    if (deltas(i) != 0.0) out.push_back(deltas(i));
  }
  return out;
}

// Ranks of |v| with ties sharing the average rank, doubled so they stay integral.
std::vector<Index> doubled_ranks(const std::vector<double>& v, std::vector<Index>& tie_sizes) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(v[a]) < std::abs(v[b]); });
  std::vector<Index> ranks(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && std::abs(v[order[end]]) == std::abs(v[order[start]])) ++end;
    // average of ranks start+1 .. end, doubled
    const Index twice_avg = static_cast<Index>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = twice_avg;
    tie_sizes.push_back(static_cast<Index>(end - start));
    start = end;
  }
  return ranks;
}

}  // namespace

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::sign: return "sign";
    case TestKind::wilcoxon: return "wilcoxon";
    case TestKind::z: return "z";
  }
  return "?";
}

TestKind parse_test_kind(std::string_view name) {
  if (name == "sign") return TestKind::sign;
  if (name == "wilcoxon") return TestKind::wilcoxon;
  if (name == "z") return TestKind::z;
  fail(ErrorCode::invalid_parameter, "unknown test kind '" + std::string(name) + "'");
}

TestResult sign_test(const VectorXd& deltas) {
  const auto v = nonzero(deltas);
  TestResult r{TestKind::sign, 0.0, 1.0, static_cast<Index>(v.size())};
  if (v.empty()) return r;
  const Index n = r.n_effective;
  const Index k = static_cast<Index>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0.0; }));
  r.statistic = static_cast<double>(k);
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  double tail = 0.0;
  for (Index i = k; i <= n; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + log_half_n);
  r.p_value = std::clamp(tail, 0.0, 1.0);
  return r;
}

TestResult wilcoxon_signed_rank(const VectorXd& deltas) {
  const auto v = nonzero(deltas);
  const Index n = static_cast<Index>(v.size());
  if (n < 5)
    fail(ErrorCode::insufficient_data,
         "wilcoxon_signed_rank: fewer than 5 nonzero deltas; use sign_test instead");
  std::vector<Index> ties;
  const auto ranks = doubled_ranks(v, ties);
  Index w2 = 0;
  for (Index i = 0; i < n; ++i)
    if (v[i] > 0.0) w2 += ranks[i];
  TestResult r{TestKind::wilcoxon, 0.5 * static_cast<double>(w2), 1.0, n};

  if (n <= kExactWilcoxonLimit) {
    // Count sign patterns by doubled positive-rank sum.
    const Index total = std::accumulate(ranks.begin(), ranks.end(), Index{0});
    std::vector<double> count(static_cast<std::size_t>(total + 1), 0.0);
    count[0] = 1.0;
    Index reach = 0;
    for (Index rk : ranks) {
      for (Index s = reach; s >= 0; --s)
        if (count[s] != 0.0) count[s + rk] += count[s];
      reach += rk;
    }
    double upper = 0.0;
    for (Index s = w2; s <= total; ++s) upper += count[s];
    r.p_value = std::clamp(std::ldexp(upper, -static_cast<int>(n)), 0.0, 1.0);
    return r;
  }

  const double nd = static_cast<double>(n);
  double tie_term = 0.0;
  for (Index t : ties) tie_term += static_cast<double>(t) * t * t - t;
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (r.statistic - mean - 0.5) / std::sqrt(var);
  r.p_value = std::clamp(upper_normal_tail(z), 0.0, 1.0);
  return r;
}

TestResult z_test(const VectorXd& deltas) {
  const Index n = deltas.size();
  if (n < 30) fail(ErrorCode::insufficient_data, "z_test: needs at least 30 deltas");
  if (!deltas.allFinite()) fail(ErrorCode::non_finite, "z_test: non-finite delta");
  const double mean = deltas.mean();
  const double var = (deltas.array() - mean).square().sum() / static_cast<double>(n - 1);
  TestResult r{TestKind::z, 0.0, 1.0, n};
  if (!(var > 0.0)) {
    r.statistic = mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.p_value = mean > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.statistic = mean / std::sqrt(var / static_cast<double>(n));
  r.p_value = std::clamp(upper_normal_tail(r.statistic), 0.0, 1.0);
  return r;
}

TestResult run_test(TestKind kind, const VectorXd& deltas) {
  switch (kind) {
    case TestKind::sign: return sign_test(deltas);
    case TestKind::wilcoxon: return wilcoxon_signed_rank(deltas);
    case TestKind::z: return z_test(deltas);
  }
  fail(ErrorCode::invalid_parameter, "run_test: unknown test kind");
}

SelectionResult classify_features(const ImportanceReport& r, TestKind kind, double alpha, bool bonferroni) {
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorCode::invalid_parameter, "classify_features: alpha must lie in (0, 1]");
  if (!r.has_deltas())
    fail(ErrorCode::unsupported, "classify_features: " + std::string(to_string(r.method)) + " reports no per-sample deltas");
  const Index p = r.deltas.cols();
  SelectionResult out;
  out.method = r.method;
  out.test = kind;
  out.alpha = alpha;
  out.bonferroni = bonferroni;
  out.p_values.resize(p);
  for (Index j = 0; j < p; ++j) {
    double pv = 1.0;
    try {
      pv = run_test(kind, r.deltas.col(j)).p_value;
    } catch (const Error& e) {
      // Too few nonzero deltas is no evidence against the null.
      if (e.code() != ErrorCode::insufficient_data || kind != TestKind::wilcoxon) throw;
    }
    if (bonferroni) pv = std::min(1.0, pv * static_cast<double>(p));
    out.p_values(j) = pv;
    if (pv <= alpha) out.selected.push_back(j);
  }
  return out;
}

}  // namespace vimlab
