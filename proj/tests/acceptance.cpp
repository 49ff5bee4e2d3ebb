// Acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <thread>

#include "vimlab/experiment.hpp"
#include "vimlab/oracle.hpp"

using namespace vimlab;

namespace {

const Loss kQuad{LossKind::quadratic};

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

ExperimentConfig config(const char* name) { return load_config(std::filesystem::path(VIMLAB_CONFIGS) / name); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s criterion %d: %s; runtime %.1fs (budget %.0fs)%s\n", pass ? "PASS" : "FAIL", id, o.detail.c_str(),
              secs, budget_s, in_time ? "" : " exceeded");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Mean raw score per (method, feature) over repetitions.
std::map<std::string, VectorXd> mean_scores(const std::vector<ResultRow>& rows, Index p) {
  std::map<std::string, VectorXd> sum;
  std::map<std::string, double> reps;
  for (const auto& r : rows) {
    auto& v = sum[r.method];
    if (v.size() == 0) v = VectorXd::Zero(p);
    v(r.feature) += r.raw_score;
    if (r.feature == 0) reps[r.method] += 1.0;
  }
  for (auto& [m, v] : sum) v /= reps[m];
  return sum;
}

std::vector<Index> features(Index p) {
  std::vector<Index> s;
  for (Index k = 0; k < p; ++k) s.push_back(k);
  return s;
}

Outcome c1() {
  Rng rng(101);
  double agree = 0.0, first = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index p = 2 + t % 2;
    const auto d = fixtures::random_joint(rng, p, 3);
    for (Index j = 0; j < p; ++j) {
      const double v2 = exact_tsi(d, j, kQuad, TsiForm::squared_difference);
      const double v3 = exact_tsi(d, j, kQuad, TsiForm::risk_difference);
      const double v4 = exact_tsi(d, j, kQuad, TsiForm::marginalization);
      const double v5 = exact_tsi(d, j, kQuad, TsiForm::perturbation);
      const double v1 = exact_tsi(d, j, kQuad, TsiForm::conditional_variance);
      agree = std::max({agree, std::abs(v2 - v3), std::abs(v2 - v4), std::abs(v2 - v5), std::abs(v3 - v4),
                        std::abs(v3 - v5), std::abs(v4 - v5)});
      first = std::max({first, std::abs(v1 - v2), std::abs(v1 - v3), std::abs(v1 - v4), std::abs(v1 - v5)});
    }
  }
  return {agree <= 1e-12 && first <= 1e-12,
          fmt("100 joints, max pairwise gap forms 2-5 = %.2e", agree) + fmt(", form 1 gap = %.2e", first)};
}

Outcome c2() {
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Index p = 2 + t % 2;
    const Index j = t % p;
    const auto d = fixtures::factored_null_joint(rng, p, j, 3);
    std::vector<Index> others;
    for (Index k = 0; k < p; ++k)
      if (k != j) others.push_back(k);
    const double msagevf =
        exact_value_function(d, {j}, kQuad, ValueMode::marginal) - exact_value_function(d, {}, kQuad, ValueMode::marginal);
    worst = std::max({worst, std::abs(exact_tsi(d, j, kQuad, TsiForm::risk_difference)), std::abs(exact_pfi(d, j, kQuad)),
                      std::abs(exact_shapley(d, j, kQuad, ValueMode::marginal)), std::abs(msagevf),
                      std::abs(exact_sc_sage(d, j, kQuad))});
  }
  const auto coins = fixtures::correlated_coins(0.8);
  const double vf = exact_value_function(coins, {0}, kQuad, ValueMode::conditional);
  const double sh = exact_shapley(coins, 0, kQuad, ValueMode::conditional);
  const bool ok = worst < 1e-10 && std::abs(vf - 0.09) <= 1e-12 && std::abs(sh - 0.045) <= 1e-12;
  return {ok, fmt("50 factored nulls, max |index| = %.2e", worst) + fmt("; coins SAGEvf = %.15g", vf) +
                  fmt(", Shapley = %.15g", sh)};
}

Outcome c3() {
  auto cfg = config("figure1.ini");
  cfg.repetitions = 50;
  cfg.n = 10000;
  cfg.methods = {parse_method_spec("cSAGEvf"), parse_method_spec("CFI"), parse_method_spec("SobolCPI(100)"),
                 parse_method_spec("LOCO")};
  const auto m = mean_scores(run_simulate(cfg, jobs()), 2);
  const GaussianLinearSpec<double> spec{VectorXd::Zero(2), toeplitz_covariance<double>(2, 0.6), VectorXd::Unit(2, 0), 0.0};
  const double truth_vf = gaussian_linear_index(spec, 1, GaussianIndex::SAGEvf);
  const double truth_tsi = gaussian_linear_index(spec, 1, GaussianIndex::TSI);
  const double vf = m.at("cSAGEvf")(1);
  bool ok = std::abs(vf - truth_vf) <= 0.08;
  std::string detail = fmt("50 reps, X_1 means: cSAGEvf %.4f", vf);
  for (const char* name : {"CFI", "SobolCPI(100)", "LOCO"}) {
    const double s = m.at(name)(1);
    ok = ok && std::abs(s - truth_tsi) <= 0.05;
    detail += std::string(", ") + name + fmt(" %.2e", s);
  }
  return {ok, detail};
}

Outcome c4() {
  auto cfg = config("poly_sim.ini");
  cfg.repetitions = 30;
  cfg.n = 2000;
  const auto rows = run_simulate(cfg, jobs());
  const auto m = mean_scores(rows, cfg.p);

  VectorXd cfi_half = m.at("CFI") / 2.0;
  std::vector<std::pair<std::string, VectorXd>> tsi = {{"CFI/2", normalize_max_abs(cfi_half)},
                                                      {"SobolCPI(100)", normalize_max_abs(m.at("SobolCPI(100)"))},
                                                      {"LOCO", normalize_max_abs(m.at("LOCO"))},
                                                      {"scSAGE", normalize_max_abs(m.at("scSAGE"))}};
  double gap = 0.0;
  std::string gap_at;
  for (std::size_t a = 0; a < tsi.size(); ++a)
    for (std::size_t b = a + 1; b < tsi.size(); ++b) {
      Index k;
      const double g = (tsi[a].second - tsi[b].second).cwiseAbs().maxCoeff(&k);
      if (g > gap) {
        gap = g;
        gap_at = tsi[a].first + " vs " + tsi[b].first + " feature " + std::to_string(k);
      }
    }

  double null_worst = 0.0;
  std::string null_at;
  for (const char* name : {"PFI", "CFI", "SobolCPI(100)", "LOCO", "scSAGE", "mSAGE", "mSAGEvf", "dTSI"})
    for (Index j : kPolyNullFeatures) {
      const double v = std::abs(m.at(name)(j));
      if (v > null_worst) {
        null_worst = v;
        null_at = std::string(name) + " feature " + std::to_string(j);
      }
    }

  auto max_null = [&](const char* name) {
    double best = -1e300;
    for (Index j : kPolyNullFeatures) best = std::max(best, m.at(name)(j));
    return best;
  };
  const double vf = max_null("cSAGEvf"), loci = max_null("LOCI");

  const bool a = gap <= 0.1, b = null_worst < 0.05, c = vf > 0.1 && loci > 0.1;
  std::string detail = std::string("(a) ") + (a ? "ok" : "fail") + fmt(" max normalized gap %.3f", gap) + " at " + gap_at +
                       "; (b) " + (b ? "ok" : "fail") + fmt(" max null |mean raw| %.4f", null_worst) + " at " +
                       null_at + "; (c) " + (c ? "ok" : "fail") + fmt(" max null cSAGEvf %.3f", vf) +
                       fmt(", LOCI %.3f", loci);
  return {a && b && c, detail};
}

Outcome c5() {
  const Index n = 1000, p = 10, reps = 200;
  const double alpha = 0.05;
  std::vector<int> rejections(p, 0);
  for (Index r = 0; r < reps; ++r) {
    const std::uint64_t rs = derive_seed(505, {static_cast<std::uint64_t>(r)});
    const MatrixXd x = gen_toeplitz_gaussian(n, p, 0.6, derive_seed(rs, {0}));
    VectorXd y(n);
    NormalSource noise(derive_seed(rs, {1}));
    for (Index i = 0; i < n; ++i) y(i) = noise();
    const Dataset d(x, y);
    const std::array<double, 2> frac{0.7, 0.3};
    const auto parts = split(d, frac, derive_seed(rs, {2}));
    const auto model = fit({PredictorKind::ols}, parts[0], all_features(p));
    const auto sampler = ConditionalSampler::fit(PerturbationKind::gaussian_conditional, parts[0].x());
    const auto rep = estimate_sobol_cpi(model, parts[1], kQuad, sampler, 100, derive_seed(rs, {3}));
    for (Index j : classify_features(rep, TestKind::sign, alpha).selected) ++rejections[j];
  }
  const int worst = *std::max_element(rejections.begin(), rejections.end());
  const double rate = double(worst) / double(reps);
  return {rate <= 0.10, fmt("pure noise, OLS model, 200 reps; max per-feature rejection rate %.3f", rate)};
}

Outcome c6() {
  auto cfg = config("figure1_population.ini");
  cfg.n = 20000;
  cfg.repetitions = 1;
  cfg.methods = {parse_method_spec("SobolCPI(100)")};
  const auto m = mean_scores(run_simulate(cfg, jobs()), 2);
  const double s0 = m.at("SobolCPI(100)")(0), s1 = m.at("SobolCPI(100)")(1);
  return {std::abs(s0 - 0.64) < 0.03 && std::abs(s1) < 0.03,
          fmt("n = 20000, SobolCPI(100) feature 0 = %.4f", s0) + fmt(", feature 1 = %.2e", s1)};
}

Outcome c7() {
  double cpi_gap = 0.0;
  for (int t = 0; t < 6; ++t) {
    const MatrixXd x = gen_toeplitz_gaussian(800, 5, 0.5, 700 + t);
    const Dataset d(x, x.col(0) - x.col(1) * x.col(2) + 0.5 * x.col(3).array().square().matrix());
    PredictorSpec spec{PredictorKind::boosted_trees};
    spec.boost = {40, 0.2, 3, 5};
    const auto m = fit(spec, d, all_features(5), t);
    const auto kind = t % 2 ? PerturbationKind::residual_permutation : PerturbationKind::gaussian_conditional;
    const auto s = ConditionalSampler::fit(kind, x);
    const auto cfi = estimate_cfi(m, d, kQuad, s, 1, 900 + t);
    const auto cpi = estimate_sobol_cpi(m, d, kQuad, s, 1, 900 + t);
    cpi_gap = std::max(cpi_gap, (cpi.deltas - 0.5 * cfi.deltas).cwiseAbs().maxCoeff());
  }

  double worst_ratio = 0.0;
  int runs = 0;
  for (int t = 0; t < 8; ++t) {
    const Index p = 3 + t % 3;
    const MatrixXd x = gen_toeplitz_gaussian(500, p, 0.6, 800 + t);
    const Dataset d(x, x.col(0) + 2.0 * x.col(1));
    const auto m = fit({PredictorKind::ols}, d, all_features(p));
    const auto s = ConditionalSampler::fit(PerturbationKind::gaussian_conditional, x);
    const auto mode = t % 2 ? SageMode::marginal : SageMode::conditional;
    const auto r = estimate_sage(m, d, kQuad, mode, mode == SageMode::conditional ? &s : nullptr, 32, 5, 850 + t);
    const double v_full = std::stod(r.metadata.at("v_full"));
    // per-ordering sums give the Monte Carlo error of the total
    const VectorXd tot = r.deltas.rowwise().sum();
    const double sd = std::sqrt((tot.array() - tot.mean()).square().sum() / double(tot.size() - 1));
    const double se = std::max(sd / std::sqrt(double(tot.size())), std::sqrt(r.std_error.squaredNorm()));
    const double gap = std::abs(r.score.sum() - v_full);
    worst_ratio = std::max(worst_ratio, se > 0 ? gap / se : (gap == 0 ? 0.0 : 1e300));
    ++runs;
  }
  return {cpi_gap <= 1e-12 && worst_ratio <= 3.0,
          fmt("max |SobolCPI(1) - CFI/2| = %.2e", cpi_gap) + fmt("; SAGE efficiency gap <= %.2e SE", worst_ratio) +
              " over " + std::to_string(runs) + " runs"};
}

double brute_wilcoxon(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t k = 0; k < n; ++k) {
      less += std::abs(d[k]) < std::abs(d[i]);
      equal += std::abs(d[k]) == std::abs(d[i]);
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += rank[i];
  std::size_t hits = 0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if ((mask >> i) & 1) w += rank[i];
    hits += w >= observed - 1e-9;
  }
  return double(hits) / double(total);
}

Outcome c8() {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> level(1, 4);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  long checked = 0;
  for (std::size_t n = 5; n <= 10; ++n)
    for (int t = 0; t < 3; ++t) {
      std::vector<double> mag(n);
      for (auto& v : mag) v = t == 0 ? std::abs(nd(rng)) + 0.01 : double(level(rng)) * (t == 1 ? 1.0 : 0.25);
      for (std::size_t signs = 0; signs < (std::size_t{1} << n); ++signs) {
        std::vector<double> d(n);
        VectorXd e(static_cast<Index>(n));
        for (std::size_t i = 0; i < n; ++i) e(i) = d[i] = (signs >> i) & 1 ? mag[i] : -mag[i];
        worst = std::max(worst, std::abs(wilcoxon_signed_rank(e).p_value - brute_wilcoxon(d)));
        ++checked;
      }
    }
  return {worst <= 1e-12,
          std::to_string(checked) + fmt(" sign patterns for n = 5..10 incl. ties, max gap %.2e", worst)};
}

}  // namespace

int main() {
  criterion(1, 10, c1);
  criterion(2, 10, c2);
  criterion(3, 600, c3);
  criterion(4, 900, c4);
  criterion(5, 600, c5);
  criterion(6, 120, c6);
  criterion(7, 600, c7);
  criterion(8, 600, c8);
  return failures == 0 ? 0 : 1;
}
