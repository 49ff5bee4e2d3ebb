#include "vimlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <functional>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "vimlab/oracle.hpp"
#include "vimlab/random.hpp"

namespace vimlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  fail(ErrorCode::validation, "config " + field + ": " + why);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) invalid(field, "cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  invalid(field, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename Fn>
auto rethrow_as_validation(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    invalid(field, e.what());
  }
}

// Runs fn(0..count-1) on up to `jobs` threads; the lowest-index failure is rethrown.
template <typename Fn>
void parallel_for(Index count, int jobs, Fn&& fn) {
  const int workers = static_cast<int>(std::clamp<Index>(jobs, 1, std::max<Index>(count, 1)));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<Index> next{0};
  auto work = [&] {
    for (Index i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

bool needs_sampler(MethodId id) {
  switch (id) {
    case MethodId::CFI:
    case MethodId::SobolCPI:
    case MethodId::cSAGE:
    case MethodId::cSAGEvf:
    case MethodId::scSAGE: return true;
    default: return false;
  }
}

bool refits(MethodId id) { return estimation_style(id) == EstimationStyle::refitting; }

struct Fitted {
  Dataset train;
  Dataset test;
  Dataset full;
};

ImportanceReport run_method(const ExperimentConfig& cfg, const MethodSpec& ms, const FittedPredictor& m,
                            const Fitted& data, const ConditionalSampler* s, std::uint64_t seed) {
  const Loss loss{cfg.loss};
  const Dataset& test = data.test;
  const Index k = ms.arg.value_or(cfg.n_marginal_draws);
  switch (ms.id) {
    case MethodId::PFI: return estimate_pfi(m, test, loss, ms.arg.value_or(cfg.n_perm), seed);
    case MethodId::CFI: return estimate_cfi(m, test, loss, *s, ms.arg.value_or(cfg.n_draws), seed);
    case MethodId::SobolCPI: return estimate_sobol_cpi(m, test, loss, *s, ms.arg.value_or(cfg.n_cal), seed);
    case MethodId::LOCO: return estimate_loco(cfg.model, data.train, test, loss, seed);
    case MethodId::LOCO_W: return estimate_loco_w(cfg.model, data.full, loss, seed);
    case MethodId::LOCI: return estimate_loci(cfg.model, data.train, test, loss, seed);
    case MethodId::cSAGE:
      return estimate_sage(m, test, loss, SageMode::conditional, s, cfg.n_permutations, k, seed);
    case MethodId::mSAGE:
      return estimate_sage(m, test, loss, SageMode::marginal, nullptr, cfg.n_permutations, k, seed);
    case MethodId::cSAGEvf: return estimate_sage_vf(m, test, loss, SageMode::conditional, s, k, seed);
    case MethodId::mSAGEvf: return estimate_sage_vf(m, test, loss, SageMode::marginal, nullptr, k, seed);
    case MethodId::scSAGE: return estimate_sc_sage(m, test, loss, *s, k, seed);
    case MethodId::dTSI:
      if (cfg.loss != LossKind::quadratic) fail(ErrorCode::invalid_parameter, "dTSI requires quadratic loss");
      return estimate_dtsi(cfg.model, data.train, test, seed);
    case MethodId::GLM: return estimate_glm(data.train);
  }
  fail(ErrorCode::invalid_parameter, "unknown method");
}

// Every configured method on one dataset; rows unsorted.
std::vector<ResultRow> run_repetition(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t rep_seed,
                                      Index repetition) {
  const Index p = data.p();
  std::optional<Fitted> parts;
  std::optional<FittedPredictor> model;
  std::optional<ConditionalSampler> sampler;
  const bool any_sampler =
      std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const MethodSpec& m) { return needs_sampler(m.id); });

  if (cfg.population) {
    parts.emplace(Fitted{data, data, data});
    VectorXd coef = VectorXd::Zero(p);
    coef(0) = cfg.beta;
    model.emplace(FittedPredictor::from_linear(0.0, coef, all_features(p)));
    if (any_sampler) {
      if (cfg.resolved_sampler() == PerturbationKind::gaussian_conditional)
        sampler.emplace(ConditionalSampler::gaussian(VectorXd::Zero(p), toeplitz_covariance<double>(p, cfg.rho)));
      else
        sampler.emplace(ConditionalSampler::fit(cfg.resolved_sampler(), data.x()));
    }
  } else {
    const std::array<double, 2> fractions{cfg.train_fraction, 1.0 - cfg.train_fraction};
    auto sp = split(data, fractions, derive_seed(rep_seed, {1}));
    parts.emplace(Fitted{sp[0], sp[1], data});
    const bool any_fixed =
        std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const MethodSpec& m) { return !refits(m.id); });
    if (any_fixed) model.emplace(fit(cfg.model, parts->train, all_features(p), derive_seed(rep_seed, {2})));
    if (any_sampler) sampler.emplace(ConditionalSampler::fit(cfg.resolved_sampler(), parts->train.x()));
  }

  std::vector<ResultRow> rows;
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    const MethodSpec& ms = cfg.methods[k];
    const std::string label = ms.label();
    ImportanceReport r;
    VectorXd pv = VectorXd::Constant(p, kNaN);
    try {
      const std::uint64_t seed = derive_seed(rep_seed, {3, static_cast<std::uint64_t>(k)});
      const FittedPredictor placeholder = FittedPredictor::constant(0.0);
      r = run_method(cfg, ms, model ? *model : placeholder, *parts, sampler ? &*sampler : nullptr, seed);
      if (cfg.test && r.has_deltas())
        pv = classify_features(r, *cfg.test, cfg.alpha, cfg.bonferroni).p_values;
      else if (r.p_value)
        pv = *r.p_value;
    } catch (const Error& e) {
      throw Error(e.code(), label + ": " + e.what());
    }
    const VectorXd normalized = normalize_max_abs(r.score);
    for (Index j = 0; j < p; ++j)
      rows.push_back({repetition, label, j, r.score(j), normalized(j),
                      r.std_error.size() == p ? r.std_error(j) : kNaN, pv(j)});
  }
  return rows;
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.repetition, a.method, a.feature) < std::tie(b.repetition, b.method, b.feature);
  });
}

std::vector<ResultRow> run_repetitions(const ExperimentConfig& cfg, int jobs,
                                       const std::function<Dataset(std::uint64_t)>& make_data) {
  std::vector<std::vector<ResultRow>> per_rep(static_cast<std::size_t>(cfg.repetitions));
  parallel_for(cfg.repetitions, jobs, [&](Index r) {
    const std::uint64_t rs = repetition_seed(*cfg.seed, r);
    per_rep[r] = run_repetition(cfg, make_data(rs), rs, r);
  });
  std::vector<ResultRow> rows;
  for (auto& v : per_rep) rows.insert(rows.end(), v.begin(), v.end());
  sort_rows(rows);
  return rows;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::figure1: return "figure1";
    case ExperimentKind::poly_sim: return "poly_sim";
    case ExperimentKind::csv_analysis: return "csv_analysis";
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::oracle_check: return "oracle_check";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::figure1, ExperimentKind::poly_sim, ExperimentKind::csv_analysis,
                 ExperimentKind::convergence, ExperimentKind::oracle_check})
    if (to_string(k) == name) return k;
  fail(ErrorCode::validation, "unknown experiment kind '" + std::string(name) + "'");
}

std::string MethodSpec::label() const {
  std::string name(to_string(id));
  return arg ? name + "(" + std::to_string(*arg) + ")" : name;
}

MethodSpec parse_method_spec(std::string_view token) {
  const std::string t = trim(token);
  MethodSpec m;
  const auto open = t.find('(');
  if (open == std::string::npos) {
    m.id = parse_method_id(t);
    return m;
  }
  if (t.back() != ')') fail(ErrorCode::validation, "malformed method '" + t + "'");
  m.id = parse_method_id(t.substr(0, open));
  switch (m.id) {
    case MethodId::LOCO:
    case MethodId::LOCO_W:
    case MethodId::LOCI:
    case MethodId::dTSI:
    case MethodId::GLM: fail(ErrorCode::validation, "method '" + t + "' takes no argument");
    default: break;
  }
  m.arg = parse_number<Index>("methods.list", t.substr(open + 1, t.size() - open - 2));
  if (*m.arg < 1) fail(ErrorCode::validation, "method '" + t + "': argument must be >= 1");
  return m;
}

double ExperimentConfig::resolved_noise_sd() const {
  if (noise_sd) return *noise_sd;
  return data_kind() == ExperimentKind::poly_sim ? 0.1 : 0.0;
}

PerturbationKind ExperimentConfig::resolved_sampler() const {
  if (sampler) return *sampler;
  return kind == ExperimentKind::csv_analysis ? PerturbationKind::residual_permutation
                                              : PerturbationKind::gaussian_conditional;
}

void ExperimentConfig::validate() const {
  if (!seed) invalid("experiment.seed", "required");
  if (repetitions < 1) invalid("experiment.repetitions", "must be >= 1");
  if (kind == ExperimentKind::oracle_check) {
    if (n_joints < 1) invalid("oracle.n_joints", "must be >= 1");
    return;
  }
  if (methods.empty()) invalid("methods.list", "at least one method is required");
  const ExperimentKind dk = data_kind();
  if (kind == ExperimentKind::convergence) {
    if (design != ExperimentKind::figure1 && design != ExperimentKind::poly_sim)
      invalid("data.design", "must be figure1 or poly_sim");
    if (n_grid.empty()) invalid("data.n_grid", "required for convergence");
    for (Index v : n_grid)
      if (v < 10) invalid("data.n_grid", "every n must be >= 10");
  } else if (n < 10 && dk != ExperimentKind::csv_analysis) {
    invalid("data.n", "must be >= 10");
  }
  if (dk == ExperimentKind::poly_sim && p < 9) invalid("data.p", "poly_sim needs p >= 9");
  if (!(std::abs(rho) < 1.0)) invalid("data.rho", "|rho| must be < 1");
  if (!std::isfinite(beta)) invalid("data.beta", "must be finite");
  if (noise_sd && !(*noise_sd >= 0.0)) invalid("data.noise_sd", "must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) invalid("data.train_fraction", "must lie in (0, 1)");
  if (kind == ExperimentKind::csv_analysis && csv.empty()) invalid("data.csv", "required for csv_analysis");
  if (population) {
    if (dk != ExperimentKind::figure1) invalid("model.population", "only available for the figure1 design");
    for (const auto& m : methods)
      if (refits(m.id)) invalid("model.population", m.label() + " refits models and needs a trained predictor");
  }
  rethrow_as_validation("model", [&] { model.validate(); return 0; });
  if (n_perm < 1) invalid("methods.n_perm", "must be >= 1");
  if (n_draws < 1) invalid("methods.n_draws", "must be >= 1");
  if (n_permutations < 1) invalid("methods.n_permutations", "must be >= 1");
  if (n_marginal_draws < 1) invalid("methods.n_marginal_draws", "must be >= 1");
  if (n_cal < 1) invalid("methods.n_cal", "must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) invalid("inference.alpha", "must lie in (0, 1]");
}

ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::validation, std::string("config: ") + e.what());
  }
  static const std::map<std::string, std::set<std::string>> allowed{
      {"experiment", {"kind", "seed", "repetitions", "output"}},
      {"data", {"n", "p", "rho", "beta", "noise_sd", "design", "csv", "target", "train_fraction", "n_grid"}},
      {"model",
       {"kind", "lambda", "n_trees", "max_depth", "min_leaf", "mtry", "n_rounds", "learning_rate", "population"}},
      {"methods", {"list", "sampler", "n_perm", "n_draws", "n_permutations", "n_marginal_draws", "n_cal"}},
      {"inference", {"test", "alpha", "bonferroni", "loss"}},
      {"oracle", {"n_joints", "joint"}},
  };
  ExperimentConfig cfg;
  bool has_kind = false;
  for (const auto& [section, body] : tree) {
    const auto sec = allowed.find(section);
    if (sec == allowed.end()) {
      if (body.empty()) invalid(section, "key outside any section");
      invalid("[" + section + "]", "unknown section");
    }
    for (const auto& [key, node] : body) {
      const std::string field = section + "." + key;
      if (!sec->second.count(key)) invalid(field, "unknown key");
      const std::string v = trim(node.data());
      auto as_index = [&] { return parse_number<Index>(field, v); };
      auto as_int = [&] { return parse_number<int>(field, v); };
      auto as_double = [&] { return parse_number<double>(field, v); };
      if (section == "experiment") {
        if (key == "kind") {
          cfg.kind = rethrow_as_validation(field, [&] { return parse_experiment_kind(v); });
          has_kind = true;
        } else if (key == "seed") {
          cfg.seed = parse_number<std::uint64_t>(field, v);
        } else if (key == "repetitions") {
          cfg.repetitions = as_index();
        } else {
          cfg.output = v;
        }
      } else if (section == "data") {
        if (key == "n") cfg.n = as_index();
        else if (key == "p") cfg.p = as_index();
        else if (key == "rho") cfg.rho = as_double();
        else if (key == "beta") cfg.beta = as_double();
        else if (key == "noise_sd") cfg.noise_sd = as_double();
        else if (key == "design") cfg.design = rethrow_as_validation(field, [&] { return parse_experiment_kind(v); });
        else if (key == "csv") cfg.csv = v;
        else if (key == "target") cfg.target = v;
        else if (key == "train_fraction") cfg.train_fraction = as_double();
        else
          for (const auto& item : split_list(v)) cfg.n_grid.push_back(parse_number<Index>(field, item));
      } else if (section == "model") {
        if (key == "kind") cfg.model.kind = rethrow_as_validation(field, [&] { return parse_predictor_kind(v); });
        else if (key == "lambda") cfg.model.lambda = as_double();
        else if (key == "n_trees") cfg.model.forest.n_trees = as_int();
        else if (key == "max_depth") cfg.model.forest.max_depth = cfg.model.boost.max_depth = as_int();
        else if (key == "min_leaf") cfg.model.forest.min_leaf = cfg.model.boost.min_leaf = as_int();
        else if (key == "mtry") cfg.model.forest.mtry = as_int();
        else if (key == "n_rounds") cfg.model.boost.n_rounds = as_int();
        else if (key == "learning_rate") cfg.model.boost.learning_rate = as_double();
        else cfg.population = parse_bool(field, v);
      } else if (section == "methods") {
        if (key == "list") {
          for (const auto& item : split_list(v))
            cfg.methods.push_back(rethrow_as_validation(field, [&] { return parse_method_spec(item); }));
        } else if (key == "sampler") {
          cfg.sampler = rethrow_as_validation(field, [&] { return parse_perturbation_kind(v); });
        } else if (key == "n_perm") {
          cfg.n_perm = as_index();
        } else if (key == "n_draws") {
          cfg.n_draws = as_index();
        } else if (key == "n_marginal_draws") {
          cfg.n_marginal_draws = as_index();
        } else if (key == "n_cal") {
          cfg.n_cal = as_index();
        } else {
          cfg.n_permutations = as_index();
        }
      } else if (section == "inference") {
        if (key == "test") {
          if (v == "none") cfg.test.reset();
          else cfg.test = rethrow_as_validation(field, [&] { return parse_test_kind(v); });
        } else if (key == "alpha") {
          cfg.alpha = as_double();
        } else if (key == "bonferroni") {
          cfg.bonferroni = parse_bool(field, v);
        } else {
          cfg.loss = rethrow_as_validation(field, [&] { return parse_loss_kind(v); });
        }
      } else {
        if (key == "n_joints") cfg.n_joints = as_index();
        else cfg.joint = v;
      }
    }
  }
  if (!has_kind) invalid("experiment.kind", "required");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::missing_file, "cannot open config '" + path.string() + "'");
  return parse_config(in);
}

std::string config_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["experiment"] = {{"kind", to_string(cfg.kind)},
                     {"seed", cfg.seed.value_or(0)},
                     {"repetitions", cfg.repetitions},
                     {"output", cfg.output}};
  if (cfg.kind == ExperimentKind::oracle_check) {
    j["oracle"] = {{"n_joints", cfg.n_joints}, {"joint", cfg.joint}};
    return j.dump(2) + "\n";
  }
  j["data"] = {{"n", cfg.n},
               {"p", cfg.data_kind() == ExperimentKind::figure1 ? Index{2} : cfg.p},
               {"rho", cfg.rho},
               {"beta", cfg.beta},
               {"noise_sd", cfg.resolved_noise_sd()},
               {"design", to_string(cfg.data_kind())},
               {"csv", cfg.csv},
               {"target", cfg.target},
               {"train_fraction", cfg.train_fraction},
               {"n_grid", cfg.n_grid}};
  j["model"] = {{"kind", to_string(cfg.model.kind)},
                {"lambda", cfg.model.lambda},
                {"n_trees", cfg.model.forest.n_trees},
                {"forest_max_depth", cfg.model.forest.max_depth},
                {"forest_min_leaf", cfg.model.forest.min_leaf},
                {"mtry", cfg.model.forest.mtry},
                {"n_rounds", cfg.model.boost.n_rounds},
                {"learning_rate", cfg.model.boost.learning_rate},
                {"boost_max_depth", cfg.model.boost.max_depth},
                {"boost_min_leaf", cfg.model.boost.min_leaf},
                {"population", cfg.population}};
  std::vector<std::string> labels;
  for (const auto& m : cfg.methods) labels.push_back(m.label());
  j["methods"] = {{"list", labels},
                  {"sampler", to_string(cfg.resolved_sampler())},
                  {"n_perm", cfg.n_perm},
                  {"n_draws", cfg.n_draws},
                  {"n_permutations", cfg.n_permutations},
                  {"n_marginal_draws", cfg.n_marginal_draws},
                  {"n_cal", cfg.n_cal}};
  j["inference"] = {{"test", cfg.test ? std::string(to_string(*cfg.test)) : std::string("none")},
                    {"alpha", cfg.alpha},
                    {"bonferroni", cfg.bonferroni},
                    {"loss", to_string(cfg.loss)}};
  return j.dump(2) + "\n";
}

std::uint64_t repetition_seed(std::uint64_t root, Index repetition) {
  return derive_seed(root, {static_cast<std::uint64_t>(repetition)});
}

Dataset simulate_dataset(const ExperimentConfig& cfg, Index n, std::uint64_t rep_seed) {
  const std::uint64_t seed = derive_seed(rep_seed, {0});
  const double noise = cfg.resolved_noise_sd();
  switch (cfg.data_kind()) {
    case ExperimentKind::figure1: {
      Dataset d = gen_linear_pair(n, cfg.rho, cfg.beta, derive_seed(seed, {0}));
      if (noise == 0.0) return d;
      NormalSource normal(derive_seed(seed, {1}));
      VectorXd y = d.y();
      for (Index i = 0; i < n; ++i) y(i) += noise * normal();
      return d.with_target(std::move(y));
    }
    case ExperimentKind::poly_sim: {
      MatrixXd x = gen_toeplitz_gaussian(n, cfg.p, cfg.rho, derive_seed(seed, {0}));
      VectorXd y = gen_poly_response(x, noise, derive_seed(seed, {1}));
      return Dataset(std::move(x), std::move(y));
    }
    default: fail(ErrorCode::validation, "simulate_dataset: kind has no generator");
  }
}

std::vector<ResultRow> run_simulate(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  if (cfg.kind != ExperimentKind::figure1 && cfg.kind != ExperimentKind::poly_sim)
    invalid("experiment.kind", "simulate expects figure1 or poly_sim");
  return run_repetitions(cfg, jobs, [&](std::uint64_t rs) { return simulate_dataset(cfg, cfg.n, rs); });
}

std::vector<ResultRow> run_analyze(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  if (cfg.kind != ExperimentKind::csv_analysis) invalid("experiment.kind", "analyze expects csv_analysis");
  const Dataset data = [&] {
    try {
      return load_csv(cfg.csv, cfg.target);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::missing_column) fail(ErrorCode::validation, std::string("data.target: ") + e.what());
      throw;
    }
  }();
  return run_repetitions(cfg, jobs, [&](std::uint64_t) { return data; });
}

std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  if (cfg.kind != ExperimentKind::convergence) invalid("experiment.kind", "convergence expects convergence");
  const Index reps = cfg.repetitions;
  const Index grid = static_cast<Index>(cfg.n_grid.size());
  std::vector<std::vector<ResultRow>> cells(static_cast<std::size_t>(grid * reps));
  parallel_for(grid * reps, jobs, [&](Index cell) {
    const Index n = cfg.n_grid[cell / reps];
    const Index r = cell % reps;
    const std::uint64_t rs = derive_seed(*cfg.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)});
    cells[cell] = run_repetition(cfg, simulate_dataset(cfg, n, rs), rs, r);
  });
  std::vector<ConvergenceRow> out;
  for (Index g = 0; g < grid; ++g) {
    std::map<std::pair<std::string, Index>, std::vector<double>> scores;
    for (Index r = 0; r < reps; ++r)
      for (const auto& row : cells[g * reps + r]) scores[{row.method, row.feature}].push_back(row.raw_score);
    for (const auto& [key, v] : scores) {
      const Eigen::Map<const VectorXd> s(v.data(), static_cast<Index>(v.size()));
      const double mean = s.mean();
      const double sd =
          v.size() > 1 ? std::sqrt((s.array() - mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
      out.push_back({cfg.n_grid[g], key.first, key.second, mean, sd});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ConvergenceRow& a, const ConvergenceRow& b) {
    return std::tie(a.n, a.method, a.feature) < std::tie(b.n, b.method, b.feature);
  });
  return out;
}

std::vector<OracleLine> run_oracle_check(const ExperimentConfig& cfg) {
  cfg.validate();
  const Loss quad{LossKind::quadratic};
  const Loss ce{LossKind::cross_entropy};
  const std::uint64_t seed = *cfg.seed;
  std::vector<OracleLine> lines;
  auto add = [&](std::string name, double dev, double tol, std::string detail = {}) {
    lines.push_back({std::move(name), dev, tol, dev <= tol, std::move(detail)});
  };

  if (!cfg.joint.empty()) {
    try {
      std::ifstream in(cfg.joint);
      if (!in) fail(ErrorCode::missing_file, "cannot open joint table '" + cfg.joint + "'");
      const DiscreteJoint d = DiscreteJoint::read(in);
      double forms = 0.0, surplus = 0.0;
      for (Index j = 0; j < d.p(); ++j) {
        const double t3 = exact_tsi(d, j, quad, TsiForm::risk_difference);
        for (auto f : {TsiForm::conditional_variance, TsiForm::squared_difference, TsiForm::marginalization,
                       TsiForm::perturbation})
          forms = std::max(forms, std::abs(exact_tsi(d, j, quad, f) - t3));
        surplus = std::max(surplus, std::abs(exact_sc_sage(d, j, quad) - t3));
      }
      add("joint_file.tsi_forms_agree", forms, 1e-10);
      add("joint_file.sc_sage_equals_tsi", surplus, 1e-10);
    } catch (const Error& e) {
      lines.push_back({"joint_file.valid", std::numeric_limits<double>::infinity(), 0.0, false, e.what()});
    }
  }

  // Equivalent TSI formulations on random joints.
  double forms = 0.0, r2 = 0.0, surplus = 0.0, cmi = 0.0;
  for (Index t = 0; t < cfg.n_joints; ++t) {
    Rng rng(derive_seed(seed, {10, static_cast<std::uint64_t>(t)}));
    const Index p = 2 + static_cast<Index>(uniform_index(rng, 2));
    const DiscreteJoint d = fixtures::random_joint(rng, p, 3);
    const DiscreteJoint b = fixtures::random_joint(rng, p, 3, true);
    for (Index j = 0; j < p; ++j) {
      const double t3 = exact_tsi(d, j, quad, TsiForm::risk_difference);
      for (auto f : {TsiForm::conditional_variance, TsiForm::squared_difference, TsiForm::marginalization,
                     TsiForm::perturbation})
        forms = std::max(forms, std::abs(exact_tsi(d, j, quad, f) - t3));
      r2 = std::max(r2, std::abs(exact_r2(d, j).tsi() - t3));
      surplus = std::max(surplus, std::abs(exact_sc_sage(d, j, quad) - t3));
      cmi = std::max(cmi, std::abs(exact_tsi(b, j, ce, TsiForm::mutual_information) -
                                   exact_tsi(b, j, ce, TsiForm::risk_difference)));
    }
  }
  add("tsi_forms_1_to_5_agree", forms, 1e-10);
  add("tsi_r2_form", r2, 1e-10);
  add("sc_sage_equals_tsi", surplus, 1e-10);
  add("tsi_mutual_information_form", cmi, 1e-10);

  // Minimal axiom on conditionally null constructions.
  double null_max = 0.0, factor = 0.0, indep = 0.0, positive = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < cfg.n_joints; ++t) {
    Rng rng(derive_seed(seed, {20, static_cast<std::uint64_t>(t)}));
    const Index p = 2 + static_cast<Index>(uniform_index(rng, 2));
    const Index j = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(p)));
    const DiscreteJoint d = fixtures::factored_null_joint(rng, p, j, 3);
    factor = std::max(factor, factorization_deviation(d, j));
    for (double v : {exact_tsi(d, j, quad, TsiForm::risk_difference), exact_pfi(d, j, quad),
                     exact_shapley(d, j, quad, ValueMode::marginal),
                     exact_value_function(d, {j}, quad, ValueMode::marginal), exact_sc_sage(d, j, quad)})
      null_max = std::max(null_max, std::abs(v));
    const DiscreteJoint e = fixtures::independent_feature_joint(rng, p, j, 3);
    indep = std::max({indep, marginal_independence_deviation(e, j), factorization_deviation(e, j),
                      std::abs(exact_tsi(e, j, quad, TsiForm::risk_difference))});
    const DiscreteJoint g = fixtures::random_joint(rng, p, 3);
    positive = std::min(positive, exact_tsi(g, j, quad, TsiForm::risk_difference));
  }
  add("null_feature_scores_vanish", null_max, 1e-10, "TSI, PFI, mSAGE, mSAGEvf, scSAGE");
  add("factored_joint_factorizes", factor, 1e-10);
  add("independent_feature_is_null", indep, 1e-10);
  {
    std::ostringstream msg;
    msg << "min TSI over random joints = " << format_number(positive);
    add("dependent_feature_scores_positive", positive > 0.0 ? 0.0 : 1.0, 0.0, msg.str());
  }

  // Correlated coins: conditionally null X1 with nonzero SAGE.
  {
    const DiscreteJoint d = fixtures::correlated_coins(0.8);
    const double tsi = exact_tsi(d, 0, quad, TsiForm::risk_difference);
    const double vf = exact_value_function(d, {0}, quad, ValueMode::conditional);
    const double sh = exact_shapley(d, 0, quad, ValueMode::conditional);
    add("correlated_coins.tsi_null", std::abs(tsi), 1e-12, "psi_TSI(1) = " + format_number(tsi));
    add("correlated_coins.sage_vf", std::abs(vf - 0.09), 1e-12, "psi_SAGEvf(1) = " + format_number(vf));
    add("correlated_coins.sage", std::abs(sh - 0.045), 1e-12, "psi_SAGE(1) = " + format_number(sh));
    add("correlated_coins.conditional_independence_given_y",
        std::abs(conditional_independence_given_y_deviation(d, 0)), 1e-12);
  }
  {
    const DiscreteJoint d = fixtures::fair_coins();
    add("fair_coins.tsi", std::abs(exact_tsi(d, 1, quad, TsiForm::risk_difference) - 0.25), 1e-12);
    add("fair_coins.pfi", std::abs(exact_pfi(d, 1, quad) - 0.5), 1e-12);
  }

  // Linear Gaussian closed forms for the two-feature design.
  {
    GaussianLinearSpec<double> spec{VectorXd::Zero(2), toeplitz_covariance<double>(2, 0.6), VectorXd::Unit(2, 0), 0.0};
    const double dev = std::max({std::abs(gaussian_linear_index(spec, 0, GaussianIndex::TSI) - 0.64),
                                 std::abs(gaussian_linear_index(spec, 1, GaussianIndex::TSI)),
                                 std::abs(gaussian_linear_index(spec, 0, GaussianIndex::SAGE) - 0.82),
                                 std::abs(gaussian_linear_index(spec, 1, GaussianIndex::SAGE) - 0.18),
                                 std::abs(gaussian_linear_index(spec, 1, GaussianIndex::SAGEvf) - 0.36),
                                 std::abs(gaussian_linear_index(spec, 0, GaussianIndex::PFI) - 2.0)});
    add("gaussian_pair_closed_forms", dev, 1e-12);
  }
  return lines;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_results(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "repetition,method,feature,raw_score,normalized_score,std_error,p_value\n";
  for (const auto& r : rows)
    out << r.repetition << ',' << r.method << ',' << r.feature << ',' << format_number(r.raw_score) << ','
        << format_number(r.normalized_score) << ',' << format_number(r.std_error) << ',' << format_number(r.p_value)
        << '\n';
}

void write_convergence(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "n,method,feature,mean_score,sd_score\n";
  for (const auto& r : rows)
    out << r.n << ',' << r.method << ',' << r.feature << ',' << format_number(r.mean_score) << ','
        << format_number(r.sd_score) << '\n';
}

void write_oracle_report(std::ostream& out, const std::vector<OracleLine>& lines) {
  for (const auto& l : lines) {
    out << (l.pass ? "PASS " : "FAIL ") << l.name << " max_abs_deviation=" << format_number(l.deviation);
    if (!l.detail.empty()) out << " (" << l.detail << ")";
    out << '\n';
  }
}

}  // namespace vimlab
