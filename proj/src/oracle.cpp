#include "vimlab/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace vimlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Mixed-radix key of a configuration's digits restricted to `subset`.
class SubsetKey {
 public:
  SubsetKey(const DiscreteJoint& d, std::vector<Index> subset) : d_(&d), subset_(std::move(subset)) {
    radix_.resize(subset_.size());
    size_ = 1;
    for (std::size_t k = subset_.size(); k-- > 0;) {
      radix_[k] = size_;
      size_ *= static_cast<Index>(d.x_support(subset_[k]).size());
    }
  }

  Index size() const { return size_; }
  const std::vector<Index>& subset() const { return subset_; }

  Index operator()(Index config) const {
    Index key = 0;
    for (std::size_t k = 0; k < subset_.size(); ++k) key += d_->digit(config, subset_[k]) * radix_[k];
    return key;
  }

 private:
  const DiscreteJoint* d_;
  std::vector<Index> subset_;
  std::vector<Index> radix_;
  Index size_;
};

std::vector<Index> complement_of(Index p, const std::vector<Index>& subset) {
  std::vector<char> in(static_cast<std::size_t>(p), 0);
  for (Index s : subset) {
    if (s < 0 || s >= p) fail(ErrorCode::invalid_parameter, "feature subset index out of range");
    in[s] = 1;
  }
  std::vector<Index> out;
  for (Index c = 0; c < p; ++c)
    if (!in[c]) out.push_back(c);
  return out;
}

std::vector<Index> all_but_index(Index p, Index j) { return complement_of(p, {j}); }

std::vector<Index> every_feature(Index p) {
  std::vector<Index> s;
  for (Index c = 0; c < p; ++c) s.push_back(c);
  return s;
}

// Per-key mass and first/second moments of y.
struct Moments {
  std::vector<double> mass, sum_y, sum_y2;

  double mean(Index k) const { return mass[k] > 0.0 ? sum_y[k] / mass[k] : kNaN; }
  double var(Index k) const {
    if (!(mass[k] > 0.0)) return kNaN;
    const double m = sum_y[k] / mass[k];
    return sum_y2[k] / mass[k] - m * m;
  }
};

Moments moments(const DiscreteJoint& d, const SubsetKey& key) {
  Moments m;
  m.mass.assign(static_cast<std::size_t>(key.size()), 0.0);
  m.sum_y = m.mass;
  m.sum_y2 = m.mass;
  const auto& ys = d.y_support();
  for (Index c = 0; c < d.n_configs(); ++c) {
    const Index k = key(c);
    for (std::size_t t = 0; t < ys.size(); ++t) {
      const double pr = d.prob(c, static_cast<Index>(t));
      m.mass[k] += pr;
      m.sum_y[k] += pr * ys[t];
      m.sum_y2[k] += pr * ys[t] * ys[t];
    }
  }
  return m;
}

double expected_y(const DiscreteJoint& d) { return moments(d, SubsetKey(d, {})).mean(0); }

// Expected loss of a per-configuration prediction, summed over atoms with
// positive mass only.
template <typename Pred>
double expected_loss(const DiscreteJoint& d, const Loss& loss, Pred&& pred) {
  const auto& ys = d.y_support();
  double total = 0.0;
  for (Index c = 0; c < d.n_configs(); ++c)
    for (std::size_t t = 0; t < ys.size(); ++t) {
      const double pr = d.prob(c, static_cast<Index>(t));
      if (pr > 0.0) total += pr * loss(ys[t], pred(c, static_cast<Index>(t)));
    }
  return total;
}

void require_feature(const DiscreteJoint& d, Index j) {
  if (j < 0 || j >= d.p()) fail(ErrorCode::invalid_parameter, "feature index out of range");
}

double model_at(const Moments& full, Index config) {
  const double v = full.mean(config);
  if (std::isnan(v))
    fail(ErrorCode::domain_error,
         "regression function is undefined at a zero-mass covariate configuration reached by perturbation");
  return v;
}

// m^m_S(x^S) = sum_r p_{-S}(r) m(x^S, r), for every key of S with positive mass.
std::vector<double> marginalized_model(const DiscreteJoint& d, const std::vector<Index>& subset) {
  const SubsetKey key_s(d, subset);
  const SubsetKey key_r(d, complement_of(d.p(), subset));
  const Moments full = moments(d, SubsetKey(d, every_feature(d.p())));
  const Moments ms = moments(d, key_s);
  const Moments mr = moments(d, key_r);
  std::vector<Index> config_of(static_cast<std::size_t>(key_s.size() * key_r.size()));
  for (Index c = 0; c < d.n_configs(); ++c) config_of[key_s(c) * key_r.size() + key_r(c)] = c;
  std::vector<double> out(static_cast<std::size_t>(key_s.size()), kNaN);
  for (Index s = 0; s < key_s.size(); ++s) {
    if (!(ms.mass[s] > 0.0)) continue;
    double acc = 0.0;
    for (Index r = 0; r < key_r.size(); ++r)
      if (mr.mass[r] > 0.0) acc += mr.mass[r] * model_at(full, config_of[s * key_r.size() + r]);
    out[s] = acc;
  }
  return out;
}

std::uint64_t mask_of(const std::vector<Index>& subset) {
  std::uint64_t m = 0;
  for (Index s : subset) m |= std::uint64_t{1} << s;
  return m;
}

std::vector<Index> subset_of(std::uint64_t mask, Index p) {
  std::vector<Index> s;
  for (Index c = 0; c < p; ++c)
    if ((mask >> c) & 1) s.push_back(c);
  return s;
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::vector<std::vector<double>> x_supports, std::vector<double> y_support,
                             std::vector<double> probs)
    : x_supports_(std::move(x_supports)), y_support_(std::move(y_support)), probs_(std::move(probs)) {
  if (x_supports_.empty()) fail(ErrorCode::invalid_parameter, "DiscreteJoint: need at least one covariate");
  if (x_supports_.size() > 62) fail(ErrorCode::size_limit, "DiscreteJoint: too many covariates");
  double atoms = static_cast<double>(y_support_.size());
  for (const auto& s : x_supports_) {
    if (s.empty()) fail(ErrorCode::invalid_parameter, "DiscreteJoint: empty covariate support");
    atoms *= static_cast<double>(s.size());
  }
  if (y_support_.empty()) fail(ErrorCode::invalid_parameter, "DiscreteJoint: empty target support");
  if (atoms > static_cast<double>(kMaxAtoms))
    fail(ErrorCode::size_limit, "DiscreteJoint: more than 10^6 atoms");
  stride_.resize(x_supports_.size());
  n_configs_ = 1;
  for (std::size_t j = x_supports_.size(); j-- > 0;) {
    stride_[j] = n_configs_;
    n_configs_ *= static_cast<Index>(x_supports_[j].size());
  }
  if (static_cast<Index>(probs_.size()) != n_atoms())
    fail(ErrorCode::dimension_mismatch, "DiscreteJoint: probability table has " + std::to_string(probs_.size()) +
                                            " entries, expected " + std::to_string(n_atoms()));
  double total = 0.0;
  for (double pr : probs_) {
    if (!(pr >= 0.0) || !std::isfinite(pr)) fail(ErrorCode::invalid_parameter, "DiscreteJoint: negative probability");
    total += pr;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "DiscreteJoint: total mass " << total << " differs from 1";
    fail(ErrorCode::invalid_parameter, msg.str());
  }
}

DiscreteJoint DiscreteJoint::read(std::istream& in) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  std::vector<std::vector<double>> rows;
  std::string line;
  Index line_no = 0;
  auto parse = [&](const std::string& tok) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      fail(ErrorCode::parse_error, "joint table: bad number '" + tok + "' on line " + std::to_string(line_no));
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string head;
    if (!(ss >> head) || head[0] == '#') continue;
    std::vector<double> vals;
    std::string tok;
    if (head == "x" || head == "y") {
      while (ss >> tok) vals.push_back(parse(tok));
      if (head == "x") {
        if (!ys.empty()) fail(ErrorCode::parse_error, "joint table: covariate supports must precede the target");
        xs.push_back(std::move(vals));
      } else {
        ys = std::move(vals);
      }
    } else {
      vals.push_back(parse(head));
      while (ss >> tok) vals.push_back(parse(tok));
      rows.push_back(std::move(vals));
    }
  }
  if (xs.empty() || ys.empty()) fail(ErrorCode::parse_error, "joint table: missing support header");
  auto index_in = [](const std::vector<double>& support, double v) -> Index {
    for (std::size_t k = 0; k < support.size(); ++k)
      if (support[k] == v) return static_cast<Index>(k);
    return -1;
  };
  Index configs = 1;
  for (const auto& s : xs) configs *= static_cast<Index>(s.size());
  const Index atoms = configs * static_cast<Index>(ys.size());
  if (atoms > kMaxAtoms) fail(ErrorCode::size_limit, "joint table: more than 10^6 atoms");
  std::vector<double> probs(static_cast<std::size_t>(atoms), 0.0);
  for (const auto& r : rows) {
    if (r.size() != xs.size() + 2) fail(ErrorCode::parse_error, "joint table: atom row has wrong field count");
    Index config = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const Index k = index_in(xs[j], r[j]);
      if (k < 0) fail(ErrorCode::parse_error, "joint table: value outside the declared support");
      config = config * static_cast<Index>(xs[j].size()) + k;
    }
    const Index t = index_in(ys, r[xs.size()]);
    if (t < 0) fail(ErrorCode::parse_error, "joint table: target value outside the declared support");
    probs[static_cast<std::size_t>(config * static_cast<Index>(ys.size()) + t)] += r.back();
  }
  return DiscreteJoint(std::move(xs), std::move(ys), std::move(probs));
}

void DiscreteJoint::write(std::ostream& out) const {
  char buf[64];
  auto num = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  for (const auto& s : x_supports_) {
    out << 'x';
    for (double v : s) out << ' ' << num(v);
    out << '\n';
  }
  out << 'y';
  for (double v : y_support_) out << ' ' << num(v);
  out << '\n';
  for (Index c = 0; c < n_configs_; ++c)
    for (std::size_t t = 0; t < y_support_.size(); ++t) {
      const double pr = prob(c, static_cast<Index>(t));
      if (pr <= 0.0) continue;
      for (Index j = 0; j < p(); ++j) out << num(x_value(c, j)) << ' ';
      out << num(y_support_[t]) << ' ' << num(pr) << '\n';
    }
}

double CondMeanTable::at(const std::vector<double>& x_subset) const {
  const auto it = values.find(x_subset);
  if (it == values.end()) fail(ErrorCode::domain_error, "conditional mean requested at a zero-mass configuration");
  return it->second;
}

CondMeanTable exact_cond_mean(const DiscreteJoint& d, const std::vector<Index>& subset) {
  complement_of(d.p(), subset);  // validates indices
  const SubsetKey key(d, subset);
  const Moments m = moments(d, key);
  CondMeanTable table;
  table.subset = subset;
  for (Index c = 0; c < d.n_configs(); ++c) {
    const Index k = key(c);
    if (!(m.mass[k] > 0.0)) continue;
    std::vector<double> values;
    for (Index s : subset) values.push_back(d.x_value(c, s));
    table.values.emplace(std::move(values), m.mean(k));
  }
  return table;
}

double exact_value_function(const DiscreteJoint& d, const std::vector<Index>& subset, const Loss& loss,
                            ValueMode mode) {
  const double ey = expected_y(d);
  const SubsetKey key(d, subset);
  const double baseline = expected_loss(d, loss, [&](Index, Index) { return ey; });
  if (mode == ValueMode::conditional) {
    const Moments m = moments(d, key);
    return baseline - expected_loss(d, loss, [&](Index c, Index) { return m.mean(key(c)); });
  }
  const auto mm = marginalized_model(d, subset);
  return baseline - expected_loss(d, loss, [&](Index c, Index) { return mm[key(c)]; });
}

double exact_tsi(const DiscreteJoint& d, Index j, const Loss& loss, TsiForm form) {
  require_feature(d, j);
  const bool quadratic = loss.kind == LossKind::quadratic;
  if ((form == TsiForm::conditional_variance || form == TsiForm::squared_difference) && !quadratic)
    fail(ErrorCode::invalid_parameter, "exact_tsi: formulations 1 and 2 require quadratic loss");
  if (form == TsiForm::mutual_information) {
    if (loss.kind != LossKind::cross_entropy)
      fail(ErrorCode::invalid_parameter, "exact_tsi: formulation 7 requires cross_entropy loss");
    for (double v : d.y_support())
      if (v != 0.0 && v != 1.0) fail(ErrorCode::invalid_parameter, "exact_tsi: formulation 7 requires y in {0,1}");
  }

  const SubsetKey full_key(d, every_feature(d.p()));
  const SubsetKey reduced_key(d, all_but_index(d.p(), j));
  const Moments full = moments(d, full_key);
  const Moments reduced = moments(d, reduced_key);
  const auto& ys = d.y_support();
  const Index stride = d.stride(j);
  const Index nj = static_cast<Index>(d.x_support(j).size());

  // Configurations sharing x^{-j} with `c`, with conditional weights p(x^j | x^{-j}).
  auto for_each_sibling = [&](Index c, auto&& fn) {
    const Index base = c - d.digit(c, j) * stride;
    const double mass = reduced.mass[reduced_key(c)];
    for (Index u = 0; u < nj; ++u) {
      const Index sib = base + u * stride;
      const double w = full.mass[sib] / mass;
      if (w > 0.0) fn(sib, w);
    }
  };

  switch (form) {
    case TsiForm::conditional_variance: {
      double reduced_var = 0.0, full_var = 0.0;
      for (Index k = 0; k < reduced_key.size(); ++k)
        if (reduced.mass[k] > 0.0) reduced_var += reduced.mass[k] * reduced.var(k);
      for (Index c = 0; c < d.n_configs(); ++c)
        if (full.mass[c] > 0.0) full_var += full.mass[c] * full.var(c);
      return reduced_var - full_var;
    }
    case TsiForm::squared_difference: {
      double total = 0.0;
      for (Index c = 0; c < d.n_configs(); ++c) {
        if (!(full.mass[c] > 0.0)) continue;
        const double diff = reduced.mean(reduced_key(c)) - full.mean(c);
        total += full.mass[c] * diff * diff;
      }
      return total;
    }
    case TsiForm::risk_difference:
      return expected_loss(d, loss, [&](Index c, Index) { return reduced.mean(reduced_key(c)); }) -
             expected_loss(d, loss, [&](Index c, Index) { return full.mean(c); });
    case TsiForm::marginalization: {
      // E[m(X) | X^{-j}] assembled from m rather than from y directly.
      std::vector<double> g(static_cast<std::size_t>(d.n_configs()), kNaN);
      for (Index c = 0; c < d.n_configs(); ++c) {
        if (!(full.mass[c] > 0.0)) continue;
        double acc = 0.0;
        for_each_sibling(c, [&](Index sib, double w) { acc += w * full.mean(sib); });
        g[c] = acc;
      }
      return expected_loss(d, loss, [&](Index c, Index) { return g[c]; }) -
             expected_loss(d, loss, [&](Index c, Index) { return full.mean(c); });
    }
    case TsiForm::perturbation: {
      double perturbed = 0.0;
      for (Index c = 0; c < d.n_configs(); ++c)
        for (std::size_t t = 0; t < ys.size(); ++t) {
          const double pr = d.prob(c, static_cast<Index>(t));
          if (!(pr > 0.0)) continue;
          double acc = 0.0;
          for_each_sibling(c, [&](Index sib, double w) { acc += w * loss(ys[t], full.mean(sib)); });
          perturbed += pr * acc;
        }
      return 0.5 * (perturbed - expected_loss(d, loss, [&](Index c, Index) { return full.mean(c); }));
    }
    case TsiForm::mutual_information: {
      // p(x^{-j}, y)
      std::vector<double> joint_ry(static_cast<std::size_t>(reduced_key.size()) * ys.size(), 0.0);
      for (Index c = 0; c < d.n_configs(); ++c)
        for (std::size_t t = 0; t < ys.size(); ++t)
          joint_ry[reduced_key(c) * ys.size() + t] += d.prob(c, static_cast<Index>(t));
      double total = 0.0;
      for (Index c = 0; c < d.n_configs(); ++c) {
        const Index k = reduced_key(c);
        for (std::size_t t = 0; t < ys.size(); ++t) {
          const double pr = d.prob(c, static_cast<Index>(t));
          if (!(pr > 0.0)) continue;
          total += pr * std::log(pr * reduced.mass[k] / (joint_ry[k * ys.size() + t] * full.mass[c]));
        }
      }
      return total;
    }
  }
  fail(ErrorCode::invalid_parameter, "exact_tsi: unknown formulation");
}

R2Decomposition exact_r2(const DiscreteJoint& d, Index j) {
  require_feature(d, j);
  const Moments all = moments(d, SubsetKey(d, {}));
  const Moments full = moments(d, SubsetKey(d, every_feature(d.p())));
  const SubsetKey reduced_key(d, all_but_index(d.p(), j));
  const Moments reduced = moments(d, reduced_key);
  R2Decomposition r;
  r.variance = all.var(0);
  double full_var = 0.0, reduced_var = 0.0;
  for (Index c = 0; c < d.n_configs(); ++c)
    if (full.mass[c] > 0.0) full_var += full.mass[c] * full.var(c);
  for (Index k = 0; k < reduced_key.size(); ++k)
    if (reduced.mass[k] > 0.0) reduced_var += reduced.mass[k] * reduced.var(k);
  if (!(r.variance > 0.0)) fail(ErrorCode::domain_error, "exact_r2: target has zero variance");
  r.r2_full = 1.0 - full_var / r.variance;
  r.r2_reduced = 1.0 - reduced_var / r.variance;
  return r;
}

double exact_shapley(const DiscreteJoint& d, Index j, const Loss& loss, ValueMode mode) {
  require_feature(d, j);
  const Index p = d.p();
  if (p > 12) fail(ErrorCode::size_limit, "exact_shapley: subset enumeration limited to p <= 12");
  std::map<std::uint64_t, double> cache;
  auto v = [&](std::uint64_t mask) {
    auto it = cache.find(mask);
    if (it == cache.end()) it = cache.emplace(mask, exact_value_function(d, subset_of(mask, p), loss, mode)).first;
    return it->second;
  };
  const auto others = all_but_index(p, j);
  const Index m = static_cast<Index>(others.size());
  std::vector<double> weight(static_cast<std::size_t>(m + 1));
  for (Index s = 0; s <= m; ++s) {
    double binom = 1.0;
    for (Index t = 0; t < s; ++t) binom = binom * static_cast<double>(m - t) / static_cast<double>(t + 1);
    weight[s] = 1.0 / (static_cast<double>(p) * binom);
  }
  double total = 0.0;
  for (std::uint64_t sub = 0; sub < (std::uint64_t{1} << m); ++sub) {
    std::vector<Index> s;
    for (Index t = 0; t < m; ++t)
      if ((sub >> t) & 1) s.push_back(others[t]);
    const std::uint64_t mask = mask_of(s);
    total += weight[s.size()] * (v(mask | (std::uint64_t{1} << j)) - v(mask));
  }
  return total;
}

double exact_pfi(const DiscreteJoint& d, Index j, const Loss& loss) {
  require_feature(d, j);
  const Moments full = moments(d, SubsetKey(d, every_feature(d.p())));
  const Moments marg = moments(d, SubsetKey(d, {j}));
  const auto& ys = d.y_support();
  const Index stride = d.stride(j);
  const Index nj = static_cast<Index>(d.x_support(j).size());
  double perturbed = 0.0;
  for (Index c = 0; c < d.n_configs(); ++c)
    for (std::size_t t = 0; t < ys.size(); ++t) {
      const double pr = d.prob(c, static_cast<Index>(t));
      if (!(pr > 0.0)) continue;
      const Index base = c - d.digit(c, j) * stride;
      double acc = 0.0;
      for (Index u = 0; u < nj; ++u)
        if (marg.mass[u] > 0.0) acc += marg.mass[u] * loss(ys[t], model_at(full, base + u * stride));
      perturbed += pr * acc;
    }
  return perturbed - expected_loss(d, loss, [&](Index c, Index) { return full.mean(c); });
}

double exact_sc_sage(const DiscreteJoint& d, Index j, const Loss& loss) {
  require_feature(d, j);
  return exact_value_function(d, every_feature(d.p()), loss, ValueMode::conditional) -
         exact_value_function(d, all_but_index(d.p(), j), loss, ValueMode::conditional);
}

double factorization_deviation(const DiscreteJoint& d, Index j) {
  require_feature(d, j);
  const SubsetKey reduced_key(d, all_but_index(d.p(), j));
  const Moments full = moments(d, SubsetKey(d, every_feature(d.p())));
  const Moments reduced = moments(d, reduced_key);
  const auto& ys = d.y_support();
  std::vector<double> joint_ry(static_cast<std::size_t>(reduced_key.size()) * ys.size(), 0.0);
  for (Index c = 0; c < d.n_configs(); ++c)
    for (std::size_t t = 0; t < ys.size(); ++t)
      joint_ry[reduced_key(c) * ys.size() + t] += d.prob(c, static_cast<Index>(t));
  double worst = 0.0;
  for (Index c = 0; c < d.n_configs(); ++c) {
    const Index k = reduced_key(c);
    const double mass = reduced.mass[k];
    if (!(mass > 0.0)) continue;
    for (std::size_t t = 0; t < ys.size(); ++t) {
      const double lhs = d.prob(c, static_cast<Index>(t)) / mass;
      const double rhs = (full.mass[c] / mass) * (joint_ry[k * ys.size() + t] / mass);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

double marginal_independence_deviation(const DiscreteJoint& d, Index j) {
  require_feature(d, j);
  const SubsetKey key_j(d, {j});
  const SubsetKey key_r(d, all_but_index(d.p(), j));
  const Moments full = moments(d, SubsetKey(d, every_feature(d.p())));
  const Moments mj = moments(d, key_j);
  const Moments mr = moments(d, key_r);
  double worst = 0.0;
  for (Index c = 0; c < d.n_configs(); ++c)
    worst = std::max(worst, std::abs(full.mass[c] - mj.mass[key_j(c)] * mr.mass[key_r(c)]));
  return worst;
}

double conditional_independence_given_y_deviation(const DiscreteJoint& d, Index j) {
  require_feature(d, j);
  const SubsetKey key_j(d, {j});
  const SubsetKey key_r(d, all_but_index(d.p(), j));
  const auto& ys = d.y_support();
  const std::size_t ny = ys.size();
  std::vector<double> py(ny, 0.0), pjy(static_cast<std::size_t>(key_j.size()) * ny, 0.0),
      pry(static_cast<std::size_t>(key_r.size()) * ny, 0.0);
  for (Index c = 0; c < d.n_configs(); ++c)
    for (std::size_t t = 0; t < ny; ++t) {
      const double pr = d.prob(c, static_cast<Index>(t));
      py[t] += pr;
      pjy[key_j(c) * ny + t] += pr;
      pry[key_r(c) * ny + t] += pr;
    }
  double worst = 0.0;
  for (Index c = 0; c < d.n_configs(); ++c)
    for (std::size_t t = 0; t < ny; ++t) {
      if (!(py[t] > 0.0)) continue;
      const double lhs = d.prob(c, static_cast<Index>(t)) / py[t];
      const double rhs = (pjy[key_j(c) * ny + t] / py[t]) * (pry[key_r(c) * ny + t] / py[t]);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  return worst;
}

namespace fixtures {

namespace {

std::vector<double> random_support(Rng& rng, Index size) {
  std::vector<double> s(static_cast<std::size_t>(size));
  for (Index k = 0; k < size; ++k) s[k] = static_cast<double>(k) + 0.5 * uniform01(rng);
  return s;
}

// Strictly positive weights normalized to sum 1.
std::vector<double> random_simplex(Rng& rng, Index size) {
  std::vector<double> w(static_cast<std::size_t>(size));
  double total = 0.0;
  for (auto& v : w) {
    v = -std::log(1.0 - uniform01(rng)) + 1e-3;
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

Index random_size(Rng& rng, Index max_support) {
  return 2 + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(std::max<Index>(max_support - 1, 1))));
}

void supports(Rng& rng, Index p, Index max_support, bool binary_target, std::vector<std::vector<double>>& xs,
              std::vector<double>& ys) {
  xs.clear();
  for (Index j = 0; j < p; ++j) xs.push_back(random_support(rng, random_size(rng, max_support)));
  ys = binary_target ? std::vector<double>{0.0, 1.0} : random_support(rng, random_size(rng, max_support));
}

// Builds a joint with probability prob(config, t) computed by `fn` on a
// skeleton joint that only supplies the digit layout.
template <typename Fn>
DiscreteJoint assemble(std::vector<std::vector<double>> xs, std::vector<double> ys, Fn&& fn) {
  Index configs = 1;
  for (const auto& s : xs) configs *= static_cast<Index>(s.size());
  const Index ny = static_cast<Index>(ys.size());
  std::vector<double> uniform(static_cast<std::size_t>(configs * ny), 1.0 / static_cast<double>(configs * ny));
  const DiscreteJoint layout(xs, ys, uniform);
  std::vector<double> probs(uniform.size());
  double total = 0.0;
  for (Index c = 0; c < configs; ++c)
    for (Index t = 0; t < ny; ++t) total += probs[c * ny + t] = fn(layout, c, t);
  for (auto& v : probs) v /= total;
  return DiscreteJoint(std::move(xs), std::move(ys), std::move(probs));
}

}  // namespace

DiscreteJoint fair_coins() {
  // configs (x0, x1) in order 00, 01, 10, 11; y = x1
  return DiscreteJoint({{0.0, 1.0}, {0.0, 1.0}}, {0.0, 1.0},
                       {0.25, 0.0, 0.0, 0.25, 0.25, 0.0, 0.0, 0.25});
}

DiscreteJoint correlated_coins(double agreement) {
  const double same = agreement / 2.0;
  const double diff = (1.0 - agreement) / 2.0;
  return DiscreteJoint({{0.0, 1.0}, {0.0, 1.0}}, {0.0, 1.0}, {same, 0.0, 0.0, diff, diff, 0.0, 0.0, same});
}

DiscreteJoint random_joint(Rng& rng, Index p, Index max_support, bool binary_target) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  supports(rng, p, max_support, binary_target, xs, ys);
  Index atoms = static_cast<Index>(ys.size());
  for (const auto& s : xs) atoms *= static_cast<Index>(s.size());
  const auto w = random_simplex(rng, atoms);
  return DiscreteJoint(std::move(xs), std::move(ys), w);
}

DiscreteJoint factored_null_joint(Rng& rng, Index p, Index j, Index max_support, bool binary_target) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  supports(rng, p, max_support, binary_target, xs, ys);
  Index configs = 1;
  for (const auto& s : xs) configs *= static_cast<Index>(s.size());
  const Index rest = configs / static_cast<Index>(xs[j].size());
  const Index nj = static_cast<Index>(xs[j].size());
  const Index ny = static_cast<Index>(ys.size());
  const auto p_rest = random_simplex(rng, rest);
  std::vector<std::vector<double>> p_j(static_cast<std::size_t>(rest)), p_y(static_cast<std::size_t>(rest));
  for (Index k = 0; k < rest; ++k) {
    p_j[k] = random_simplex(rng, nj);
    p_y[k] = random_simplex(rng, ny);
  }
  return assemble(std::move(xs), std::move(ys), [&](const DiscreteJoint& layout, Index c, Index t) {
    const SubsetKey key(layout, all_but_index(layout.p(), j));
    const Index k = key(c);
    return p_rest[k] * p_j[k][layout.digit(c, j)] * p_y[k][t];
  });
}

DiscreteJoint independent_feature_joint(Rng& rng, Index p, Index j, Index max_support) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  supports(rng, p, max_support, false, xs, ys);
  Index configs = 1;
  for (const auto& s : xs) configs *= static_cast<Index>(s.size());
  const Index nj = static_cast<Index>(xs[j].size());
  const Index ny = static_cast<Index>(ys.size());
  const auto p_j = random_simplex(rng, nj);
  const auto p_rest_y = random_simplex(rng, configs / nj * ny);
  return assemble(std::move(xs), std::move(ys), [&](const DiscreteJoint& layout, Index c, Index t) {
    const SubsetKey key(layout, all_but_index(layout.p(), j));
    return p_j[layout.digit(c, j)] * p_rest_y[key(c) * ny + t];
  });
}

}  // namespace fixtures

}  // namespace vimlab
