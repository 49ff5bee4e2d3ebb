#include "vimlab/core_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vimlab/random.hpp"

namespace vimlab {

namespace {

constexpr double kStandardizedTol = 1e-9;

double sample_mean(const Eigen::Ref<const VectorXd>& v) { return v.mean(); }

double sample_sd(const Eigen::Ref<const VectorXd>& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<std::string> default_feature_names(Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

Dataset::Dataset(MatrixXd x, VectorXd y, std::vector<std::string> names, bool standardized)
    : x_(std::move(x)), y_(std::move(y)), names_(std::move(names)), standardized_(standardized) {
  if (x_.rows() < 2) fail(ErrorCode::insufficient_data, "Dataset: need at least 2 rows");
  if (x_.cols() < 1) fail(ErrorCode::dimension_mismatch, "Dataset: need at least 1 column");
  if (y_.size() != x_.rows())
    fail(ErrorCode::dimension_mismatch, "Dataset: target length " + std::to_string(y_.size()) +
                                            " does not match " + std::to_string(x_.rows()) + " rows");
  if (names_.empty()) names_ = default_feature_names(x_.cols());
  if (static_cast<Index>(names_.size()) != x_.cols())
    fail(ErrorCode::dimension_mismatch, "Dataset: feature name count does not match columns");
  if (!x_.allFinite() || !y_.allFinite()) fail(ErrorCode::non_finite, "Dataset: NaN or infinite entry");
  for (Index a = 0; a < x_.cols(); ++a)
    for (Index b = a + 1; b < x_.cols(); ++b)
      if (x_.col(a) == x_.col(b))
        fail(ErrorCode::duplicate_column,
             "Dataset: columns '" + names_[a] + "' and '" + names_[b] + "' are identical");
  if (standardized_) {
    for (Index j = 0; j < x_.cols(); ++j) {
      if (std::abs(sample_mean(x_.col(j))) > kStandardizedTol ||
          std::abs(sample_sd(x_.col(j)) - 1.0) > kStandardizedTol)
        fail(ErrorCode::invalid_parameter, "Dataset: column '" + names_[j] + "' is not standardized");
    }
  }
}

Dataset Dataset::select_rows(std::span<const Index> rows) const {
  MatrixXd x(static_cast<Index>(rows.size()), p());
  VectorXd y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Index>(i)) = x_.row(rows[i]);
    y(static_cast<Index>(i)) = y_(rows[i]);
  }
  // A row subset of standardized data is no longer standardized.
  return Dataset(std::move(x), std::move(y), names_, false);
}

Dataset Dataset::with_target(VectorXd y) const { return Dataset(x_, std::move(y), names_, standardized_); }

double Loss::operator()(double y, double yhat) const {
  switch (kind) {
    case LossKind::quadratic: {
      const double r = y - yhat;
      return r * r;
    }
    case LossKind::cross_entropy:
      if (!(y == 0.0 || y == 1.0))
        fail(ErrorCode::domain_error, "cross_entropy: target must be 0 or 1");
      if (!(yhat > 0.0 && yhat < 1.0))
        fail(ErrorCode::domain_error, "cross_entropy: prediction outside (0,1)");
      return y == 1.0 ? -std::log(yhat) : -std::log1p(-yhat);
  }
  return 0.0;
}

VectorXd Loss::pointwise(const VectorXd& y, const VectorXd& yhat) const {
  if (y.size() != yhat.size()) fail(ErrorCode::dimension_mismatch, "Loss: length mismatch");
  VectorXd out(y.size());
  for (Index i = 0; i < y.size(); ++i) out(i) = (*this)(y(i), yhat(i));
  return out;
}

std::string_view to_string(LossKind kind) {
  return kind == LossKind::quadratic ? "quadratic" : "cross_entropy";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "quadratic") return LossKind::quadratic;
  if (name == "cross_entropy") return LossKind::cross_entropy;
  fail(ErrorCode::validation, "unknown loss '" + std::string(name) + "'");
}

MatrixXd cholesky_factor(const MatrixXd& sigma) {
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  MatrixXd jittered = sigma;
  jittered.diagonal().array() += 1e-10;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::numerical_rank, "covariance is not positive semidefinite after jitter");
  return llt.matrixL();
}

MatrixXd sample_gaussian(Index n, const VectorXd& mean, const MatrixXd& sigma, std::uint64_t seed) {
  if (sigma.rows() != mean.size() || sigma.cols() != mean.size())
    fail(ErrorCode::dimension_mismatch, "sample_gaussian: mean/sigma shape mismatch");
  const MatrixXd l = cholesky_factor(sigma);
  NormalSource normal(seed);
  MatrixXd z = normal.matrix(n, mean.size());
  MatrixXd x = z * l.transpose();
  x.rowwise() += mean.transpose();
  return x;
}

Dataset standardize(const Dataset& d) {
  MatrixXd x = d.x();
  for (Index j = 0; j < x.cols(); ++j) {
    const double m = sample_mean(x.col(j));
    const double sd = sample_sd(x.col(j));
    if (!(sd > 0.0))
      fail(ErrorCode::degenerate_column, "standardize: column '" + d.names()[j] + "' is constant");
    x.col(j) = (x.col(j).array() - m) / sd;
  }
  return Dataset(std::move(x), d.y(), d.names(), true);
}

MatrixXd gen_toeplitz_gaussian(Index n, Index p, double rho, std::uint64_t seed) {
  if (n < 1 || p < 1) fail(ErrorCode::invalid_parameter, "gen_toeplitz_gaussian: n and p must be >= 1");
  if (!(std::abs(rho) < 1.0)) fail(ErrorCode::invalid_parameter, "gen_toeplitz_gaussian: |rho| must be < 1");
  return sample_gaussian(n, VectorXd::Zero(p), toeplitz_covariance<double>(p, rho), seed);
}

VectorXd gen_poly_response(const MatrixXd& x, double noise_sd, std::uint64_t seed) {
  if (x.cols() < 9) fail(ErrorCode::dimension_mismatch, "gen_poly_response: need at least 9 columns");
  if (!(noise_sd >= 0.0)) fail(ErrorCode::invalid_parameter, "gen_poly_response: noise_sd < 0");
  NormalSource normal(seed);
  VectorXd y(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double eps = noise_sd > 0.0 ? noise_sd * normal() : 0.0;
    y(i) = x(i, 0) + 2.0 * x(i, 1) - x(i, 4) * x(i, 4) + x(i, 7) * x(i, 8) + eps;
  }
  return y;
}

Dataset gen_linear_pair(Index n, double rho, double beta, std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::invalid_parameter, "gen_linear_pair: n must be >= 1");
  if (!(std::abs(rho) < 1.0)) fail(ErrorCode::invalid_parameter, "gen_linear_pair: |rho| must be < 1");
  MatrixXd x = gen_toeplitz_gaussian(n, 2, rho, seed);
  VectorXd y = beta * x.col(0);
  return Dataset(std::move(x), std::move(y));
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::missing_file, "load_csv: cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse_error, "load_csv: empty file '" + path.string() + "'");
  const auto header = split_fields(line);
  Index target_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == target) target_col = static_cast<Index>(c);
  if (target_col < 0) fail(ErrorCode::missing_column, "load_csv: target column '" + target + "' not found");

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (static_cast<Index>(c) != target_col) names.push_back(header[c]);

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      fail(ErrorCode::parse_error, "load_csv: row " + std::to_string(line_no) + " has " +
                                       std::to_string(fields.size()) + " fields, expected " +
                                       std::to_string(header.size()));
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto& f = fields[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        fail(ErrorCode::parse_error, "load_csv: non-numeric cell '" + f + "' at row " +
                                         std::to_string(line_no) + ", column '" + header[c] + "'");
      if (std::isnan(v))
        fail(ErrorCode::nan_value, "load_csv: NaN at row " + std::to_string(line_no) + ", column '" +
                                       header[c] + "'");
      values[c] = v;
    }
    rows.push_back(std::move(values));
  }

  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(names.size());
  MatrixXd x(n, p);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    Index k = 0;
    for (Index c = 0; c < static_cast<Index>(header.size()); ++c) {
      if (c == target_col)
        y(i) = rows[i][c];
      else
        x(i, k++) = rows[i][c];
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(names));
}

void write_csv(const std::filesystem::path& path, const Dataset& d, const std::string& target) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::missing_file, "write_csv: cannot open '" + path.string() + "'");
  for (const auto& name : d.names()) out << name << ',';
  out << target << '\n';
  char buf[64];
  auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (Index i = 0; i < d.n(); ++i) {
    for (Index j = 0; j < d.p(); ++j) {
      put(d.x()(i, j));
      out << ',';
    }
    put(d.y()(i));
    out << '\n';
  }
}

std::vector<Dataset> split(const Dataset& d, std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.empty()) fail(ErrorCode::invalid_parameter, "split: no fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) fail(ErrorCode::invalid_parameter, "split: fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::invalid_parameter, "split: fractions must sum to 1");

  Rng rng(seed);
  const auto perm = random_permutation(d.n(), rng);
  std::vector<Dataset> parts;
  double cum = 0.0;
  Index start = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    cum += fractions[k];
    const Index end = k + 1 == fractions.size()
                          ? d.n()
                          : static_cast<Index>(std::llround(cum * static_cast<double>(d.n())));
    if (end - start < 2)
      fail(ErrorCode::insufficient_data, "split: part " + std::to_string(k) + " would have fewer than 2 rows");
    parts.push_back(d.select_rows(std::span<const Index>(perm.data() + start, static_cast<std::size_t>(end - start))));
    start = end;
  }
  return parts;
}

}  // namespace vimlab
