#include "macsvm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "macsvm/rng.hpp"

namespace macsvm {

namespace {

constexpr std::uint64_t kSpiralStream = 0x5350;  // "SP"
constexpr std::uint64_t kSplitStream = 0x534c;   // "SL"

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_row(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

struct RawTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

RawTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  RawTable table;
  std::string line;
  char delim = 0;
  std::size_t line_no = 0;
  std::size_t arity = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (delim == 0) delim = line.find('\t') != std::string::npos ? '\t' : ',';
    auto cells = split_row(line, delim);
    if (arity == 0) {
      arity = cells.size();
    } else if (cells.size() != arity) {
      throw ParseError(path.string() + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " columns, expected " +
                       std::to_string(arity));
    }
    table.rows.emplace_back(cells.begin(), cells.end());
    table.line_numbers.push_back(line_no);
  }
  if (table.rows.empty()) throw ParseError(path.string() + ": no data rows");
  return table;
}

std::size_t resolve_column(int label_column, std::size_t arity, const std::filesystem::path& path) {
  const long idx = label_column < 0 ? static_cast<long>(arity) + label_column : label_column;
  if (idx < 0 || idx >= static_cast<long>(arity))
    throw ParseError(path.string() + ": label column " + std::to_string(label_column) +
                     " out of range for " + std::to_string(arity) + " columns");
  return static_cast<std::size_t>(idx);
}

bool row_is_header(const std::vector<std::string>& row, std::size_t skip) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j == skip) continue;
    double v;
    if (!parse_double(row[j], v)) return true;
  }
  return false;
}

Matrix parse_features(const RawTable& table, std::size_t first_row, std::size_t skip_col,
                      const std::filesystem::path& path) {
  const std::size_t arity = table.rows.front().size();
  const std::size_t dim = skip_col < arity ? arity - 1 : arity;
  const std::size_t n = table.rows.size() - first_row;
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[first_row + i];
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < arity; ++j) {
      if (j == skip_col) continue;
      double v;
      if (!parse_double(row[j], v) || !std::isfinite(v))
        throw ParseError(path.string() + ": row " + std::to_string(table.line_numbers[first_row + i]) +
                         ", column " + std::to_string(j + 1) + ": invalid feature value '" + row[j] + "'");
      X(static_cast<Eigen::Index>(i), c++) = v;
    }
  }
  return X;
}

}  // namespace

void Dataset::validate() const {
  require(!y.empty(), "dataset is empty");
  require(static_cast<std::size_t>(X.rows()) == y.size(), "dataset: X rows != label count");
  require(X.cols() >= 1, "dataset: no features");
  require(K >= 2, "dataset: need at least 2 classes");
  for (int label : y) require(label >= 0 && label < K, "dataset: label out of range");
  require(X.allFinite(), "dataset: non-finite feature value");
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(K, 0)), 0);
  for (int label : y) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.K = K;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    out.y.push_back(y[rows[i]]);
  }
  return out;
}

Dataset gen_spirals(const SpiralOptions& opt) {
  require(opt.classes >= 2, "gen_spirals: K must be >= 2");
  require(opt.per_class >= 1, "gen_spirals: n_per_class must be >= 1");
  require(opt.noise_sd >= 0.0 && std::isfinite(opt.noise_sd), "gen_spirals: noise_sd must be >= 0");
  require(opt.turns > 0.0 && std::isfinite(opt.turns), "gen_spirals: turns must be > 0");

  const int K = opt.classes;
  const int n = opt.per_class;
  Dataset ds;
  ds.K = K;
  ds.X.resize(static_cast<Eigen::Index>(K) * n, 2);
  ds.y.resize(static_cast<std::size_t>(K) * n);
  CounterRng rng(CounterRng::substream(opt.seed, kSpiralStream));
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::Index row = 0;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i, ++row) {
      const double t = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
      const double r = opt.turns * (0.5 + 0.5 * t);
      const double theta = two_pi * (opt.turns * t + static_cast<double>(k) / K);
      double jx = 0.0, jy = 0.0;
      if (opt.noise_sd > 0.0) {
        jx = opt.noise_sd * rng.normal();
        jy = opt.noise_sd * rng.normal();
      }
      ds.X(row, 0) = r * std::cos(theta) + jx;
      ds.X(row, 1) = r * std::sin(theta) + jy;
      ds.y[static_cast<std::size_t>(row)] = k;
    }
  }
  return ds;
}

LoadedDataset load_delimited(const std::filesystem::path& path, int label_column) {
  const RawTable table = read_table(path);
  const std::size_t arity = table.rows.front().size();
  if (arity < 2) throw ParseError(path.string() + ": need at least one feature column and a label column");
  const std::size_t label_col = resolve_column(label_column, arity, path);

  LoadedDataset out;
  out.had_header = row_is_header(table.rows.front(), label_col);
  const std::size_t first = out.had_header ? 1 : 0;
  if (table.rows.size() <= first) throw ParseError(path.string() + ": header but no data rows");

  out.data.X = parse_features(table, first, label_col, path);
  std::unordered_map<std::string, int> codes;
  out.data.y.reserve(table.rows.size() - first);
  for (std::size_t i = first; i < table.rows.size(); ++i) {
    const std::string& token = table.rows[i][label_col];
    if (token.empty())
      throw ParseError(path.string() + ": row " + std::to_string(table.line_numbers[i]) + ": empty label");
    auto [it, inserted] = codes.try_emplace(token, static_cast<int>(out.label_names.size()));
    if (inserted) out.label_names.push_back(token);
    out.data.y.push_back(it->second);
  }
  out.data.K = static_cast<int>(out.label_names.size());
  return out;
}

Matrix load_features(const std::filesystem::path& path, Eigen::Index expected_dim, int label_column) {
  const RawTable table = read_table(path);
  const std::size_t arity = table.rows.front().size();
  std::size_t skip = arity;  // no label column
  if (static_cast<Eigen::Index>(arity) == expected_dim + 1) {
    skip = resolve_column(label_column, arity, path);
  } else if (static_cast<Eigen::Index>(arity) != expected_dim) {
    throw std::invalid_argument(path.string() + ": " + std::to_string(arity) +
                                " columns, model expects " + std::to_string(expected_dim) +
                                " features (optionally plus a label column)");
  }
  const std::size_t first = row_is_header(table.rows.front(), skip) ? 1 : 0;
  if (table.rows.size() <= first) throw ParseError(path.string() + ": header but no data rows");
  return parse_features(table, first, skip, path);
}

void write_delimited(const std::filesystem::path& path, const Dataset& ds,
                     const std::vector<std::string>& label_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  char buf[32];
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.X(i, j));
      out << buf << ',';
    }
    const int label = ds.y[static_cast<std::size_t>(i)];
    if (label_names.empty())
      out << label << '\n';
    else
      out << label_names[static_cast<std::size_t>(label)] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void SplitSpec::validate() const {
  require(!fractions.empty(), "split: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    require(f > 0.0 && std::isfinite(f), "split: fractions must be positive");
    sum += f;
  }
  require(std::abs(sum - 1.0) <= 1e-12, "split: fractions must sum to 1");
}

std::vector<std::vector<std::size_t>> split_indices(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t parts = spec.fractions.size();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.K));
  for (std::size_t i = 0; i < ds.y.size(); ++i) by_class[static_cast<std::size_t>(ds.y[i])].push_back(i);

  CounterRng rng(CounterRng::substream(spec.seed, kSplitStream));
  std::vector<std::vector<std::size_t>> out(parts);
  for (auto& members : by_class) {
    if (members.empty()) continue;
    require(members.size() >= parts, "split: more parts than points in some class");
    for (std::size_t i = members.size() - 1; i > 0; --i)
      std::swap(members[i], members[rng.below(i + 1)]);

    const double count = static_cast<double>(members.size());
    std::vector<std::size_t> take(parts);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < parts; ++j) {
      const double exact = spec.fractions[j] * count;
      take[j] = static_cast<std::size_t>(std::floor(exact));
      assigned += take[j];
      remainders.emplace_back(exact - std::floor(exact), j);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < members.size(); ++r, ++assigned) ++take[remainders[r % parts].second];

    std::size_t pos = 0;
    for (std::size_t j = 0; j < parts; ++j)
      for (std::size_t t = 0; t < take[j]; ++t) out[j].push_back(members[pos++]);
  }
  for (auto& part : out) std::sort(part.begin(), part.end());
  return out;
}

std::vector<Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  std::vector<Dataset> parts;
  for (const auto& rows : split_indices(ds, spec)) parts.push_back(ds.subset(rows));
  return parts;
}

Standardizer Standardizer::fit(const Matrix& X) {
  require(X.rows() >= 1, "standardize: empty matrix");
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().mean();
    s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& X) const {
  if (empty()) return X;
  require(X.cols() == mean.size(), "standardize: dimension mismatch");
  Matrix out = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) out.col(j) = (X.col(j).array() - mean(j)) / scale(j);
  return out;
}

}  // namespace macsvm
