#include "hybridscreen/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "hybridscreen/errors.hpp"
#include "hybridscreen/seeds.hpp"

namespace hybridscreen {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one record. Double quotes group a field; "" inside quotes is a literal quote.
std::vector<std::string> split_record(std::string_view line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.emplace_back(trim(field));
  return fields;
}

double parse_cell(std::string_view cell) {
  if (cell.empty()) return kMissing;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return kMissing;
  return value;
}

Index find_column(const std::vector<std::string>& header, const std::string& name,
                  const std::filesystem::path& path) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw DataError("column '" + name + "' not found in " + path.string());
  }
  return static_cast<Index>(it - header.begin());
}

std::pair<Index, Index> class_counts(const Eigen::VectorXd& labels) {
  Index pos = 0;
  for (Index i = 0; i < labels.size(); ++i) pos += labels[i] == 1.0 ? 1 : 0;
  return {labels.size() - pos, pos};
}

}  // namespace

std::string to_string(TaskKind kind) {
  return kind == TaskKind::classification ? "classification" : "regression";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "classification") return TaskKind::classification;
  if (text == "regression") return TaskKind::regression;
  throw std::invalid_argument("unknown task kind '" + text + "'");
}

const Eigen::VectorXd& DescriptorTable::y() const {
  if (!labels) throw DataError("table has no labels");
  return *labels;
}

void DescriptorTable::validate() const {
  if (static_cast<Index>(compound_ids.size()) != matrix.rows()) {
    throw DataError("compound id count does not match row count");
  }
  if (static_cast<Index>(feature_names.size()) != matrix.cols()) {
    throw DataError("feature name count does not match column count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : feature_names) {
    if (!seen.insert(name).second) throw DataError("duplicate feature name '" + name + "'");
  }
  if (labels) {
    if (labels->size() != matrix.rows()) throw DataError("label count does not match row count");
    for (Index i = 0; i < labels->size(); ++i) {
      const double v = (*labels)[i];
      if (task == TaskKind::classification && v != 0.0 && v != 1.0) {
        throw DataError("classification label of '" + compound_ids[i] + "' is not 0 or 1");
      }
      if (!std::isfinite(v)) throw DataError("label of '" + compound_ids[i] + "' is not finite");
    }
  }
}

DescriptorTable DescriptorTable::select_rows(std::span<const Index> rows) const {
  DescriptorTable out;
  out.feature_names = feature_names;
  out.task = task;
  out.matrix.resize(static_cast<Index>(rows.size()), matrix.cols());
  out.compound_ids.reserve(rows.size());
  if (labels) out.labels = Eigen::VectorXd(static_cast<Index>(rows.size()));
  for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) {
    const Index src = rows[r];
    out.matrix.row(r) = matrix.row(src);
    out.compound_ids.push_back(compound_ids[src]);
    if (labels) (*out.labels)[r] = (*labels)[src];
  }
  return out;
}

DescriptorTable DescriptorTable::select_columns(std::span<const Index> cols) const {
  DescriptorTable out;
  out.compound_ids = compound_ids;
  out.labels = labels;
  out.task = task;
  out.matrix.resize(matrix.rows(), static_cast<Index>(cols.size()));
  out.feature_names.reserve(cols.size());
  for (Index c = 0; c < static_cast<Index>(cols.size()); ++c) {
    out.matrix.col(c) = matrix.col(cols[c]);
    out.feature_names.push_back(feature_names[cols[c]]);
  }
  return out;
}

DescriptorTable DescriptorTable::select_features(std::span<const std::string> names) const {
  std::unordered_map<std::string, Index> position;
  for (Index j = 0; j < cols(); ++j) position.emplace(feature_names[j], j);
  IndexList cols_out;
  cols_out.reserve(names.size());
  for (const auto& name : names) {
    auto it = position.find(name);
    if (it == position.end()) throw DataError("feature column '" + name + "' missing from table");
    cols_out.push_back(it->second);
  }
  return select_columns(cols_out);
}

DescriptorTable concat_rows(const DescriptorTable& a, const DescriptorTable& b) {
  if (a.feature_names != b.feature_names) throw DataError("cannot concatenate tables with different features");
  if (a.has_labels() != b.has_labels()) throw DataError("cannot concatenate labelled and unlabelled tables");
  if (a.task != b.task) throw DataError("cannot concatenate tables of different task kinds");
  DescriptorTable out;
  out.feature_names = a.feature_names;
  out.task = a.task;
  out.compound_ids = a.compound_ids;
  out.compound_ids.insert(out.compound_ids.end(), b.compound_ids.begin(), b.compound_ids.end());
  out.matrix.resize(a.rows() + b.rows(), a.cols());
  out.matrix << a.matrix, b.matrix;
  if (a.labels) {
    out.labels = Eigen::VectorXd(a.rows() + b.rows());
    *out.labels << *a.labels, *b.labels;
  }
  return out;
}

namespace {

std::pair<std::vector<std::string>, char> parse_header(std::istream& in, const std::filesystem::path& path,
                                                       char delim) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("table " + path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (delim == 0) {
    delim = (line.find('\t') != std::string::npos && line.find(',') == std::string::npos) ? '\t' : ',';
  }
  return {split_record(line, delim), delim};
}

}  // namespace

std::vector<std::string> read_header(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open table " + path.string());
  return parse_header(in, path, delimiter).first;
}

DescriptorTable load_table(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open table " + path.string());

  const auto [header, delim] = parse_header(in, path, options.delimiter);
  std::string line;
  const Index id_col = find_column(header, options.id_column, path);
  std::optional<Index> label_col;
  if (options.label_column) label_col = find_column(header, *options.label_column, path);

  IndexList feature_cols;
  DescriptorTable table;
  table.task = options.task;
  for (Index c = 0; c < static_cast<Index>(header.size()); ++c) {
    if (c == id_col || (label_col && c == *label_col)) continue;
    feature_cols.push_back(c);
    table.feature_names.push_back(header[c]);
  }
  {
    std::unordered_set<std::string> seen;
    for (const auto& name : table.feature_names) {
      if (!seen.insert(name).second) throw DataError("duplicate feature name '" + name + "' in " + path.string());
    }
  }

  std::vector<double> values;
  std::vector<double> labels;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, delim);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    if (!ids.insert(fields[id_col]).second) {
      throw DataError("duplicate compound id '" + fields[id_col] + "' in " + path.string());
    }
    table.compound_ids.push_back(fields[id_col]);
    for (Index c : feature_cols) values.push_back(parse_cell(fields[c]));
    if (label_col) {
      const double v = parse_cell(fields[*label_col]);
      if (!std::isfinite(v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": label '" + fields[*label_col] +
                        "' is not numeric");
      }
      labels.push_back(v);
    }
  }

  const Index n = static_cast<Index>(table.compound_ids.size());
  const Index p = static_cast<Index>(feature_cols.size());
  table.matrix = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, p);
  if (label_col) table.labels = Eigen::Map<const Eigen::VectorXd>(labels.data(), n);
  table.validate();
  return table;
}

CleanResult clean_features(const DescriptorTable& train) {
  if (train.rows() < 1) throw DataError("clean_features: table has no rows");
  IndexList kept;
  for (Index j = 0; j < train.cols(); ++j) {
    const auto col = train.matrix.col(j);
    if (!col.allFinite()) continue;
    if (col.maxCoeff() == col.minCoeff()) continue;
    kept.push_back(j);
  }
  if (kept.empty()) throw DataError("clean_features: no usable feature columns remain");
  return {train.select_columns(kept), kept};
}

RandomSplit split_random(const DescriptorTable& table, const SplitFractions& fractions,
                         std::uint64_t seed) {
  const Index n = table.rows();
  if (n < 3) throw DataError("split_random: need at least 3 rows");
  if (fractions.train <= 0 || fractions.cv <= 0 || fractions.test <= 0 ||
      std::abs(fractions.train + fractions.cv + fractions.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be positive and sum to 1");
  }
  const auto n_cv = static_cast<Index>(std::llround(fractions.cv * static_cast<double>(n)));
  const auto n_test = static_cast<Index>(std::llround(fractions.test * static_cast<double>(n)));
  if (n_cv + n_test >= n) throw DataError("split_random: fractions leave no training rows");

  IndexList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_seed(seed, stream::kSplit));
  std::shuffle(order.begin(), order.end(), rng);

  auto part = [&](Index begin, Index count) {
    IndexList rows(order.begin() + begin, order.begin() + begin + count);
    std::sort(rows.begin(), rows.end());
    return table.select_rows(rows);
  };
  const Index n_train = n - n_cv - n_test;
  return {part(0, n_train), part(n_train, n_cv), part(n_train + n_cv, n_test)};
}

IndexList FoldAssignment::train_rows(int fold) const {
  IndexList rows;
  for (std::size_t i = 0; i < fold_index.size(); ++i) {
    if (fold_index[i] != fold) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

IndexList FoldAssignment::validation_rows(int fold) const {
  IndexList rows;
  for (std::size_t i = 0; i < fold_index.size(); ++i) {
    if (fold_index[i] == fold) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

FoldAssignment stratified_kfold(const DescriptorTable& table, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold requires k >= 2");
  const Index n = table.rows();
  Rng rng(derive_seed(seed, stream::kFolds));
  FoldAssignment out;
  out.k = k;
  out.fold_index.assign(static_cast<std::size_t>(n), 0);

  std::vector<IndexList> groups;
  if (table.task == TaskKind::classification) {
    const auto& y = table.y();
    groups.resize(2);
    for (Index i = 0; i < n; ++i) groups[y[i] == 1.0 ? 1 : 0].push_back(i);
    for (int c = 0; c < 2; ++c) {
      if (static_cast<Index>(groups[c].size()) < k) {
        throw DataError("stratified_kfold: class " + std::to_string(c) + " has fewer than " +
                        std::to_string(k) + " members");
      }
    }
  } else {
    if (n < k) throw DataError("k-fold: fewer rows than folds");
    groups.emplace_back(static_cast<std::size_t>(n));
    std::iota(groups[0].begin(), groups[0].end(), Index{0});
  }

  // Dealing continues round-robin across groups so overall fold sizes differ by at most one.
  std::size_t next_fold = 0;
  for (auto& group : groups) {
    std::shuffle(group.begin(), group.end(), rng);
    for (Index row : group) {
      out.fold_index[static_cast<std::size_t>(row)] = static_cast<int>(next_fold);
      next_fold = (next_fold + 1) % static_cast<std::size_t>(k);
    }
  }
  return out;
}

DescriptorTable upsample_minority(const DescriptorTable& train, std::uint64_t seed) {
  if (train.task != TaskKind::classification) throw DataError("upsample_minority: regression table");
  const auto& y = train.y();
  const auto [neg, pos] = class_counts(y);
  if (neg == 0 || pos == 0) throw DataError("upsample_minority: table has a single class");
  if (neg == pos) return train;

  const double minority_label = pos < neg ? 1.0 : 0.0;
  IndexList minority;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] == minority_label) minority.push_back(i);
  }
  const Index extra = std::max(neg, pos) - std::min(neg, pos);

  Rng rng(derive_seed(seed, stream::kUpsample));
  std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
  IndexList rows(static_cast<std::size_t>(train.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  for (Index i = 0; i < extra; ++i) rows.push_back(minority[pick(rng)]);
  return train.select_rows(rows);
}

Scaler zscore_fit(const DescriptorTable& train) {
  const Index p = train.cols();
  if (train.rows() < 1) throw DataError("zscore_fit: table has no rows");
  Scaler s;
  s.means.resize(p);
  s.stds.resize(p);
  s.constant_mask.resize(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    const auto col = train.matrix.col(j);
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < col.size(); ++i) {
      if (std::isfinite(col[i])) {
        sum += col[i];
        ++count;
      }
    }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    double ss = 0.0;
    for (Index i = 0; i < col.size(); ++i) {
      if (std::isfinite(col[i])) ss += (col[i] - mean) * (col[i] - mean);
    }
    const double sd = count > 0 ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
    s.means[j] = mean;
    s.stds[j] = sd;
    s.constant_mask[static_cast<std::size_t>(j)] = sd < Scaler::kConstantTolerance;
  }
  return s;
}

Eigen::MatrixXd zscore_apply(const Scaler& scaler, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != scaler.size()) {
    throw DataError("zscore_apply: table has " + std::to_string(x.cols()) + " columns, scaler expects " +
                    std::to_string(scaler.size()));
  }
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    if (scaler.constant_mask[static_cast<std::size_t>(j)]) {
      out.col(j).setZero();
      continue;
    }
    for (Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      out(i, j) = std::isfinite(v) ? (v - scaler.means[j]) / scaler.stds[j] : 0.0;
    }
  }
  return out;
}

DescriptorTable zscore_apply(const Scaler& scaler, const DescriptorTable& table) {
  DescriptorTable out = table;
  out.matrix = zscore_apply(scaler, table.matrix);
  return out;
}

}  // namespace hybridscreen
