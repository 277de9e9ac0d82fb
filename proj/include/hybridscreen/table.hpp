#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hybridscreen {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

enum class TaskKind { classification, regression };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

/// Compounds x descriptors. Rows are compounds; non-finite entries stand for
/// missing or unparseable descriptor values.
struct DescriptorTable {
  std::vector<std::string> compound_ids;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd matrix;
  std::optional<Eigen::VectorXd> labels;
  TaskKind task = TaskKind::classification;

  Index rows() const { return matrix.rows(); }
  Index cols() const { return matrix.cols(); }
  bool has_labels() const { return labels.has_value(); }
  const Eigen::VectorXd& y() const;

  /// Throws DataError if any table invariant is violated.
  void validate() const;

  DescriptorTable select_rows(std::span<const Index> rows) const;
  DescriptorTable select_columns(std::span<const Index> cols) const;
  /// Projects onto `names` by feature name; throws DataError naming the first
  /// missing column.
  DescriptorTable select_features(std::span<const std::string> names) const;
};

/// Row-wise concatenation of tables with identical feature schemas.
DescriptorTable concat_rows(const DescriptorTable& a, const DescriptorTable& b);

struct LoadOptions {
  std::string id_column = "Name";
  std::optional<std::string> label_column;
  TaskKind task = TaskKind::classification;
  /// 0 means detect from the header line (tab if it has tabs and no commas).
  char delimiter = 0;
};

DescriptorTable load_table(const std::filesystem::path& path, const LoadOptions& options);

/// Column names from the header row.
std::vector<std::string> read_header(const std::filesystem::path& path, char delimiter = 0);

struct CleanResult {
  DescriptorTable table;
  IndexList kept_columns;
};

/// Drops columns that are constant or contain a non-finite entry.
CleanResult clean_features(const DescriptorTable& train);

struct SplitFractions {
  double train = 0.6;
  double cv = 0.2;
  double test = 0.2;
};

struct RandomSplit {
  DescriptorTable train;
  DescriptorTable cv;
  DescriptorTable test;
};

/// Shuffled three-way split. cv and test get round(fraction * n) rows, train
/// takes the remainder.
RandomSplit split_random(const DescriptorTable& table, const SplitFractions& fractions,
                         std::uint64_t seed);

struct FoldAssignment {
  std::vector<int> fold_index;
  int k = 0;

  IndexList train_rows(int fold) const;
  IndexList validation_rows(int fold) const;
};

/// Label-stratified folds for classification, plain random folds otherwise.
FoldAssignment stratified_kfold(const DescriptorTable& table, int k, std::uint64_t seed);

/// Appends copies of randomly drawn minority rows until both classes have the
/// majority count. Original rows keep their positions.
DescriptorTable upsample_minority(const DescriptorTable& train, std::uint64_t seed);

/// Per-column z-score parameters. Uses the population (1/n) deviation.
struct Scaler {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  std::vector<bool> constant_mask;

  static constexpr double kConstantTolerance = 1e-12;

  Index size() const { return means.size(); }
};

Scaler zscore_fit(const DescriptorTable& train);
Eigen::MatrixXd zscore_apply(const Scaler& scaler, const Eigen::Ref<const Eigen::MatrixXd>& x);
DescriptorTable zscore_apply(const Scaler& scaler, const DescriptorTable& table);

}  // namespace hybridscreen
