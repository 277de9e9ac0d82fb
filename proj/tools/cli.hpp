#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hybridscreen/search.hpp"
#include "hybridscreen/table.hpp"

namespace hybridscreen::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kSearchDegenerate = 4,
};

struct DataSource {
  std::optional<std::filesystem::path> file;  // single table, split at load time
  SplitFractions split;
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> cv;
  std::optional<std::filesystem::path> test;
};

/// JSON run configuration. Relative paths resolve against the config file.
struct RunConfig {
  DataSource data;
  TaskKind task = TaskKind::classification;
  std::string id_column = "Name";
  std::optional<std::string> label_column;
  std::optional<std::uint64_t> seed;
  std::optional<Objective> objective;
  int folds = 5;
  std::string mode = "series";
  ThresholdGrid thresholds;
  std::vector<double> dropouts{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  SnnSearchSpace snn_space;
  ForestParams forest;
  std::vector<int> sweep_n_estimators{10, 50, 100, 250, 500, 1000, 1500, 2000};
  std::vector<int> sweep_depths{1, 2, 3, 4, 5};
  std::optional<double> sweep_threshold;  // n-estimators and depth sweeps; default 1.0
  std::vector<std::string> rule_features;
  std::filesystem::path output_dir = ".";

  SearchSettings settings(int jobs) const;
  LoadOptions load_options(bool with_labels = true) const;
};

RunConfig load_config(const std::filesystem::path& path);

/// Train+CV rows merged for optimization and final training.
DescriptorTable load_development_table(const RunConfig& config);

/// Held-out rows: the configured test file, or the test part of a split.
DescriptorTable load_test_table(const RunConfig& config);

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hybridscreen::cli
