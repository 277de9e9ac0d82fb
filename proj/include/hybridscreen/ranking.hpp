#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hybridscreen/forest.hpp"
#include "hybridscreen/table.hpp"

namespace hybridscreen {

struct TaskImportance {
  std::string task_name;
  std::vector<std::string> feature_names;
  Eigen::VectorXd values;
};

/// A per-feature score over a named feature universe.
struct FeatureScores {
  std::vector<std::string> names;
  Eigen::VectorXd values;

  /// Positions ordered by descending value, ties by ascending position.
  std::vector<Index> descending() const;
};

/// Union of the tasks' feature names in first-seen order.
std::vector<std::string> feature_universe(const std::vector<TaskImportance>& tasks);

/// Sum of importances across tasks; absent features contribute 0.
FeatureScores cumulative_gini(const std::vector<TaskImportance>& tasks);

/// Mean ordinal rank (1 = most important) across tasks.
FeatureScores average_rank(const std::vector<TaskImportance>& tasks);

struct RankedFeature {
  std::string name;
  double cumulative_gini = 0.0;
  double average_rank = 0.0;
};

std::vector<RankedFeature> top_k(const FeatureScores& cumulative, const FeatureScores& ranks, std::size_t k);

void write_ranking_csv(std::ostream& out, const std::vector<RankedFeature>& report);

/// Safe-zone membership is value < cutoff for every listed feature.
struct CutoffRule {
  std::vector<std::pair<std::string, double>> entries;

  void validate() const;
};

/// Per-feature shallowest-split cutoff means of one model.
struct ModelCutoffs {
  std::vector<std::string> feature_names;
  std::vector<std::optional<double>> cutoffs;
};

ModelCutoffs model_cutoffs(const ForestModel& model, const std::vector<std::string>& feature_names);

/// Averages each feature's cutoff over the models where it appears.
CutoffRule build_cutoff_rule(const std::vector<ModelCutoffs>& models, const std::vector<std::string>& features);

enum class Zone { safe, suspect };

struct PrescreenDecision {
  Zone zone = Zone::suspect;
  bool missing_value = false;  // a rule feature was non-finite; reported as suspect
};

std::string to_string(Zone zone);

/// `values` holds the compound's descriptor values in rule order.
PrescreenDecision prescreen_classify(std::span<const double> values, const CutoffRule& rule);

/// Classifies every row; rule features are looked up by column name.
std::vector<PrescreenDecision> prescreen_table(const DescriptorTable& table, const CutoffRule& rule);

struct PrescreenFractions {
  double toxic_fraction = 0.0;
  double nontoxic_fraction = 0.0;
  Index toxic_in_zone = 0;
  Index toxic_total = 0;
  Index nontoxic_in_zone = 0;
  Index nontoxic_total = 0;
};

/// Share of all toxic and of all nontoxic compounds falling in the safe zone.
PrescreenFractions prescreen_fractions(const DescriptorTable& table, const CutoffRule& rule);

}  // namespace hybridscreen
