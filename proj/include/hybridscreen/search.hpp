#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridscreen/forest.hpp"
#include "hybridscreen/metrics.hpp"
#include "hybridscreen/snn.hpp"
#include "hybridscreen/table.hpp"

namespace hybridscreen {

enum class Objective { auc_roc, accuracy, r2 };

std::string to_string(Objective objective);
Objective parse_objective(const std::string& text);

/// Multipliers of the mean importance tried during threshold search.
struct ThresholdGrid {
  std::vector<double> multipliers{0.08, 0.09, 0.10, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1,
                                  1.2,  1.3,  1.4,  1.5, 1.6, 1.7, 1.8, 1.9, 2.0, 2.1, 2.2, 2.3};

  void validate() const;
};

struct SnnSearchSpace {
  std::vector<int> epochs{10, 20, 40, 50, 60, 200, 250, 400};
  std::vector<double> dropout{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<int> batch_size{32, 64, 128, 512, 1024, 2048, 4096, 8192};
  std::vector<InitMode> init_modes{InitMode::uniform,       InitMode::lecun_uniform, InitMode::normal,
                                   InitMode::glorot_normal, InitMode::he_normal,     InitMode::he_uniform};
  std::vector<Activation> activations{Activation::relu, Activation::sigmoid};
  int n_iter = 50;

  void validate() const;
  /// One independent uniform draw per dimension.
  SnnHyperparams sample(Rng& rng, const SnnHyperparams& base) const;
};

/// Network settings held fixed while the threshold is searched: 20 epochs,
/// he_normal, dropout 0.5, relu, mini-batch 512.
SnnHyperparams fixed_snn_defaults();

struct SearchSettings {
  int folds = 5;
  std::uint64_t seed = 0;
  Objective objective = Objective::auc_roc;
  /// n_estimators and k_candidates are honored; impurity follows the task and
  /// the seed is derived per fold.
  ForestParams forest;
  int jobs = 1;
};

struct TrialRecord {
  std::string stage;
  double threshold = 0.0;
  SnnHyperparams hp;
  int n_estimators = 0;
  std::vector<double> fold_values;
  double mean_value = 0.0;
  std::vector<Index> fold_feature_counts;
  double n_features_selected = 0.0;  // mean over folds
  bool skipped = false;
  double wall_seconds = 0.0;  // informational; excluded from exports
};

/// Everything fitted on a training portion before features are selected:
/// cleaning projection, (up-sampled) scaled matrix, forest and importances.
struct PreparedTraining {
  IndexList kept_columns;
  std::vector<std::string> kept_names;
  Scaler scaler;
  Eigen::MatrixXd scaled;
  Eigen::VectorXd labels;
  ForestModel forest;
  ImportanceVector importance;
  TaskKind task = TaskKind::classification;
};

PreparedTraining prepare_training(const DescriptorTable& train, const ForestParams& forest, std::uint64_t seed,
                                  int jobs = 1);

OutputKind output_kind_for(TaskKind task);

/// k-fold evaluation harness. Each fold's preparation sees only its own
/// training rows and is computed once, then reused for every (threshold,
/// network) trial.
class CrossValidation {
 public:
  CrossValidation(const DescriptorTable& table, const FoldAssignment& folds, const SearchSettings& settings);
  CrossValidation(const DescriptorTable& table, const SearchSettings& settings);

  TrialRecord evaluate(double threshold, const SnnHyperparams& hp) const;

  int fold_count() const { return static_cast<int>(folds_.size()); }
  const PreparedTraining& prepared(int fold) const { return folds_[static_cast<std::size_t>(fold)].train; }

  /// The network trained for one fold, and its validation scores.
  SnnModel fold_model(int fold, double threshold, const SnnHyperparams& hp) const;
  Eigen::VectorXd fold_scores(int fold, double threshold, const SnnHyperparams& hp) const;

 private:
  struct Fold {
    PreparedTraining train;
    Eigen::MatrixXd validation;  // cleaned and scaled with the training scaler
    Eigen::VectorXd validation_labels;
  };

  std::vector<Fold> folds_;
  SearchSettings settings_;
};

TrialRecord evaluate_config(const DescriptorTable& table, double threshold, const SnnHyperparams& hp,
                            const SearchSettings& settings);

/// First non-skipped trial with the largest mean value.
std::optional<std::size_t> best_trial(const std::vector<TrialRecord>& trials);

struct SeriesResult {
  double best_threshold = 0.0;
  SnnHyperparams best_hp;
  double best_value = 0.0;
  std::vector<TrialRecord> trials;  // |grid| threshold trials, then n_iter random trials
};

/// Threshold grid search with fixed network settings, then random search over
/// network settings at the chosen threshold.
SeriesResult series_optimize(const DescriptorTable& table, const ThresholdGrid& grid, const SnnSearchSpace& space,
                             const SearchSettings& settings);

struct ParallelResult {
  double best_threshold = 0.0;
  double best_dropout = 0.0;
  SnnHyperparams best_hp;
  double best_value = 0.0;
  std::vector<TrialRecord> trials;  // threshold-major
};

/// Full Cartesian grid over (threshold, dropout) with the other network
/// settings fixed.
ParallelResult parallel_optimize(const DescriptorTable& table, const ThresholdGrid& grid,
                                 const std::vector<double>& dropouts, const SearchSettings& settings);

struct SweepResult {
  std::vector<CurvePoint> curve;  // (x, mean objective); skipped trials omitted
  std::vector<TrialRecord> trials;
};

SweepResult sweep_n_estimators(const DescriptorTable& table, const std::vector<int>& values, double threshold,
                               const SnnHyperparams& hp, const SearchSettings& settings);
/// x is the mean number of selected features.
SweepResult sweep_feature_count(const DescriptorTable& table, const ThresholdGrid& grid, const SnnHyperparams& hp,
                                const SearchSettings& settings);
/// Each depth uses 10 units per hidden layer.
SweepResult sweep_hidden_layers(const DescriptorTable& table, const std::vector<int>& depths, double threshold,
                                const SnnHyperparams& hp, const SearchSettings& settings);

inline constexpr int kEnsembleSize = 4;

struct EnsembleModel {
  TaskKind task = TaskKind::classification;
  std::vector<std::string> kept_names;
  Scaler scaler;
  IndexList selected;  // positions within kept_names
  std::vector<std::string> selected_names;
  std::vector<SnnModel> members;
  double threshold = 0.0;
  SnnHyperparams hp;
  std::uint64_t seed = 0;
  int n_estimators = 0;
  ImportanceVector importance;                      // over kept_names
  std::vector<std::optional<double>> root_cutoffs;  // over kept_names, raw descriptor units
  std::optional<ForestModel> forest;                // in-memory only; artifacts keep importances and cutoffs
};

/// Prepares and selects once on the merged data, then trains kEnsembleSize
/// networks that differ only in their seeds. `member_seeds` overrides the
/// derived seeds.
EnsembleModel train_final(const DescriptorTable& table, double threshold, const SnnHyperparams& hp,
                          const SearchSettings& settings,
                          const std::optional<std::vector<std::uint64_t>>& member_seeds = std::nullopt);

/// Per-member outputs, one column per member.
Eigen::MatrixXd member_outputs(const EnsembleModel& model, const DescriptorTable& table);

/// Mean of member outputs. Columns are matched by name.
Eigen::VectorXd predict(const EnsembleModel& model, const DescriptorTable& table);

}  // namespace hybridscreen
