#include "hybridscreen/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "hybridscreen/errors.hpp"
#include "hybridscreen/parallel.hpp"
#include "hybridscreen/seeds.hpp"

namespace hybridscreen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double score_objective(Objective objective, const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  switch (objective) {
    case Objective::auc_roc: return auc_roc(scores, labels);
    case Objective::accuracy: return accuracy(scores, labels);
    case Objective::r2: return r2(scores, labels);
  }
  return kNaN;
}

void check_objective(TaskKind task, Objective objective) {
  if (task == TaskKind::regression && objective != Objective::r2) {
    throw ConfigError("regression tasks use the r2 objective");
  }
  if (task == TaskKind::classification && objective == Objective::r2) {
    throw ConfigError("classification tasks use auc_roc or accuracy");
  }
}

template <typename Fn>
std::vector<TrialRecord> run_trials(std::size_t count, int jobs, Fn&& make) {
  std::vector<TrialRecord> trials(count);
  parallel_for(count, jobs, [&](std::size_t i) { trials[i] = make(i); });
  return trials;
}

SweepResult to_sweep(std::vector<TrialRecord> trials, const std::vector<double>& xs) {
  SweepResult out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!trials[i].skipped) out.curve.push_back({xs[i], trials[i].mean_value});
  }
  out.trials = std::move(trials);
  return out;
}

Eigen::VectorXd pairwise_column_mean(const Eigen::MatrixXd& m) {
  // Each row is sorted before a pairwise reduction, so the result does not
  // depend on member order and identical members reduce to exactly that
  // value when the member count is a power of two.
  Eigen::VectorXd out(m.rows());
  std::vector<double> level;
  for (Index r = 0; r < m.rows(); ++r) {
    level.assign(m.row(r).begin(), m.row(r).end());
    std::sort(level.begin(), level.end());
    while (level.size() > 1) {
      std::size_t k = 0;
      for (std::size_t i = 0; i + 1 < level.size(); i += 2) level[k++] = level[i] + level[i + 1];
      if (level.size() % 2 == 1) level[k++] = level.back();
      level.resize(k);
    }
    out(r) = level.front() / static_cast<double>(m.cols());
  }
  return out;
}

}  // namespace

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::auc_roc: return "auc_roc";
    case Objective::accuracy: return "accuracy";
    case Objective::r2: return "r2";
  }
  return "unknown";
}

Objective parse_objective(const std::string& text) {
  if (text == "auc_roc") return Objective::auc_roc;
  if (text == "accuracy") return Objective::accuracy;
  if (text == "r2") return Objective::r2;
  throw ConfigError("unknown objective '" + text + "'");
}

void ThresholdGrid::validate() const {
  if (multipliers.empty()) throw ConfigError("threshold grid is empty");
  for (std::size_t i = 0; i < multipliers.size(); ++i) {
    if (!(multipliers[i] > 0.0)) throw ConfigError("threshold multipliers must be positive");
    if (i > 0 && !(multipliers[i] > multipliers[i - 1])) {
      throw ConfigError("threshold multipliers must be strictly increasing");
    }
  }
}

void SnnSearchSpace::validate() const {
  if (epochs.empty() || dropout.empty() || batch_size.empty() || init_modes.empty() || activations.empty()) {
    throw ConfigError("every network search dimension needs at least one value");
  }
  if (n_iter < 1) throw ConfigError("n_iter must be >= 1");
}

SnnHyperparams SnnSearchSpace::sample(Rng& rng, const SnnHyperparams& base) const {
  auto pick = [&rng](const auto& values) {
    std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
    return values[d(rng)];
  };
  SnnHyperparams hp = base;
  hp.epochs = pick(epochs);
  hp.dropout = pick(dropout);
  hp.batch_size = pick(batch_size);
  hp.init = pick(init_modes);
  hp.activation = pick(activations);
  return hp;
}

SnnHyperparams fixed_snn_defaults() {
  SnnHyperparams hp;
  hp.epochs = 20;
  hp.init = InitMode::he_normal;
  hp.dropout = 0.5;
  hp.activation = Activation::relu;
  hp.batch_size = 512;
  return hp;
}

OutputKind output_kind_for(TaskKind task) {
  return task == TaskKind::classification ? OutputKind::sigmoid_probability : OutputKind::linear_value;
}

PreparedTraining prepare_training(const DescriptorTable& train, const ForestParams& forest, std::uint64_t seed,
                                  int jobs) {
  auto [cleaned, kept] = clean_features(train);
  DescriptorTable balanced = train.task == TaskKind::classification ? upsample_minority(cleaned, seed) : cleaned;

  PreparedTraining out;
  out.task = train.task;
  out.kept_columns = std::move(kept);
  out.kept_names = balanced.feature_names;
  out.labels = balanced.y();

  // The forest sees raw descriptor values so that split cutoffs stay in
  // descriptor units; importances are invariant to the per-column affine scaling.
  ForestParams params = forest;
  params.impurity = train.task == TaskKind::classification ? ImpurityKind::gini : ImpurityKind::variance;
  params.seed = derive_seed(seed, stream::kForest);
  if (params.k_candidates) params.k_candidates = std::min<int>(*params.k_candidates, static_cast<int>(balanced.cols()));
  out.forest = fit_forest(balanced.matrix, out.labels, params, jobs);
  out.importance = importances(out.forest);

  out.scaler = zscore_fit(balanced);
  out.scaled = zscore_apply(out.scaler, balanced.matrix);
  return out;
}

CrossValidation::CrossValidation(const DescriptorTable& table, const SearchSettings& settings)
    : CrossValidation(table, stratified_kfold(table, settings.folds, settings.seed), settings) {}

CrossValidation::CrossValidation(const DescriptorTable& table, const FoldAssignment& folds,
                                 const SearchSettings& settings)
    : settings_(settings) {
  check_objective(table.task, settings.objective);
  if (static_cast<Index>(folds.fold_index.size()) != table.rows()) {
    throw DataError("fold assignment does not match table rows");
  }
  folds_.resize(static_cast<std::size_t>(folds.k));
  for (int f = 0; f < folds.k; ++f) {
    const auto train_rows = folds.train_rows(f);
    const auto valid_rows = folds.validation_rows(f);
    if (train_rows.empty() || valid_rows.empty()) throw DataError("fold " + std::to_string(f) + " is empty");
    auto& fold = folds_[static_cast<std::size_t>(f)];
    fold.train = prepare_training(table.select_rows(train_rows), settings.forest,
                                  derive_seed(settings.seed, stream::kFolds, f), settings.jobs);
    const DescriptorTable valid = table.select_rows(valid_rows).select_columns(fold.train.kept_columns);
    fold.validation = zscore_apply(fold.train.scaler, valid.matrix);
    fold.validation_labels = valid.y();
  }
}

SnnModel CrossValidation::fold_model(int fold, double threshold, const SnnHyperparams& hp) const {
  const auto& f = folds_.at(static_cast<std::size_t>(fold));
  const auto selected = select_features(f.train.importance, threshold);
  SnnHyperparams fold_hp = hp;
  fold_hp.seed = derive_seed(settings_.seed, stream::kNetwork, fold);
  const Eigen::MatrixXd x = f.train.scaled(Eigen::all, selected);
  return train<double>(x, f.train.labels, fold_hp, output_kind_for(f.train.task)).model;
}

Eigen::VectorXd CrossValidation::fold_scores(int fold, double threshold, const SnnHyperparams& hp) const {
  const auto& f = folds_.at(static_cast<std::size_t>(fold));
  const auto selected = select_features(f.train.importance, threshold);
  const auto model = fold_model(fold, threshold, hp);
  return forward(model, f.validation(Eigen::all, selected));
}

TrialRecord CrossValidation::evaluate(double threshold, const SnnHyperparams& hp) const {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.threshold = threshold;
  rec.hp = hp;
  rec.n_estimators = settings_.forest.n_estimators;
  for (int f = 0; f < fold_count(); ++f) {
    try {
      rec.fold_feature_counts.push_back(
          static_cast<Index>(select_features(folds_[static_cast<std::size_t>(f)].train.importance, threshold).size()));
    } catch (const EmptySelection&) {
      rec.skipped = true;
      rec.fold_feature_counts.push_back(0);
    }
  }
  double count_sum = 0.0;
  for (auto c : rec.fold_feature_counts) count_sum += static_cast<double>(c);
  rec.n_features_selected = count_sum / static_cast<double>(fold_count());

  if (rec.skipped) {
    rec.mean_value = kNaN;
  } else {
    double sum = 0.0;
    for (int f = 0; f < fold_count(); ++f) {
      const auto scores = fold_scores(f, threshold, hp);
      const double value = score_objective(settings_.objective, scores, folds_[static_cast<std::size_t>(f)].validation_labels);
      rec.fold_values.push_back(value);
      sum += value;
    }
    rec.mean_value = sum / static_cast<double>(fold_count());
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

TrialRecord evaluate_config(const DescriptorTable& table, double threshold, const SnnHyperparams& hp,
                            const SearchSettings& settings) {
  return CrossValidation(table, settings).evaluate(threshold, hp);
}

std::optional<std::size_t> best_trial(const std::vector<TrialRecord>& trials) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].skipped) continue;
    if (!best || trials[i].mean_value > trials[*best].mean_value) best = i;
  }
  return best;
}

SeriesResult series_optimize(const DescriptorTable& table, const ThresholdGrid& grid, const SnnSearchSpace& space,
                             const SearchSettings& settings) {
  grid.validate();
  space.validate();
  const CrossValidation cv(table, settings);
  const SnnHyperparams fixed = fixed_snn_defaults();

  // Serial trials inside, so workers go to trials rather than trees.
  auto stage1 = run_trials(grid.multipliers.size(), settings.jobs, [&](std::size_t i) {
    auto rec = cv.evaluate(grid.multipliers[i], fixed);
    rec.stage = "threshold";
    return rec;
  });
  const auto best1 = best_trial(stage1);
  if (!best1) throw SearchDegenerate("every threshold in the grid selected no features");
  const double threshold = stage1[*best1].threshold;

  Rng rng(derive_seed(settings.seed, stream::kRandomSearch));
  std::vector<SnnHyperparams> draws;
  for (int i = 0; i < space.n_iter; ++i) draws.push_back(space.sample(rng, fixed));
  auto stage2 = run_trials(draws.size(), settings.jobs, [&](std::size_t i) {
    auto rec = cv.evaluate(threshold, draws[i]);
    rec.stage = "random";
    return rec;
  });
  const auto best2 = best_trial(stage2);
  if (!best2) throw SearchDegenerate("every random-search trial was skipped");

  SeriesResult out;
  out.best_threshold = threshold;
  out.best_hp = stage2[*best2].hp;
  out.best_value = stage2[*best2].mean_value;
  out.trials = std::move(stage1);
  out.trials.insert(out.trials.end(), stage2.begin(), stage2.end());
  return out;
}

ParallelResult parallel_optimize(const DescriptorTable& table, const ThresholdGrid& grid,
                                 const std::vector<double>& dropouts, const SearchSettings& settings) {
  grid.validate();
  if (dropouts.empty()) throw ConfigError("dropout set is empty");
  const CrossValidation cv(table, settings);
  const std::size_t n_d = dropouts.size();
  auto trials = run_trials(grid.multipliers.size() * n_d, settings.jobs, [&](std::size_t i) {
    SnnHyperparams hp = fixed_snn_defaults();
    hp.dropout = dropouts[i % n_d];
    auto rec = cv.evaluate(grid.multipliers[i / n_d], hp);
    rec.stage = "parallel";
    return rec;
  });
  const auto best = best_trial(trials);
  if (!best) throw SearchDegenerate("every (threshold, dropout) pair was skipped");

  ParallelResult out;
  out.best_threshold = trials[*best].threshold;
  out.best_dropout = trials[*best].hp.dropout;
  out.best_hp = trials[*best].hp;
  out.best_value = trials[*best].mean_value;
  out.trials = std::move(trials);
  return out;
}

SweepResult sweep_n_estimators(const DescriptorTable& table, const std::vector<int>& values, double threshold,
                               const SnnHyperparams& hp, const SearchSettings& settings) {
  const auto folds = stratified_kfold(table, settings.folds, settings.seed);
  std::vector<TrialRecord> trials;
  std::vector<double> xs;
  for (int n : values) {
    if (n < 1) throw ConfigError("n_estimators values must be >= 1");
    SearchSettings s = settings;
    s.forest.n_estimators = n;
    auto rec = CrossValidation(table, folds, s).evaluate(threshold, hp);
    rec.stage = "n_estimators";
    trials.push_back(std::move(rec));
    xs.push_back(static_cast<double>(n));
  }
  return to_sweep(std::move(trials), xs);
}

SweepResult sweep_feature_count(const DescriptorTable& table, const ThresholdGrid& grid, const SnnHyperparams& hp,
                                const SearchSettings& settings) {
  grid.validate();
  const CrossValidation cv(table, settings);
  auto trials = run_trials(grid.multipliers.size(), settings.jobs, [&](std::size_t i) {
    auto rec = cv.evaluate(grid.multipliers[i], hp);
    rec.stage = "feature_count";
    return rec;
  });
  std::vector<double> xs;
  for (const auto& t : trials) xs.push_back(t.n_features_selected);
  return to_sweep(std::move(trials), xs);
}

SweepResult sweep_hidden_layers(const DescriptorTable& table, const std::vector<int>& depths, double threshold,
                                const SnnHyperparams& hp, const SearchSettings& settings) {
  const CrossValidation cv(table, settings);
  auto trials = run_trials(depths.size(), settings.jobs, [&](std::size_t i) {
    SnnHyperparams deep = hp;
    deep.hidden_layers = depths[i];
    deep.hidden_units = 10;
    auto rec = cv.evaluate(threshold, deep);
    rec.stage = "depth";
    return rec;
  });
  std::vector<double> xs(depths.begin(), depths.end());
  return to_sweep(std::move(trials), xs);
}

EnsembleModel train_final(const DescriptorTable& table, double threshold, const SnnHyperparams& hp,
                          const SearchSettings& settings,
                          const std::optional<std::vector<std::uint64_t>>& member_seeds) {
  if (member_seeds && member_seeds->size() != static_cast<std::size_t>(kEnsembleSize)) {
    throw ConfigError("exactly " + std::to_string(kEnsembleSize) + " member seeds expected");
  }
  const auto prepared = prepare_training(table, settings.forest, settings.seed, settings.jobs);

  EnsembleModel model;
  model.task = table.task;
  model.kept_names = prepared.kept_names;
  model.scaler = prepared.scaler;
  model.selected = select_features(prepared.importance, threshold);
  for (auto j : model.selected) model.selected_names.push_back(model.kept_names[static_cast<std::size_t>(j)]);
  model.threshold = threshold;
  model.hp = hp;
  model.seed = settings.seed;
  model.n_estimators = settings.forest.n_estimators;
  model.importance = prepared.importance;
  for (Index j = 0; j < static_cast<Index>(model.kept_names.size()); ++j) {
    model.root_cutoffs.push_back(root_cutoff_mean(prepared.forest, j));
  }
  model.forest = prepared.forest;

  const Eigen::MatrixXd x = prepared.scaled(Eigen::all, model.selected);
  model.members.resize(kEnsembleSize);
  parallel_for(model.members.size(), settings.jobs, [&](std::size_t i) {
    SnnHyperparams member_hp = hp;
    member_hp.seed = member_seeds ? (*member_seeds)[i] : derive_seed(settings.seed, stream::kEnsembleMember, i);
    model.members[i] = train<double>(x, prepared.labels, member_hp, output_kind_for(table.task)).model;
  });
  return model;
}

Eigen::MatrixXd member_outputs(const EnsembleModel& model, const DescriptorTable& table) {
  const DescriptorTable projected = table.select_features(model.kept_names);
  const Eigen::MatrixXd scaled = zscore_apply(model.scaler, projected.matrix);
  const Eigen::MatrixXd x = scaled(Eigen::all, model.selected);
  Eigen::MatrixXd out(x.rows(), static_cast<Index>(model.members.size()));
  for (std::size_t m = 0; m < model.members.size(); ++m) out.col(static_cast<Index>(m)) = forward(model.members[m], x);
  return out;
}

Eigen::VectorXd predict(const EnsembleModel& model, const DescriptorTable& table) {
  if (model.members.empty()) throw DataError("ensemble has no members");
  return pairwise_column_mean(member_outputs(model, table));
}

}  // namespace hybridscreen
