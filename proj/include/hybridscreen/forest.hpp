#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hybridscreen/table.hpp"

namespace hybridscreen {

enum class ImpurityKind { gini, variance };

/// One node of a tree stored in preorder. A split sends x[feature] < cutoff
/// to the left child.
struct TreeNode {
  std::optional<Index> feature;
  double cutoff = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  Index n_samples = 0;
  double impurity = 0.0;
  /// Class probabilities {p0, p1} for gini trees, {mean target} for variance trees.
  std::vector<double> value;

  bool is_leaf() const { return !feature.has_value(); }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  bool is_single_leaf() const { return nodes.size() <= 1; }
  Index depth() const;
};

struct ForestParams {
  int n_estimators = 1000;
  /// Features examined per node. Unset means round(sqrt(p)) for gini forests
  /// and max(1, p / 3) for variance forests.
  std::optional<int> k_candidates;
  int min_samples_split = 2;
  ImpurityKind impurity = ImpurityKind::gini;
  std::uint64_t seed = 0;

  int resolved_k(Index n_features) const;
};

struct ForestModel {
  ForestParams params;
  Index n_features = 0;
  std::vector<Tree> trees;
};

/// Normalized mean-decrease-impurity scores, one per feature.
using ImportanceVector = Eigen::VectorXd;

double gini_impurity(Index negatives, Index positives);

/// Extremely randomized trees grown on the full sample (no bootstrap). Tree i
/// draws from a stream seeded by derive_seed(params.seed, i), so the result
/// does not depend on `jobs`.
ForestModel fit_forest(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                       const ForestParams& params, int jobs = 1);

/// Per-tree normalized impurity decrease, averaged over trees with at least
/// one split. Throws DataError when every tree is a single leaf.
ImportanceVector importances(const ForestModel& model);

/// Indices j with importance[j] >= t * mean(importance), ascending. Throws
/// EmptySelection when nothing qualifies.
IndexList select_features(const Eigen::Ref<const Eigen::VectorXd>& importance, double t);

/// Mean over trees of the cutoff at the shallowest node splitting on
/// `feature` (first in preorder on ties). Empty when no tree uses it.
std::optional<double> root_cutoff_mean(const ForestModel& model, Index feature);

/// Mean leaf value over trees: class-1 probability or regression mean.
Eigen::VectorXd predict_forest(const ForestModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace hybridscreen
