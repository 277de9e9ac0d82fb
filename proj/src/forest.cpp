#include "hybridscreen/forest.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "hybridscreen/errors.hpp"
#include "hybridscreen/parallel.hpp"
#include "hybridscreen/seeds.hpp"

namespace hybridscreen {

namespace {

struct NodeStats {
  Index n = 0;
  double sum = 0.0;     // positives for gini, sum of targets for variance
  double sum_sq = 0.0;  // variance only
};

double impurity_of(const NodeStats& s, ImpurityKind kind) {
  if (s.n == 0) return 0.0;
  if (kind == ImpurityKind::gini) {
    return gini_impurity(s.n - static_cast<Index>(s.sum), static_cast<Index>(s.sum));
  }
  const double n = static_cast<double>(s.n);
  const double mean = s.sum / n;
  return std::max(0.0, s.sum_sq / n - mean * mean);
}

std::vector<double> leaf_value(const NodeStats& s, ImpurityKind kind) {
  const double n = static_cast<double>(s.n);
  if (kind == ImpurityKind::gini) return {(n - s.sum) / n, s.sum / n};
  return {s.sum / n};
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
              const ForestParams& params, std::uint64_t seed)
      : x_(x), y_(y), params_(params), k_(params.resolved_k(x.cols())), rng_(seed) {
    features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), Index{0});
  }

  Tree build() {
    samples_.resize(static_cast<std::size_t>(x_.rows()));
    std::iota(samples_.begin(), samples_.end(), Index{0});
    grow(0, samples_.size());
    return std::move(tree_);
  }

 private:
  NodeStats stats(std::size_t begin, std::size_t end) const {
    NodeStats s;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y_[samples_[i]];
      ++s.n;
      s.sum += v;
      s.sum_sq += v * v;
    }
    return s;
  }

  bool is_pure(std::size_t begin, std::size_t end) const {
    const double first = y_[samples_[begin]];
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (y_[samples_[i]] != first) return false;
    }
    return true;
  }

  std::int32_t grow(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    const NodeStats s = stats(begin, end);
    {
      TreeNode node;
      node.n_samples = s.n;
      node.impurity = impurity_of(s, params_.impurity);
      node.value = leaf_value(s, params_.impurity);
      tree_.nodes.push_back(std::move(node));
    }
    if (s.n < params_.min_samples_split || is_pure(begin, end)) return id;

    const double parent_impurity = tree_.nodes[id].impurity;
    double best_decrease = 0.0;
    Index best_feature = -1;
    double best_cutoff = 0.0;

    // Partial Fisher-Yates over the feature pool; constant features do not
    // count toward the k candidates.
    int visited = 0;
    for (std::size_t i = 0; i < features_.size() && visited < k_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
      std::swap(features_[i], features_[pick(rng_)]);
      const Index f = features_[i];

      double lo = x_(samples_[begin], f);
      double hi = lo;
      for (std::size_t r = begin + 1; r < end; ++r) {
        const double v = x_(samples_[r], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(hi > lo)) continue;
      ++visited;

      std::uniform_real_distribution<double> draw(lo, hi);
      double cutoff = draw(rng_);
      while (!(cutoff > lo) || cutoff > hi) cutoff = draw(rng_);

      NodeStats left;
      for (std::size_t r = begin; r < end; ++r) {
        if (x_(samples_[r], f) < cutoff) {
          const double v = y_[samples_[r]];
          ++left.n;
          left.sum += v;
          left.sum_sq += v * v;
        }
      }
      NodeStats right{s.n - left.n, s.sum - left.sum, s.sum_sq - left.sum_sq};
      const double n = static_cast<double>(s.n);
      const double decrease = parent_impurity -
                              static_cast<double>(left.n) / n * impurity_of(left, params_.impurity) -
                              static_cast<double>(right.n) / n * impurity_of(right, params_.impurity);
      if (best_feature < 0 || decrease > best_decrease) {
        best_decrease = decrease;
        best_feature = f;
        best_cutoff = cutoff;
      }
    }
    if (best_feature < 0 || best_decrease <= 1e-12 * parent_impurity) return id;

    auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](Index r) { return x_(r, best_feature) < best_cutoff; });
    const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());

    tree_.nodes[id].feature = best_feature;
    tree_.nodes[id].cutoff = best_cutoff;
    const auto left_id = grow(begin, mid);
    const auto right_id = grow(mid, end);
    tree_.nodes[id].left = left_id;
    tree_.nodes[id].right = right_id;
    return id;
  }

  const Eigen::Ref<const Eigen::MatrixXd>& x_;
  const Eigen::Ref<const Eigen::VectorXd>& y_;
  const ForestParams& params_;
  int k_;
  Rng rng_;
  std::vector<Index> features_;
  std::vector<Index> samples_;
  Tree tree_;
};

}  // namespace

Index Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<Index> level(nodes.size(), 0);
  Index deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

int ForestParams::resolved_k(Index n_features) const {
  int k = 0;
  if (k_candidates) {
    k = *k_candidates;
  } else if (impurity == ImpurityKind::gini) {
    k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_features))));
  } else {
    k = static_cast<int>(n_features / 3);
  }
  return std::clamp<int>(k, 1, static_cast<int>(std::max<Index>(n_features, 1)));
}

double gini_impurity(Index negatives, Index positives) {
  const double n = static_cast<double>(negatives + positives);
  if (n == 0) return 0.0;
  const double a = static_cast<double>(negatives) / n;
  const double b = static_cast<double>(positives) / n;
  return 1.0 - a * a - b * b;
}

ForestModel fit_forest(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                       const ForestParams& params, int jobs) {
  if (x.rows() == 0) throw DataError("fit_forest: empty input");
  if (x.cols() == 0) throw DataError("fit_forest: no features");
  if (y.size() != x.rows()) throw DataError("fit_forest: label count does not match rows");
  if (params.n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
  if (params.k_candidates && (*params.k_candidates < 1 || *params.k_candidates > x.cols())) {
    throw ConfigError("k_candidates must lie in [1, p]");
  }
  if (params.impurity == ImpurityKind::gini) {
    for (Index i = 0; i < y.size(); ++i) {
      if (y[i] != 0.0 && y[i] != 1.0) throw DataError("fit_forest: gini forest needs 0/1 labels");
    }
  }
  if (!x.allFinite()) throw DataError("fit_forest: non-finite feature values");

  ForestModel model;
  model.params = params;
  model.n_features = x.cols();
  model.trees.resize(static_cast<std::size_t>(params.n_estimators));
  parallel_for(model.trees.size(), jobs, [&](std::size_t i) {
    TreeBuilder builder(x, y, params, derive_seed(params.seed, stream::kForest, i));
    model.trees[i] = builder.build();
  });
  return model;
}

ImportanceVector importances(const ForestModel& model) {
  const Index p = model.n_features;
  ImportanceVector total = ImportanceVector::Zero(p);
  Index contributing = 0;
  for (const auto& tree : model.trees) {
    if (tree.is_single_leaf()) continue;
    ImportanceVector per_tree = ImportanceVector::Zero(p);
    const double n_total = static_cast<double>(tree.nodes.front().n_samples);
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double n = static_cast<double>(node.n_samples);
      const double decrease = node.impurity - static_cast<double>(l.n_samples) / n * l.impurity -
                              static_cast<double>(r.n_samples) / n * r.impurity;
      per_tree[*node.feature] += n / n_total * decrease;
    }
    const double sum = per_tree.sum();
    if (!(sum > 0.0)) continue;
    total += per_tree / sum;
    ++contributing;
  }
  if (contributing == 0) throw DataError("importances: every tree is a single leaf");
  total /= static_cast<double>(contributing);
  return total / total.sum();
}

IndexList select_features(const Eigen::Ref<const Eigen::VectorXd>& importance, double t) {
  if (!(t > 0.0)) throw ConfigError("threshold multiplier must be positive");
  if (importance.size() == 0) throw EmptySelection("no importances to select from");
  const double cut = t * importance.mean();
  // Relative slack so that values equal to the cut survive summation rounding.
  const double slack = 1e-12 * std::abs(cut);
  IndexList selected;
  for (Index j = 0; j < importance.size(); ++j) {
    if (importance[j] >= cut - slack) selected.push_back(j);
  }
  if (selected.empty()) throw EmptySelection("no feature reaches " + std::to_string(t) + " x mean importance");
  return selected;
}

std::optional<double> root_cutoff_mean(const ForestModel& model, Index feature) {
  double sum = 0.0;
  Index count = 0;
  for (const auto& tree : model.trees) {
    if (tree.nodes.empty()) continue;
    // Breadth-first with left before right visits each level in preorder order.
    std::deque<std::int32_t> queue{0};
    while (!queue.empty()) {
      const auto& node = tree.nodes[static_cast<std::size_t>(queue.front())];
      queue.pop_front();
      if (node.is_leaf()) continue;
      if (*node.feature == feature) {
        sum += node.cutoff;
        ++count;
        break;
      }
      queue.push_back(node.left);
      queue.push_back(node.right);
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

Eigen::VectorXd predict_forest(const ForestModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != model.n_features) throw DataError("predict_forest: feature count mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (const auto& tree : model.trees) {
    for (Index i = 0; i < x.rows(); ++i) {
      std::size_t at = 0;
      while (!tree.nodes[at].is_leaf()) {
        const auto& node = tree.nodes[at];
        at = static_cast<std::size_t>(x(i, *node.feature) < node.cutoff ? node.left : node.right);
      }
      out[i] += tree.nodes[at].value.back();
    }
  }
  return out / static_cast<double>(model.trees.size());
}

}  // namespace hybridscreen
