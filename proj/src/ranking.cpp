#include "hybridscreen/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "hybridscreen/errors.hpp"
#include "hybridscreen/format.hpp"

namespace hybridscreen {

namespace {

void require_tasks(const std::vector<TaskImportance>& tasks) {
  if (tasks.empty()) throw DataError("ranking needs at least one task");
  for (const auto& t : tasks) {
    if (static_cast<Index>(t.feature_names.size()) != t.values.size()) {
      throw DataError("task '" + t.task_name + "': names and importances differ in length");
    }
  }
}

Eigen::VectorXd aligned(const TaskImportance& task, const std::unordered_map<std::string, Index>& position,
                        Index p) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  for (std::size_t j = 0; j < task.feature_names.size(); ++j) {
    v[position.at(task.feature_names[j])] = task.values[static_cast<Index>(j)];
  }
  return v;
}

std::unordered_map<std::string, Index> positions(const std::vector<std::string>& names) {
  std::unordered_map<std::string, Index> out;
  for (std::size_t j = 0; j < names.size(); ++j) out.emplace(names[j], static_cast<Index>(j));
  return out;
}

}  // namespace

std::vector<Index> FeatureScores::descending() const {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values[a] > values[b]; });
  return order;
}

std::vector<std::string> feature_universe(const std::vector<TaskImportance>& tasks) {
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (const auto& t : tasks) {
    for (const auto& n : t.feature_names) {
      if (seen.insert(n).second) names.push_back(n);
    }
  }
  return names;
}

FeatureScores cumulative_gini(const std::vector<TaskImportance>& tasks) {
  require_tasks(tasks);
  FeatureScores out{feature_universe(tasks), {}};
  const auto pos = positions(out.names);
  const auto p = static_cast<Index>(out.names.size());
  out.values = Eigen::VectorXd::Zero(p);
  for (const auto& t : tasks) out.values += aligned(t, pos, p);
  return out;
}

FeatureScores average_rank(const std::vector<TaskImportance>& tasks) {
  require_tasks(tasks);
  FeatureScores out{feature_universe(tasks), {}};
  const auto pos = positions(out.names);
  const auto p = static_cast<Index>(out.names.size());
  out.values = Eigen::VectorXd::Zero(p);
  for (const auto& t : tasks) {
    const FeatureScores task_scores{out.names, aligned(t, pos, p)};
    const auto order = task_scores.descending();
    for (std::size_t r = 0; r < order.size(); ++r) out.values[order[r]] += static_cast<double>(r + 1);
  }
  out.values /= static_cast<double>(tasks.size());
  return out;
}

std::vector<RankedFeature> top_k(const FeatureScores& cumulative, const FeatureScores& ranks, std::size_t k) {
  if (k < 1) throw ConfigError("top_k needs k >= 1");
  if (k > cumulative.names.size()) throw ConfigError("top_k: k exceeds the number of features");
  const auto rank_pos = positions(ranks.names);
  const auto order = cumulative.descending();
  std::vector<RankedFeature> out;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = order[i];
    const auto& name = cumulative.names[static_cast<std::size_t>(j)];
    auto it = rank_pos.find(name);
    out.push_back({name, cumulative.values[j], it == rank_pos.end() ? 0.0 : ranks.values[it->second]});
  }
  return out;
}

void write_ranking_csv(std::ostream& out, const std::vector<RankedFeature>& report) {
  out << "feature,cumulative_gini,average_rank\n";
  for (const auto& r : report) {
    out << r.name << ',' << format_double(r.cumulative_gini) << ',' << format_double(r.average_rank) << '\n';
  }
}

void CutoffRule::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& [name, cutoff] : entries) {
    if (!seen.insert(name).second) throw DataError("cutoff rule lists '" + name + "' twice");
    if (!std::isfinite(cutoff)) throw DataError("cutoff for '" + name + "' is not finite");
  }
}

ModelCutoffs model_cutoffs(const ForestModel& model, const std::vector<std::string>& feature_names) {
  if (static_cast<Index>(feature_names.size()) != model.n_features) {
    throw DataError("feature names do not match the forest's feature count");
  }
  ModelCutoffs out{feature_names, {}};
  for (Index j = 0; j < model.n_features; ++j) out.cutoffs.push_back(root_cutoff_mean(model, j));
  return out;
}

CutoffRule build_cutoff_rule(const std::vector<ModelCutoffs>& models, const std::vector<std::string>& features) {
  CutoffRule rule;
  for (const auto& feature : features) {
    double sum = 0.0;
    int count = 0;
    for (const auto& m : models) {
      auto it = std::find(m.feature_names.begin(), m.feature_names.end(), feature);
      if (it == m.feature_names.end()) continue;
      const auto& c = m.cutoffs[static_cast<std::size_t>(it - m.feature_names.begin())];
      if (c) {
        sum += *c;
        ++count;
      }
    }
    if (count == 0) throw DataError("feature '" + feature + "' is never split on by any model");
    rule.entries.emplace_back(feature, sum / count);
  }
  rule.validate();
  return rule;
}

std::string to_string(Zone zone) { return zone == Zone::safe ? "SafeZone" : "Suspect"; }

PrescreenDecision prescreen_classify(std::span<const double> values, const CutoffRule& rule) {
  if (values.size() != rule.entries.size()) throw DataError("prescreen: one value per rule feature expected");
  PrescreenDecision d{Zone::safe, false};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      d.missing_value = true;
      d.zone = Zone::suspect;
    } else if (!(values[i] < rule.entries[i].second)) {
      d.zone = Zone::suspect;
    }
  }
  return d;
}

std::vector<PrescreenDecision> prescreen_table(const DescriptorTable& table, const CutoffRule& rule) {
  rule.validate();
  std::vector<std::string> names;
  for (const auto& e : rule.entries) names.push_back(e.first);
  const DescriptorTable projected = table.select_features(names);
  std::vector<PrescreenDecision> out;
  out.reserve(static_cast<std::size_t>(table.rows()));
  std::vector<double> row(names.size());
  for (Index i = 0; i < projected.rows(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) row[j] = projected.matrix(i, static_cast<Index>(j));
    out.push_back(prescreen_classify(row, rule));
  }
  return out;
}

PrescreenFractions prescreen_fractions(const DescriptorTable& table, const CutoffRule& rule) {
  if (table.task != TaskKind::classification) throw DataError("prescreen fractions need a classification table");
  const auto& y = table.y();
  const auto decisions = prescreen_table(table, rule);
  PrescreenFractions f;
  for (Index i = 0; i < y.size(); ++i) {
    const bool toxic = y[i] == 1.0;
    const bool safe = decisions[static_cast<std::size_t>(i)].zone == Zone::safe;
    (toxic ? f.toxic_total : f.nontoxic_total) += 1;
    if (safe) (toxic ? f.toxic_in_zone : f.nontoxic_in_zone) += 1;
  }
  if (f.toxic_total == 0 || f.nontoxic_total == 0) throw DataError("prescreen fractions need both classes");
  f.toxic_fraction = static_cast<double>(f.toxic_in_zone) / static_cast<double>(f.toxic_total);
  f.nontoxic_fraction = static_cast<double>(f.nontoxic_in_zone) / static_cast<double>(f.nontoxic_total);
  return f;
}

}  // namespace hybridscreen
