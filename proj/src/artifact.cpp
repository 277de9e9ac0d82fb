#include "hybridscreen/artifact.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hybridscreen/errors.hpp"
#include "hybridscreen/format.hpp"

namespace hybridscreen {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* name, const char* where) {
  if (!j.is_object() || !j.contains(name)) {
    throw DataError(std::string(where) + ": missing field '" + name + "'");
  }
  return j.at(name);
}

template <typename T>
T get(const json& j, const char* name, const char* where) {
  try {
    return field(j, name, where).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string(where) + ": field '" + name + "' has the wrong type (" + e.what() + ")");
  }
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const char* where) {
  if (!j.is_array()) throw DataError(std::string(where) + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError(std::string(where) + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace

json hyperparams_to_json(const SnnHyperparams& hp) {
  return {{"hidden_layers", hp.hidden_layers}, {"hidden_units", hp.hidden_units},
          {"dropout", hp.dropout},             {"epochs", hp.epochs},
          {"batch_size", hp.batch_size},       {"init_mode", to_string(hp.init)},
          {"activation", to_string(hp.activation)}, {"learning_rate", hp.learning_rate}};
}

SnnHyperparams hyperparams_from_json(const json& j) {
  constexpr const char* where = "hyperparams";
  SnnHyperparams hp;
  if (!j.is_object()) throw ConfigError("hyperparams must be a JSON object");
  try {
    if (j.contains("hidden_layers")) hp.hidden_layers = j.at("hidden_layers").get<int>();
    if (j.contains("hidden_units")) hp.hidden_units = j.at("hidden_units").get<int>();
    if (j.contains("dropout")) hp.dropout = j.at("dropout").get<double>();
    if (j.contains("epochs")) hp.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) hp.batch_size = j.at("batch_size").get<int>();
    if (j.contains("init_mode")) hp.init = parse_init_mode(j.at("init_mode").get<std::string>());
    if (j.contains("activation")) hp.activation = parse_activation(j.at("activation").get<std::string>());
    if (j.contains("learning_rate")) hp.learning_rate = j.at("learning_rate").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
  hp.validate();
  return hp;
}

json network_to_json(const SnnModel& net) {
  json layers = json::array();
  for (const auto& layer : net.layers) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) rows.push_back(vector_to_json(layer.weights.row(r).transpose()));
    layers.push_back({{"weights", rows}, {"bias", vector_to_json(layer.bias)}});
  }
  return {{"activation", to_string(net.activation)}, {"output", to_string(net.output)}, {"layers", layers}};
}

SnnModel network_from_json(const json& j) {
  constexpr const char* where = "member";
  SnnModel net;
  try {
    net.activation = parse_activation(get<std::string>(j, "activation", where));
    net.output = parse_output_kind(get<std::string>(j, "output", where));
  } catch (const ConfigError& e) {
    throw DataError(std::string(where) + ": " + e.what());
  }
  const auto& layers = field(j, "layers", where);
  if (!layers.is_array() || layers.empty()) throw DataError("member: 'layers' must be a non-empty array");
  for (const auto& lj : layers) {
    DenseLayer<double> layer;
    layer.bias = vector_from_json(field(lj, "bias", "layer"), "layer.bias");
    const auto& rows = field(lj, "weights", "layer");
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != layer.bias.size()) {
      throw DataError("layer: weights rows do not match bias length");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = vector_from_json(rows[r], "layer.weights");
      if (r == 0) layer.weights.resize(layer.bias.size(), row.size());
      if (row.size() != layer.weights.cols()) throw DataError("layer: ragged weight rows");
      layer.weights.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    if (!net.layers.empty() && net.layers.back().fan_out() != layer.fan_in()) {
      throw DataError("member: layer dimensions do not chain");
    }
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.back().fan_out() != 1) throw DataError("member: output layer must have one unit");
  return net;
}

json rule_to_json(const CutoffRule& rule) {
  json out = json::array();
  for (const auto& [name, cutoff] : rule.entries) out.push_back({{"feature", name}, {"cutoff", cutoff}});
  return out;
}

CutoffRule rule_from_json(const json& j) {
  if (!j.is_array()) throw DataError("cutoff rule: expected a JSON array of {feature, cutoff}");
  CutoffRule rule;
  for (const auto& e : j) {
    rule.entries.emplace_back(get<std::string>(e, "feature", "cutoff rule"), get<double>(e, "cutoff", "cutoff rule"));
  }
  rule.validate();
  return rule;
}

json forest_to_json(const ForestModel& forest, const std::vector<std::string>& feature_names) {
  json trees = json::array();
  for (const auto& tree : forest.trees) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
      json node = {{"n", n.n_samples}, {"impurity", n.impurity}, {"value", n.value}};
      if (n.feature) {
        node["feature"] = *n.feature;
        node["cutoff"] = n.cutoff;
        node["left"] = n.left;
        node["right"] = n.right;
      }
      nodes.push_back(std::move(node));
    }
    trees.push_back(std::move(nodes));
  }
  return {{"format", kFormatVersion},
          {"kind", "forest"},
          {"feature_names", feature_names},
          {"impurity", forest.params.impurity == ImpurityKind::gini ? "gini" : "variance"},
          {"seed", forest.params.seed},
          {"trees", trees}};
}

ForestDump forest_from_json(const json& j) {
  constexpr const char* where = "forest";
  if (get<std::string>(j, "format", where) != kFormatVersion) throw DataError("forest: unsupported format version");
  ForestDump dump;
  dump.feature_names = get<std::vector<std::string>>(j, "feature_names", where);
  dump.forest.n_features = static_cast<Index>(dump.feature_names.size());
  dump.forest.params.impurity =
      get<std::string>(j, "impurity", where) == "gini" ? ImpurityKind::gini : ImpurityKind::variance;
  dump.forest.params.seed = get<std::uint64_t>(j, "seed", where);
  const auto& trees = field(j, "trees", where);
  dump.forest.params.n_estimators = static_cast<int>(trees.size());
  for (const auto& tj : trees) {
    Tree tree;
    for (const auto& nj : tj) {
      TreeNode n;
      n.n_samples = get<Index>(nj, "n", "forest node");
      n.impurity = get<double>(nj, "impurity", "forest node");
      n.value = get<std::vector<double>>(nj, "value", "forest node");
      if (nj.contains("feature")) {
        n.feature = get<Index>(nj, "feature", "forest node");
        n.cutoff = get<double>(nj, "cutoff", "forest node");
        n.left = get<std::int32_t>(nj, "left", "forest node");
        n.right = get<std::int32_t>(nj, "right", "forest node");
        if (*n.feature < 0 || *n.feature >= dump.forest.n_features) throw DataError("forest node: bad feature index");
      }
      tree.nodes.push_back(std::move(n));
    }
    for (const auto& n : tree.nodes) {
      if (n.feature && (n.left < 0 || n.right < 0 || static_cast<std::size_t>(std::max(n.left, n.right)) >= tree.nodes.size())) {
        throw DataError("forest node: child index out of range");
      }
    }
    dump.forest.trees.push_back(std::move(tree));
  }
  return dump;
}

json artifact_to_json(const ModelArtifact& artifact) {
  const auto& m = artifact.model;
  json members = json::array();
  for (const auto& net : m.members) members.push_back(network_to_json(net));
  json cutoffs = json::array();
  for (const auto& c : m.root_cutoffs) cutoffs.push_back(c ? json(*c) : json(nullptr));
  json out = {
      {"format", kFormatVersion},
      {"task", to_string(m.task)},
      {"seed", m.seed},
      {"threshold", m.threshold},
      {"n_estimators", m.n_estimators},
      {"hyperparams", hyperparams_to_json(m.hp)},
      {"kept_features", m.kept_names},
      {"scaler", {{"means", vector_to_json(m.scaler.means)},
                  {"stds", vector_to_json(m.scaler.stds)},
                  {"constant", m.scaler.constant_mask}}},
      {"selected_features", m.selected_names},
      {"selected_indices", m.selected},
      {"importance", vector_to_json(m.importance)},
      {"root_cutoffs", cutoffs},
      {"members", members},
  };
  if (artifact.cutoff_rule) out["cutoff_rule"] = rule_to_json(*artifact.cutoff_rule);
  return out;
}

ModelArtifact artifact_from_json(const json& j) {
  constexpr const char* where = "artifact";
  if (!j.is_object()) throw DataError("artifact: not a JSON object");
  const auto version = get<std::string>(j, "format", where);
  if (version != kFormatVersion) {
    throw DataError("artifact: unsupported format version '" + version + "' (expected " + kFormatVersion + ")");
  }
  ModelArtifact a;
  auto& m = a.model;
  try {
    m.task = parse_task_kind(get<std::string>(j, "task", where));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("artifact: ") + e.what());
  }
  m.seed = get<std::uint64_t>(j, "seed", where);
  m.threshold = get<double>(j, "threshold", where);
  m.n_estimators = get<int>(j, "n_estimators", where);
  try {
    m.hp = hyperparams_from_json(field(j, "hyperparams", where));
  } catch (const ConfigError& e) {
    throw DataError(std::string("artifact: ") + e.what());
  }
  m.kept_names = get<std::vector<std::string>>(j, "kept_features", where);
  const auto& sj = field(j, "scaler", where);
  m.scaler.means = vector_from_json(field(sj, "means", "scaler"), "scaler.means");
  m.scaler.stds = vector_from_json(field(sj, "stds", "scaler"), "scaler.stds");
  m.scaler.constant_mask = get<std::vector<bool>>(sj, "constant", "scaler");
  m.selected_names = get<std::vector<std::string>>(j, "selected_features", where);
  m.selected = get<IndexList>(j, "selected_indices", where);
  m.importance = vector_from_json(field(j, "importance", where), "importance");
  for (const auto& c : field(j, "root_cutoffs", where)) {
    if (!c.is_null() && !c.is_number()) throw DataError("artifact: root_cutoffs entries must be numbers or null");
    m.root_cutoffs.push_back(c.is_null() ? std::nullopt : std::optional<double>(c.get<double>()));
  }
  for (const auto& mj : field(j, "members", where)) m.members.push_back(network_from_json(mj));
  if (j.contains("cutoff_rule")) a.cutoff_rule = rule_from_json(j.at("cutoff_rule"));

  const auto p = static_cast<Index>(m.kept_names.size());
  if (m.scaler.means.size() != p || m.scaler.stds.size() != p || static_cast<Index>(m.scaler.constant_mask.size()) != p) {
    throw DataError("artifact: scaler length does not match kept_features");
  }
  if (m.importance.size() != p || static_cast<Index>(m.root_cutoffs.size()) != p) {
    throw DataError("artifact: importance/root_cutoffs length does not match kept_features");
  }
  if (m.selected.size() != m.selected_names.size()) throw DataError("artifact: selected indices and names differ");
  for (std::size_t i = 0; i < m.selected.size(); ++i) {
    const auto idx = m.selected[i];
    if (idx < 0 || idx >= p || m.kept_names[static_cast<std::size_t>(idx)] != m.selected_names[i]) {
      throw DataError("artifact: selected feature " + m.selected_names[i] + " inconsistent with kept_features");
    }
  }
  if (m.members.empty()) throw DataError("artifact: no ensemble members");
  for (const auto& net : m.members) {
    if (net.input_dim() != static_cast<Index>(m.selected.size())) {
      throw DataError("artifact: member input dimension does not match selected features");
    }
  }
  return a;
}

std::string dump_json(const json& j) { return j.dump(1) + "\n"; }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact) {
  write_file_atomic(path, dump_json(artifact_to_json(artifact)));
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  try {
    return artifact_from_json(read_json(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials) {
  out << "trial,stage,threshold,n_estimators,hidden_layers,hidden_units,epochs,dropout,batch_size,init_mode,"
         "activation,n_features_selected,skipped,mean_value,fold_values\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    out << i << ',' << t.stage << ',' << format_double(t.threshold) << ',' << t.n_estimators << ','
        << t.hp.hidden_layers << ',' << t.hp.hidden_units << ',' << t.hp.epochs << ',' << format_double(t.hp.dropout)
        << ',' << t.hp.batch_size << ',' << to_string(t.hp.init) << ',' << to_string(t.hp.activation) << ','
        << format_double(t.n_features_selected) << ',' << (t.skipped ? 1 : 0) << ','
        << (t.skipped ? std::string() : format_double(t.mean_value)) << ',';
    for (std::size_t f = 0; f < t.fold_values.size(); ++f) out << (f ? ";" : "") << format_double(t.fold_values[f]);
    out << '\n';
  }
}

}  // namespace hybridscreen
