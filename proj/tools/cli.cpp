#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hybridscreen/artifact.hpp"
#include "hybridscreen/errors.hpp"
#include "hybridscreen/format.hpp"
#include "hybridscreen/ranking.hpp"
#include "hybridscreen/seeds.hpp"

namespace hybridscreen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return p.is_absolute() ? p : base / p;
}

template <typename T>
T take(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T, typename Parse>
std::vector<T> parse_list(const json& j, const std::string& key, const std::string& where, Parse parse) {
  std::vector<T> out;
  for (const auto& s : take<std::vector<std::string>>(j, key, where)) {
    try {
      out.push_back(parse(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + "." + key + ": " + e.what());
    }
  }
  return out;
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ConfigError(what + ": file not found: " + path.string());
}

std::string to_csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string trials_csv(const std::vector<TrialRecord>& trials) {
  std::ostringstream os;
  write_trials_csv(os, trials);
  return os.str();
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  write_curve_csv(os, points);
  return os.str();
}

std::string sweep_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os << "x,auc\n";
  for (const auto& p : points) os << format_double(p.x) << ',' << format_double(p.y) << '\n';
  return os.str();
}

struct Context {
  std::optional<fs::path> config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<fs::path> out_dir;
  std::ostream* out = nullptr;

  RunConfig config() const {
    if (!config_path) throw ConfigError("this command needs --config");
    RunConfig c = load_config(*config_path);
    if (seed) c.seed = seed;
    return c;
  }

  std::optional<RunConfig> maybe_config() const {
    if (!config_path) return std::nullopt;
    return config();
  }

  fs::path output(const std::optional<RunConfig>& c) const {
    fs::path dir = out_dir ? *out_dir : (c ? c->output_dir : fs::path("."));
    fs::create_directories(dir);
    return dir;
  }

  void write(const fs::path& path, const std::string& content) const {
    write_file_atomic(path, content);
    *out << "wrote " << path.string() << '\n';
  }
};

struct TableArgs {
  std::string table;
  std::string id_column;
  std::string label_column;

  LoadOptions options(const std::optional<RunConfig>& c, bool with_labels) const {
    LoadOptions o = c ? c->load_options(with_labels) : LoadOptions{};
    if (!with_labels) o.label_column.reset();
    if (!id_column.empty()) o.id_column = id_column;
    if (with_labels && !label_column.empty()) o.label_column = label_column;
    return o;
  }

  /// The explicit table, or the configured held-out rows.
  DescriptorTable load(const std::optional<RunConfig>& c, bool with_labels, TaskKind task) const {
    LoadOptions o = options(c, with_labels);
    o.task = task;
    if (!table.empty()) {
      require_file(table, "--table");
      if (with_labels && !o.label_column) throw ConfigError("no label column given");
      return load_table(table, o);
    }
    if (!c) throw ConfigError("either --table or --config is needed");
    RunConfig copy = *c;
    copy.task = task;
    if (!with_labels) copy.label_column.reset();
    if (!label_column.empty() && with_labels) copy.label_column = label_column;
    if (!id_column.empty()) copy.id_column = id_column;
    return load_test_table(copy);
  }
};

// optimize

json best_config_json(const std::string& mode, const RunConfig& c, const SearchSettings& s, double threshold,
                      const SnnHyperparams& hp, double value) {
  return {{"format", kFormatVersion},
          {"kind", "best_config"},
          {"mode", mode},
          {"task", to_string(c.task)},
          {"objective", to_string(s.objective)},
          {"seed", s.seed},
          {"threshold", threshold},
          {"n_estimators", s.forest.n_estimators},
          {"hyperparams", hyperparams_to_json(hp)},
          {"best_value", value}};
}

void cmd_optimize(const Context& ctx) {
  const RunConfig c = ctx.config();
  const SearchSettings s = c.settings(ctx.jobs);
  const DescriptorTable table = load_development_table(c);
  const fs::path dir = ctx.output(c);

  std::vector<TrialRecord> trials;
  json best;
  if (c.mode == "series") {
    auto r = series_optimize(table, c.thresholds, c.snn_space, s);
    best = best_config_json(c.mode, c, s, r.best_threshold, r.best_hp, r.best_value);
    trials = std::move(r.trials);
  } else {
    auto r = parallel_optimize(table, c.thresholds, c.dropouts, s);
    best = best_config_json(c.mode, c, s, r.best_threshold, r.best_hp, r.best_value);
    trials = std::move(r.trials);
  }
  ctx.write(dir / "trials.csv", trials_csv(trials));
  ctx.write(dir / "best_config.json", dump_json(best));
  *ctx.out << "best " << to_string(s.objective) << ' ' << format_double(best.at("best_value").get<double>())
           << " at threshold " << format_double(best.at("threshold").get<double>()) << '\n';
}

// train

void cmd_train(const Context& ctx, const std::string& best_path, bool dump_forest) {
  const RunConfig c = ctx.config();
  SearchSettings s = c.settings(ctx.jobs);
  const fs::path dir = ctx.output(c);
  const fs::path best_file = best_path.empty() ? dir / "best_config.json" : fs::path(best_path);
  require_file(best_file, "best config");

  double threshold = 0.0;
  SnnHyperparams hp;
  try {
    const json best = read_json(best_file);
    if (take<std::string>(best, "format", "best_config") != kFormatVersion) {
      throw ConfigError("best_config: unsupported format version");
    }
    threshold = take<double>(best, "threshold", "best_config");
    hp = hyperparams_from_json(best.at("hyperparams"));
    if (best.contains("n_estimators")) s.forest.n_estimators = take<int>(best, "n_estimators", "best_config");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("best_config: ") + e.what());
  }

  const DescriptorTable table = load_development_table(c);
  ModelArtifact artifact;
  artifact.model = train_final(table, threshold, hp, s);
  if (!c.rule_features.empty()) {
    const ModelCutoffs cutoffs{artifact.model.kept_names, artifact.model.root_cutoffs};
    artifact.cutoff_rule = build_cutoff_rule({cutoffs}, c.rule_features);
  }
  ctx.write(dir / "model.json", dump_json(artifact_to_json(artifact)));
  if (dump_forest) {
    ctx.write(dir / "forest.json", dump_json(forest_to_json(*artifact.model.forest, artifact.model.kept_names)));
  }
  *ctx.out << "selected " << artifact.model.selected_names.size() << " of " << artifact.model.kept_names.size()
           << " features\n";
}

// evaluate / predict

fs::path model_path(const Context& ctx, const std::optional<RunConfig>& c, const std::string& given) {
  const fs::path p = given.empty() ? ctx.output(c) / "model.json" : fs::path(given);
  require_file(p, "model");
  return p;
}

void cmd_evaluate(const Context& ctx, const std::string& model_arg, const TableArgs& targs) {
  const auto c = ctx.maybe_config();
  const ModelArtifact artifact = load_artifact(model_path(ctx, c, model_arg));
  const DescriptorTable table = targs.load(c, true, artifact.model.task);
  const Eigen::VectorXd scores = predict(artifact.model, table);
  const Eigen::VectorXd& y = table.y();
  const fs::path dir = ctx.output(c);

  json metrics = {{"task", to_string(table.task)}, {"n", table.rows()}};
  if (table.task == TaskKind::classification) {
    const auto f1 = max_f1(scores, y);
    metrics["auc_roc"] = auc_roc(scores, y);
    metrics["auc_pr"] = auc_pr(scores, y);
    metrics["max_f1"] = f1.f1;
    metrics["max_f1_threshold"] = f1.threshold;
    metrics["accuracy"] = accuracy(scores, y);
    ctx.write(dir / "roc.csv", curve_csv(roc_points(scores, y)));
    ctx.write(dir / "pr.csv", curve_csv(pr_points(scores, y)));
  } else {
    metrics["r2"] = r2(scores, y);
  }
  ctx.write(dir / "metrics.json", dump_json(metrics));
}

void cmd_predict(const Context& ctx, const std::string& model_arg, const TableArgs& targs) {
  const auto c = ctx.maybe_config();
  const ModelArtifact artifact = load_artifact(model_path(ctx, c, model_arg));
  const DescriptorTable table = targs.load(c, false, artifact.model.task);
  const Eigen::VectorXd scores = predict(artifact.model, table);
  std::ostringstream os;
  os << "id,score\n";
  for (Index i = 0; i < table.rows(); ++i) {
    os << to_csv_cell(table.compound_ids[static_cast<std::size_t>(i)]) << ',' << format_double(scores(i)) << '\n';
  }
  ctx.write(ctx.output(c) / "predictions.csv", os.str());
}

// rank

struct RankInput {
  TaskImportance importance;
  ModelCutoffs cutoffs;
};

RankInput read_rank_input(const fs::path& path) {
  require_file(path, "rank input");
  const json j = read_json(path);
  RankInput in;
  in.importance.task_name = path.stem().string();
  if (j.is_object() && j.value("kind", "") == "forest") {
    const ForestDump dump = forest_from_json(j);
    in.importance.feature_names = dump.feature_names;
    in.importance.values = importances(dump.forest);
    in.cutoffs = model_cutoffs(dump.forest, dump.feature_names);
  } else {
    const ModelArtifact artifact = artifact_from_json(j);
    in.importance.feature_names = artifact.model.kept_names;
    in.importance.values = artifact.model.importance;
    in.cutoffs = {artifact.model.kept_names, artifact.model.root_cutoffs};
  }
  return in;
}

void cmd_rank(const Context& ctx, const std::vector<std::string>& inputs, std::size_t top,
              std::vector<std::string> rule_features) {
  const auto c = ctx.maybe_config();
  if (rule_features.empty() && c) rule_features = c->rule_features;
  std::vector<TaskImportance> tasks;
  std::vector<ModelCutoffs> cutoffs;
  for (const auto& p : inputs) {
    auto in = read_rank_input(p);
    tasks.push_back(std::move(in.importance));
    cutoffs.push_back(std::move(in.cutoffs));
  }
  const FeatureScores cumulative = cumulative_gini(tasks);
  const FeatureScores ranks = average_rank(tasks);
  const std::size_t k = top == 0 ? cumulative.names.size() : top;
  std::ostringstream os;
  write_ranking_csv(os, top_k(cumulative, ranks, k));
  const fs::path dir = ctx.output(c);
  ctx.write(dir / "ranking.csv", os.str());
  if (!rule_features.empty()) {
    ctx.write(dir / "rule.json", dump_json(rule_to_json(build_cutoff_rule(cutoffs, rule_features))));
  }
}

// prescreen

CutoffRule read_rule(const fs::path& path) {
  require_file(path, "rule");
  const json j = read_json(path);
  if (j.is_array()) return rule_from_json(j);
  const ModelArtifact artifact = artifact_from_json(j);
  if (!artifact.cutoff_rule) throw DataError("model artifact carries no cutoff rule");
  return *artifact.cutoff_rule;
}

void cmd_prescreen(const Context& ctx, const std::string& rule_arg, TableArgs targs) {
  const auto c = ctx.maybe_config();
  const CutoffRule rule = read_rule(rule_arg);
  rule.validate();

  bool with_labels = false;
  {
    const LoadOptions probe = targs.options(c, true);
    if (probe.label_column) {
      fs::path p;
      if (!targs.table.empty()) {
        p = targs.table;
      } else if (c) {
        p = c->data.test ? *c->data.test : c->data.file.value_or(fs::path());
      }
      if (!p.empty() && fs::is_regular_file(p)) {
        const auto header = read_header(p);
        with_labels = std::find(header.begin(), header.end(), *probe.label_column) != header.end();
      }
    }
  }
  const DescriptorTable table = targs.load(c, with_labels, TaskKind::classification);
  const auto decisions = prescreen_table(table, rule);

  std::ostringstream os;
  os << "id,zone,missing_value\n";
  Index safe = 0;
  Index missing = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto& d = decisions[i];
    safe += d.zone == Zone::safe;
    missing += d.missing_value;
    os << to_csv_cell(table.compound_ids[i]) << ',' << to_string(d.zone) << ',' << (d.missing_value ? 1 : 0) << '\n';
  }
  json summary = {{"n", table.rows()},
                  {"safe", safe},
                  {"suspect", table.rows() - safe},
                  {"missing_value", missing},
                  {"rule", rule_to_json(rule)}};
  if (with_labels) {
    const auto f = prescreen_fractions(table, rule);
    summary["toxic_fraction"] = f.toxic_fraction;
    summary["nontoxic_fraction"] = f.nontoxic_fraction;
    summary["toxic_in_zone"] = f.toxic_in_zone;
    summary["toxic_total"] = f.toxic_total;
    summary["nontoxic_in_zone"] = f.nontoxic_in_zone;
    summary["nontoxic_total"] = f.nontoxic_total;
  }
  const fs::path dir = ctx.output(c);
  ctx.write(dir / "prescreen.csv", os.str());
  ctx.write(dir / "prescreen_summary.json", dump_json(summary));
}

// casestudy

void cmd_casestudy(const Context& ctx, const std::string& which) {
  const RunConfig c = ctx.config();
  const SearchSettings s = c.settings(ctx.jobs);
  const DescriptorTable table = load_development_table(c);
  const fs::path dir = ctx.output(c);
  const SnnHyperparams hp = fixed_snn_defaults();
  const double threshold = c.sweep_threshold.value_or(1.0);
  const std::string stem = "casestudy_" + which;

  if (which == "series-parallel") {
    // Series mode here searches dropout on a grid at the threshold chosen
    // with fixed network settings. Both modes share one set of trials.
    const auto it = std::find(c.dropouts.begin(), c.dropouts.end(), hp.dropout);
    if (it == c.dropouts.end()) {
      throw ConfigError("series-parallel needs dropout " + format_double(hp.dropout) + " in the dropout grid");
    }
    const auto par = parallel_optimize(table, c.thresholds, c.dropouts, s);
    const std::size_t n_d = c.dropouts.size();
    const std::size_t fixed_col = static_cast<std::size_t>(it - c.dropouts.begin());

    std::vector<TrialRecord> stage1;
    for (std::size_t t = 0; t < c.thresholds.multipliers.size(); ++t) stage1.push_back(par.trials[t * n_d + fixed_col]);
    const auto b1 = best_trial(stage1);
    if (!b1) throw SearchDegenerate("every threshold in the grid selected no features");
    std::vector<TrialRecord> stage2(par.trials.begin() + static_cast<std::ptrdiff_t>(*b1 * n_d),
                                    par.trials.begin() + static_cast<std::ptrdiff_t>((*b1 + 1) * n_d));
    const auto b2 = best_trial(stage2);
    if (!b2) throw SearchDegenerate("every dropout at the series threshold was skipped");

    std::vector<CurvePoint> series_curve;
    std::vector<CurvePoint> parallel_curve;
    for (std::size_t d = 0; d < n_d; ++d) {
      if (!stage2[d].skipped) series_curve.push_back({c.dropouts[d], stage2[d].mean_value});
      std::optional<double> best;
      for (std::size_t t = 0; t < c.thresholds.multipliers.size(); ++t) {
        const auto& r = par.trials[t * n_d + d];
        if (!r.skipped && (!best || r.mean_value > *best)) best = r.mean_value;
      }
      if (best) parallel_curve.push_back({c.dropouts[d], *best});
    }
    const double series_best = stage2[*b2].mean_value;
    json summary = {
        {"series", {{"threshold", stage2[*b2].threshold}, {"dropout", stage2[*b2].hp.dropout}, {"auc", series_best}}},
        {"parallel", {{"threshold", par.best_threshold}, {"dropout", par.best_dropout}, {"auc", par.best_value}}},
        {"gap", std::abs(series_best - par.best_value)}};
    ctx.write(dir / (stem + ".csv"), sweep_csv(series_curve));
    ctx.write(dir / (stem + "_parallel.csv"), sweep_csv(parallel_curve));
    ctx.write(dir / (stem + "_summary.json"), dump_json(summary));
    ctx.write(dir / (stem + "_trials.csv"), trials_csv(par.trials));
    return;
  }

  SweepResult r;
  if (which == "n-estimators") {
    r = sweep_n_estimators(table, c.sweep_n_estimators, threshold, hp, s);
  } else if (which == "feature-count") {
    r = sweep_feature_count(table, c.thresholds, hp, s);
  } else if (which == "depth") {
    r = sweep_hidden_layers(table, c.sweep_depths, threshold, hp, s);
  } else {
    throw ConfigError("unknown case study '" + which + "'");
  }
  ctx.write(dir / (stem + ".csv"), sweep_csv(r.curve));
  ctx.write(dir / (stem + "_trials.csv"), trials_csv(r.trials));
}

}  // namespace

SearchSettings RunConfig::settings(int jobs) const {
  if (!seed) throw ConfigError("seed is required (config 'seed' or --seed)");
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  SearchSettings s;
  s.folds = folds;
  s.seed = *seed;
  s.objective = objective.value_or(task == TaskKind::regression ? Objective::r2 : Objective::auc_roc);
  s.forest = forest;
  s.forest.impurity = task == TaskKind::regression ? ImpurityKind::variance : ImpurityKind::gini;
  s.jobs = jobs;
  return s;
}

LoadOptions RunConfig::load_options(bool with_labels) const {
  LoadOptions o;
  o.id_column = id_column;
  if (with_labels) o.label_column = label_column;
  o.task = task;
  return o;
}

RunConfig load_config(const fs::path& path) {
  require_file(path, "--config");
  json j;
  {
    std::ifstream in(path);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config: " + std::string(e.what()));
    }
  }
  const fs::path base = path.parent_path();
  const std::string w = "config";
  check_keys(j,
             {"task", "id_column", "label_column", "data", "seed", "objective", "folds", "mode", "thresholds",
              "dropouts", "snn_space", "forest", "sweep", "rule_features", "output_dir"},
             w);

  RunConfig c;
  try {
    if (j.contains("task")) c.task = parse_task_kind(take<std::string>(j, "task", w));
    if (j.contains("objective")) c.objective = parse_objective(take<std::string>(j, "objective", w));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (j.contains("id_column")) c.id_column = take<std::string>(j, "id_column", w);
  if (j.contains("label_column")) c.label_column = take<std::string>(j, "label_column", w);
  if (j.contains("seed")) c.seed = take<std::uint64_t>(j, "seed", w);
  if (j.contains("folds")) c.folds = take<int>(j, "folds", w);
  if (c.folds < 2) throw ConfigError("config.folds must be >= 2");
  if (j.contains("mode")) c.mode = take<std::string>(j, "mode", w);
  if (c.mode != "series" && c.mode != "parallel") throw ConfigError("config.mode must be 'series' or 'parallel'");
  if (j.contains("thresholds")) c.thresholds.multipliers = take<std::vector<double>>(j, "thresholds", w);
  c.thresholds.validate();
  if (j.contains("dropouts")) c.dropouts = take<std::vector<double>>(j, "dropouts", w);
  if (j.contains("rule_features")) c.rule_features = take<std::vector<std::string>>(j, "rule_features", w);
  c.output_dir = j.contains("output_dir") ? resolve(base, take<std::string>(j, "output_dir", w)) : base;

  if (!j.contains("data")) throw ConfigError("config.data is required");
  const json& d = j.at("data");
  check_keys(d, {"file", "split", "train", "cv", "test"}, "config.data");
  if (d.contains("file")) {
    c.data.file = resolve(base, take<std::string>(d, "file", "config.data"));
    if (d.contains("split")) {
      const json& s = d.at("split");
      check_keys(s, {"train", "cv", "test"}, "config.data.split");
      if (s.contains("train")) c.data.split.train = take<double>(s, "train", "config.data.split");
      if (s.contains("cv")) c.data.split.cv = take<double>(s, "cv", "config.data.split");
      if (s.contains("test")) c.data.split.test = take<double>(s, "test", "config.data.split");
    }
    if (d.contains("train") || d.contains("cv") || d.contains("test")) {
      throw ConfigError("config.data: give either 'file' or 'train'/'cv'/'test', not both");
    }
  } else {
    if (!d.contains("train")) throw ConfigError("config.data needs 'file' or 'train'");
    if (d.contains("split")) throw ConfigError("config.data.split only applies with 'file'");
    c.data.train = resolve(base, take<std::string>(d, "train", "config.data"));
    if (d.contains("cv")) c.data.cv = resolve(base, take<std::string>(d, "cv", "config.data"));
    if (d.contains("test")) c.data.test = resolve(base, take<std::string>(d, "test", "config.data"));
  }

  if (j.contains("snn_space")) {
    const json& s = j.at("snn_space");
    const std::string ws = "config.snn_space";
    check_keys(s, {"epochs", "dropout", "batch_size", "init_modes", "activations", "n_iter"}, ws);
    auto& sp = c.snn_space;
    if (s.contains("epochs")) sp.epochs = take<std::vector<int>>(s, "epochs", ws);
    if (s.contains("dropout")) sp.dropout = take<std::vector<double>>(s, "dropout", ws);
    if (s.contains("batch_size")) sp.batch_size = take<std::vector<int>>(s, "batch_size", ws);
    if (s.contains("init_modes")) sp.init_modes = parse_list<InitMode>(s, "init_modes", ws, parse_init_mode);
    if (s.contains("activations")) sp.activations = parse_list<Activation>(s, "activations", ws, parse_activation);
    if (s.contains("n_iter")) sp.n_iter = take<int>(s, "n_iter", ws);
    sp.validate();
  }
  if (j.contains("forest")) {
    const json& f = j.at("forest");
    const std::string wf = "config.forest";
    check_keys(f, {"n_estimators", "k_candidates", "min_samples_split"}, wf);
    if (f.contains("n_estimators")) c.forest.n_estimators = take<int>(f, "n_estimators", wf);
    if (f.contains("k_candidates")) c.forest.k_candidates = take<int>(f, "k_candidates", wf);
    if (f.contains("min_samples_split")) c.forest.min_samples_split = take<int>(f, "min_samples_split", wf);
    if (c.forest.n_estimators < 1) throw ConfigError("config.forest.n_estimators must be >= 1");
    if (c.forest.k_candidates && *c.forest.k_candidates < 1) throw ConfigError("config.forest.k_candidates must be >= 1");
    if (c.forest.min_samples_split < 2) throw ConfigError("config.forest.min_samples_split must be >= 2");
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    const std::string wsw = "config.sweep";
    check_keys(s, {"n_estimators", "depths", "threshold"}, wsw);
    if (s.contains("n_estimators")) c.sweep_n_estimators = take<std::vector<int>>(s, "n_estimators", wsw);
    if (s.contains("depths")) c.sweep_depths = take<std::vector<int>>(s, "depths", wsw);
    if (s.contains("threshold")) c.sweep_threshold = take<double>(s, "threshold", wsw);
    for (int depth : c.sweep_depths) {
      if (depth < 1) throw ConfigError("config.sweep.depths must be >= 1");
    }
  }
  if (c.task == TaskKind::regression && c.objective && *c.objective != Objective::r2) {
    throw ConfigError("regression tasks use the r2 objective");
  }
  if (c.task == TaskKind::classification && c.objective == Objective::r2) {
    throw ConfigError("classification tasks use auc_roc or accuracy");
  }
  return c;
}

namespace {

RandomSplit split_file(const RunConfig& c) {
  if (!c.seed) throw ConfigError("seed is required (config 'seed' or --seed)");
  require_file(*c.data.file, "config.data.file");
  const DescriptorTable all = load_table(*c.data.file, c.load_options(c.label_column.has_value()));
  return split_random(all, c.data.split, derive_seed(*c.seed, stream::kSplit));
}

}  // namespace

DescriptorTable load_development_table(const RunConfig& c) {
  if (!c.label_column) throw ConfigError("config.label_column is required");
  if (c.data.file) {
    auto parts = split_file(c);
    return concat_rows(parts.train, parts.cv);
  }
  require_file(*c.data.train, "config.data.train");
  DescriptorTable train = load_table(*c.data.train, c.load_options());
  if (!c.data.cv) return train;
  require_file(*c.data.cv, "config.data.cv");
  return concat_rows(train, load_table(*c.data.cv, c.load_options()));
}

DescriptorTable load_test_table(const RunConfig& c) {
  if (c.data.file) return split_file(c).test;
  if (!c.data.test) throw ConfigError("config.data.test is not set");
  require_file(*c.data.test, "config.data.test");
  return load_table(*c.data.test, c.load_options(c.label_column.has_value()));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid tree/network toxicity screening"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir;
  auto* seed_opt = app.add_option("--seed", seed, "Seed (overrides the config)");
  app.add_option("--config", config_path, "Run configuration JSON");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory (overrides the config)");

  auto* optimize = app.add_subcommand("optimize", "Search threshold and network settings by cross-validation");

  auto* train = app.add_subcommand("train", "Train the final ensemble");
  std::string best_path;
  bool dump_forest = false;
  train->add_option("--best", best_path, "Best-config JSON (default: <out>/best_config.json)");
  train->add_flag("--dump-forest", dump_forest, "Also write the forest as forest.json");

  std::string model_arg;
  TableArgs targs;
  auto add_table_opts = [&](CLI::App* sub) {
    sub->add_option("--table", targs.table, "Descriptor table (default: the configured test rows)");
    sub->add_option("--id-column", targs.id_column, "Id column name");
    sub->add_option("--label-column", targs.label_column, "Label column name");
  };
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on labelled rows");
  evaluate->add_option("--model", model_arg, "Model artifact (default: <out>/model.json)");
  add_table_opts(evaluate);
  auto* predict_cmd = app.add_subcommand("predict", "Write model scores for a table");
  predict_cmd->add_option("--model", model_arg, "Model artifact (default: <out>/model.json)");
  add_table_opts(predict_cmd);

  auto* rank = app.add_subcommand("rank", "Rank features across tasks");
  std::vector<std::string> rank_inputs;
  std::size_t top = 0;
  std::vector<std::string> rank_rule;
  rank->add_option("inputs", rank_inputs, "Model artifacts or forest dumps")->required();
  rank->add_option("--top", top, "Keep the top K features (default: all)");
  rank->add_option("--rule-features", rank_rule, "Also write a cutoff rule over these features")->delimiter(',');

  auto* prescreen = app.add_subcommand("prescreen", "Sort compounds into SafeZone and Suspect");
  std::string rule_path;
  prescreen->add_option("--rule", rule_path, "Rule JSON or a model artifact with a rule")->required();
  add_table_opts(prescreen);

  auto* casestudy = app.add_subcommand("casestudy", "Run a parameter sweep");
  std::string which;
  casestudy->add_option("which", which, "series-parallel, n-estimators, feature-count or depth")
      ->required()
      ->check(CLI::IsMember({"series-parallel", "n-estimators", "feature-count", "depth"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  Context ctx;
  if (!config_path.empty()) ctx.config_path = config_path;
  if (*seed_opt) ctx.seed = seed;
  ctx.jobs = jobs;
  if (!out_dir.empty()) ctx.out_dir = out_dir;
  ctx.out = &out;

  try {
    if (*optimize) cmd_optimize(ctx);
    else if (*train) cmd_train(ctx, best_path, dump_forest);
    else if (*evaluate) cmd_evaluate(ctx, model_arg, targs);
    else if (*predict_cmd) cmd_predict(ctx, model_arg, targs);
    else if (*rank) cmd_rank(ctx, rank_inputs, top, rank_rule);
    else if (*prescreen) cmd_prescreen(ctx, rule_path, targs);
    else if (*casestudy) cmd_casestudy(ctx, which);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const SearchDegenerate& e) {
    err << "search degenerate: " << e.what() << '\n';
    return kSearchDegenerate;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace hybridscreen::cli
