#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridscreen/forest.hpp"
#include "hybridscreen/ranking.hpp"
#include "hybridscreen/search.hpp"

namespace hybridscreen {

inline constexpr const char* kFormatVersion = "hybrid-screen/1";

/// A trained ensemble plus what is needed to reproduce and interpret it.
struct ModelArtifact {
  EnsembleModel model;
  std::optional<CutoffRule> cutoff_rule;
};

nlohmann::json hyperparams_to_json(const SnnHyperparams& hp);
SnnHyperparams hyperparams_from_json(const nlohmann::json& j);

nlohmann::json network_to_json(const SnnModel& net);
SnnModel network_from_json(const nlohmann::json& j);

nlohmann::json rule_to_json(const CutoffRule& rule);
CutoffRule rule_from_json(const nlohmann::json& j);

nlohmann::json forest_to_json(const ForestModel& forest, const std::vector<std::string>& feature_names);
struct ForestDump {
  ForestModel forest;
  std::vector<std::string> feature_names;
};
ForestDump forest_from_json(const nlohmann::json& j);

/// Keys are emitted sorted and doubles in shortest round-trip form, so
/// save -> load -> save is byte-stable and weights reload bit-exactly.
nlohmann::json artifact_to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const nlohmann::json& j);

std::string dump_json(const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_artifact(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// One row per trial; wall time is left out so reruns are byte-identical.
void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials);

}  // namespace hybridscreen
