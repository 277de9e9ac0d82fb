#include "hybridscreen/snn.hpp"

#include <array>
#include <utility>

namespace hybridscreen {

namespace {

constexpr std::array<std::pair<InitMode, const char*>, 6> kInitNames{{
    {InitMode::uniform, "uniform"},
    {InitMode::lecun_uniform, "lecun_uniform"},
    {InitMode::normal, "normal"},
    {InitMode::glorot_normal, "glorot_normal"},
    {InitMode::he_normal, "he_normal"},
    {InitMode::he_uniform, "he_uniform"},
}};

}  // namespace

std::string to_string(InitMode mode) {
  for (const auto& [m, name] : kInitNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::string to_string(Activation act) { return act == Activation::relu ? "relu" : "sigmoid"; }

std::string to_string(OutputKind kind) {
  return kind == OutputKind::sigmoid_probability ? "sigmoid_probability" : "linear_value";
}

InitMode parse_init_mode(const std::string& text) {
  for (const auto& [m, name] : kInitNames) {
    if (text == name) return m;
  }
  throw ConfigError("unknown init mode '" + text + "'");
}

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + text + "'");
}

OutputKind parse_output_kind(const std::string& text) {
  if (text == "sigmoid_probability") return OutputKind::sigmoid_probability;
  if (text == "linear_value") return OutputKind::linear_value;
  throw ConfigError("unknown output kind '" + text + "'");
}

void SnnHyperparams::validate() const {
  if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
  if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

}  // namespace hybridscreen
