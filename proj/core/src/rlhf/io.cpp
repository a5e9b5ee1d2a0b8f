#include "align/rlhf/io.hpp"

#include "align/error.hpp"

namespace align::rlhf {

using nlohmann::json;

json to_json(const RlhfConfig& c) {
  return {{"beta", c.beta}, {"learning_rate", c.learning_rate}, {"steps", c.steps}, {"seed", c.seed}};
}

RlhfConfig config_from_json(const json& j) {
  RlhfConfig c;
  c.beta = j.value("beta", c.beta);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.steps = j.value("steps", c.steps);
  c.seed = j.value("seed", c.seed);
  return c;
}

json reward_artifact(const RewardModel& model, const RlhfConfig& config,
                     std::span<const double> loss_history) {
  return {{"params", model.params},
          {"featurizer_id", model.featurizer_id},
          {"config", to_json(config)},
          {"loss_history", std::vector<double>(loss_history.begin(), loss_history.end())},
          {"kind", model.kind == ScorerKind::linear ? "linear" : "mlp"},
          {"input_dim", model.input_dim},
          {"hidden", model.hidden}};
}

RewardModel reward_model_from_json(const json& j) {
  RewardModel m;
  const auto kind = j.value("kind", std::string("linear"));
  if (kind == "linear") {
    m.kind = ScorerKind::linear;
  } else if (kind == "mlp") {
    m.kind = ScorerKind::mlp;
  } else {
    throw ParseError("unknown reward model kind: " + kind);
  }
  m.params = j.at("params").get<std::vector<double>>();
  m.featurizer_id = j.value("featurizer_id", std::string{});
  m.hidden = j.value("hidden", std::size_t{0});
  m.input_dim = j.value("input_dim", m.kind == ScorerKind::linear ? m.params.size() : 0);
  const std::size_t expected = m.kind == ScorerKind::linear
                                   ? m.input_dim
                                   : m.hidden * m.input_dim + 2 * m.hidden + 1;
  if (m.params.size() != expected) throw ParseError("reward model parameter count mismatch");
  return m;
}

json to_json(const TabularPolicy& policy) {
  json entries = json::array();
  for (const auto& e : policy.entries()) {
    entries.push_back({{"prompt", e.prompt}, {"candidates", e.candidates}, {"logits", e.logits},
                       {"probabilities", e.probabilities()}});
  }
  return {{"entries", entries}};
}

TabularPolicy policy_from_json(const json& j) {
  std::vector<PolicyEntry> entries;
  for (const auto& row : j.at("entries")) {
    PolicyEntry e;
    e.prompt = row.at("prompt").get<Prompt>();
    e.candidates = row.at("candidates").get<std::vector<ResponseText>>();
    e.logits = row.at("logits").get<std::vector<double>>();
    entries.push_back(std::move(e));
  }
  return TabularPolicy(std::move(entries));
}

}  // namespace align::rlhf
