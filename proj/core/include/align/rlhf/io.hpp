#pragma once

#include <span>

#include <nlohmann/json.hpp>

#include "align/rlhf/policy.hpp"
#include "align/rlhf/preference.hpp"
#include "align/rlhf/reward_model.hpp"

namespace align::rlhf {

nlohmann::json to_json(const RlhfConfig& config);
RlhfConfig config_from_json(const nlohmann::json& j);

/// Training artifact: {params, featurizer_id, config, loss_history, kind,
/// input_dim, hidden}.
nlohmann::json reward_artifact(const RewardModel& model, const RlhfConfig& config,
                               std::span<const double> loss_history);
RewardModel reward_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TabularPolicy& policy);
TabularPolicy policy_from_json(const nlohmann::json& j);

}  // namespace align::rlhf
