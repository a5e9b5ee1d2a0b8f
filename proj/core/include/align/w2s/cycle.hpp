#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "align/error.hpp"
#include "align/rlhf/featurizer.hpp"
#include "align/rlhf/policy.hpp"
#include "align/rlhf/preference.hpp"
#include "align/rlhf/reward_model.hpp"
#include "align/w2s/corrector.hpp"
#include "align/w2s/synthesis.hpp"

namespace align::w2s {

/// Raised when a cycle stage fails; what() names the stage and iteration.
class StageError : public Error {
public:
  StageError(std::string stage, int iteration, const std::string& cause);
  const std::string& stage() const noexcept { return stage_; }
  int iteration() const noexcept { return iteration_; }

private:
  std::string stage_;
  int iteration_;
};

using JudgeFn = std::function<double(const Prompt&, const ResponseText&)>;

struct CycleConfig {
  rlhf::RlhfConfig rlhf;
  CorrectorConfig corrector;
  std::size_t feature_dim = rlhf::Featurizer::kDefaultDim;
  /// Metric judge; mean scores are reported, never asserted.
  JudgeFn judge;
  /// When set, artifacts go to <out_dir>/iter-<k>/.
  std::optional<std::filesystem::path> out_dir;
};

struct IterationMetrics {
  int iteration = 0;
  double mean_judge_base = 0.0;
  double mean_judge_corrected = 0.0;
  double mean_judge_policy = 0.0;
  double reward_train_accuracy = 0.0;
  double reward_final_loss = 0.0;
};

struct IterationArtifacts {
  int iteration = 0;
  CorrectionModel corrector;
  std::vector<PreferencePair> preferences;
  SynthesisManifest manifest;
  rlhf::RewardModel reward;
  std::vector<double> reward_loss_history;
  rlhf::TabularPolicy policy;
  IterationMetrics metrics;
};

/// Per iteration: train_corrector -> synthesize_preferences ->
/// train_reward_model -> optimize_policy. Synthesized corrections join the
/// next iteration's Q-A-C set, and the optimized policy's preferred answers
/// replace the base generator for the prompts it covers. The reward model is
/// fit to all pairs synthesized up to and including the current iteration.
std::vector<IterationArtifacts> w2s_cycle(std::span<const QACRecord> seed_qac,
                                          std::span<const Prompt> prompts, const Generator& base,
                                          int iterations, const CycleConfig& config);

/// Writes corrector.json, prefs.jsonl, reward.json, policy.json and
/// metrics.json under dir.
void write_artifacts(const std::filesystem::path& dir, const IterationArtifacts& a,
                     const rlhf::RlhfConfig& config);

nlohmann::json to_json(const IterationMetrics& m);

}  // namespace align::w2s
