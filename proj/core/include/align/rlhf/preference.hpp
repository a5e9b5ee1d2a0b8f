#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "align/rlhf/featurizer.hpp"
#include "align/rlhf/reward_model.hpp"
#include "align/types.hpp"

namespace align::rlhf {

/// log(1 + e^x) without overflow.
double softplus(double x);
/// log sigma(x) = -softplus(-x).
double log_sigmoid(double x);
double sigmoid(double x);

/// Bradley-Terry probability that the first response is preferred:
/// exp(r_w) / (exp(r_w) + exp(r_l)) = sigma(r_w - r_l).
double bt_preference_prob(double r_winner, double r_loser);

struct RlhfConfig {
  double beta = 1.0;
  double learning_rate = 0.1;
  int steps = 100;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on beta <= 0, learning_rate <= 0 or steps < 1.
  void validate() const;
};

using Scorer = std::function<double(const Prompt&, const ResponseText&)>;

/// -mean log sigma(r(y_w) - r(y_l)) for an arbitrary scorer.
double reward_loss(const Scorer& scorer, std::span<const PreferencePair> batch);

struct FeaturizedPair {
  FeatureVector winner;
  FeatureVector loser;
};

std::vector<FeaturizedPair> featurize_pairs(const Featurizer& featurizer,
                                            std::span<const PreferencePair> batch);

double reward_loss(const RewardModel& model, std::span<const FeaturizedPair> batch);
double reward_loss(const RewardModel& model, const Featurizer& featurizer,
                   std::span<const PreferencePair> batch);

/// Analytic gradient of reward_loss with respect to model.params.
std::vector<double> reward_grad(const RewardModel& model, std::span<const FeaturizedPair> batch);
std::vector<double> reward_grad(const RewardModel& model, const Featurizer& featurizer,
                                std::span<const PreferencePair> batch);

struct RewardModelSpec {
  ScorerKind kind = ScorerKind::linear;
  std::size_t hidden = 16;
};

struct RewardTrainingResult {
  RewardModel model;
  /// Loss evaluated before each of the `steps` updates.
  std::vector<double> loss_history;
};

/// Full-batch gradient descent at a fixed learning rate. Throws Diverged
/// ("training diverged") when the loss stops being finite.
RewardTrainingResult train_reward_model(std::span<const PreferencePair> dataset,
                                        const Featurizer& featurizer, const RlhfConfig& config,
                                        const RewardModelSpec& spec = {});

/// Fraction of pairs with bt_preference_prob(r_w, r_l) > 0.5.
double pairwise_accuracy(const RewardModel& model, const Featurizer& featurizer,
                         std::span<const PreferencePair> pairs);

}  // namespace align::rlhf
