#include "align/rlhf/preference.hpp"

#include <cmath>

#include "align/error.hpp"

namespace align::rlhf {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double log_sigmoid(double x) { return -softplus(-x); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bt_preference_prob(double r_winner, double r_loser) {
  if (!std::isfinite(r_winner) || !std::isfinite(r_loser)) throw InvalidArgument("non-finite reward");
  return sigmoid(r_winner - r_loser);
}

void RlhfConfig::validate() const {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (steps < 1) throw InvalidArgument("steps must be at least 1");
}

double reward_loss(const Scorer& scorer, std::span<const PreferencePair> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  double total = 0.0;
  for (const auto& p : batch)
    total += softplus(-(scorer(p.prompt, p.winner) - scorer(p.prompt, p.loser)));
  return total / static_cast<double>(batch.size());
}

std::vector<FeaturizedPair> featurize_pairs(const Featurizer& featurizer,
                                            std::span<const PreferencePair> batch) {
  std::vector<FeaturizedPair> out;
  out.reserve(batch.size());
  for (const auto& p : batch) out.push_back({featurizer(p.prompt, p.winner), featurizer(p.prompt, p.loser)});
  return out;
}

double reward_loss(const RewardModel& model, std::span<const FeaturizedPair> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  double total = 0.0;
  for (const auto& p : batch) total += softplus(-(model.score(p.winner) - model.score(p.loser)));
  return total / static_cast<double>(batch.size());
}

double reward_loss(const RewardModel& model, const Featurizer& featurizer,
                   std::span<const PreferencePair> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  return reward_loss(model, featurize_pairs(featurizer, batch));
}

std::vector<double> reward_grad(const RewardModel& model, std::span<const FeaturizedPair> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  std::vector<double> grad(model.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& p : batch) {
    const double margin = model.score(p.winner) - model.score(p.loser);
    // d/dm softplus(-m) = -sigma(-m)
    const double c = -sigmoid(-margin) * inv_n;
    model.add_score_gradient(p.winner, c, grad);
    model.add_score_gradient(p.loser, -c, grad);
  }
  return grad;
}

std::vector<double> reward_grad(const RewardModel& model, const Featurizer& featurizer,
                                std::span<const PreferencePair> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  return reward_grad(model, featurize_pairs(featurizer, batch));
}

RewardTrainingResult train_reward_model(std::span<const PreferencePair> dataset,
                                        const Featurizer& featurizer, const RlhfConfig& config,
                                        const RewardModelSpec& spec) {
  if (dataset.empty()) throw InvalidArgument("empty batch");
  config.validate();
  const auto batch = featurize_pairs(featurizer, dataset);

  RewardTrainingResult result{
      spec.kind == ScorerKind::linear
          ? RewardModel::linear(featurizer.dim(), featurizer.id())
          : RewardModel::mlp(featurizer.dim(), spec.hidden, config.seed, featurizer.id()),
      {}};
  auto& model = result.model;
  result.loss_history.reserve(static_cast<std::size_t>(config.steps));

  for (int step = 0; step < config.steps; ++step) {
    const double loss = reward_loss(model, batch);
    if (!std::isfinite(loss)) throw Diverged("training diverged", step);
    result.loss_history.push_back(loss);
    const auto grad = reward_grad(model, batch);
    for (std::size_t i = 0; i < grad.size(); ++i) model.params[i] -= config.learning_rate * grad[i];
  }
  return result;
}

double pairwise_accuracy(const RewardModel& model, const Featurizer& featurizer,
                         std::span<const PreferencePair> pairs) {
  if (pairs.empty()) throw InvalidArgument("empty batch");
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const double pw = model.score(featurizer(p.prompt, p.winner));
    const double pl = model.score(featurizer(p.prompt, p.loser));
    if (bt_preference_prob(pw, pl) > 0.5) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace align::rlhf
