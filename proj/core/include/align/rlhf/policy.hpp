#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "align/rlhf/featurizer.hpp"
#include "align/rlhf/preference.hpp"
#include "align/rlhf/reward_model.hpp"
#include "align/types.hpp"

namespace align::rlhf {

/// sum p_i ln(p_i / q_i), with 0 ln(0/q) = 0. Both inputs must be normalized
/// within 1e-9.
double kl_discrete(std::span<const double> p, std::span<const double> q);

double total_variation(std::span<const double> p, std::span<const double> q);

/// Numerically stable softmax (max-shifted).
std::vector<double> softmax(std::span<const double> logits);

/// Softmax policy over a finite candidate set for one prompt.
struct PolicyEntry {
  Prompt prompt;
  std::vector<ResponseText> candidates;
  std::vector<double> logits;

  std::vector<double> probabilities() const;
  /// Highest-probability candidate; the lowest index wins ties.
  std::size_t argmax() const;
};

class TabularPolicy {
public:
  TabularPolicy() = default;
  explicit TabularPolicy(std::vector<PolicyEntry> entries);

  /// Zero logits over each candidate list.
  static TabularPolicy uniform(std::vector<std::pair<Prompt, std::vector<ResponseText>>> sets);

  const std::vector<PolicyEntry>& entries() const noexcept { return entries_; }
  std::vector<PolicyEntry>& entries() noexcept { return entries_; }

  const PolicyEntry& at(const std::string& prompt_id) const;
  PolicyEntry& at(const std::string& prompt_id);
  bool contains(const std::string& prompt_id) const;

  std::vector<Prompt> prompts() const;

private:
  std::vector<PolicyEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Per-prompt rewards aligned with the policy's candidate order.
using RewardTable = std::map<std::string, std::vector<double>>;
/// Per-prompt probability vectors.
using Distribution = std::map<std::string, std::vector<double>>;

RewardTable reward_table(const TabularPolicy& policy, const RewardModel& model,
                         const Featurizer& featurizer);

/// mean over prompts of E_{y~pi}[r(x,y)] - beta * KL(pi(.|x) || base(.|x)),
/// evaluated exactly over the candidate sets.
double rlhf_objective(const TabularPolicy& policy, const TabularPolicy& base,
                      const RewardTable& rewards, double beta, std::span<const Prompt> prompts);
double rlhf_objective(const TabularPolicy& policy, const TabularPolicy& base,
                      const RewardModel& reward, const Featurizer& featurizer, double beta,
                      std::span<const Prompt> prompts);

/// Gradient of rlhf_objective with respect to each prompt's logits.
std::map<std::string, std::vector<double>> objective_gradient(const TabularPolicy& policy,
                                                              const TabularPolicy& base,
                                                              const RewardTable& rewards,
                                                              double beta,
                                                              std::span<const Prompt> prompts);

/// Analytic maximizer pi*(y|x) proportional to base(y|x) exp(r(x,y)/beta).
Distribution gibbs_optimum(const TabularPolicy& base, const RewardTable& rewards, double beta);

/// Gradient ascent on each prompt's own objective with exact expectations.
/// Throws Diverged ("optimization diverged") on a non-finite objective.
TabularPolicy optimize_policy(const TabularPolicy& policy, const TabularPolicy& base,
                              const RewardTable& rewards, const RlhfConfig& config);
TabularPolicy optimize_policy(const TabularPolicy& policy, const TabularPolicy& base,
                              const RewardModel& reward, const Featurizer& featurizer,
                              const RlhfConfig& config);

}  // namespace align::rlhf
