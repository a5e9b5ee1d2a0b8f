#include "align/rlhf/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "align/error.hpp"

namespace align::rlhf {

namespace {

constexpr double kNormTol = 1e-9;

void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidArgument(std::string(name) + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormTol) throw InvalidArgument(std::string(name) + " is not normalized");
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double lse = m + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

void check_same_support(const PolicyEntry& a, const PolicyEntry& b) {
  if (a.candidates.size() != b.candidates.size())
    throw InvalidArgument("policy/base support mismatch");
  for (std::size_t i = 0; i < a.candidates.size(); ++i)
    if (a.candidates[i].id != b.candidates[i].id || a.candidates[i].text != b.candidates[i].text)
      throw InvalidArgument("policy/base support mismatch");
}

const std::vector<double>& rewards_for(const RewardTable& rewards, const PolicyEntry& e) {
  auto it = rewards.find(e.prompt.id);
  if (it == rewards.end()) throw InvalidArgument("no rewards for prompt " + e.prompt.id);
  if (it->second.size() != e.candidates.size())
    throw InvalidArgument("reward count does not match candidates for prompt " + e.prompt.id);
  return it->second;
}

struct PromptTerms {
  std::vector<double> pi;
  std::vector<double> g;  // r_i - beta * (log pi_i - log base_i)
  double objective = 0.0;
};

PromptTerms prompt_terms(const PolicyEntry& e, const PolicyEntry& base, std::span<const double> r,
                         double beta) {
  const auto log_pi = log_softmax(e.logits);
  const auto log_b = log_softmax(base.logits);
  PromptTerms t;
  t.pi.resize(log_pi.size());
  t.g.resize(log_pi.size());
  for (std::size_t i = 0; i < log_pi.size(); ++i) {
    t.pi[i] = std::exp(log_pi[i]);
    t.g[i] = r[i] - beta * (log_pi[i] - log_b[i]);
    t.objective += t.pi[i] * t.g[i];
  }
  return t;
}

}  // namespace

double kl_discrete(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("distributions differ in length");
  check_distribution(p, "p");
  check_distribution(q, "q");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw InvalidArgument("absolute continuity violated");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative value for p == q.
  return std::max(kl, 0.0);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("distributions differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

std::vector<double> PolicyEntry::probabilities() const { return softmax(logits); }

std::size_t PolicyEntry::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

TabularPolicy::TabularPolicy(std::vector<PolicyEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.candidates.empty()) throw InvalidArgument("empty candidate list for prompt " + e.prompt.id);
    if (e.logits.size() != e.candidates.size())
      throw InvalidArgument("logit count does not match candidates for prompt " + e.prompt.id);
    if (!index_.emplace(e.prompt.id, i).second)
      throw InvalidArgument("duplicate prompt id " + e.prompt.id);
  }
}

TabularPolicy TabularPolicy::uniform(std::vector<std::pair<Prompt, std::vector<ResponseText>>> sets) {
  std::vector<PolicyEntry> entries;
  entries.reserve(sets.size());
  for (auto& [prompt, cands] : sets) {
    PolicyEntry e{std::move(prompt), std::move(cands), {}};
    e.logits.assign(e.candidates.size(), 0.0);
    entries.push_back(std::move(e));
  }
  return TabularPolicy(std::move(entries));
}

const PolicyEntry& TabularPolicy::at(const std::string& prompt_id) const {
  auto it = index_.find(prompt_id);
  if (it == index_.end()) throw NotFound("prompt not in policy: " + prompt_id);
  return entries_[it->second];
}

PolicyEntry& TabularPolicy::at(const std::string& prompt_id) {
  auto it = index_.find(prompt_id);
  if (it == index_.end()) throw NotFound("prompt not in policy: " + prompt_id);
  return entries_[it->second];
}

bool TabularPolicy::contains(const std::string& prompt_id) const { return index_.count(prompt_id) > 0; }

std::vector<Prompt> TabularPolicy::prompts() const {
  std::vector<Prompt> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.prompt);
  return out;
}

RewardTable reward_table(const TabularPolicy& policy, const RewardModel& model,
                         const Featurizer& featurizer) {
  RewardTable table;
  for (const auto& e : policy.entries()) {
    auto& row = table[e.prompt.id];
    row.reserve(e.candidates.size());
    for (const auto& c : e.candidates) row.push_back(model.score(featurizer(e.prompt, c)));
  }
  return table;
}

double rlhf_objective(const TabularPolicy& policy, const TabularPolicy& base,
                      const RewardTable& rewards, double beta, std::span<const Prompt> prompts) {
  if (prompts.empty()) throw InvalidArgument("no prompts");
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be non-negative");
  double total = 0.0;
  for (const auto& x : prompts) {
    const auto& pe = policy.at(x.id);
    const auto& be = base.at(x.id);
    check_same_support(pe, be);
    const auto& r = rewards_for(rewards, pe);
    const auto pi = pe.probabilities();
    const auto b = be.probabilities();
    double expected = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) expected += pi[i] * r[i];
    total += expected - (beta == 0.0 ? 0.0 : beta * kl_discrete(pi, b));
  }
  return total / static_cast<double>(prompts.size());
}

double rlhf_objective(const TabularPolicy& policy, const TabularPolicy& base,
                      const RewardModel& reward, const Featurizer& featurizer, double beta,
                      std::span<const Prompt> prompts) {
  return rlhf_objective(policy, base, reward_table(policy, reward, featurizer), beta, prompts);
}

std::map<std::string, std::vector<double>> objective_gradient(const TabularPolicy& policy,
                                                              const TabularPolicy& base,
                                                              const RewardTable& rewards,
                                                              double beta,
                                                              std::span<const Prompt> prompts) {
  if (prompts.empty()) throw InvalidArgument("no prompts");
  const double inv_n = 1.0 / static_cast<double>(prompts.size());
  std::map<std::string, std::vector<double>> grads;
  for (const auto& x : prompts) {
    const auto& pe = policy.at(x.id);
    const auto& be = base.at(x.id);
    check_same_support(pe, be);
    const auto t = prompt_terms(pe, be, rewards_for(rewards, pe), beta);
    auto& g = grads[x.id];
    g.assign(t.pi.size(), 0.0);
    // d/d theta_k sum_i pi_i g_i = pi_k (g_k - E_pi[g]); the d g / d theta
    // contribution sums to zero.
    for (std::size_t k = 0; k < t.pi.size(); ++k) g[k] += inv_n * t.pi[k] * (t.g[k] - t.objective);
  }
  return grads;
}

Distribution gibbs_optimum(const TabularPolicy& base, const RewardTable& rewards, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  Distribution out;
  for (const auto& e : base.entries()) {
    const auto& r = rewards_for(rewards, e);
    const auto b = e.probabilities();
    for (double v : b)
      if (!(v > 0.0)) throw InvalidArgument("base policy must be strictly positive");
    const double r_max = *std::max_element(r.begin(), r.end());
    std::vector<double> w(b.size());
    double z = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      w[i] = b[i] * std::exp((r[i] - r_max) / beta);
      z += w[i];
    }
    for (auto& v : w) v /= z;
    out.emplace(e.prompt.id, std::move(w));
  }
  return out;
}

TabularPolicy optimize_policy(const TabularPolicy& policy, const TabularPolicy& base,
                              const RewardTable& rewards, const RlhfConfig& config) {
  config.validate();
  TabularPolicy out = policy;
  for (auto& e : out.entries()) {
    const auto& be = base.at(e.prompt.id);
    check_same_support(e, be);
    const auto& r = rewards_for(rewards, e);
    for (int step = 0; step < config.steps; ++step) {
      const auto t = prompt_terms(e, be, r, config.beta);
      if (!std::isfinite(t.objective)) throw Diverged("optimization diverged", step);
      for (std::size_t k = 0; k < e.logits.size(); ++k)
        e.logits[k] += config.learning_rate * t.pi[k] * (t.g[k] - t.objective);
    }
    for (double l : e.logits)
      if (!std::isfinite(l)) throw Diverged("optimization diverged", config.steps);
  }
  return out;
}

TabularPolicy optimize_policy(const TabularPolicy& policy, const TabularPolicy& base,
                              const RewardModel& reward, const Featurizer& featurizer,
                              const RlhfConfig& config) {
  return optimize_policy(policy, base, reward_table(policy, reward, featurizer), config);
}

}  // namespace align::rlhf
