#include "align/w2s/cycle.hpp"

#include <map>

#include "align/jsonl.hpp"
#include "align/rlhf/io.hpp"

namespace align::w2s {

StageError::StageError(std::string stage, int iteration, const std::string& cause)
    : Error("w2s cycle failed at iteration " + std::to_string(iteration) + " stage " + stage + ": " + cause),
      stage_(std::move(stage)),
      iteration_(iteration) {}

namespace {

template <typename Fn>
auto run_stage(const char* stage, int iteration, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, iteration, e.what());
  }
}

double mean_judge(const JudgeFn& judge, std::span<const Prompt> prompts,
                  const std::vector<ResponseText>& responses) {
  if (!judge || responses.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < responses.size(); ++i) s += judge(prompts[i], responses[i]);
  return s / static_cast<double>(responses.size());
}

}  // namespace

std::vector<IterationArtifacts> w2s_cycle(std::span<const QACRecord> seed_qac,
                                          std::span<const Prompt> prompts, const Generator& base,
                                          int iterations, const CycleConfig& config) {
  if (iterations < 1) throw InvalidArgument("iterations must be at least 1");
  if (prompts.empty()) throw InvalidArgument("no prompts");
  config.rlhf.validate();

  std::vector<QACRecord> qac(seed_qac.begin(), seed_qac.end());
  std::map<std::string, ResponseText> policy_answers;
  std::vector<PreferencePair> pool;
  const rlhf::Featurizer featurizer(config.feature_dim);
  std::vector<IterationArtifacts> out;

  for (int k = 1; k <= iterations; ++k) {
    IterationArtifacts a;
    a.iteration = k;

    a.corrector = run_stage("train_corrector", k, [&] { return train_corrector(qac, config.corrector); });

    const Generator generator = [&](const Prompt& x) {
      if (auto it = policy_answers.find(x.id); it != policy_answers.end()) return it->second;
      return base(x);
    };
    auto synth = run_stage("synthesize_preferences", k,
                           [&] { return synthesize_preferences(prompts, generator, a.corrector, k); });
    a.preferences = synth.pairs;
    a.manifest = synth.manifest;
    // Later iterations often see the policy already choosing corrected text,
    // so the reward model trains on every pair synthesized so far.
    pool.insert(pool.end(), a.preferences.begin(), a.preferences.end());

    auto trained = run_stage("train_reward_model", k, [&] {
      return rlhf::train_reward_model(pool, featurizer, config.rlhf);
    });
    a.reward = std::move(trained.model);
    a.reward_loss_history = std::move(trained.loss_history);

    std::vector<std::pair<Prompt, std::vector<ResponseText>>> sets;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const auto& [orig, corr] = synth.responses[i];
      std::vector<ResponseText> cands{orig};
      if (synth.manifest.provenance[i].emitted) cands.push_back(corr);
      sets.emplace_back(prompts[i], std::move(cands));
    }
    const auto base_policy = rlhf::TabularPolicy::uniform(std::move(sets));
    a.policy = run_stage("optimize_policy", k, [&] {
      return rlhf::optimize_policy(base_policy, base_policy, a.reward, featurizer, config.rlhf);
    });

    std::vector<ResponseText> originals, corrected, chosen;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      originals.push_back(synth.responses[i].first);
      corrected.push_back(synth.manifest.provenance[i].emitted ? synth.responses[i].second
                                                               : synth.responses[i].first);
      const auto& e = a.policy.entries()[i];
      chosen.push_back(e.candidates[e.argmax()]);
    }
    a.metrics.iteration = k;
    a.metrics.mean_judge_base = mean_judge(config.judge, prompts, originals);
    a.metrics.mean_judge_corrected = mean_judge(config.judge, prompts, corrected);
    a.metrics.mean_judge_policy = mean_judge(config.judge, prompts, chosen);
    a.metrics.reward_train_accuracy = rlhf::pairwise_accuracy(a.reward, featurizer, pool);
    a.metrics.reward_final_loss = a.reward_loss_history.back();

    if (config.out_dir) {
      run_stage("persist", k, [&] {
        write_artifacts(*config.out_dir / ("iter-" + std::to_string(k)), a, config.rlhf);
        return 0;
      });
    }

    // Amplification: corrections made by this iteration's corrector become
    // supervision for the next one.
    for (const auto& p : a.preferences)
      qac.push_back({p.prompt, p.loser, p.winner, "aligner-iter-" + std::to_string(k), Topic::other});
    for (std::size_t i = 0; i < prompts.size(); ++i) policy_answers[prompts[i].id] = chosen[i];

    out.push_back(std::move(a));
  }
  return out;
}

nlohmann::json to_json(const IterationMetrics& m) {
  return {{"iteration", m.iteration},
          {"mean_judge_base", m.mean_judge_base},
          {"mean_judge_corrected", m.mean_judge_corrected},
          {"mean_judge_policy", m.mean_judge_policy},
          {"reward_train_accuracy", m.reward_train_accuracy},
          {"reward_final_loss", m.reward_final_loss}};
}

void write_artifacts(const std::filesystem::path& dir, const IterationArtifacts& a,
                     const rlhf::RlhfConfig& config) {
  std::filesystem::create_directories(dir);
  jsonl::write_json(dir / "corrector.json", to_json(a.corrector));
  save_preferences((dir / "prefs.jsonl").string(), a.preferences);
  jsonl::write_json(dir / "reward.json", rlhf::reward_artifact(a.reward, config, a.reward_loss_history));
  jsonl::write_json(dir / "policy.json", rlhf::to_json(a.policy));
  auto metrics = to_json(a.metrics);
  metrics["manifest"] = to_json(a.manifest);
  jsonl::write_json(dir / "metrics.json", metrics);
}

}  // namespace align::w2s
