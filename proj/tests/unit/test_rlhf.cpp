#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "align/error.hpp"
#include "align/rlhf/featurizer.hpp"
#include "align/rlhf/io.hpp"
#include "align/rlhf/policy.hpp"
#include "align/rlhf/preference.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace align;
using namespace align::rlhf;

namespace {

ResponseText cand(const std::string& pid, int k) {
  return {pid + "/" + std::to_string(k), pid, "candidate " + std::to_string(k), Provenance::base};
}

PolicyEntry entry(const std::string& pid, std::vector<double> logits) {
  std::vector<ResponseText> c;
  for (std::size_t k = 0; k < logits.size(); ++k) c.push_back(cand(pid, static_cast<int>(k)));
  return {Prompt{pid, "prompt " + pid}, c, std::move(logits)};
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(BradleyTerry, KnownValue) {
  EXPECT_NEAR(bt_preference_prob(3.0, 0.0), 0.9525741268224334, 1e-15);
  EXPECT_DOUBLE_EQ(bt_preference_prob(1.5, 1.5), 0.5);
}

TEST(BradleyTerry, ComplementAndShift) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto v = random_vec(rng, 3, -50, 50);
    EXPECT_NEAR(bt_preference_prob(v[0], v[1]) + bt_preference_prob(v[1], v[0]), 1.0, 1e-12);
    EXPECT_NEAR(bt_preference_prob(v[0] + v[2], v[1] + v[2]), bt_preference_prob(v[0], v[1]), 1e-12);
    const double d = std::clamp(v[0] - v[1], -30.0, 30.0);
    EXPECT_NEAR(bt_preference_prob(d, 0.0), static_cast<double>(oracle::sigmoid(d)), 1e-14);
  }
}

TEST(BradleyTerry, ExtremesStayFinite) {
  EXPECT_EQ(bt_preference_prob(1000, -1000), 1.0);
  EXPECT_EQ(bt_preference_prob(-1000, 1000), 0.0);
  EXPECT_NEAR(log_sigmoid(-800), -800.0, 1e-12);
  EXPECT_THROW(bt_preference_prob(std::nan(""), 0), InvalidArgument);
}

TEST(RewardLoss, ZeroMarginIsLn2) {
  const auto pairs = synthetic::separable_pairs(25, 3);
  const Featurizer f;
  EXPECT_NEAR(reward_loss(RewardModel::linear(f.dim()), f, pairs), std::log(2.0), 1e-12);
  const Scorer constant = [](const Prompt&, const ResponseText&) { return 4.2; };
  EXPECT_NEAR(reward_loss(constant, pairs), std::log(2.0), 1e-12);
}

TEST(RewardLoss, InvariantToConstantShift) {
  const auto pairs = synthetic::separable_pairs(30, 4);
  const Featurizer f;
  auto model = RewardModel::mlp(f.dim(), 8, 11);
  const Scorer s = [&](const Prompt& p, const ResponseText& r) { return model.score(f(p, r)); };
  const Scorer shifted = [&](const Prompt& p, const ResponseText& r) { return s(p, r) + 123.0; };
  EXPECT_NEAR(reward_loss(s, pairs), reward_loss(shifted, pairs), 1e-12);
  EXPECT_NEAR(reward_loss(s, pairs), reward_loss(model, f, pairs), 1e-12);
}

TEST(RewardLoss, EmptyBatchRejected) {
  EXPECT_THROW(reward_loss(RewardModel::linear(4), std::span<const FeaturizedPair>{}), InvalidArgument);
}

TEST(RewardLoss, MatchesDirectSum) {
  std::mt19937_64 rng(9);
  std::vector<FeaturizedPair> batch;
  for (int i = 0; i < 7; ++i) batch.push_back({random_vec(rng, 5, 0, 2), random_vec(rng, 5, 0, 2)});
  RewardModel m = RewardModel::linear(5);
  m.params = random_vec(rng, 5, -1, 1);
  long double want = 0;
  for (const auto& p : batch) {
    long double d = 0;
    for (int k = 0; k < 5; ++k) d += m.params[k] * (p.winner[k] - p.loser[k]);
    want -= std::log(oracle::sigmoid(d));
  }
  want /= batch.size();
  EXPECT_NEAR(reward_loss(m, batch), static_cast<double>(want), 1e-12);
}

TEST(RewardGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t dim = 3 + rng() % 6;
    std::vector<FeaturizedPair> batch;
    for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i)
      batch.push_back({random_vec(rng, dim, 0, 2), random_vec(rng, dim, 0, 2)});
    RewardModel m = inst % 2 ? RewardModel::mlp(dim, 4, inst) : RewardModel::linear(dim);
    m.params = random_vec(rng, m.params.size(), -1, 1);
    const auto analytic = reward_grad(m, batch);
    const auto numeric = oracle::central_diff(
        [&](const std::vector<double>& p) {
          auto copy = m;
          copy.params = p;
          return reward_loss(copy, batch);
        },
        m.params);
    EXPECT_LT(oracle::rel_error(analytic, numeric), 1e-4) << "instance " << inst;
  }
}

TEST(RewardTraining, SeparableDataGeneralizes) {
  const auto train = synthetic::separable_pairs(200, 1, "t");
  const auto held = synthetic::separable_pairs(100, 2, "h");
  const Featurizer f;
  RlhfConfig cfg;
  cfg.steps = 200;
  cfg.learning_rate = 0.5;
  const auto res = train_reward_model(train, f, cfg);
  ASSERT_EQ(res.loss_history.size(), 200u);
  EXPECT_LT(res.loss_history.back(), res.loss_history.front());
  EXPECT_GE(pairwise_accuracy(res.model, f, held), 0.95);
}

TEST(RewardTraining, SymmetricDataStaysAtLn2) {
  const auto data = synthetic::symmetric_pairs(50, 5);
  const Featurizer f;
  RlhfConfig cfg;
  cfg.steps = 100;
  const auto res = train_reward_model(data, f, cfg);
  EXPECT_NEAR(reward_loss(res.model, f, data), std::log(2.0), 1e-6);
}

TEST(RewardTraining, BitReproducible) {
  const auto data = synthetic::separable_pairs(40, 8);
  const Featurizer f(64);
  RlhfConfig cfg;
  cfg.steps = 30;
  cfg.seed = 77;
  const auto a = train_reward_model(data, f, cfg, {ScorerKind::mlp, 6});
  const auto b = train_reward_model(data, f, cfg, {ScorerKind::mlp, 6});
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(reward_artifact(a.model, cfg, a.loss_history).dump(), reward_artifact(b.model, cfg, b.loss_history).dump());
}

TEST(RewardTraining, DivergenceReported) {
  // Contradictory preferences keep the loss bounded away from zero.
  const Prompt p{"p", "q"};
  const std::vector<PreferencePair> data = {
      {p, {"a", "p", "alpha alpha", Provenance::base}, {"b", "p", "beta", Provenance::base}},
      {p, {"c", "p", "beta beta", Provenance::base}, {"d", "p", "alpha", Provenance::base}},
      {p, {"e", "p", "beta", Provenance::base}, {"f", "p", "alpha alpha alpha", Provenance::base}}};
  const Featurizer f(16);
  RlhfConfig cfg;
  cfg.steps = 50;
  cfg.learning_rate = 1e308;
  try {
    train_reward_model(data, f, cfg);
    FAIL() << "expected divergence";
  } catch (const Diverged& e) {
    EXPECT_NE(std::string(e.what()).find("training diverged"), std::string::npos);
  }
}

TEST(RlhfConfig, Validation) {
  RlhfConfig c;
  c.beta = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.beta = 1;
  c.steps = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Kl, ClosedForms) {
  const std::vector<double> p = {0.1, 0.2, 0.7};
  EXPECT_EQ(kl_discrete(p, p), 0.0);
  EXPECT_NEAR(kl_discrete(std::vector<double>{1, 0, 0, 0}, std::vector<double>{0.25, 0.25, 0.25, 0.25}),
              std::log(4.0), 1e-15);
  EXPECT_NEAR(std::log(4.0), 1.386294, 1e-6);
}

TEST(Kl, MatchesDirectSum) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    const auto p = oracle::normalize_exp(random_vec(rng, 6, -3, 3));
    const auto q = oracle::normalize_exp(random_vec(rng, 6, -3, 3));
    const double kl = kl_discrete(p, q);
    EXPECT_NEAR(kl, static_cast<double>(oracle::kl(p, q)), 1e-12);
    EXPECT_GE(kl, 0.0);
  }
}

TEST(Kl, AbsoluteContinuity) {
  try {
    kl_discrete(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "absolute continuity violated");
  }
}

TEST(Gibbs, ThreeCandidateExample) {
  TabularPolicy base({entry("x", {0, 0, 0})});
  const auto star = gibbs_optimum(base, {{"x", {1, 0, 0}}}, 1.0);
  EXPECT_NEAR(star.at("x")[0], 0.576117, 1e-6);
  EXPECT_NEAR(star.at("x")[1], 0.211942, 1e-6);
  EXPECT_NEAR(star.at("x")[2], 0.211942, 1e-6);
  const auto o = oracle::gibbs({1.0 / 3, 1.0 / 3, 1.0 / 3}, {1, 0, 0}, 1.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(star.at("x")[k], o[k], 1e-15);
}

TEST(Gibbs, Limits) {
  TabularPolicy base({entry("x", {0.3, -1.0, 2.0, 0.0})});
  const auto b = base.at("x").probabilities();
  const auto near_base = gibbs_optimum(base, {{"x", {5, -3, 1, 2}}}, 1e6);
  EXPECT_LT(total_variation(near_base.at("x"), b), 1e-4);

  TabularPolicy uniform({entry("u", {0, 0, 0, 0})});
  const auto same = gibbs_optimum(uniform, {{"u", {2, 2, 2, 2}}}, 0.7);
  EXPECT_EQ(same.at("u"), uniform.at("u").probabilities());

  try {
    gibbs_optimum(base, {{"x", {1, 1, 1, 1}}}, 0.0);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "beta must be positive");
  }
}

TEST(Objective, ClosedForms) {
  TabularPolicy base({entry("a", {0.2, -0.4, 1.0}), entry("b", {0, 0})});
  const RewardTable r = {{"a", {1.0, -2.0, 0.5}}, {"b", {3.0, 1.0}}};
  const auto prompts = base.prompts();
  double expected = 0;
  for (const auto& [pid, rv] : r) {
    const auto pb = base.at(pid).probabilities();
    for (std::size_t k = 0; k < rv.size(); ++k) expected += pb[k] * rv[k];
  }
  EXPECT_NEAR(rlhf_objective(base, base, r, 2.0, prompts), expected / 2, 1e-12);

  TabularPolicy pi({entry("a", {3, 0, 0}), entry("b", {0, 1})});
  long double ev = 0;
  for (const auto& pid : {"a", "b"}) {
    const auto p = pi.at(pid).probabilities();
    for (std::size_t k = 0; k < p.size(); ++k) ev += p[k] * r.at(pid)[k];
  }
  EXPECT_NEAR(rlhf_objective(pi, base, r, 0.0, prompts), static_cast<double>(ev / 2), 1e-12);
}

TEST(Objective, BruteForceThreeCandidates) {
  TabularPolicy base({entry("x", {0, 0, 0})});
  TabularPolicy pi({entry("x", {1, 0, 0})});
  const auto p = oracle::normalize_exp({1, 0, 0});
  const auto want = oracle::objective(p, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {1, 0, 0}, 1.0);
  EXPECT_NEAR(rlhf_objective(pi, base, {{"x", {1, 0, 0}}}, 1.0, pi.prompts()), static_cast<double>(want), 1e-12);
}

TEST(Objective, SupportMismatch) {
  TabularPolicy base({entry("x", {0, 0, 0})});
  TabularPolicy pi({entry("x", {0, 0})});
  try {
    rlhf_objective(pi, base, {{"x", {1, 0}}}, 1.0, pi.prompts());
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "policy/base support mismatch");
  }
}

TEST(PolicyGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t prompts = 1 + rng() % 3;
    std::vector<PolicyEntry> pe, be;
    RewardTable r;
    for (std::size_t j = 0; j < prompts; ++j) {
      const std::size_t k = 2 + rng() % 7;
      const std::string id = "p" + std::to_string(j);
      pe.push_back(entry(id, random_vec(rng, k, -2, 2)));
      be.push_back(entry(id, random_vec(rng, k, -2, 2)));
      r[id] = random_vec(rng, k, -1, 1);
    }
    const double beta = std::vector<double>{0.1, 1.0, 10.0}[inst % 3];
    TabularPolicy pi(pe), base(be);
    const auto ps = pi.prompts();
    const auto grad = objective_gradient(pi, base, r, beta, ps);
    for (const auto& e : pe) {
      const auto numeric = oracle::central_diff(
          [&](const std::vector<double>& logits) {
            auto copy = pi;
            copy.at(e.prompt.id).logits = logits;
            return rlhf_objective(copy, base, r, beta, ps);
          },
          e.logits);
      EXPECT_LT(oracle::rel_error(grad.at(e.prompt.id), numeric), 1e-4) << "instance " << inst;
    }
  }
}

TEST(Optimize, ConvergesToGibbs) {
  TabularPolicy base({entry("x", {0.5, -0.2, 0.1, 1.0}), entry("y", {0, 0, 0})});
  TabularPolicy init({entry("x", {0, 0, 0, 0}), entry("y", {0, 0, 0})});
  const RewardTable r = {{"x", {1.0, 0.3, -0.5, 0.0}}, {"y", {2.0, 0.0, 1.0}}};
  RlhfConfig cfg;
  cfg.beta = 1.0;
  cfg.learning_rate = 1.0;
  cfg.steps = 5000;
  const auto out = optimize_policy(init, base, r, cfg);
  const auto star = gibbs_optimum(base, r, cfg.beta);
  for (const auto& e : out.entries()) {
    const auto p = e.probabilities();
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    EXPECT_LT(total_variation(p, star.at(e.prompt.id)), 1e-3);
  }
}

TEST(Optimize, HugeBetaStaysAtBase) {
  TabularPolicy base({entry("x", {0.5, -0.2, 0.1})});
  const RewardTable r = {{"x", {1.0, 0.3, -0.5}}};
  RlhfConfig cfg;
  cfg.beta = 1e6;
  cfg.learning_rate = 1e-6;
  cfg.steps = 200;
  const auto out = optimize_policy(base, base, r, cfg);
  EXPECT_LT(total_variation(out.at("x").probabilities(), base.at("x").probabilities()), 1e-3);
}

TEST(Optimize, Deterministic) {
  TabularPolicy base({entry("x", {0.5, -0.2, 0.1})});
  TabularPolicy init({entry("x", {0, 0, 0})});
  const RewardTable r = {{"x", {1.0, 0.3, -0.5}}};
  RlhfConfig cfg;
  cfg.seed = 7;
  const auto a = optimize_policy(init, base, r, cfg);
  const auto b = optimize_policy(init, base, r, cfg);
  EXPECT_EQ(a.at("x").logits, b.at("x").logits);
}

TEST(Policy, ArgmaxTiesPickLowestIndex) {
  EXPECT_EQ(entry("x", {1, 3, 3}).argmax(), 1u);
  EXPECT_EQ(entry("x", {0, 0}).argmax(), 0u);
}

TEST(Io, RoundTrips) {
  RlhfConfig cfg;
  cfg.beta = 0.5;
  cfg.steps = 3;
  cfg.seed = 99;
  const auto back = config_from_json(to_json(cfg));
  EXPECT_EQ(back.beta, cfg.beta);
  EXPECT_EQ(back.seed, cfg.seed);

  auto m = RewardModel::mlp(8, 3, 5, "hashed");
  const auto j = reward_artifact(m, cfg, std::vector<double>{0.7, 0.6});
  for (const char* key : {"params", "featurizer_id", "config", "loss_history"}) EXPECT_TRUE(j.contains(key)) << key;
  const auto m2 = reward_model_from_json(j);
  EXPECT_EQ(m2.params, m.params);
  EXPECT_EQ(m2.hidden, 3u);

  TabularPolicy p({entry("x", {0.25, -1})});
  EXPECT_EQ(policy_from_json(to_json(p)).at("x").logits, p.at("x").logits);
}

TEST(Featurizer, HashedBagOfWords) {
  const Featurizer f(32);
  const auto v = f(Prompt{"p", "ignored"}, ResponseText{"r", "p", "Kong kong TOWER", Provenance::base});
  EXPECT_EQ(v[Featurizer::bucket("kong", 32)], Featurizer::bucket("kong", 32) == Featurizer::bucket("tower", 32) ? 3.0 : 2.0);
  EXPECT_EQ(std::accumulate(v.begin(), v.end(), 0.0), 3.0);
  EXPECT_EQ(f.id(), "hashed-bow-fnv1a64:d=32");
}
