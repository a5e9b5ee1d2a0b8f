#include <gtest/gtest.h>

#include <cmath>

#include "align/error.hpp"
#include "align/llf/feedback.hpp"
#include "align/llf/sequence_model.hpp"
#include "support/synthetic.hpp"

using namespace align;
using namespace align::llf;

namespace {

FeedbackRecord record(const std::string& id, const std::string& answer, std::vector<std::string> fb) {
  Prompt p{id, "question " + id, Lang::english};
  return {p, {id + "/r", id, answer, Provenance::base}, std::move(fb)};
}

std::vector<std::string> letters(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(std::string(1, static_cast<char>('a' + i)));
  return v;
}

}  // namespace

TEST(Vocabulary, EndTokenFirstAndDeduplicated) {
  const std::vector<std::string> toks = {"b", "a", "b", std::string(kEndToken)};
  const Vocabulary v(toks);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.token(0), kEndToken);
  EXPECT_EQ(*v.find("b"), 1);
  EXPECT_FALSE(v.find("zzz").has_value());
}

TEST(FeedbackLoss, UniformModelIsLengthTimesLogV) {
  const auto toks = letters(9);
  const FeedbackModel m{SequenceModel::uniform(Vocabulary(toks))};
  ASSERT_EQ(m.sequence.vocab().size(), 10u);
  const std::vector<FeedbackRecord> data = {record("x", "some answer", {"a", "b", "c"})};
  EXPECT_NEAR(feedback_loss(m, data), 3 * std::log(10.0), 1e-9);
  EXPECT_NEAR(feedback_loss(m, data), 6.907755, 1e-6);

  const std::vector<FeedbackRecord> mixed = {record("x", "a1", {"a", "b", "c"}), record("y", "a2", {"d"})};
  EXPECT_NEAR(feedback_loss(m, mixed), 2 * std::log(10.0), 1e-9);
}

TEST(FeedbackLoss, PointMassIsZero) {
  const auto rec = record("x", "answer", {"too", "vague"});
  SequenceModel seq(Vocabulary(rec.feedback), 0.1, 8);
  const auto ctx = feedback_context(rec.prompt, rec.response);
  const int too = *seq.vocab().find("too");
  const int vague = *seq.vocab().find("vague");
  std::vector<double> p(seq.vocab().size(), 0.0);
  p[too] = 1;
  seq.set_distribution(ctx, SequenceModel::kBegin, p);
  std::fill(p.begin(), p.end(), 0.0);
  p[vague] = 1;
  seq.set_distribution(ctx, too, p);
  const FeedbackModel m{seq};
  const std::vector<FeedbackRecord> data = {rec};
  EXPECT_EQ(feedback_loss(m, data), 0.0);
  EXPECT_EQ(critique(m, rec.prompt, rec.response).front(), "too");
}

TEST(FeedbackLoss, TrainedModelMatchesHandCount) {
  // One record with distinct tokens: each (context, prev) cell holds a single
  // observation, so every step has probability (1 + a) / (1 + a V).
  const auto rec = record("x", "answer", {"cite", "your", "sources"});
  const std::vector<FeedbackRecord> data = {rec};
  for (double alpha : {0.0, 0.1, 0.5, 2.0}) {
    FeedbackTrainConfig cfg;
    cfg.alpha = alpha;
    const auto m = train_feedback_model(data, cfg);
    const double v = 4;
    EXPECT_NEAR(feedback_loss(m, data), -3 * std::log((1 + alpha) / (1 + alpha * v)), 1e-12) << alpha;
  }
}

TEST(FeedbackLoss, HugeSmoothingApproachesUniform) {
  const std::vector<FeedbackRecord> data = {record("x", "r", {"a", "b"}), record("y", "s", {"b", "c", "a"})};
  FeedbackTrainConfig cfg;
  cfg.alpha = 1e9;
  const auto m = train_feedback_model(data, cfg);
  EXPECT_NEAR(feedback_loss(m, data), 2.5 * std::log(4.0), 1e-6);
}

TEST(FeedbackLoss, UnknownTokenRejected) {
  const FeedbackModel m{SequenceModel::uniform(Vocabulary(letters(3)))};
  const std::vector<FeedbackRecord> data = {record("x", "r", {"a", "zz"})};
  try {
    feedback_loss(m, data);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "unknown feedback token: zz");
  }
}

TEST(FeedbackModel, GreedyCritiqueReproducesTraining) {
  const auto rec = record("x", "the answer", {"add", "a", "citation"});
  const std::vector<FeedbackRecord> data = {rec};
  const auto m = train_feedback_model(data);
  EXPECT_EQ(critique(m, rec.prompt, rec.response), rec.feedback);
  EXPECT_EQ(critique(m, rec.prompt, rec.response, 5), critique(m, rec.prompt, rec.response, 5));
  EXPECT_EQ(feedback_model_from_json(to_json(m)), m);
}

TEST(SequenceModel, DistributionsNormalized) {
  const std::vector<FeedbackRecord> data = {record("x", "r", {"a", "b"}), record("y", "s", {"b", "a", "a"})};
  const auto m = train_feedback_model(data);
  const auto ctx = feedback_context(data[0].prompt, data[0].response);
  for (int prev = SequenceModel::kBegin; prev < static_cast<int>(m.sequence.vocab().size()); ++prev) {
    const auto d = m.sequence.distribution(ctx, prev);
    double s = 0;
    for (double x : d) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_NEAR(m.sequence.distribution(12345, SequenceModel::kBegin)[0] + 0, m.sequence.distribution(999, SequenceModel::kBegin)[0],
              0.0);
}

namespace {

// Replaces the first flaw word with a quality word.
ResponseText fix_one(const Prompt& p, const ResponseText& r, const std::vector<std::string>&) {
  auto t = r.text;
  for (const auto& bad : synthetic::kBad) {
    const auto pos = t.find(bad);
    if (pos != std::string::npos) {
      t.replace(pos, bad.size(), "polite");
      break;
    }
  }
  return {r.id + "+", p.id, t, Provenance::refined};
}

}  // namespace

TEST(SelfImprove, EmitsPairsOnlyOnStrictImprovement) {
  const Prompt p{"q1", "say something", Lang::english};
  const Responder responder = [](const Prompt& x) { return ResponseText{"r0", x.id, "rude rude", Provenance::base}; };
  const FeedbackModel fm{SequenceModel::uniform(Vocabulary(letters(2)), 2)};
  const auto res = self_improve(p, responder, fm, fix_one, synthetic::value_judge, 3);
  ASSERT_EQ(res.outcomes.size(), 3u);
  ASSERT_EQ(res.pairs.size(), 2u);
  EXPECT_EQ(res.pairs[0].winner.text, "polite rude");
  EXPECT_EQ(res.pairs[0].loser.text, "rude rude");
  EXPECT_EQ(res.pairs[1].winner.text, "polite polite");
  EXPECT_EQ(res.pairs[1].loser.text, "polite rude");
  EXPECT_TRUE(res.outcomes[0].accepted);
  EXPECT_DOUBLE_EQ(res.outcomes[0].judge_delta, 2.0);
  EXPECT_FALSE(res.outcomes[2].accepted);
  for (const auto& pair : res.pairs) EXPECT_GT(synthetic::value_judge(p, pair.winner), synthetic::value_judge(p, pair.loser));
}

TEST(SelfImprove, ConstantJudgeEmitsNothing) {
  const Prompt p{"q1", "say something", Lang::english};
  const Responder responder = [](const Prompt& x) { return ResponseText{"r0", x.id, "rude", Provenance::base}; };
  const FeedbackModel fm{SequenceModel::uniform(Vocabulary(letters(2)), 2)};
  const auto res = self_improve(p, responder, fm, fix_one, [](const Prompt&, const ResponseText&) { return 1.0; }, 4);
  EXPECT_TRUE(res.pairs.empty());
  EXPECT_EQ(res.outcomes.size(), 4u);
}

TEST(SelfImprove, BackendFailureNamesIteration) {
  const Prompt p{"q1", "say something", Lang::english};
  const Responder responder = [](const Prompt& x) { return ResponseText{"r0", x.id, "rude rude", Provenance::base}; };
  int calls = 0;
  const Refiner flaky = [&](const Prompt& x, const ResponseText& r, const std::vector<std::string>& f) {
    if (++calls == 2) throw BackendError("connection refused");
    return fix_one(x, r, f);
  };
  const FeedbackModel fm{SequenceModel::uniform(Vocabulary(letters(2)), 2)};
  try {
    self_improve(p, responder, fm, flaky, synthetic::value_judge, 3);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_STREQ(e.what(), "backend unavailable at iteration 1: connection refused");
  }
  EXPECT_THROW(self_improve(p, responder, fm, fix_one, synthetic::value_judge, 0), InvalidArgument);
}
