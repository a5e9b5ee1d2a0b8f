#include "align/llf/feedback.hpp"

#include <algorithm>
#include <set>

#include "align/error.hpp"
#include "align/jsonl.hpp"
#include "align/text.hpp"

namespace align::llf {

std::uint64_t feedback_context(const Prompt& prompt, const ResponseText& response) {
  return text::hash_fields({prompt.text, response.text});
}

namespace {

void validate_record(const FeedbackRecord& r) {
  if (r.feedback.empty()) throw InvalidArgument("empty feedback for prompt " + r.prompt.id);
}

std::vector<int> encode(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto id = vocab.find(t);
    if (!id) throw InvalidArgument("unknown feedback token: " + t);
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace

double feedback_loss(const FeedbackModel& model, std::span<const FeedbackRecord> dataset) {
  if (dataset.empty()) throw InvalidArgument("empty dataset");
  double total = 0.0;
  for (const auto& r : dataset) {
    validate_record(r);
    const auto ids = encode(model.sequence.vocab(), r.feedback);
    total -= model.sequence.sequence_log_prob(feedback_context(r.prompt, r.response), ids);
  }
  return total / static_cast<double>(dataset.size());
}

FeedbackModel train_feedback_model(std::span<const FeedbackRecord> dataset,
                                   const FeedbackTrainConfig& config) {
  if (dataset.empty()) throw InvalidArgument("empty dataset");
  std::set<std::string> tokens;
  for (const auto& r : dataset) {
    validate_record(r);
    tokens.insert(r.feedback.begin(), r.feedback.end());
  }
  tokens.erase(std::string(kEndToken));
  std::vector<std::string> sorted(tokens.begin(), tokens.end());
  FeedbackModel model{SequenceModel(Vocabulary(sorted), config.alpha, config.max_length)};
  for (const auto& r : dataset)
    model.sequence.count({feedback_context(r.prompt, r.response), encode(model.sequence.vocab(), r.feedback)});
  return model;
}

std::vector<std::string> critique(const FeedbackModel& model, const Prompt& prompt,
                                  const ResponseText& response, std::optional<std::uint64_t> seed) {
  std::vector<std::string> out;
  for (int id : model.sequence.decode(feedback_context(prompt, response), seed))
    out.push_back(model.sequence.vocab().token(id));
  return out;
}

SelfImproveResult self_improve(const Prompt& prompt, const Responder& responder,
                               const FeedbackModel& feedback_model, const Refiner& refiner,
                               const JudgeFn& judge, int max_iters,
                               std::optional<std::uint64_t> critique_seed) {
  if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  SelfImproveResult result;

  auto guarded = [](int iteration, auto&& fn) {
    try {
      return fn();
    } catch (const BackendError& e) {
      throw BackendError("backend unavailable at iteration " + std::to_string(iteration) + ": " + e.what());
    }
  };

  ResponseText current = guarded(0, [&] { return responder(prompt); });
  double current_score = guarded(0, [&] { return judge(prompt, current); });

  for (int it = 0; it < max_iters; ++it) {
    RefinementOutcome outcome;
    outcome.original = current;
    const auto seed = critique_seed ? std::optional<std::uint64_t>(*critique_seed + static_cast<std::uint64_t>(it))
                                    : std::nullopt;
    outcome.feedback = critique(feedback_model, prompt, current, seed);
    outcome.refined = guarded(it, [&] { return refiner(prompt, current, outcome.feedback); });
    outcome.refined.provenance = Provenance::refined;
    if (outcome.refined.prompt_id.empty()) outcome.refined.prompt_id = prompt.id;
    const double refined_score = guarded(it, [&] { return judge(prompt, outcome.refined); });
    outcome.judge_delta = refined_score - current_score;
    outcome.accepted = outcome.judge_delta > 0.0;
    // A judge that scores identical text differently cannot yield a valid pair.
    if (outcome.accepted && outcome.refined.text != current.text) {
      result.pairs.push_back({prompt, outcome.refined, current});
      current = outcome.refined;
      current_score = refined_score;
    }
    result.outcomes.push_back(std::move(outcome));
  }
  return result;
}

nlohmann::json to_json(const FeedbackModel& model) {
  return {{"kind", "feedback-model"}, {"sequence", model.sequence.to_json()}};
}

FeedbackModel feedback_model_from_json(const nlohmann::json& j) {
  return {SequenceModel::from_json(j.at("sequence"))};
}

std::vector<FeedbackRecord> load_feedback(const std::string& path) {
  std::vector<FeedbackRecord> out;
  std::size_t n = 0;
  for (const auto& row : jsonl::read_file(path)) {
    FeedbackRecord r;
    const auto id = "fb-" + std::to_string(n++);
    r.prompt = {id, row.at("prompt").get<std::string>(), lang_from_string(row.value("lang", "unknown"))};
    r.response = {id + "/r", id, row.at("response").get<std::string>(), Provenance::base};
    r.feedback = row.at("feedback").get<std::vector<std::string>>();
    if (r.feedback.empty()) throw ParseError("empty feedback on line " + std::to_string(n));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace align::llf
