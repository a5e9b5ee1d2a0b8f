#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "align/llf/sequence_model.hpp"
#include "align/types.hpp"

namespace align::llf {

/// (x_i, y_i, c_i): a prompt, a response and the critique tokens for it.
struct FeedbackRecord {
  Prompt prompt;
  ResponseText response;
  std::vector<std::string> feedback;
};

/// P_Phi(c | x, y) as a context-hashed bigram model; the context is
/// hash(x.text, y.text).
struct FeedbackModel {
  SequenceModel sequence;

  bool operator==(const FeedbackModel&) const = default;
};

std::uint64_t feedback_context(const Prompt& prompt, const ResponseText& response);

/// L_Phi = -mean over records of sum_t log P(c_t | x, y, c_{t-1}).
/// Throws InvalidArgument("unknown feedback token: ...") for tokens outside
/// the model vocabulary.
double feedback_loss(const FeedbackModel& model, std::span<const FeedbackRecord> dataset);

struct FeedbackTrainConfig {
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::size_t max_length = 32;
};

/// Smoothed maximum-likelihood counts. The vocabulary is the sorted set of
/// feedback tokens plus the end token.
FeedbackModel train_feedback_model(std::span<const FeedbackRecord> dataset,
                                   const FeedbackTrainConfig& config = {});

/// Greedy when `seed` is empty, seeded sampling otherwise.
std::vector<std::string> critique(const FeedbackModel& model, const Prompt& prompt,
                                  const ResponseText& response,
                                  std::optional<std::uint64_t> seed = std::nullopt);

struct RefinementOutcome {
  ResponseText original;
  std::vector<std::string> feedback;
  ResponseText refined;
  bool accepted = false;
  double judge_delta = 0.0;
};

using Responder = std::function<ResponseText(const Prompt&)>;
using Refiner = std::function<ResponseText(const Prompt&, const ResponseText&,
                                           const std::vector<std::string>&)>;
using JudgeFn = std::function<double(const Prompt&, const ResponseText&)>;

struct SelfImproveResult {
  std::vector<PreferencePair> pairs;
  std::vector<RefinementOutcome> outcomes;
};

/// generate -> critique -> refine, max_iters times. A pair (refined over
/// current) is emitted only on strict judge improvement, and the refined
/// response becomes the next iteration's starting point. Backend exceptions
/// are rethrown as BackendError("backend unavailable at iteration k: ...").
SelfImproveResult self_improve(const Prompt& prompt, const Responder& responder,
                               const FeedbackModel& feedback_model, const Refiner& refiner,
                               const JudgeFn& judge, int max_iters,
                               std::optional<std::uint64_t> critique_seed = std::nullopt);

nlohmann::json to_json(const FeedbackModel& model);
FeedbackModel feedback_model_from_json(const nlohmann::json& j);

/// JSON-lines rows {prompt, response, feedback: [tokens]}.
std::vector<FeedbackRecord> load_feedback(const std::string& path);

}  // namespace align::llf
