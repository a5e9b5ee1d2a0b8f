#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/llf/sequence_model.hpp"
#include "align/types.hpp"

namespace align::w2s {

enum class Topic { values, mathematics, code_reasoning, science_engineering, other };

std::string_view to_string(Topic t);
Topic topic_from_string(std::string_view s);

/// Question, original answer, annotator correction.
struct QACRecord {
  Prompt prompt;
  ResponseText original;
  ResponseText corrected;  // may equal the original (approved as-is)
  std::string annotator_id;
  Topic topic = Topic::other;
};

/// mu_psi(y_c | y_o, x): corrections are whitespace tokens generated by a
/// context-hashed bigram model with context hash(x.text, y_o.text).
struct CorrectionModel {
  llf::SequenceModel sequence;

  bool operator==(const CorrectionModel&) const = default;
};

std::uint64_t correction_context(const Prompt& prompt, const ResponseText& original);

/// -mean over records of log mu(y_c | y_o, x). Throws
/// InvalidArgument("unknown token: ...") for tokens outside the vocabulary.
double aligner_loss(const CorrectionModel& model, std::span<const QACRecord> dataset);

struct CorrectorConfig {
  double alpha = 0.1;
  std::size_t max_length = 64;
};

CorrectionModel train_corrector(std::span<const QACRecord> dataset, const CorrectorConfig& config = {});

/// Greedy decode conditioned on (x, y_o). Unseen contexts fall back to the
/// previous-token and unigram tables, so the output is still deterministic.
ResponseText correct(const CorrectionModel& model, const Prompt& prompt, const ResponseText& original);

nlohmann::json to_json(const CorrectionModel& model);
CorrectionModel corrector_from_json(const nlohmann::json& j);

/// JSON-lines {prompt, original, corrected, annotator_id, topic}. Rows with
/// an empty correction are rejected.
std::vector<QACRecord> load_qac(const std::string& path);
nlohmann::json qac_to_jsonl(const QACRecord& r);

}  // namespace align::w2s
