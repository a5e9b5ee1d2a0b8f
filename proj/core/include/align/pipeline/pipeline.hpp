#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/error.hpp"
#include "align/pipeline/backend.hpp"
#include "align/pipeline/config.hpp"
#include "align/pipeline/memory.hpp"
#include "align/pipeline/query.hpp"
#include "align/pipeline/rules.hpp"
#include "align/pipeline/tools.hpp"
#include "align/retrieval/external.hpp"
#include "align/retrieval/index.hpp"

namespace align::pipeline {

struct Answer {
  std::string text;
  std::vector<std::string> citations;
  Lang lang = Lang::unknown;
  std::vector<ModerationVerdict> moderation_trail;
  std::string backend_id;
  std::optional<Intent> intent;  // absent when input moderation refused
};

nlohmann::json to_json(const Answer& a);

/// Failure inside one stage; the session is left untouched.
class PipelineError : public Error {
public:
  PipelineError(std::string stage, const std::string& cause)
      : Error("stage " + stage + " failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

/// Rewrites a flagged draft; receives (query, draft).
using Corrector = std::function<std::string(const std::string&, const std::string&)>;

/// Refuse match -> template text with citations cleared. Flag match with a
/// corrector -> corrected text checked once more; a flag or refusal on the
/// second pass yields the template. Appends a verdict per check.
Answer moderate_output(Answer draft, const std::string& query, const RuleSet& rules, const Corrector* corrector);

/// Shared, read-only resources for answering.
struct PipelineContext {
  std::shared_ptr<const retrieval::InvertedIndex> index;
  std::shared_ptr<const RuleSet> rules;
  std::shared_ptr<const GenerationBackend> backend;
  std::shared_ptr<const retrieval::ExternalSearch> external;  // may be null
  std::optional<Corrector> corrector;
  Lexicon lexicon = Lexicon::defaults();
  ToolPlanConfig tools;
  std::size_t top_k = 3;
  retrieval::RetrieveOptions retrieve;
};

/// Builds a context from a config: loads the index, rules, templates,
/// backend, external search and optional corrector.
PipelineContext make_context(const PipelineConfig& config);
/// Same, with a preloaded index and/or rule set (null ones are loaded).
PipelineContext make_context(const PipelineConfig& config, std::shared_ptr<const retrieval::InvertedIndex> index,
                             std::shared_ptr<const RuleSet> rules);

inline constexpr std::string_view kBaseInstructions =
    "Answer using the supplied sources and cite them. Reply in the language of the question.";
inline constexpr std::string_view kSafetyInstructions =
    "Safety: the question touches a sensitive topic. Stay factual, neutral and lawful.";

/// Runs every stage on a copy of the session and commits the new turn only
/// on success.
Answer run_pipeline(Session& session, const std::string& query, const PipelineContext& ctx);

/// Sessions by id with per-session exclusive access.
class SessionStore {
public:
  explicit SessionStore(std::size_t memory_budget = 8) : budget_(memory_budget) {}

  Answer answer(const std::string& session_id, const std::string& query, const PipelineContext& ctx);
  std::optional<Session> snapshot(const std::string& session_id) const;

private:
  struct Entry {
    std::mutex mutex;
    Session session;
  };
  std::shared_ptr<Entry> entry(const std::string& id);

  std::size_t budget_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace align::pipeline
