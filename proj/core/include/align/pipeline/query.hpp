#pragma once

#include <map>
#include <string>
#include <vector>

#include "align/pipeline/memory.hpp"
#include "align/pipeline/rules.hpp"
#include "align/types.hpp"

namespace align::pipeline {

enum class Intent { chitchat, factual, sensitive, tool_task, followup };

std::string_view to_string(Intent i);

/// Marker and verb lists driving intent classification and rewriting.
/// English entries match on word boundaries, case-insensitively; entries
/// containing Han characters match as substrings.
struct Lexicon {
  std::vector<std::string> anaphora;
  std::vector<std::string> followup_phrases;
  std::vector<std::string> interrogatives;
  std::vector<std::string> chitchat;
  std::vector<std::string> stopwords;
  std::vector<std::string> conjunctions;
  std::map<std::string, std::string> tool_verbs;  // verb -> tool name

  static const Lexicon& defaults();
};

struct EnhancedQuery {
  std::string original;
  std::string rewritten;
  std::vector<std::string> subqueries;  // at most kMaxSubqueries
  Lang lang = Lang::unknown;

  static constexpr std::size_t kMaxSubqueries = 4;
};

/// sensitive > followup > tool_task > factual > chitchat.
Intent classify_intent(std::string_view query, const Session& session, const RuleSet& rules,
                       const Lexicon& lexicon = Lexicon::defaults());

/// Content words of the most recent turn's query, in order, joined by a
/// space (Han runs kept whole).
std::string salient_terms(const Session& session, const Lexicon& lexicon = Lexicon::defaults());

EnhancedQuery enhance(std::string_view query, const Session& session, const Lexicon& lexicon = Lexicon::defaults());

/// Position-aware marker search used by the classifier and rewriter.
bool contains_marker(std::string_view text, std::string_view marker);

}  // namespace align::pipeline
