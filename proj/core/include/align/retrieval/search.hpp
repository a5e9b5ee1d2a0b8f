#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/retrieval/index.hpp"

namespace align::retrieval {

struct ScoredChunk {
  std::string doc_id;
  double score = 0.0;
  std::string snippet;
  Source source = Source::local;

  bool operator==(const ScoredChunk&) const = default;
};

void to_json(nlohmann::json& j, const ScoredChunk& c);
void from_json(const nlohmann::json& j, ScoredChunk& c);

struct RetrieveOptions {
  Bm25Params bm25;
  std::size_t snippet_chars = 200;
};

/// Text is cut into consecutive windows of `window` code points; returns the
/// first window holding an occurrence of any of `terms`, or the first window
/// when none is found.
std::string snippet_for(const Document& doc, std::span<const std::string> terms, std::size_t window);

/// Top-k documents by BM25, score descending, ties by ascending doc id.
/// Documents scoring zero are excluded.
std::vector<ScoredChunk> retrieve(const InvertedIndex& index, std::string_view query, Lang lang,
                                  std::size_t k, const RetrieveOptions& options = {});

/// Min-max normalizes each source to [0,1] (a single item, or all-equal
/// scores, map to 1.0), keeps the better copy of duplicated doc ids, then
/// sorts by score descending with local before external and ascending doc
/// id as tie-breaks. Truncates to k.
std::vector<ScoredChunk> merge_sources(std::span<const ScoredChunk> local,
                                       std::span<const ScoredChunk> external, std::size_t k);

}  // namespace align::retrieval
