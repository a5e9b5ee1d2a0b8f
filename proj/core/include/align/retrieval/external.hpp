#pragma once

#include <memory>
#include <string>
#include <vector>

#include "align/retrieval/index.hpp"
#include "align/retrieval/search.hpp"

namespace align::retrieval {

/// Web/database search behind a uniform contract. Results carry
/// Source::external.
class ExternalSearch {
public:
  virtual ~ExternalSearch() = default;
  virtual std::string id() const = 0;
  virtual std::vector<ScoredChunk> search(const std::string& query, Lang lang, std::size_t k) const = 0;
};

/// Deterministic stand-in: BM25 over a fixture corpus.
class FixtureSearch final : public ExternalSearch {
public:
  explicit FixtureSearch(std::vector<Document> docs, RetrieveOptions options = {});
  std::string id() const override { return "fixture"; }
  std::vector<ScoredChunk> search(const std::string& query, Lang lang, std::size_t k) const override;

private:
  InvertedIndex index_;
  RetrieveOptions options_;
};

/// POST <url> {"query", "lang", "k"} -> {"results": [{doc_id, score, snippet}]}.
class HttpSearch final : public ExternalSearch {
public:
  explicit HttpSearch(std::string url, int timeout_seconds = 10);
  std::string id() const override { return "http:" + url_; }
  std::vector<ScoredChunk> search(const std::string& query, Lang lang, std::size_t k) const override;

private:
  std::string url_;
  int timeout_seconds_;
};

}  // namespace align::retrieval
