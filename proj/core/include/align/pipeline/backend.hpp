#pragma once

#include <memory>
#include <string>
#include <vector>

#include "align/pipeline/tools.hpp"
#include "align/retrieval/search.hpp"
#include "align/types.hpp"

namespace align::pipeline {

struct GenerationRequest {
  std::string system_instructions;
  std::vector<retrieval::ScoredChunk> chunks;
  std::vector<ToolResult> tool_results;
  std::string memory;
  std::string query;
  Lang lang = Lang::unknown;
};

class GenerationBackend {
public:
  virtual ~GenerationBackend() = default;
  virtual std::string id() const = 0;
  /// Throws BackendError on failure.
  virtual std::string generate(const GenerationRequest& request) const = 0;
};

/// Deterministic templated answer that quotes chunk snippets verbatim in the
/// order given.
class MockBackend final : public GenerationBackend {
public:
  std::string id() const override { return "mock"; }
  std::string generate(const GenerationRequest& request) const override;
};

/// POST <url> {system, chunks, tool_results, memory, query, lang} -> {text}.
class HttpBackend final : public GenerationBackend {
public:
  explicit HttpBackend(std::string url, int timeout_seconds = 60);
  std::string id() const override { return "http:" + url_; }
  std::string generate(const GenerationRequest& request) const override;

private:
  std::string url_;
  int timeout_;
};

}  // namespace align::pipeline
