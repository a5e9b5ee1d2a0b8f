#include "align/retrieval/external.hpp"

#include "align/error.hpp"
#include "common/http_client.hpp"

namespace align::retrieval {

FixtureSearch::FixtureSearch(std::vector<Document> docs, RetrieveOptions options)
    : index_(InvertedIndex::build(std::move(docs))), options_(options) {}

std::vector<ScoredChunk> FixtureSearch::search(const std::string& query, Lang lang, std::size_t k) const {
  auto hits = retrieve(index_, query, lang, k, options_);
  for (auto& h : hits) h.source = Source::external;
  return hits;
}

HttpSearch::HttpSearch(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {}

std::vector<ScoredChunk> HttpSearch::search(const std::string& query, Lang lang, std::size_t k) const {
  const auto body = http::post_json(url_, {{"query", query}, {"lang", to_string(lang)}, {"k", k}}, timeout_seconds_);
  std::vector<ScoredChunk> out;
  try {
    for (const auto& row : body.at("results")) {
      auto c = row.get<ScoredChunk>();
      c.source = Source::external;
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("malformed search response: " + std::string(e.what()));
  }
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace align::retrieval
