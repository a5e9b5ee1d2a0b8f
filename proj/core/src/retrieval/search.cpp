#include "align/retrieval/search.hpp"

#include <algorithm>
#include <map>

#include "align/error.hpp"
#include "align/retrieval/tokenizer.hpp"
#include "align/text.hpp"

namespace align::retrieval {

void to_json(nlohmann::json& j, const ScoredChunk& c) {
  j = {{"doc_id", c.doc_id}, {"score", c.score}, {"snippet", c.snippet}, {"source", to_string(c.source)}};
}

void from_json(const nlohmann::json& j, ScoredChunk& c) {
  c.doc_id = j.at("doc_id").get<std::string>();
  c.score = j.at("score").get<double>();
  c.snippet = j.value("snippet", std::string{});
  c.source = source_from_string(j.value("source", "local"));
}

namespace {

bool bounded_match(const std::u32string& hay, std::size_t pos, std::size_t len) {
  // Han terms match anywhere; word terms need non-word neighbours.
  if (is_han(hay[pos])) return true;
  const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]) || is_han(hay[pos - 1]);
  const bool right_ok = pos + len >= hay.size() || !is_word_char(hay[pos + len]) || is_han(hay[pos + len]);
  return left_ok && right_ok;
}

}  // namespace

std::string snippet_for(const Document& doc, std::span<const std::string> terms, std::size_t window) {
  if (window == 0) throw InvalidArgument("snippet window must be positive");
  const auto original = nfc(doc.text);
  const auto hay = match_form(doc.text);
  std::size_t best = hay.size();
  for (const auto& t : terms) {
    const auto needle = text::utf8_decode(t);
    if (needle.empty()) continue;
    for (auto pos = hay.find(needle); pos != std::u32string::npos && pos < best; pos = hay.find(needle, pos + 1)) {
      if (bounded_match(hay, pos, needle.size())) {
        best = pos;
        break;
      }
    }
  }
  const std::size_t start = best == hay.size() ? 0 : (best / window) * window;
  return text::utf8_encode(std::u32string_view(original).substr(start, window));
}

std::vector<ScoredChunk> retrieve(const InvertedIndex& index, std::string_view query, Lang lang,
                                  std::size_t k, const RetrieveOptions& options) {
  if (k < 1) throw InvalidArgument("k must be at least 1");
  const auto terms = tokenize(query, lang);

  // Candidate documents are those sharing at least one term; scores come
  // from bm25_score so both paths agree bit-for-bit.
  std::map<std::uint32_t, bool> candidates;
  for (const auto& t : terms)
    if (const auto* p = index.postings(t))
      for (const auto& post : *p) candidates[post.doc] = true;

  std::vector<ScoredChunk> hits;
  for (const auto& [doc, _] : candidates) {
    const auto& d = index.document(doc);
    const double s = bm25_score(index, terms, d.id, options.bm25);
    if (s > 0.0) hits.push_back({d.id, s, {}, d.source});
  }
  std::sort(hits.begin(), hits.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (hits.size() > k) hits.resize(k);

  for (auto& h : hits) {
    const auto& d = index.document(*index.doc_number(h.doc_id));
    std::vector<std::string> matched;
    for (const auto& t : terms)
      if (index.term_freq(t, *index.doc_number(h.doc_id)) > 0) matched.push_back(t);
    h.snippet = snippet_for(d, matched, options.snippet_chars);
  }
  return hits;
}

namespace {

std::vector<ScoredChunk> normalize(std::span<const ScoredChunk> chunks, Source source) {
  std::vector<ScoredChunk> out(chunks.begin(), chunks.end());
  if (out.empty()) return out;
  double lo = out.front().score, hi = out.front().score;
  for (const auto& c : out) {
    lo = std::min(lo, c.score);
    hi = std::max(hi, c.score);
  }
  for (auto& c : out) {
    c.score = hi > lo ? (c.score - lo) / (hi - lo) : 1.0;
    c.source = source;
  }
  return out;
}

}  // namespace

std::vector<ScoredChunk> merge_sources(std::span<const ScoredChunk> local,
                                       std::span<const ScoredChunk> external, std::size_t k) {
  if (k < 1) throw InvalidArgument("k must be at least 1");
  auto merged = normalize(local, Source::local);
  auto ext = normalize(external, Source::external);
  merged.insert(merged.end(), ext.begin(), ext.end());

  auto before = [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.source != b.source) return a.source == Source::local;
    return a.doc_id < b.doc_id;
  };
  std::stable_sort(merged.begin(), merged.end(), before);

  std::vector<ScoredChunk> out;
  std::map<std::string, bool> seen;
  for (auto& c : merged) {
    // Sorted order means the first copy of an id is the better one.
    if (!seen.emplace(c.doc_id, true).second) continue;
    out.push_back(std::move(c));
    if (out.size() == k) break;
  }
  return out;
}

}  // namespace align::retrieval
