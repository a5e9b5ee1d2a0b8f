#include "align/retrieval/index.hpp"

#include <algorithm>
#include <cmath>

#include "align/error.hpp"
#include "align/jsonl.hpp"
#include "align/retrieval/tokenizer.hpp"

namespace align::retrieval {

std::string_view to_string(Source s) { return s == Source::local ? "local" : "external"; }

Source source_from_string(std::string_view s) {
  if (s == "local") return Source::local;
  if (s == "external") return Source::external;
  throw InvalidArgument("unknown source: " + std::string(s));
}

bool operator==(const Document& a, const Document& b) {
  return a.id == b.id && a.title == b.title && a.text == b.text && a.lang == b.lang && a.source == b.source &&
         a.metadata == b.metadata;
}

void to_json(nlohmann::json& j, const Document& d) {
  j = {{"id", d.id},     {"title", d.title},           {"text", d.text},
       {"lang", to_string(d.lang)}, {"source", to_string(d.source)}, {"metadata", d.metadata}};
}

void from_json(const nlohmann::json& j, Document& d) {
  d.id = j.at("id").get<std::string>();
  d.title = j.value("title", std::string{});
  d.text = j.at("text").get<std::string>();
  d.lang = lang_from_string(j.value("lang", "unknown"));
  d.source = source_from_string(j.value("source", "local"));
  d.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

std::vector<Document> parse_corpus(std::string_view content) {
  std::vector<Document> docs;
  for (const auto& row : jsonl::parse(content)) docs.push_back(row.get<Document>());
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for (const auto& row : jsonl::read_file(path)) docs.push_back(row.get<Document>());
  return docs;
}

InvertedIndex InvertedIndex::build(std::vector<Document> docs) {
  std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].text.empty()) throw InvalidArgument("empty document text: " + docs[i].id);
    if (i > 0 && docs[i].id == docs[i - 1].id) throw InvalidArgument("duplicate document id: " + docs[i].id);
  }

  InvertedIndex idx;
  idx.docs_ = std::move(docs);
  idx.doc_len_.resize(idx.docs_.size());
  std::uint64_t total_len = 0;
  for (std::uint32_t d = 0; d < idx.docs_.size(); ++d) {
    const auto& doc = idx.docs_[d];
    idx.doc_numbers_.emplace(doc.id, d);
    std::map<std::string, std::uint32_t> tf;
    const auto toks = tokenize(doc.text, doc.lang);
    for (const auto& t : toks) ++tf[t];
    idx.doc_len_[d] = static_cast<std::uint32_t>(toks.size());
    total_len += toks.size();
    // Documents are visited in ascending number order, so each postings
    // list stays sorted.
    for (const auto& [term, count] : tf) idx.postings_[term].push_back({d, count});
  }
  idx.avg_len_ = idx.docs_.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(idx.docs_.size());
  return idx;
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

std::size_t InvertedIndex::doc_freq(const std::string& term) const {
  const auto* p = postings(term);
  return p ? p->size() : 0;
}

std::optional<std::uint32_t> InvertedIndex::doc_number(const std::string& doc_id) const {
  auto it = doc_numbers_.find(doc_id);
  if (it == doc_numbers_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t InvertedIndex::term_freq(const std::string& term, std::uint32_t doc) const {
  const auto* p = postings(term);
  if (!p) return 0;
  auto it = std::lower_bound(p->begin(), p->end(), doc,
                             [](const Posting& post, std::uint32_t d) { return post.doc < d; });
  return (it != p->end() && it->doc == doc) ? it->tf : 0;
}

nlohmann::json InvertedIndex::to_json() const {
  nlohmann::json postings = nlohmann::json::object();
  for (const auto& [term, list] : postings_) {
    auto& arr = postings[term] = nlohmann::json::array();
    for (const auto& p : list) arr.push_back({p.doc, p.tf});
  }
  return {{"format", "align-index"},   {"format_version", kFormatVersion}, {"doc_count", docs_.size()},
          {"avg_len", avg_len_},       {"documents", docs_},               {"doc_len", doc_len_},
          {"postings", postings}};
}

InvertedIndex InvertedIndex::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "align-index") throw ParseError("not an index file");
  const int version = j.value("format_version", 0);
  if (version != kFormatVersion)
    throw ParseError("unsupported index format version " + std::to_string(version));
  InvertedIndex idx;
  idx.docs_ = j.at("documents").get<std::vector<Document>>();
  idx.doc_len_ = j.at("doc_len").get<std::vector<std::uint32_t>>();
  idx.avg_len_ = j.at("avg_len").get<double>();
  if (idx.doc_len_.size() != idx.docs_.size()) throw ParseError("doc_len size mismatch");
  for (std::uint32_t d = 0; d < idx.docs_.size(); ++d) {
    if (d > 0 && !(idx.docs_[d - 1].id < idx.docs_[d].id)) throw ParseError("documents not sorted by id");
    idx.doc_numbers_.emplace(idx.docs_[d].id, d);
  }
  for (const auto& [term, arr] : j.at("postings").items()) {
    auto& list = idx.postings_[term];
    for (const auto& p : arr) {
      Posting post{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
      if (post.doc >= idx.docs_.size()) throw ParseError("posting references unknown document");
      if (!list.empty() && list.back().doc >= post.doc) throw ParseError("postings not sorted");
      list.push_back(post);
    }
  }
  return idx;
}

void InvertedIndex::save(const std::filesystem::path& path) const { jsonl::write_text(path, to_json().dump() + "\n"); }

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) { return from_json(jsonl::read_json(path)); }

double bm25_idf(std::size_t doc_count, std::size_t doc_freq) {
  const double n = static_cast<double>(doc_freq);
  return std::log(1.0 + (static_cast<double>(doc_count) - n + 0.5) / (n + 0.5));
}

double bm25_term_weight(double tf, double doc_len, double avg_len, double idf, const Bm25Params& params) {
  if (tf <= 0.0) return 0.0;
  const double norm = avg_len > 0.0 ? doc_len / avg_len : 0.0;
  return idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
}

double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms,
                  const std::string& doc_id, const Bm25Params& params) {
  const auto doc = index.doc_number(doc_id);
  if (!doc) throw NotFound("document not in index: " + doc_id);
  double score = 0.0;
  for (const auto& t : query_terms) {
    const auto tf = index.term_freq(t, *doc);
    if (tf == 0) continue;
    score += bm25_term_weight(tf, index.doc_len(*doc), index.avg_len(), bm25_idf(index.doc_count(), index.doc_freq(t)),
                              params);
  }
  return score;
}

}  // namespace align::retrieval
