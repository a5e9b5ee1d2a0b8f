#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/types.hpp"

namespace align::retrieval {

enum class Source { local, external };

std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct Document {
  std::string id;
  std::string title;
  std::string text;
  Lang lang = Lang::unknown;
  Source source = Source::local;
  std::map<std::string, std::string> metadata;
};

void to_json(nlohmann::json& j, const Document& d);
void from_json(const nlohmann::json& j, Document& d);

/// Corpus JSON-lines: {id, title, text, lang, metadata[, source]}.
std::vector<Document> load_corpus(const std::filesystem::path& path);
std::vector<Document> parse_corpus(std::string_view jsonl);

struct Posting {
  std::uint32_t doc;  // dense document number; numbering follows ascending doc id
  std::uint32_t tf;

  bool operator==(const Posting&) const = default;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Immutable term -> postings index with per-document token counts.
class InvertedIndex {
public:
  static constexpr int kFormatVersion = 1;

  InvertedIndex() = default;

  /// Throws InvalidArgument("duplicate document id") on repeated ids and on
  /// empty document text.
  static InvertedIndex build(std::vector<Document> docs);

  std::size_t doc_count() const noexcept { return docs_.size(); }
  double avg_len() const noexcept { return avg_len_; }

  /// nullptr when the term does not occur.
  const std::vector<Posting>* postings(const std::string& term) const;
  std::size_t doc_freq(const std::string& term) const;

  std::optional<std::uint32_t> doc_number(const std::string& doc_id) const;
  const Document& document(std::uint32_t doc) const { return docs_.at(doc); }
  std::uint32_t doc_len(std::uint32_t doc) const { return doc_len_.at(doc); }
  const std::vector<Document>& documents() const noexcept { return docs_; }
  const std::map<std::string, std::vector<Posting>>& all_postings() const noexcept { return postings_; }

  /// Term frequency of `term` in `doc` (0 when absent).
  std::uint32_t term_freq(const std::string& term, std::uint32_t doc) const;

  nlohmann::json to_json() const;
  static InvertedIndex from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  bool operator==(const InvertedIndex&) const = default;

private:
  std::vector<Document> docs_;
  std::vector<std::uint32_t> doc_len_;
  std::map<std::string, std::uint32_t> doc_numbers_;
  std::map<std::string, std::vector<Posting>> postings_;
  double avg_len_ = 0.0;
};

bool operator==(const Document& a, const Document& b);

/// ln(1 + (N - n + 0.5) / (n + 0.5)).
double bm25_idf(std::size_t doc_count, std::size_t doc_freq);

/// idf * tf (k1 + 1) / (tf + k1 (1 - b + b dl / avg_len)).
double bm25_term_weight(double tf, double doc_len, double avg_len, double idf, const Bm25Params& params);

/// Sum of per-term weights over the query multiset. Throws
/// NotFound("document not in index") for unknown ids.
double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms,
                  const std::string& doc_id, const Bm25Params& params = {});

}  // namespace align::retrieval
